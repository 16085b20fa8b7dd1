#include "revi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "revi/rng.hpp"

namespace revi {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Value noise: a coarse random grid bilinearly upsampled to size x size.
std::vector<double> value_noise(SeedStream& rng, int grid, int size) {
  std::vector<double> coarse(static_cast<size_t>(grid) * grid);
  for (auto& v : coarse) v = rng.uniform(-1.0, 1.0);
  std::vector<double> out(static_cast<size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double fy = (y + 0.5) * grid / size - 0.5;
      double fx = (x + 0.5) * grid / size - 0.5;
      fy = std::clamp(fy, 0.0, grid - 1.0);
      fx = std::clamp(fx, 0.0, grid - 1.0);
      int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
      int y1 = std::min(y0 + 1, grid - 1), x1 = std::min(x0 + 1, grid - 1);
      double wy = fy - y0, wx = fx - x0;
      out[static_cast<size_t>(y) * size + x] =
          (1 - wy) * ((1 - wx) * coarse[static_cast<size_t>(y0) * grid + x0] +
                      wx * coarse[static_cast<size_t>(y0) * grid + x1]) +
          wy * ((1 - wx) * coarse[static_cast<size_t>(y1) * grid + x0] +
                wx * coarse[static_cast<size_t>(y1) * grid + x1]);
    }
  return out;
}

enum class ShapeType { ellipse, rect, triangle };

struct ShapeSpec {
  ShapeType type;
  double cx, cy;      // center, pixels
  double ax, ay;      // half extents, pixels
  double angle;       // radians
  double color[3];
};

bool inside_shape(const ShapeSpec& s, double x, double y) {
  double dx = x - s.cx, dy = y - s.cy;
  double c = std::cos(-s.angle), sn = std::sin(-s.angle);
  double rx = c * dx - sn * dy, ry = sn * dx + c * dy;
  switch (s.type) {
    case ShapeType::ellipse:
      return (rx * rx) / (s.ax * s.ax) + (ry * ry) / (s.ay * s.ay) <= 1.0;
    case ShapeType::rect:
      return std::fabs(rx) <= s.ax && std::fabs(ry) <= s.ay;
    case ShapeType::triangle: {
      // isoceles triangle pointing up, inscribed in the (ax, ay) box
      if (ry < -s.ay || ry > s.ay) return false;
      double t = (ry + s.ay) / (2.0 * s.ay);  // 0 at base, 1 at apex
      return std::fabs(rx) <= s.ax * (1.0 - t);
    }
  }
  return false;
}

std::vector<double> rasterize(const ShapeSpec& s, int size) {
  std::vector<double> mask(static_cast<size_t>(size) * size, 0.0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (inside_shape(s, x + 0.5, y + 0.5)) mask[static_cast<size_t>(y) * size + x] = 1.0;
  return mask;
}

double mask_fraction(const std::vector<double>& mask) {
  double acc = 0.0;
  for (double v : mask) acc += v;
  return acc / static_cast<double>(mask.size());
}

// Elliptical or rectangular paste region used by copy-move and splice.
struct Region {
  std::vector<double> mask;  // [H,W] at destination
  int src_x, src_y;          // top-left of the source window
  int dst_x, dst_y;
  int rw, rh;                // window extents
  bool ellipse;
};

Region sample_region(SeedStream& rng, int size) {
  Region r;
  r.ellipse = rng.uniform() < 0.5;
  // window size keeps the positive fraction inside [1.5%, 25%]
  double frac = rng.uniform(0.02, 0.22);
  double aspect = rng.uniform(0.6, 1.6);
  double area = frac * size * size / (r.ellipse ? kPi / 4.0 : 1.0);
  r.rw = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 6, size - 2);
  r.rh = std::clamp(static_cast<int>(std::lround(std::sqrt(area / aspect))), 6, size - 2);
  r.src_x = rng.uniform_int(0, size - r.rw);
  r.src_y = rng.uniform_int(0, size - r.rh);
  r.dst_x = rng.uniform_int(0, size - r.rw);
  r.dst_y = rng.uniform_int(0, size - r.rh);
  r.mask.assign(static_cast<size_t>(size) * size, 0.0);
  double cx = r.dst_x + r.rw / 2.0, cy = r.dst_y + r.rh / 2.0;
  for (int y = 0; y < r.rh; ++y)
    for (int x = 0; x < r.rw; ++x) {
      double px = r.dst_x + x + 0.5, py = r.dst_y + y + 0.5;
      bool in = true;
      if (r.ellipse) {
        double nx = (px - cx) / (r.rw / 2.0), ny = (py - cy) / (r.rh / 2.0);
        in = nx * nx + ny * ny <= 1.0;
      }
      if (in) r.mask[static_cast<size_t>(r.dst_y + y) * size + r.dst_x + x] = 1.0;
    }
  return r;
}

// Mean absolute difference between the incoming content and what it covers.
double paste_visibility(const std::vector<double>& dst_img,
                        const std::vector<double>& src_img, const Region& r, int size) {
  const size_t plane = static_cast<size_t>(size) * size;
  double acc = 0.0;
  int count = 0;
  for (int y = 0; y < r.rh; ++y)
    for (int x = 0; x < r.rw; ++x) {
      size_t di = static_cast<size_t>(r.dst_y + y) * size + r.dst_x + x;
      if (r.mask[di] == 0.0) continue;
      size_t si = static_cast<size_t>(r.src_y + y) * size + r.src_x + x;
      for (int c = 0; c < 3; ++c)
        acc += std::fabs(src_img[c * plane + si] - dst_img[c * plane + di]);
      ++count;
    }
  return count ? acc / (3.0 * count) : 0.0;
}

Manipulated paste_region(const std::vector<double>& dst_img,
                         const std::vector<double>& src_img, const Region& r, int size) {
  const size_t plane = static_cast<size_t>(size) * size;
  Manipulated out;
  out.image = dst_img;
  out.mask = r.mask;
  for (int y = 0; y < r.rh; ++y)
    for (int x = 0; x < r.rw; ++x) {
      size_t di = static_cast<size_t>(r.dst_y + y) * size + r.dst_x + x;
      if (r.mask[di] == 0.0) continue;
      size_t si = static_cast<size_t>(r.src_y + y) * size + r.src_x + x;
      for (int c = 0; c < 3; ++c) out.image[c * plane + di] = src_img[c * plane + si];
    }
  return out;
}

}  // namespace

const char* manip_kind_name(ManipKind k) {
  switch (k) {
    case ManipKind::authentic: return "authentic";
    case ManipKind::copy_move: return "copy_move";
    case ManipKind::splice: return "splice";
    case ManipKind::removal: return "removal";
    case ManipKind::proxy: return "proxy";
  }
  return "?";
}

ManipKind manip_kind_from(const std::string& name) {
  for (ManipKind k : {ManipKind::authentic, ManipKind::copy_move, ManipKind::splice,
                      ManipKind::removal, ManipKind::proxy})
    if (name == manip_kind_name(k)) return k;
  throw IoError("unknown manipulation kind '" + name + "'");
}

Scene gen_base_scene(uint64_t seed, int size) {
  SeedStream rng(seed);
  Scene scene;
  scene.size = size;
  const size_t plane = static_cast<size_t>(size) * size;
  scene.image.assign(3 * plane, 0.0);

  // gradient background between two colors along a random direction
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.15, 0.85);
    c1[c] = rng.uniform(0.15, 0.85);
  }
  double theta = rng.uniform(0.0, 2.0 * kPi);
  double dx = std::cos(theta), dy = std::sin(theta);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double t = 0.5 + 0.5 * (dx * (2.0 * x / size - 1.0) + dy * (2.0 * y / size - 1.0)) / 1.4142;
      for (int c = 0; c < 3; ++c)
        scene.image[c * plane + static_cast<size_t>(y) * size + x] =
            c0[c] + t * (c1[c] - c0[c]);
    }

  // two octaves of band-limited texture, shared across channels
  auto n1 = value_noise(rng, 6, size);
  auto n2 = value_noise(rng, 13, size);
  for (size_t i = 0; i < plane; ++i) {
    double n = 0.07 * n1[i] + 0.035 * n2[i];
    for (int c = 0; c < 3; ++c) scene.image[c * plane + i] += n;
  }

  // 1..3 filled shapes; each sized so its mask fraction sits in [1.5%, 25%]
  // and kept a few pixels clear of the others so removal has an unoccluded
  // target with an uncontaminated surround
  int nshapes = rng.uniform_int(1, 3);
  std::vector<double> occupied(plane, 0.0);
  for (int s = 0; s < nshapes; ++s) {
    ShapeSpec spec;
    std::vector<double> mask;
    for (int attempt = 0; attempt < 40; ++attempt) {
      spec.type = static_cast<ShapeType>(rng.uniform_int(0, 2));
      spec.ax = rng.uniform(0.07, 0.2) * size;
      spec.ay = rng.uniform(0.07, 0.2) * size;
      spec.cx = rng.uniform(spec.ax, size - spec.ax);
      spec.cy = rng.uniform(spec.ay, size - spec.ay);
      spec.angle = rng.uniform(0.0, kPi);
      for (int c = 0; c < 3; ++c) spec.color[c] = rng.uniform(0.05, 0.95);
      mask = rasterize(spec, size);
      double frac = mask_fraction(mask);
      if (frac < 0.015 || frac > 0.25) continue;
      double clash = 0.0, area = 0.0;
      for (size_t i = 0; i < plane; ++i) {
        if (mask[i] != 1.0) continue;
        ++area;
        clash += occupied[i];
      }
      if (clash / area < 0.02) break;
    }
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        if (mask[static_cast<size_t>(y) * size + x] != 1.0) continue;
        for (int dy = -5; dy <= 5; ++dy)
          for (int dx = -5; dx <= 5; ++dx) {
            int sy = std::clamp(y + dy, 0, size - 1);
            int sx = std::clamp(x + dx, 0, size - 1);
            occupied[static_cast<size_t>(sy) * size + sx] = 1.0;
          }
      }
    // objects carry their own texture; removal erases it, which is the
    // smoothness signature the detector can learn
    auto tex = value_noise(rng, 16, size);
    for (size_t i = 0; i < plane; ++i)
      if (mask[i] == 1.0)
        for (int c = 0; c < 3; ++c)
          scene.image[c * plane + i] = spec.color[c] + 0.08 * tex[i];
    scene.shape_masks.push_back(std::move(mask));
  }

  auto n3 = value_noise(rng, 21, size);
  for (size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) scene.image[c * plane + i] += 0.03 * n3[i];

  for (auto& v : scene.image) v = clamp01(v);
  return scene;
}

std::vector<double> gen_base_image(uint64_t seed, int size) {
  return gen_base_scene(seed, size).image;
}

Manipulated apply_copy_move(const std::vector<double>& img, int size, uint64_t seed) {
  SeedStream rng(seed);
  Region best{};
  double best_vis = -1.0;
  for (int attempt = 0; attempt < 50; ++attempt) {
    Region r = sample_region(rng, size);
    if (r.src_x == r.dst_x && r.src_y == r.dst_y) continue;
    double vis = paste_visibility(img, img, r, size);
    if (vis > best_vis) {
      best_vis = vis;
      best = r;
    }
    if (vis >= 0.04) break;  // clearly visible paste, stop early
  }
  return paste_region(img, img, best, size);
}

Manipulated apply_splice(const std::vector<double>& img_a,
                         const std::vector<double>& img_b, int size, uint64_t seed) {
  SeedStream rng(seed);
  Region best{};
  double best_vis = -1.0;
  for (int attempt = 0; attempt < 50; ++attempt) {
    Region r = sample_region(rng, size);
    double vis = paste_visibility(img_a, img_b, r, size);
    if (vis > best_vis) {
      best_vis = vis;
      best = r;
    }
    if (vis >= 0.04) break;
  }
  return paste_region(img_a, img_b, best, size);
}

Manipulated apply_removal(const Scene& scene, uint64_t seed) {
  SeedStream rng(seed);
  if (scene.shape_masks.empty()) throw IoError("apply_removal: scene has no shapes");
  int size = scene.size;
  const size_t plane = static_cast<size_t>(size) * size;
  int pick = rng.uniform_int(0, static_cast<int>(scene.shape_masks.size()) - 1);
  const auto& mask = scene.shape_masks[static_cast<size_t>(pick)];

  // ring of background pixels around the shape supplies the fill color
  std::vector<double> ring(plane, 0.0);
  int reach = 4;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      if (mask[static_cast<size_t>(y) * size + x] == 1.0) continue;
      bool near = false;
      for (int dy = -reach; dy <= reach && !near; ++dy)
        for (int dx = -reach; dx <= reach && !near; ++dx) {
          int sy = std::clamp(y + dy, 0, size - 1);
          int sx = std::clamp(x + dx, 0, size - 1);
          if (mask[static_cast<size_t>(sy) * size + sx] == 1.0) near = true;
        }
      if (near) ring[static_cast<size_t>(y) * size + x] = 1.0;
    }
  double fill[3] = {0.5, 0.5, 0.5};
  double ring_count = 0.0;
  for (size_t i = 0; i < plane; ++i) ring_count += ring[i];
  if (ring_count > 0.0)
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (size_t i = 0; i < plane; ++i)
        if (ring[i] == 1.0) acc += scene.image[c * plane + i];
      fill[c] = acc / ring_count;
    }

  // toy inpainting: seed the hole with the ring mean, relax it toward the
  // harmonic interpolant of the surrounding pixels, then blur
  std::vector<double> filled = scene.image;
  for (size_t i = 0; i < plane; ++i)
    if (mask[i] == 1.0)
      for (int c = 0; c < 3; ++c) filled[c * plane + i] = fill[c];
  std::vector<double> next = filled;
  for (int sweep = 0; sweep < 40; ++sweep) {
    for (int c = 0; c < 3; ++c) {
      const double* cur = filled.data() + c * plane;
      double* out = next.data() + c * plane;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          size_t i = static_cast<size_t>(y) * size + x;
          if (mask[i] != 1.0) continue;
          double acc = 0.0;
          int cnt = 0;
          for (auto [dy, dx] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
            int sy = y + dy, sx = x + dx;
            if (sy < 0 || sy >= size || sx < 0 || sx >= size) continue;
            acc += cur[static_cast<size_t>(sy) * size + sx];
            ++cnt;
          }
          out[i] = acc / cnt;
        }
    }
    std::swap(filled, next);
  }
  std::vector<double> blurred = gaussian_blur(filled, 3, size, size, 7, 1.8);

  Manipulated out;
  out.image = scene.image;
  out.mask = mask;
  for (size_t i = 0; i < plane; ++i)
    if (mask[i] == 1.0)
      for (int c = 0; c < 3; ++c) out.image[c * plane + i] = blurred[c * plane + i];
  return out;
}

std::vector<double> gaussian_blur(const std::vector<double>& chw, int channels, int h,
                                  int w, int k, double sigma) {
  if (k % 2 == 0 || k < 1) throw IoError("gaussian_blur: kernel size must be odd");
  if (k == 1) return chw;
  int r = k / 2;
  std::vector<double> kern(static_cast<size_t>(k));
  double acc = 0.0;
  for (int i = -r; i <= r; ++i) {
    kern[static_cast<size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    acc += kern[static_cast<size_t>(i + r)];
  }
  for (auto& v : kern) v /= acc;

  const size_t plane = static_cast<size_t>(h) * w;
  std::vector<double> tmp(chw.size()), out(chw.size());
  for (int c = 0; c < channels; ++c) {
    const double* src = chw.data() + c * plane;
    double* t = tmp.data() + c * plane;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i)
          s += kern[static_cast<size_t>(i + r)] * src[static_cast<size_t>(y) * w +
                                                      std::clamp(x + i, 0, w - 1)];
        t[static_cast<size_t>(y) * w + x] = s;
      }
    double* o = out.data() + c * plane;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i)
          s += kern[static_cast<size_t>(i + r)] *
               t[static_cast<size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
        o[static_cast<size_t>(y) * w + x] = s;
      }
  }
  return out;
}

namespace {

std::vector<double> bilinear_resize_raw(const std::vector<double>& chw, int channels,
                                        int h, int w, int oh, int ow) {
  const size_t plane = static_cast<size_t>(h) * w;
  const size_t oplane = static_cast<size_t>(oh) * ow;
  std::vector<double> out(static_cast<size_t>(channels) * oplane);
  for (int c = 0; c < channels; ++c) {
    const double* src = chw.data() + c * plane;
    double* dst = out.data() + c * oplane;
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double fy = std::clamp((y + 0.5) * h / oh - 0.5, 0.0, h - 1.0);
        double fx = std::clamp((x + 0.5) * w / ow - 0.5, 0.0, w - 1.0);
        int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
        int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        double wy = fy - y0, wx = fx - x0;
        dst[static_cast<size_t>(y) * ow + x] =
            (1 - wy) * ((1 - wx) * src[static_cast<size_t>(y0) * w + x0] +
                        wx * src[static_cast<size_t>(y0) * w + x1]) +
            wy * ((1 - wx) * src[static_cast<size_t>(y1) * w + x0] +
                  wx * src[static_cast<size_t>(y1) * w + x1]);
      }
  }
  return out;
}

}  // namespace

Distortion parse_distortion(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw IoError("distortion '" + text + "' must be KIND:PARAM");
  std::string kind = text.substr(0, colon);
  double param;
  try {
    param = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw IoError("distortion '" + text + "' has a malformed parameter");
  }
  if (kind == "blur") {
    int k = static_cast<int>(param);
    if (k < 1 || k % 2 == 0 || k != param)
      throw IoError("blur kernel size must be a positive odd integer");
    return {DistortKind::blur, param};
  }
  if (kind == "noise") {
    if (param < 0.0) throw IoError("noise sigma must be non-negative");
    return {DistortKind::noise, param};
  }
  if (kind == "resize") {
    if (param <= 0.0 || param > 1.0) throw IoError("resize scale must be in (0,1]");
    return {DistortKind::resize, param};
  }
  throw IoError("unknown distortion kind '" + kind + "'");
}

std::string distortion_name(const Distortion& d) {
  std::ostringstream os;
  switch (d.kind) {
    case DistortKind::blur: os << "blur:" << static_cast<int>(d.param); break;
    case DistortKind::noise: os << "noise:" << d.param; break;
    case DistortKind::resize: os << "resize:" << d.param; break;
  }
  return os.str();
}

std::vector<double> distort(const std::vector<double>& img, int size, const Distortion& d,
                            uint64_t seed) {
  switch (d.kind) {
    case DistortKind::blur: {
      int k = static_cast<int>(d.param);
      if (k % 2 == 0 || k < 1) throw IoError("blur kernel size must be odd");
      if (k == 1) return img;
      double sigma = 0.3 * ((k - 1) * 0.5 - 1.0) + 0.8;
      return gaussian_blur(img, 3, size, size, k, sigma);
    }
    case DistortKind::noise: {
      if (d.param == 0.0) return img;
      SeedStream rng(seed);
      std::vector<double> out = img;
      double s = d.param / 255.0;
      for (auto& v : out) v = clamp01(v + s * rng.normal());
      return out;
    }
    case DistortKind::resize: {
      if (d.param == 1.0) return img;
      int small = std::max(1, static_cast<int>(std::lround(size * d.param)));
      auto down = bilinear_resize_raw(img, 3, size, size, small, small);
      return bilinear_resize_raw(down, 3, small, small, size, size);
    }
  }
  throw IoError("distort: unreachable");
}

namespace {

ManipulationSample gen_sample_once(ManipKind kind, uint64_t sample_seed, int size);

}  // namespace

ManipulationSample gen_sample(ManipKind kind, uint64_t sample_seed, int size) {
  // Manipulated masks must land in [1%, 40%] positive pixels; regenerate
  // from a derived seed in the rare case quantization pushes one outside.
  ManipulationSample s = gen_sample_once(kind, sample_seed, size);
  if (kind == ManipKind::authentic || kind == ManipKind::proxy) return s;
  for (int retry = 0; retry < 16; ++retry) {
    double frac = 0.0;
    for (double v : s.mask) frac += v;
    frac /= static_cast<double>(s.mask.size());
    if (frac >= 0.01 && frac <= 0.40) return s;
    uint64_t rs = substream(sample_seed, "area-retry", static_cast<uint64_t>(retry)).next_u64();
    s = gen_sample_once(kind, rs, size);
    s.seed = sample_seed;
  }
  throw IoError("gen_sample: could not satisfy mask area bounds");
}

namespace {

ManipulationSample gen_sample_once(ManipKind kind, uint64_t sample_seed, int size) {
  ManipulationSample s;
  s.size = size;
  s.kind = kind;
  s.seed = sample_seed;
  const size_t plane = static_cast<size_t>(size) * size;
  switch (kind) {
    case ManipKind::authentic: {
      s.image = gen_base_image(sample_seed, size);
      s.mask.assign(plane, 0.0);
      break;
    }
    case ManipKind::proxy: {
      Scene scene = gen_base_scene(sample_seed, size);
      s.image = std::move(scene.image);
      s.mask.assign(plane, 0.0);
      for (const auto& m : scene.shape_masks)
        for (size_t i = 0; i < plane; ++i)
          if (m[i] == 1.0) s.mask[i] = 1.0;
      break;
    }
    case ManipKind::copy_move: {
      auto img = gen_base_image(sample_seed, size);
      auto m = apply_copy_move(img, size, substream(sample_seed, "copy").next_u64());
      s.image = std::move(m.image);
      s.mask = std::move(m.mask);
      break;
    }
    case ManipKind::splice: {
      auto a = gen_base_image(sample_seed, size);
      auto b = gen_base_image(substream(sample_seed, "donor").next_u64(), size);
      auto m = apply_splice(a, b, size, substream(sample_seed, "splice").next_u64());
      s.image = std::move(m.image);
      s.mask = std::move(m.mask);
      break;
    }
    case ManipKind::removal: {
      Scene scene = gen_base_scene(sample_seed, size);
      auto m = apply_removal(scene, substream(sample_seed, "removal").next_u64());
      s.image = std::move(m.image);
      s.mask = std::move(m.mask);
      break;
    }
  }
  return s;
}

}  // namespace

void generate_split(const std::filesystem::path& dir, const SplitSpec& spec, int size,
                    uint64_t master_seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::vector<ManipKind> kinds;
  auto push = [&kinds](ManipKind k, int n) {
    for (int i = 0; i < n; ++i) kinds.push_back(k);
  };
  push(ManipKind::authentic, spec.authentic);
  push(ManipKind::copy_move, spec.copy_move);
  push(ManipKind::splice, spec.splice);
  push(ManipKind::removal, spec.removal);
  push(ManipKind::proxy, spec.proxy);

  SeedStream order = substream(master_seed, "order-" + spec.name);
  for (size_t i = kinds.size(); i > 1; --i)
    std::swap(kinds[i - 1], kinds[static_cast<size_t>(order.uniform_int(0, static_cast<int>(i) - 1))]);

  std::ostringstream manifest;
  for (size_t idx = 0; idx < kinds.size(); ++idx) {
    uint64_t sample_seed =
        substream(master_seed, "sample-" + spec.name, idx).next_u64();
    ManipulationSample s = gen_sample(kinds[idx], sample_seed, size);
    write_ppm(dir / (std::to_string(idx) + "_img.ppm"), to_u8_rgb(s.image, size, size));
    write_pgm(dir / (std::to_string(idx) + "_mask.pgm"), mask_to_u8(s.mask, size, size));
    manifest << idx << " " << manip_kind_name(s.kind) << " " << s.seed << "\n";
  }
  std::ofstream mf(dir / "manifest.txt");
  if (!mf) throw IoError("cannot write manifest in " + dir.string());
  mf << manifest.str();
}

std::vector<LoadedSample> load_split(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.txt");
  if (!mf) throw IoError("missing manifest.txt in " + dir.string());
  std::vector<LoadedSample> out;
  std::string line;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    long idx;
    std::string kind;
    uint64_t seed;
    if (!(is >> idx >> kind >> seed))
      throw IoError("malformed manifest line '" + line + "' in " + dir.string());
    LoadedSample s;
    s.kind = manip_kind_from(kind);
    s.seed = seed;
    s.image = read_ppm(dir / (std::to_string(idx) + "_img.ppm"));
    s.mask = read_pgm(dir / (std::to_string(idx) + "_mask.pgm"));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace revi
