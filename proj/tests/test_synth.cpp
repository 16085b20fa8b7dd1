#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "revi/rng.hpp"
#include "revi/synth.hpp"

using namespace revi;
namespace fs = std::filesystem;

namespace {

constexpr int kSize = 64;

double mask_frac(const std::vector<double>& mask) {
  double s = 0.0;
  for (double v : mask) s += v;
  return s / static_cast<double>(mask.size());
}

double mad(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Pixels outside the mask must be untouched; checks on all three channels.
void check_outside_unchanged(const std::vector<double>& before,
                             const std::vector<double>& after,
                             const std::vector<double>& mask) {
  const size_t plane = mask.size();
  for (size_t i = 0; i < plane; ++i) {
    if (mask[i] != 0.0) continue;
    for (int c = 0; c < 3; ++c) CHECK(after[c * plane + i] == before[c * plane + i]);
  }
}

fs::path tmpdir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("revi_synth_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("base image generation is deterministic and in range") {
  auto a = gen_base_image(12345, kSize);
  auto b = gen_base_image(12345, kSize);
  CHECK(a == b);
  for (double v : a) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("distinct seeds give visibly different images") {
  SeedStream rng(71);
  for (int pair = 0; pair < 100; ++pair) {
    uint64_t s1 = rng.next_u64(), s2 = rng.next_u64();
    auto a = gen_base_image(s1, 32);
    auto b = gen_base_image(s2, 32);
    CHECK(mad(a, b) > 0.01);
  }
}

TEST_CASE("copy_move: locality, copy semantics, area bounds") {
  SeedStream rng(72);
  for (int trial = 0; trial < 25; ++trial) {
    uint64_t seed = rng.next_u64();
    auto img = gen_base_image(seed, kSize);
    auto m = apply_copy_move(img, kSize, seed ^ 0xabc);
    double frac = mask_frac(m.mask);
    CHECK(frac >= 0.005);  // generator targets [1.5%, 25%]
    CHECK(frac <= 0.40);
    check_outside_unchanged(img, m.image, m.mask);
    // inside the mask the content equals some region of the original image:
    // verify every masked pixel value exists in the source image channelwise
    // via the translation invariant: paste is a pure translate, so the
    // difference field inside the mask is a translate of the original.
    bool any_changed = false;
    const size_t plane = m.mask.size();
    for (size_t i = 0; i < plane && !any_changed; ++i)
      if (m.mask[i] == 1.0 && m.image[i] != img[i]) any_changed = true;
    CHECK(any_changed);
  }
}

TEST_CASE("copy_move mask marks destination only and copies source exactly") {
  uint64_t seed = 424242;
  auto img = gen_base_image(seed, kSize);
  auto m = apply_copy_move(img, kSize, 99);
  const size_t plane = m.mask.size();
  // find the translation by matching the changed region back onto the image
  // exhaustively over small offsets is costly; instead verify that for the
  // masked pixels, values come from the ORIGINAL image (copy semantics means
  // each pasted value appears at distance (dy,dx) in the source). We check
  // the weaker but exact invariant: values inside the destination exist in
  // the original image's value set per channel.
  for (int c = 0; c < 3; ++c) {
    std::vector<double> source_vals(img.begin() + c * plane, img.begin() + (c + 1) * plane);
    std::sort(source_vals.begin(), source_vals.end());
    for (size_t i = 0; i < plane; ++i) {
      if (m.mask[i] != 1.0) continue;
      double v = m.image[c * plane + i];
      CHECK(std::binary_search(source_vals.begin(), source_vals.end(), v));
    }
  }
}

TEST_CASE("splice: locality, area bounds, donor content") {
  SeedStream rng(73);
  for (int trial = 0; trial < 25; ++trial) {
    uint64_t seed = rng.next_u64();
    auto a = gen_base_image(seed, kSize);
    auto b = gen_base_image(seed ^ 0x5555, kSize);
    auto m = apply_splice(a, b, kSize, seed ^ 0x77);
    double frac = mask_frac(m.mask);
    CHECK(frac >= 0.005);
    CHECK(frac <= 0.40);
    check_outside_unchanged(a, m.image, m.mask);
  }
}

TEST_CASE("splice boundary carries a gradient discontinuity on average") {
  SeedStream rng(74);
  double manip_grad = 0.0, auth_grad = 0.0;
  int count = 0;
  for (int trial = 0; trial < 100; ++trial) {
    uint64_t seed = rng.next_u64();
    auto a = gen_base_image(seed, 32);
    auto b = gen_base_image(seed ^ 0x9999, 32);
    auto m = apply_splice(a, b, 32, seed ^ 0x33);
    const int size = 32;
    const size_t plane = static_cast<size_t>(size) * size;
    for (int y = 1; y + 1 < size; ++y)
      for (int x = 1; x + 1 < size; ++x) {
        size_t i = static_cast<size_t>(y) * size + x;
        bool boundary = m.mask[i] == 1.0 && (m.mask[i - 1] == 0.0 || m.mask[i + 1] == 0.0 ||
                                             m.mask[i - size] == 0.0 || m.mask[i + size] == 0.0);
        if (!boundary) continue;
        for (int c = 0; c < 3; ++c) {
          const double* after = m.image.data() + c * plane;
          const double* before = a.data() + c * plane;
          manip_grad += std::fabs(after[i + 1] - after[i - 1]) +
                        std::fabs(after[i + size] - after[i - size]);
          auth_grad += std::fabs(before[i + 1] - before[i - 1]) +
                       std::fabs(before[i + size] - before[i - size]);
        }
        ++count;
      }
  }
  REQUIRE(count > 0);
  CHECK(manip_grad / count > auth_grad / count);
}

TEST_CASE("removal: locality, area bounds, variance drop") {
  SeedStream rng(75);
  int variance_drops = 0, total = 0;
  double var_before_sum = 0.0, var_after_sum = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    uint64_t seed = rng.next_u64();
    Scene scene = gen_base_scene(seed, kSize);
    auto m = apply_removal(scene, seed ^ 0x11);
    double frac = mask_frac(m.mask);
    CHECK(frac >= 0.005);
    CHECK(frac <= 0.40);
    check_outside_unchanged(scene.image, m.image, m.mask);
    const size_t plane = m.mask.size();
    // texture measure: per-channel variance inside the region, averaged
    auto variance_inside = [&](const std::vector<double>& img) {
      double total = 0.0;
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0, count = 0.0;
        for (size_t i = 0; i < plane; ++i)
          if (m.mask[i] == 1.0) {
            mean += img[c * plane + i];
            ++count;
          }
        mean /= count;
        double var = 0.0;
        for (size_t i = 0; i < plane; ++i)
          if (m.mask[i] == 1.0) {
            double d = img[c * plane + i] - mean;
            var += d * d;
          }
        total += var / count;
      }
      return total / 3.0;
    };
    double before = variance_inside(scene.image);
    double after = variance_inside(m.image);
    var_before_sum += before;
    var_after_sum += after;
    variance_drops += after < before;
    ++total;
  }
  CHECK(var_after_sum < var_before_sum);
  CHECK(variance_drops >= total * 9 / 10);
}

TEST_CASE("manipulated sample invariants across kinds") {
  SeedStream rng(76);
  for (ManipKind kind : {ManipKind::copy_move, ManipKind::splice, ManipKind::removal}) {
    for (int trial = 0; trial < 10; ++trial) {
      ManipulationSample s = gen_sample(kind, rng.next_u64(), kSize);
      for (double v : s.mask) CHECK((v == 0.0 || v == 1.0));
      double frac = mask_frac(s.mask);
      CHECK(frac >= 0.01);
      CHECK(frac <= 0.40);
    }
  }
  ManipulationSample a = gen_sample(ManipKind::authentic, 5, kSize);
  for (double v : a.mask) CHECK(v == 0.0);
}

TEST_CASE("distortions: identity parameters") {
  auto img = gen_base_image(88, 32);
  CHECK(distort(img, 32, {DistortKind::blur, 1}, 7) == img);
  CHECK(distort(img, 32, {DistortKind::noise, 0}, 7) == img);
  CHECK(distort(img, 32, {DistortKind::resize, 1.0}, 7) == img);
}

TEST_CASE("distortions change the image and preserve range") {
  auto img = gen_base_image(89, 32);
  for (const char* spec : {"blur:3", "blur:15", "noise:3", "noise:15", "resize:0.78",
                           "resize:0.25"}) {
    auto d = distort(img, 32, parse_distortion(spec), 7);
    CHECK(d.size() == img.size());
    CHECK(mad(d, img) > 1e-5);
    for (double v : d) {
      CHECK(v >= -1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("noise distortion is deterministic per seed") {
  auto img = gen_base_image(90, 32);
  auto a = distort(img, 32, {DistortKind::noise, 5}, 1234);
  auto b = distort(img, 32, {DistortKind::noise, 5}, 1234);
  auto c = distort(img, 32, {DistortKind::noise, 5}, 1235);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("distortion parser validates input") {
  CHECK_THROWS_AS(parse_distortion("blur:4"), IoError);     // even kernel
  CHECK_THROWS_AS(parse_distortion("resize:1.5"), IoError); // upscale
  CHECK_THROWS_AS(parse_distortion("warp:2"), IoError);     // unknown kind
  CHECK_THROWS_AS(parse_distortion("blur"), IoError);       // missing param
  Distortion d = parse_distortion("blur:15");
  CHECK(d.kind == DistortKind::blur);
  CHECK(d.param == 15.0);
}

TEST_CASE("ppm round trip stays within quantization error") {
  SeedStream rng(77);
  fs::path dir = tmpdir("ppm");
  for (int trial = 0; trial < 100; ++trial) {
    int h = rng.uniform_int(1, 12), w = rng.uniform_int(1, 12);
    std::vector<double> img(static_cast<size_t>(3) * h * w);
    for (auto& v : img) v = rng.uniform();
    fs::path p = dir / ("t" + std::to_string(trial) + ".ppm");
    write_ppm(p, to_u8_rgb(img, h, w));
    auto back = to_unit(read_ppm(p));
    REQUIRE(back.size() == img.size());
    for (size_t i = 0; i < img.size(); ++i)
      CHECK(std::fabs(back[i] - img[i]) <= 1.0 / 255.0);
  }
}

TEST_CASE("mask pgm round trip is exact") {
  SeedStream rng(78);
  fs::path dir = tmpdir("pgm");
  for (int trial = 0; trial < 50; ++trial) {
    int h = rng.uniform_int(1, 16), w = rng.uniform_int(1, 16);
    std::vector<double> mask(static_cast<size_t>(h) * w);
    for (auto& v : mask) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    fs::path p = dir / ("m" + std::to_string(trial) + ".pgm");
    write_pgm(p, mask_to_u8(mask, h, w));
    auto back = u8_to_mask(read_pgm(p));
    CHECK(back == mask);
  }
}

TEST_CASE("foreign-encoder fixtures parse with expected pixels") {
  fs::path fixtures = fs::path(FIXTURE_DIR);
  ImageU8 rgb = read_ppm(fixtures / "foreign_rgb.ppm");
  CHECK(rgb.width == 11);
  CHECK(rgb.height == 9);
  CHECK(rgb.data[0] == 186);
  CHECK(rgb.data[1] == 187);
  CHECK(rgb.data[2] == 182);
  CHECK(rgb.data[rgb.data.size() - 3] == 173);
  CHECK(rgb.data[rgb.data.size() - 2] == 46);
  CHECK(rgb.data[rgb.data.size() - 1] == 48);

  ImageU8 gray = read_pgm(fixtures / "foreign_gray.pgm");
  CHECK(gray.width == 5);
  CHECK(gray.height == 7);
  CHECK(gray.data.front() == 57);
  CHECK(gray.data.back() == 243);

  ImageU8 commented = read_ppm(fixtures / "foreign_comment.ppm");
  CHECK(commented.width == 6);
  CHECK(commented.height == 4);
  CHECK(commented.data[0] == 121);
  CHECK(commented.data[1] == 94);
  CHECK(commented.data[2] == 78);
}

TEST_CASE("malformed and truncated files are rejected") {
  fs::path dir = tmpdir("bad");
  {
    std::ofstream f(dir / "bad_magic.ppm", std::ios::binary);
    f << "P5\n2 2\n255\n....";
  }
  CHECK_THROWS_AS(read_ppm(dir / "bad_magic.ppm"), IoError);
  {
    std::ofstream f(dir / "truncated.ppm", std::ios::binary);
    f << "P6\n4 4\n255\nshort";
  }
  CHECK_THROWS_AS(read_ppm(dir / "truncated.ppm"), IoError);
  {
    std::ofstream f(dir / "maxval.pgm", std::ios::binary);
    f << "P5\n1 1\n65535\n\0\0";
  }
  CHECK_THROWS_AS(read_pgm(dir / "maxval.pgm"), IoError);
  CHECK_THROWS_AS(read_pgm(dir / "does_not_exist.pgm"), IoError);
}

TEST_CASE("split generation writes the manifest and is byte-identical per seed") {
  fs::path d1 = tmpdir("split1"), d2 = tmpdir("split2");
  SplitSpec spec{"train", 3, 3, 2, 2, 0};
  generate_split(d1, spec, 32, 777);
  generate_split(d2, spec, 32, 777);

  auto manifest_lines = [](const fs::path& dir) {
    std::ifstream f(dir / "manifest.txt");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) lines.push_back(line);
    return lines;
  };
  auto l1 = manifest_lines(d1);
  CHECK(l1.size() == 10);
  CHECK(l1 == manifest_lines(d2));

  // kind distribution matches the configured counts exactly
  int counts[4] = {0, 0, 0, 0};
  for (const auto& line : l1) {
    if (line.find("authentic") != std::string::npos) ++counts[0];
    if (line.find("copy_move") != std::string::npos) ++counts[1];
    if (line.find("splice") != std::string::npos) ++counts[2];
    if (line.find("removal") != std::string::npos) ++counts[3];
  }
  CHECK(counts[0] == 3);
  CHECK(counts[1] == 3);
  CHECK(counts[2] == 2);
  CHECK(counts[3] == 2);

  // every written file is byte-identical across the two runs
  for (const auto& entry : fs::directory_iterator(d1)) {
    std::ifstream a(entry.path(), std::ios::binary);
    std::ifstream b(d2 / entry.path().filename(), std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }

  // loading reproduces the images
  auto loaded = load_split(d1);
  CHECK(loaded.size() == 10);
  for (const auto& s : loaded) {
    CHECK(s.image.width == 32);
    CHECK(s.mask.width == 32);
    if (s.kind == ManipKind::authentic)
      for (uint8_t v : s.mask.data) CHECK(v == 0);
  }
}
