#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "revi/image_io.hpp"

namespace revi {

enum class ManipKind { authentic, copy_move, splice, removal, proxy };

const char* manip_kind_name(ManipKind k);
ManipKind manip_kind_from(const std::string& name);

// One generated sample. Images are planar [3,H,W] doubles in [0,1]; masks
// are [H,W] {0,1}. A manipulated image differs from its source only inside
// the mask; an authentic sample's mask is all zeros.
struct ManipulationSample {
  std::vector<double> image;
  std::vector<double> mask;
  int size = 0;
  ManipKind kind = ManipKind::authentic;
  uint64_t seed = 0;
};

// Procedural scene: smooth gradient + band-limited texture + 1..3 filled
// shapes. Shape masks are kept so removal knows what to erase.
struct Scene {
  std::vector<double> image;       // [3,H,W]
  std::vector<std::vector<double>> shape_masks;  // each [H,W] {0,1}
  int size = 0;
};

Scene gen_base_scene(uint64_t seed, int size);
std::vector<double> gen_base_image(uint64_t seed, int size);  // image only

struct Manipulated {
  std::vector<double> image;
  std::vector<double> mask;
};

Manipulated apply_copy_move(const std::vector<double>& img, int size, uint64_t seed);
Manipulated apply_splice(const std::vector<double>& img_a,
                         const std::vector<double>& img_b, int size, uint64_t seed);
Manipulated apply_removal(const Scene& scene, uint64_t seed);

enum class DistortKind { blur, noise, resize };

struct Distortion {
  DistortKind kind;
  double param;  // kernel size k (odd), sigma on the 0..255 scale, or scale s
};

Distortion parse_distortion(const std::string& text);  // "blur:15" etc
std::string distortion_name(const Distortion& d);

// Deterministic given the seed (used only by the noise kind).
std::vector<double> distort(const std::vector<double>& img, int size, const Distortion& d,
                            uint64_t seed);

// Separable Gaussian blur with replicate border, shared by removal and the
// blur distortion. k == 1 is the identity.
std::vector<double> gaussian_blur(const std::vector<double>& chw, int channels, int h,
                                  int w, int k, double sigma);

// ---- dataset on disk ----
// Layout: {split}/{index}_img.ppm, {split}/{index}_mask.pgm and a
// manifest.txt with one "index kind seed" line per sample.

struct SplitSpec {
  std::string name;
  int authentic = 0;
  int copy_move = 0;
  int splice = 0;
  int removal = 0;
  int proxy = 0;
  int total() const { return authentic + copy_move + splice + removal + proxy; }
};

ManipulationSample gen_sample(ManipKind kind, uint64_t sample_seed, int size);

// Writes the split; fully reproducible from (master_seed, split name).
void generate_split(const std::filesystem::path& dir, const SplitSpec& spec, int size,
                    uint64_t master_seed);

struct LoadedSample {
  ImageU8 image;
  ImageU8 mask;
  ManipKind kind = ManipKind::authentic;
  uint64_t seed = 0;
};

std::vector<LoadedSample> load_split(const std::filesystem::path& dir);

}  // namespace revi
