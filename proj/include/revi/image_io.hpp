#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace revi {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 8-bit images; RGB data is interleaved r,g,b scanlines top to bottom.
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<uint8_t> data;

  size_t size() const { return data.size(); }
};

// Binary PPM (P6) / PGM (P5), maxval 255. Headers may contain comments.
void write_ppm(const std::filesystem::path& path, const ImageU8& img);
void write_pgm(const std::filesystem::path& path, const ImageU8& img);
ImageU8 read_ppm(const std::filesystem::path& path);
ImageU8 read_pgm(const std::filesystem::path& path);

// Quantization helpers between [0,1] doubles and 8-bit payloads.
uint8_t quantize_unit(double v);
ImageU8 to_u8_rgb(const std::vector<double>& chw, int h, int w);   // [3,H,W]
ImageU8 to_u8_gray(const std::vector<double>& hw, int h, int w);   // [H,W] in [0,1]
std::vector<double> to_unit(const ImageU8& img);                   // planar CHW

// Masks store {0,1} as {0,255} and round-trip exactly.
ImageU8 mask_to_u8(const std::vector<double>& mask, int h, int w);
std::vector<double> u8_to_mask(const ImageU8& img);

}  // namespace revi
