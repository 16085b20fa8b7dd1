#include "revi/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace revi {

namespace {

void write_pnm(const std::filesystem::path& path, const ImageU8& img, const char* magic,
               int channels) {
  if (img.channels != channels || img.width <= 0 || img.height <= 0)
    throw IoError("write " + path.string() + ": bad image dimensions");
  if (img.data.size() != static_cast<size_t>(img.width) * img.height * channels)
    throw IoError("write " + path.string() + ": payload size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << magic << "\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (!f) throw IoError("short write to " + path.string());
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw IoError("malformed header in " + path.string());
  return tok;
}

ImageU8 read_pnm(const std::filesystem::path& path, const char* magic, int channels) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  if (next_token(f, path) != magic)
    throw IoError(path.string() + ": expected " + magic + " header");
  ImageU8 img;
  try {
    img.width = std::stoi(next_token(f, path));
    img.height = std::stoi(next_token(f, path));
    int maxval = std::stoi(next_token(f, path));
    if (maxval != 255) throw IoError(path.string() + ": only maxval 255 is supported");
  } catch (const std::invalid_argument&) {
    throw IoError(path.string() + ": malformed header field");
  }
  if (img.width <= 0 || img.height <= 0)
    throw IoError(path.string() + ": non-positive dimensions");
  img.channels = channels;
  img.data.resize(static_cast<size_t>(img.width) * img.height * channels);
  // exactly one whitespace byte separates header and payload; already
  // consumed by the tokenizer.
  f.read(reinterpret_cast<char*>(img.data.data()),
         static_cast<std::streamsize>(img.data.size()));
  if (static_cast<size_t>(f.gcount()) != img.data.size())
    throw IoError(path.string() + ": truncated payload");
  return img;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const ImageU8& img) {
  write_pnm(path, img, "P6", 3);
}

void write_pgm(const std::filesystem::path& path, const ImageU8& img) {
  write_pnm(path, img, "P5", 1);
}

ImageU8 read_ppm(const std::filesystem::path& path) { return read_pnm(path, "P6", 3); }

ImageU8 read_pgm(const std::filesystem::path& path) { return read_pnm(path, "P5", 1); }

uint8_t quantize_unit(double v) {
  double q = std::lround(std::fmin(std::fmax(v, 0.0), 1.0) * 255.0);
  return static_cast<uint8_t>(q);
}

ImageU8 to_u8_rgb(const std::vector<double>& chw, int h, int w) {
  if (chw.size() != static_cast<size_t>(3) * h * w)
    throw IoError("to_u8_rgb: buffer does not match 3xHxW");
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.channels = 3;
  img.data.resize(chw.size());
  const size_t plane = static_cast<size_t>(h) * w;
  for (size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c)
      img.data[i * 3 + c] = quantize_unit(chw[c * plane + i]);
  return img;
}

ImageU8 to_u8_gray(const std::vector<double>& hw, int h, int w) {
  if (hw.size() != static_cast<size_t>(h) * w)
    throw IoError("to_u8_gray: buffer does not match HxW");
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.data.resize(hw.size());
  for (size_t i = 0; i < hw.size(); ++i) img.data[i] = quantize_unit(hw[i]);
  return img;
}

std::vector<double> to_unit(const ImageU8& img) {
  const size_t plane = static_cast<size_t>(img.width) * img.height;
  std::vector<double> out(plane * img.channels);
  if (img.channels == 1) {
    for (size_t i = 0; i < plane; ++i) out[i] = img.data[i] / 255.0;
  } else {
    for (size_t i = 0; i < plane; ++i)
      for (int c = 0; c < img.channels; ++c)
        out[static_cast<size_t>(c) * plane + i] =
            img.data[i * img.channels + c] / 255.0;
  }
  return out;
}

ImageU8 mask_to_u8(const std::vector<double>& mask, int h, int w) {
  if (mask.size() != static_cast<size_t>(h) * w)
    throw IoError("mask_to_u8: buffer does not match HxW");
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.data.resize(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0.0 && mask[i] != 1.0)
      throw IoError("mask_to_u8: mask must be {0,1}-valued");
    img.data[i] = mask[i] == 1.0 ? 255 : 0;
  }
  return img;
}

std::vector<double> u8_to_mask(const ImageU8& img) {
  std::vector<double> out(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) out[i] = img.data[i] >= 128 ? 1.0 : 0.0;
  return out;
}

}  // namespace revi
