#include "revi/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "revi/image_io.hpp"

namespace revi {

namespace {

constexpr uint32_t kMagic = 0x52564b43;  // "CKVR"
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& f, const std::filesystem::path& path) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw IoError("truncated checkpoint " + path.string());
  return v;
}

void put_string(std::ofstream& f, const std::string& s) {
  put<uint32_t>(f, static_cast<uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& f, const std::filesystem::path& path) {
  auto len = get<uint32_t>(f, path);
  std::string s(len, '\0');
  f.read(s.data(), len);
  if (!f) throw IoError("truncated checkpoint " + path.string());
  return s;
}

void put_doubles(std::ofstream& f, const std::vector<double>& v) {
  put<uint64_t>(f, v.size());
  f.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::ifstream& f, const std::filesystem::path& path) {
  auto n = get<uint64_t>(f, path);
  std::vector<double> v(n);
  f.read(reinterpret_cast<char*>(v.data()),
         static_cast<std::streamsize>(n * sizeof(double)));
  if (!f) throw IoError("truncated checkpoint " + path.string());
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedParam>& params, const AdamW* optimizer) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  put(f, kMagic);
  put(f, kVersion);
  put<uint32_t>(f, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    put_string(f, p.name);
    put<uint32_t>(f, static_cast<uint32_t>(p.tensor.shape().size()));
    for (int d : p.tensor.shape()) put<int64_t>(f, d);
    put<uint8_t>(f, p.frozen() ? 1 : 0);
    auto data = p.tensor.data();
    put<uint64_t>(f, data.size());
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (optimizer && !optimizer->slots().empty()) {
    put<uint8_t>(f, 1);
    put<uint32_t>(f, static_cast<uint32_t>(optimizer->steps_taken()));
    put<uint32_t>(f, static_cast<uint32_t>(optimizer->slots().size()));
    for (const auto& slot : optimizer->slots()) {
      put_doubles(f, slot.m);
      put_doubles(f, slot.v);
    }
  } else {
    put<uint8_t>(f, 0);
  }
  if (!f) throw IoError("short write to " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  if (get<uint32_t>(f, path) != kMagic)
    throw IoError(path.string() + ": not a checkpoint file");
  if (get<uint32_t>(f, path) != kVersion)
    throw IoError(path.string() + ": unsupported checkpoint version");
  Checkpoint ckpt;
  auto count = get<uint32_t>(f, path);
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(f, path);
    CheckpointEntry e;
    auto ndim = get<uint32_t>(f, path);
    for (uint32_t d = 0; d < ndim; ++d)
      e.shape.push_back(static_cast<int>(get<int64_t>(f, path)));
    e.frozen = get<uint8_t>(f, path) != 0;
    e.data = get_doubles(f, path);
    ckpt.params.emplace(std::move(name), std::move(e));
  }
  if (get<uint8_t>(f, path) == 1) {
    ckpt.optimizer_steps = static_cast<int>(get<uint32_t>(f, path));
    auto nslots = get<uint32_t>(f, path);
    std::vector<AdamW::Slot> slots(nslots);
    for (auto& slot : slots) {
      slot.m = get_doubles(f, path);
      slot.v = get_doubles(f, path);
    }
    ckpt.moments = std::move(slots);
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, std::vector<NamedParam>& params,
                      bool allow_missing, bool apply_frozen_mask) {
  size_t used = 0;
  for (auto& p : params) {
    auto it = ckpt.params.find(p.name);
    if (it == ckpt.params.end()) {
      if (allow_missing) continue;
      throw IoError("checkpoint is missing parameter '" + p.name + "'");
    }
    const auto& e = it->second;
    if (e.shape != p.tensor.shape())
      throw IoError("checkpoint parameter '" + p.name + "' has shape " +
                    shape_str(e.shape) + ", model expects " +
                    shape_str(p.tensor.shape()));
    if (apply_frozen_mask) p.tensor.set_requires_grad(!e.frozen);
    auto dst = p.tensor.mutable_data();
    std::memcpy(dst.data(), e.data.data(), e.data.size() * sizeof(double));
    ++used;
  }
  if (used != ckpt.params.size())
    throw IoError("checkpoint has " + std::to_string(ckpt.params.size() - used) +
                  " parameter(s) that match nothing in the model");
}

void load_checkpoint(const std::filesystem::path& path, std::vector<NamedParam>& params,
                     bool allow_missing, bool apply_frozen_mask) {
  apply_checkpoint(read_checkpoint(path), params, allow_missing, apply_frozen_mask);
}

}  // namespace revi
