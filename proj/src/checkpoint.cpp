#include "inrgan/checkpoint.hpp"

#include "inrgan/errors.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace inrgan {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'I', 'N', 'R', 'G', 'A', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxMetadata = 1ull << 26;

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V take(std::istream& in, const std::string& path) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) throw IoError("truncated checkpoint", path);
  return v;
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint", tmp);
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    const std::string meta = ckpt.metadata.dump();
    put<std::uint64_t>(out, meta.size());
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put<std::uint64_t>(out, ckpt.arrays.size());
    for (const auto& a : ckpt.arrays) {
      std::uint64_t n = 1;
      for (auto d : a.shape) n *= d;
      if (n != a.data.size()) throw std::invalid_argument("checkpoint array " + a.name + " has inconsistent shape");
      put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
      out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
      for (auto d : a.shape) put<std::uint64_t>(out, d);
      out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(float)));
    }
    if (!out) throw IoError("write failed", tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place (" + ec.message() + ")", path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint", path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw IoError("not a checkpoint file", path);
  const auto version = take<std::uint32_t>(in, path);
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version), path);
  const auto meta_len = take<std::uint64_t>(in, path);
  if (meta_len > kMaxMetadata) throw IoError("corrupt checkpoint metadata length", path);
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(meta_len))) throw IoError("truncated checkpoint", path);
  Checkpoint ckpt;
  ckpt.metadata = nlohmann::json::parse(meta, nullptr, false);
  if (ckpt.metadata.is_discarded()) throw IoError("corrupt checkpoint metadata", path);
  const auto count = take<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    const auto name_len = take<std::uint32_t>(in, path);
    if (name_len > 4096) throw IoError("corrupt checkpoint array name", path);
    a.name.resize(name_len);
    if (!in.read(a.name.data(), name_len)) throw IoError("truncated checkpoint", path);
    const auto rank = take<std::uint32_t>(in, path);
    if (rank > 8) throw IoError("corrupt checkpoint array rank", path);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      a.shape.push_back(take<std::uint64_t>(in, path));
      n *= a.shape.back();
    }
    if (n > (1ull << 34)) throw IoError("corrupt checkpoint array size", path);
    a.data.resize(n);
    if (!in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
      throw IoError("truncated checkpoint", path);
    }
    ckpt.arrays.push_back(std::move(a));
  }
  return ckpt;
}

template <typename T>
void export_arrays(const ParamList<T>& params, Checkpoint& ckpt) {
  for (const auto* p : params) {
    NamedArray a;
    a.name = p->name;
    a.shape = {static_cast<std::uint64_t>(p->value.rows()), static_cast<std::uint64_t>(p->value.cols())};
    a.data.resize(static_cast<std::size_t>(p->value.size()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) a.data[i] = static_cast<float>(p->value.data()[i]);
    ckpt.arrays.push_back(std::move(a));
  }
}

template <typename T>
void import_arrays(const Checkpoint& ckpt, const ParamList<T>& params) {
  for (auto* p : params) {
    const NamedArray* a = ckpt.find(p->name);
    if (a == nullptr) throw std::invalid_argument("checkpoint lacks array " + p->name);
    if (a->shape.size() != 2 || a->shape[0] != static_cast<std::uint64_t>(p->value.rows()) ||
        a->shape[1] != static_cast<std::uint64_t>(p->value.cols())) {
      throw std::invalid_argument("checkpoint array " + p->name + " has the wrong shape");
    }
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = static_cast<T>(a->data[i]);
  }
}

template void export_arrays<float>(const ParamList<float>&, Checkpoint&);
template void export_arrays<double>(const ParamList<double>&, Checkpoint&);
template void import_arrays<float>(const Checkpoint&, const ParamList<float>&);
template void import_arrays<double>(const Checkpoint&, const ParamList<double>&);

}  // namespace inrgan
