#include "fedad/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fedad/errors.hpp"

namespace fedad {

namespace {

constexpr char kMagic[4] = {'F', 'A', 'D', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CorruptUpdateError("truncated checkpoint file");
  return value;
}

}  // namespace

void write_checkpoint(const std::string& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileNotFoundError(path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& nt : params.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.name.size()));
    out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.tensor.shape.size()));
    for (int s : nt.tensor.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(s));
    out.write(reinterpret_cast<const char*>(nt.tensor.data.data()),
              static_cast<std::streamsize>(nt.tensor.data.size() * sizeof(double)));
  }
}

ParameterSet read_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFoundError(path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CorruptUpdateError("not a checkpoint file: " + path);
  if (get<std::uint32_t>(in) != kVersion)
    throw CorruptUpdateError("unsupported checkpoint version");
  const auto count = get<std::uint32_t>(in);
  ParameterSet params;
  params.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const auto name_len = get<std::uint32_t>(in);
    nt.name.resize(name_len);
    in.read(nt.name.data(), name_len);
    const auto ndims = get<std::uint32_t>(in);
    std::size_t total = 1;
    nt.tensor.shape.resize(ndims);
    for (auto& s : nt.tensor.shape) {
      s = static_cast<int>(get<std::uint32_t>(in));
      total *= static_cast<std::size_t>(s);
    }
    nt.tensor.data.resize(total);
    in.read(reinterpret_cast<char*>(nt.tensor.data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw CorruptUpdateError("truncated checkpoint file");
    params.tensors.push_back(std::move(nt));
  }
  return params;
}

}  // namespace fedad
