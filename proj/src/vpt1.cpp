// SPDX-License-Identifier: Apache-2.0

#include "vitpad/vpt1.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace vitpad {
namespace {

constexpr std::array<char, 4> kMagic{'V', 'P', 'T', '1'};

template <typename U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bytes{};
  is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!is) throw FormatError("VPT1: truncated stream");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

template <typename S>
void write_impl(std::ostream& os, const Tensor<S>& t) {
  if (t.rank() > 255) throw FormatError("VPT1: rank above 255");
  os.write(kMagic.data(), kMagic.size());
  os.put(static_cast<char>(dtype_of<S>()));
  os.put(static_cast<char>(t.rank()));
  for (auto d : t.shape()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  for (auto v : t.data()) {
    if constexpr (sizeof(S) == 4)
      put_le(os, std::bit_cast<std::uint32_t>(v));
    else
      put_le(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw FormatError("VPT1: write failed");
}

template <typename S>
void write_file(const std::filesystem::path& path, const Tensor<S>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  write_impl(os, t);
}

}  // namespace

void write_vpt1(std::ostream& os, const Tensorf& t) { write_impl(os, t); }
void write_vpt1(std::ostream& os, const Tensord& t) { write_impl(os, t); }
void write_vpt1(const std::filesystem::path& path, const Tensorf& t) { write_file(path, t); }
void write_vpt1(const std::filesystem::path& path, const Tensord& t) { write_file(path, t); }

template <typename S>
Tensor<S> read_vpt1(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw FormatError("VPT1: bad magic");
  const int dtype = is.get();
  const int rank = is.get();
  if (!is) throw FormatError("VPT1: truncated header");
  if (dtype != 0 && dtype != 1) throw FormatError("VPT1: unknown dtype code " + std::to_string(dtype));
  Shape shape(static_cast<std::size_t>(rank));
  for (auto& d : shape) {
    d = get_le<std::uint32_t>(is);
    if (d == 0) throw FormatError("VPT1: zero extent");
  }
  std::vector<S> data(numel(shape));
  for (auto& v : data) {
    if (dtype == 0)
      v = static_cast<S>(std::bit_cast<float>(get_le<std::uint32_t>(is)));
    else
      v = static_cast<S>(std::bit_cast<double>(get_le<std::uint64_t>(is)));
  }
  return Tensor<S>(std::move(shape), std::move(data));
}

template <typename S>
Tensor<S> read_vpt1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  return read_vpt1<S>(is);
}

DType peek_vpt1_dtype(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw FormatError("VPT1: bad magic in " + path.string());
  const int dtype = is.get();
  if (dtype != 0 && dtype != 1) throw FormatError("VPT1: unknown dtype code");
  return static_cast<DType>(dtype);
}

void write_tensor_dir(const std::filesystem::path& dir, const NamedTensors& tensors) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.tsv", std::ios::binary);
  if (!manifest) throw FormatError("cannot write manifest in " + dir.string());
  for (const auto& [name, t] : tensors) {
    const std::string rel = name + ".vpt1";
    write_vpt1(dir / rel, t);
    manifest << name << '\t' << rel << '\n';
  }
}

NamedTensors read_tensor_dir(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.tsv", std::ios::binary);
  if (!manifest) throw FormatError("missing manifest.tsv in " + dir.string());
  NamedTensors out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError("manifest.tsv line " + std::to_string(lineno) + ": expected name<TAB>path");
    out.emplace_back(line.substr(0, tab), read_vpt1<float>(dir / line.substr(tab + 1)));
  }
  return out;
}

template Tensorf read_vpt1<float>(std::istream&);
template Tensord read_vpt1<double>(std::istream&);
template Tensorf read_vpt1<float>(const std::filesystem::path&);
template Tensord read_vpt1<double>(const std::filesystem::path&);

}  // namespace vitpad
