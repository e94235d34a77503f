// SPDX-License-Identifier: Apache-2.0
//
// VPT1 tensor files:
//   "VPT1" | u8 dtype (0 = f32, 1 = f64) | u8 rank | rank x u32 LE extents | LE scalars
//
// Named tensor directories carry a plain-text manifest with one
// `name<TAB>relative-path` line per tensor.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vitpad/tensor.hpp"

namespace vitpad {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_vpt1(std::ostream& os, const Tensorf& t);
void write_vpt1(std::ostream& os, const Tensord& t);
void write_vpt1(const std::filesystem::path& path, const Tensorf& t);
void write_vpt1(const std::filesystem::path& path, const Tensord& t);

// Reads either dtype and converts to S.
template <typename S>
Tensor<S> read_vpt1(std::istream& is);
template <typename S>
Tensor<S> read_vpt1(const std::filesystem::path& path);

// Dtype code stored in a file without reading the payload.
DType peek_vpt1_dtype(const std::filesystem::path& path);

using NamedTensors = std::vector<std::pair<std::string, Tensorf>>;

// Writes every tensor as `<name>.vpt1` plus `manifest.tsv`.
void write_tensor_dir(const std::filesystem::path& dir, const NamedTensors& tensors);
NamedTensors read_tensor_dir(const std::filesystem::path& dir);

}  // namespace vitpad
