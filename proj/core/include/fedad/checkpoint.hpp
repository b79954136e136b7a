#pragma once

#include <string>

#include "fedad/model.hpp"

namespace fedad {

// Versioned little-endian binary container of named tensors. Layout:
//   magic "FADC", u32 version,
//   u32 tensor_count, then per tensor in canonical flat order:
//     u32 name_len, name bytes, u32 ndims, ndims x u32, f64 data.
void write_checkpoint(const std::string& path, const ParameterSet& params);
ParameterSet read_checkpoint(const std::string& path);

}  // namespace fedad
