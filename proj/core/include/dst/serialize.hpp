#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dst/autodiff.hpp"

namespace dst {

/// Named tensors in a stable order, as written to / read from a bundle file.
using TensorBundle = std::vector<std::pair<std::string, ad::Tensor>>;

/// Flat binary layout: magic "DSTB", u32 version, u64 tensor count; per
/// tensor u32 name length, name bytes, u32 rank, u64 dims, then the raw
/// values as little-endian IEEE-754 doubles.
void save_bundle(const std::string& path, const TensorBundle& tensors);
TensorBundle load_bundle(const std::string& path);

}  // namespace dst
