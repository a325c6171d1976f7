#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "deeppe/nn/parameter.hpp"

namespace dpe::nn {

/// Version digit following "DPE" in the weight file magic.
inline constexpr char kModelFormatVersion = '1';

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Layout, all little-endian: "DPE1", u32 count, then per parameter
/// u32 name length, name bytes, u32 rank, u64 extents, float32 values.
std::string encode_model(const ParameterStore& params);
NamedTensors decode_model(const std::string& bytes);

/// Written to a temporary sibling and renamed into place.
void save_model(const std::filesystem::path& path, const ParameterStore& params);
NamedTensors load_model(const std::filesystem::path& path);

/// Rounds every value to the nearest float32 so a save/load cycle is exact.
void round_to_float(ParameterStore& params);

}  // namespace dpe::nn
