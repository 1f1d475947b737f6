#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "srr/parameter.hpp"

namespace srr {

/// Named-parameter container.
///
/// Layout (all integers little-endian, values IEEE-754 binary64 little-endian):
///   "SRRPARAM"                      8-byte magic
///   u32 version                     currently 1
///   u32 n_meta, then n_meta x { u32 len, key bytes, u32 len, value bytes }
///   u32 n_params, then n_params x { u32 len, name bytes, u32 rank, u64 dims[rank], f64 values[prod(dims)] }
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::map<std::string, std::string> metadata;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::map<std::string, std::string>& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values into `store` by name. Every store parameter must be present
/// with an identical shape.
void assign_parameters(ParameterStore& store, const Checkpoint& ckpt);

}  // namespace srr
