// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_CHECKPOINT_HPP_
#define SEGRAVIR_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segravir/model.hpp"

namespace segravir {

// Binary checkpoint, all integers and doubles little-endian:
//
//   "SEGRAVIR"            8-byte magic
//   u32 version           currently 1
//   config block          u32 input_channels, base_channels, num_resolutions,
//                         num_classes; f64 dropout_rate; u8 aux_enabled
//   u32 record_count
//   records, sorted by name:
//     u32 name_length, name bytes
//     u32 rank, u64 dims[rank]
//     f64 values[product(dims)]
//   u64 FNV-1a hash of every preceding byte
//
// Parameters are stored under their registry names; batch-norm running
// statistics as "<layer>.running_mean" and "<layer>.running_var".
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(const std::vector<std::uint8_t>& bytes,
                        const std::string& origin = "<memory>");

void save_checkpoint(const Model& model, const std::filesystem::path& path);
// Throws DataError on unreadable, truncated, corrupt or mismatched files.
Model load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the serialized bytes; handy for "unchanged" assertions.
std::uint64_t model_fingerprint(const Model& model);

}  // namespace segravir

#endif  // SEGRAVIR_CHECKPOINT_HPP_
