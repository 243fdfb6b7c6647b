// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>

#include "tgcn/graph.hpp"
#include "tgcn/models.hpp"

namespace tgcn {

/// Binary checkpoint layout:
///   "TGCN" | u16 version | u32 header length | JSON header | parameters
/// The header records kind, n_nodes, hidden, seq_len, horizon and the ordered
/// parameter names and shapes; parameters follow as little-endian float64 in
/// header order. All integers are little-endian.
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const SequenceModel& model, const std::filesystem::path& path);

/// Rebuilds the model recorded in the checkpoint on top of `network`.
SequenceModel load_checkpoint(const std::filesystem::path& path, const RoadNetwork& network);

/// Loads parameters into an existing model; the checkpoint's configuration
/// must match the model's exactly.
void load_parameters(SequenceModel& model, const std::filesystem::path& path);

}  // namespace tgcn
