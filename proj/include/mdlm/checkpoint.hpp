// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint layout (little-endian):
//   8 bytes   magic "MDLMCKPT"
//   u32       format version (1)
//   u64       header length in bytes
//   header    UTF-8 JSON; "tensors" lists {name, rows, cols} in blob order,
//             "dtype" is "f32" or "f64"
//   blob      tensors back to back, row-major

#pragma once

#include "mdlm/abi.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdlm/autograd.hpp"
#include "mdlm/corpus.hpp"
#include "mdlm/denoiser.hpp"
#include "mdlm/schedule.hpp"

namespace mdlm::inline MDLM_ABI {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointFile {
  nlohmann::json header;
  std::map<std::string, Matrix> tensors;
};

void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      const std::vector<const ag::Parameter*>& params);
/// Throws Error("checkpoint") on bad magic, version, or truncated data.
CheckpointFile read_checkpoint(const std::filesystem::path& path);
/// Copies tensors into params by name; every param must be present with a matching shape.
void assign_parameters(const CheckpointFile& file, const std::vector<ag::Parameter*>& params);

struct ModelBundle {
  Vocabulary vocab;
  ScheduleConfig schedule;
  Denoiser model;
  nlohmann::json header;
};

/// Header carries vocab, vocab hash, model config, schedule {T, s, eps, m}
/// and any extra fields given.
void save_model(const std::filesystem::path& path, const Denoiser& model, const Vocabulary& vocab,
                const ScheduleConfig& schedule, const nlohmann::json& extra = nlohmann::json::object());
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace mdlm
