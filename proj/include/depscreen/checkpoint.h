// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_CHECKPOINT_H_
#define DEPSCREEN_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <string_view>

#include "depscreen/model.h"

namespace depscreen {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

// Binary container, see docs/checkpoint-format.md. Round trips are bit-exact.
std::string serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(std::string_view bytes);

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

// JSON form of the model configuration. Parsing starts from `defaults`, so a
// partial object overrides only the keys it names; unknown keys are rejected.
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view json_text,
                                   const ModelConfig& defaults = {});

}  // namespace depscreen

#endif  // DEPSCREEN_CHECKPOINT_H_
