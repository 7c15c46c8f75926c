// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_WIRE_H_
#define DEPSCREEN_WIRE_H_

#include <nlohmann/json.hpp>

#include "depscreen/corpus.h"

namespace depscreen {

// JSON shared by the CLI and the HTTP API. Doubles round-trip exactly.
nlohmann::json prediction_to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);

// Exemplar metadata without the embedding vector.
nlohmann::json exemplar_summary_json(const Exemplar& e);

}  // namespace depscreen

#endif  // DEPSCREEN_WIRE_H_
