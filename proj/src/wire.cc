// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/wire.h"

#include "depscreen/errors.h"
#include "depscreen/metrics.h"

namespace depscreen {

using nlohmann::json;

json prediction_to_json(const Prediction& p) {
  return json{{"label", p.label ? json(*p.label) : json(nullptr)},
              {"uncertain", p.uncertain()},
              {"class_similarity", p.class_similarity},
              {"nearest_ids", p.nearest_ids},
              {"top_similarity", p.top_similarity},
              {"severity_score", severity_score(p)}};
}

Prediction prediction_from_json(const json& j) {
  Prediction p;
  try {
    if (!j.at("label").is_null()) p.label = j.at("label").get<int>();
    p.class_similarity = j.at("class_similarity").get<std::array<double, kNumClasses>>();
    p.nearest_ids = j.at("nearest_ids").get<std::array<std::string, kNumClasses>>();
    p.top_similarity = j.at("top_similarity").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed prediction: ") + e.what());
  }
  return p;
}

json exemplar_summary_json(const Exemplar& e) {
  return json{{"id", e.id},
              {"label", e.label},
              {"excerpt", e.excerpt},
              {"provenance", provenance_name(e.provenance)},
              {"added_at_ms", e.added_at_ms},
              {"source", e.source}};
}

}  // namespace depscreen
