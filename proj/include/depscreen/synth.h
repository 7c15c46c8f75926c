// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_SYNTH_H_
#define DEPSCREEN_SYNTH_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "depscreen/contrastive.h"
#include "depscreen/dataset.h"

namespace depscreen {

// Seeded stand-in for an interview corpus. Participant frames follow
// x_t = mu_k + s + e_t with e_t = phi e_{t-1} + eta_t, where mu_k are
// mutually orthogonal class means of norm `separation` (when dim >= 4) and
// s is a per-session offset. Interviewer turns use a shared class-free mean.
// Text vectors are drawn around orthonormal class centroids.
struct SynthConfig {
  std::size_t n_sessions = 200;
  std::array<double, kNumClasses> proportions{0.55, 0.20, 0.15, 0.10};
  std::size_t visual_dim = 8;
  std::size_t audio_dim = 8;
  std::size_t text_dim = 64;
  double separation = 2.0;
  double frame_sd = 1.0;       // stationary sd of e_t
  double ar_coefficient = 0.8;
  double session_sd = 0.3;     // per-feature sd of s
  double text_noise = 0.7;     // expected norm of the text perturbation
  double visual_rate_hz = 1.0;
  double audio_rate_hz = 2.0;
  double min_participant_s = 300.0;
  double max_participant_s = 420.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Largest-remainder apportionment of n over the proportions; remainder ties
// go to the lower class.
std::array<std::size_t, kNumClasses> apportion(std::size_t n,
                                               const std::array<double, kNumClasses>& p);

// Writes dataset.json, text_embeddings.tsv and sessions/<id>.{json,
// visual.csv, audio.csv, transcript.tsv} under `out_dir`. Output bytes
// depend only on the config.
DatasetIndex synth_dataset(const SynthConfig& config, const std::string& out_dir);

}  // namespace depscreen

#endif  // DEPSCREEN_SYNTH_H_
