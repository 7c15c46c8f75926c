// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "depscreen/errors.h"
#include "depscreen/format.h"
#include "depscreen/random.h"
#include "depscreen/text_embedder.h"

namespace depscreen {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (n_sessions < 8) throw ValidationError("synthetic dataset needs at least 8 sessions");
  double total = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ValidationError("class proportions must be non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("class proportions must sum to 1");
  if (visual_dim == 0 || audio_dim == 0 || text_dim == 0) {
    throw ValidationError("feature dimensions must be positive");
  }
  if (!(separation > 0.0) || !std::isfinite(separation)) {
    throw ValidationError("class-mean separation must be positive; zero makes classes identical");
  }
  if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0)) {
    throw ValidationError("AR coefficient must be in [0, 1)");
  }
  if (!(frame_sd >= 0.0) || !(session_sd >= 0.0) || !(text_noise >= 0.0)) {
    throw ValidationError("noise levels must be non-negative");
  }
  if (!(visual_rate_hz > 0.0) || !(audio_rate_hz > 0.0)) {
    throw ValidationError("frame rates must be positive");
  }
  if (!(min_participant_s > 0.0) || max_participant_s < min_participant_s) {
    throw ValidationError("participant duration range is invalid");
  }
}

std::array<std::size_t, kNumClasses> apportion(std::size_t n,
                                               const std::array<double, kNumClasses>& p) {
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const double quota = static_cast<double>(n) * p[k];
    counts[k] = static_cast<std::size_t>(std::floor(quota));
    remainder[k] = quota - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::array<std::size_t, kNumClasses> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % kNumClasses]];
  return counts;
}

namespace {

std::vector<double> gaussian(Rng& rng, std::size_t d, double sd) {
  std::vector<double> v(d);
  for (double& x : v) x = sd * rng.normal();
  return v;
}

// kNumClasses vectors of norm `scale`; orthogonal when d >= kNumClasses.
std::vector<std::vector<double>> class_directions(Rng& rng, std::size_t d, double scale) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < kNumClasses) {
    auto v = gaussian(rng, d, 1.0);
    if (d >= kNumClasses) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += v[i] * b[i];
        for (std::size_t i = 0; i < d; ++i) v[i] -= dot * b[i];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  for (auto& b : basis) {
    for (double& x : b) x *= scale;
  }
  return basis;
}

constexpr std::array<std::array<const char*, 5>, kNumClasses> kPhrases{{
    {"i have been sleeping well lately", "work is going fine and i enjoy it",
     "i like spending weekends outdoors with friends", "things feel pretty balanced right now",
     "i am looking forward to a trip next month"},
    {"some days i feel a bit low", "i get tired more than i used to",
     "my sleep has been uneven this month", "i still enjoy most things but less often",
     "sometimes i worry more than i should"},
    {"i rarely feel like going out anymore", "it is hard to concentrate at work",
     "i feel tired almost every day", "i do not enjoy the things i used to",
     "my appetite has changed a lot"},
    {"most days i cannot get out of bed", "i feel hopeless about almost everything",
     "i have stopped seeing my friends entirely", "nothing seems worth the effort anymore",
     "i feel like a failure most of the time"},
}};

constexpr std::array<const char*, 5> kPrompts{
    "how have you been sleeping", "tell me about your week", "what do you do to relax",
    "how are things with your family", "when did you last feel really happy"};

constexpr std::array<const char*, 4> kAnnotations{"<laughter>", "[sigh]", "<sync>", "[pause]"};

std::string participant_text(Rng& rng, int label) {
  const auto& bank = kPhrases[static_cast<std::size_t>(label)];
  std::string text = bank[rng.below(bank.size())];
  if (rng.uniform() < 0.5) {
    text += " and ";
    text += bank[rng.below(bank.size())];
  }
  if (rng.uniform() < 0.3) {
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  }
  if (rng.uniform() < 0.25) {
    text += "  ";
    text += kAnnotations[rng.below(kAnnotations.size())];
  }
  return text;
}

std::string session_id_for(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%04zu", i + 1);
  return buf;
}

// Frames on [0, end) at `rate`, AR(1) noise around the speaker-dependent mean.
FeatureMatrix make_stream(Rng& rng, Modality modality, double rate, double end,
                          const std::vector<TranscriptTurn>& turns,
                          const std::vector<double>& participant_mean,
                          const std::vector<double>& interviewer_mean,
                          const SynthConfig& config) {
  FeatureMatrix fm;
  fm.modality = modality;
  fm.rate_hz = rate;
  const std::size_t d = participant_mean.size();
  for (std::size_t i = 0; i < d; ++i) fm.feature_names.push_back("f" + std::to_string(i));
  const double phi = config.ar_coefficient;
  const double innovation_sd = config.frame_sd * std::sqrt(1.0 - phi * phi);
  std::vector<double> e = gaussian(rng, d, config.frame_sd);
  std::size_t turn = 0;
  for (std::size_t step = 0;; ++step) {
    const double t = static_cast<double>(step) / rate;
    if (t >= end) break;
    while (turn + 1 < turns.size() && turns[turn].stop <= t) ++turn;
    const bool interviewer = turns[turn].speaker == Speaker::kInterviewer &&
                             turns[turn].start <= t && t < turns[turn].stop;
    const auto& mean = interviewer ? interviewer_mean : participant_mean;
    fm.times.push_back(t);
    for (std::size_t i = 0; i < d; ++i) {
      e[i] = phi * e[i] + innovation_sd * rng.normal();
      fm.values.push_back(mean[i] + e[i]);
    }
  }
  return fm;
}

template <typename Writer>
std::string render(Writer&& write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

}  // namespace

DatasetIndex synth_dataset(const SynthConfig& config, const std::string& out_dir) {
  config.validate();
  fs::create_directories(fs::path(out_dir) / "sessions");

  Rng label_rng(derive_seed(config.seed, 1));
  const auto counts = apportion(config.n_sessions, config.proportions);
  std::vector<int> labels;
  for (int k = 0; k < kNumClasses; ++k) {
    labels.insert(labels.end(), counts[static_cast<std::size_t>(k)], k);
  }
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::swap(labels[i - 1], labels[label_rng.below(i)]);
  }

  Rng mean_rng(derive_seed(config.seed, 2));
  const auto visual_means = class_directions(mean_rng, config.visual_dim, config.separation);
  const auto audio_means = class_directions(mean_rng, config.audio_dim, config.separation);
  const auto text_centroids = class_directions(mean_rng, config.text_dim, 1.0);
  const auto visual_listen = gaussian(mean_rng, config.visual_dim, 0.5);
  const auto audio_listen = gaussian(mean_rng, config.audio_dim, 0.5);

  static constexpr std::array<std::array<int, 2>, kNumClasses> kPhqRange{
      {{0, 4}, {5, 9}, {10, 14}, {15, 24}}};

  DatasetIndex index;
  index.root = out_dir;
  index.visual_dim = config.visual_dim;
  index.audio_dim = config.audio_dim;
  index.text_dim = config.text_dim;
  index.seed = config.seed;
  EmbeddingTable table;

  for (std::size_t i = 0; i < config.n_sessions; ++i) {
    const std::string id = session_id_for(i);
    const int label = labels[i];
    const auto k = static_cast<std::size_t>(label);
    Rng rng(derive_seed(config.seed, 100 + i));

    std::vector<TranscriptTurn> turns;
    const double target = rng.uniform(config.min_participant_s, config.max_participant_s);
    double clock = 0.0;
    double spoken = 0.0;
    while (spoken < target) {
      const double ask = rng.uniform(4.0, 10.0);
      turns.push_back({clock, clock + ask, Speaker::kInterviewer, kPrompts[rng.below(kPrompts.size())]});
      clock += ask;
      const double answer = std::min(rng.uniform(20.0, 60.0), target - spoken);
      turns.push_back({clock, clock + answer, Speaker::kParticipant, participant_text(rng, label)});
      clock += answer;
      spoken += answer;
    }

    auto offset_mean = [&](const std::vector<double>& mu) {
      std::vector<double> m = mu;
      for (double& x : m) x += config.session_sd * rng.normal();
      return m;
    };
    const auto visual_mean = offset_mean(visual_means[k]);
    const auto audio_mean = offset_mean(audio_means[k]);
    const FeatureMatrix visual = make_stream(rng, Modality::kVisual, config.visual_rate_hz,
                                             clock, turns, visual_mean, visual_listen, config);
    const FeatureMatrix audio = make_stream(rng, Modality::kAudio, config.audio_rate_hz, clock,
                                            turns, audio_mean, audio_listen, config);

    std::vector<double> text = text_centroids[k];
    const double text_sd = config.text_noise / std::sqrt(static_cast<double>(config.text_dim));
    for (double& x : text) x += text_sd * rng.normal();
    normalize_in_place(text);
    table.insert(id, std::move(text));

    const auto [lo, hi] = kPhqRange[k];
    SessionManifest manifest;
    manifest.session_id = id;
    manifest.visual = id + ".visual.csv";
    manifest.audio = id + ".audio.csv";
    manifest.transcript = id + ".transcript.tsv";
    manifest.text_embedding = "../text_embeddings.tsv";
    manifest.phq8 = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));

    const fs::path dir = fs::path(out_dir) / "sessions";
    write_file_atomic((dir / manifest.visual).string(),
                      render([&](std::ostream& o) { write_feature_csv(o, visual); }));
    write_file_atomic((dir / manifest.audio).string(),
                      render([&](std::ostream& o) { write_feature_csv(o, audio); }));
    write_file_atomic((dir / manifest.transcript).string(),
                      render([&](std::ostream& o) { write_transcript(o, turns); }));
    write_file_atomic((dir / (id + ".json")).string(), manifest_to_json(manifest));
    index.session_ids.push_back(id);
  }
  write_file_atomic((fs::path(out_dir) / "text_embeddings.tsv").string(),
                    render([&](std::ostream& o) { table.write(o); }));
  write_dataset_index(index);
  return index;
}

}  // namespace depscreen
