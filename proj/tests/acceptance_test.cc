// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: prints one PASS or FAIL line per primary criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "depscreen/checkpoint.h"
#include "depscreen/cli.h"
#include "depscreen/contrastive.h"
#include "depscreen/gradcheck.h"
#include "depscreen/ingest.h"
#include "depscreen/metrics.h"
#include "depscreen/pipeline.h"
#include "depscreen/random.h"
#include "depscreen/service.h"
#include "depscreen/synth.h"
#include "depscreen/wire.h"
#include "test_util.h"

namespace depscreen {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// A criterion either returns a short detail string (pass) or throws.
struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.normal();
  normalize_in_place(v);
  return v;
}

// ---- criteria ---------------------------------------------------------------

std::string loss_exactness() {
  const std::vector<double> e{0.6, 0.8};
  const std::vector<double> far{-0.6, -0.8};  // distance 2
  const std::vector<double> origin{0.0, 0.0};
  const std::vector<double> at_06{0.36, 0.48};  // distance 0.6
  struct Case {
    double got;
    double want;
  };
  const Case cases[] = {{contrastive_loss(e, e, 0, 1.0), 0.0},
                        {contrastive_loss(e, e, 1, 1.0), 0.5},
                        {contrastive_loss(e, far, 1, 1.0), 0.0},
                        {contrastive_loss(e, far, 1, 2.0), 0.0},
                        {contrastive_loss(origin, at_06, 0, 1.0), 0.18}};
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, std::abs(c.got - c.want));
  check(worst < 1e-12, fmt("max error %.3g", worst));
  return fmt("5 cases, max |error| %.3g", worst);
}

std::string gradient_correctness() {
  const auto t0 = Clock::now();
  ModelConfig config;
  for (EncoderConfig* e : {&config.visual, &config.audio}) {
    e->model_dim = 8;
    e->num_blocks = 1;
    e->num_heads = 2;
    e->ffn_dim = 8;
    e->interpolation_factor = 2;
    e->embedding_dim = 4;
  }
  config.visual.input_dim = 3;
  config.audio.input_dim = 2;
  config.text_dim = 5;
  config.fusion = {6, 4};
  const ModelBundle bundle = init_bundle(config, 3);
  Rng rng(5);
  std::vector<SessionInput> sessions(2);
  for (int i = 0; i < 2; ++i) {
    Tensor v({6, 3});
    Tensor a({5, 2});
    for (double& x : v.data()) x = rng.normal();
    for (double& x : a.data()) x = rng.normal();
    sessions[i].visual = {v};
    sessions[i].audio = {a, a};
    for (int k = 0; k < 5; ++k) sessions[i].text.push_back(rng.normal());
  }
  double worst = 0.0;
  std::size_t tensors = 0;
  for (int c = 0; c < 2; ++c) {
    auto f = [&](Tape& t, const BoundParameters& p) {
      return contrastive_loss(t, fused_embedding(t, p, config, sessions[0]),
                              fused_embedding(t, p, config, sessions[1]), c, 1.0);
    };
    const auto report = finite_difference_check(f, bundle.params, 1e-5);
    check(report.size() == bundle.params.size(), "not every parameter tensor was checked");
    tensors = report.size();
    for (const auto& [name, err] : report) {
      check(err < 1e-4, name + fmt(" relative error %.3g", err));
      worst = std::max(worst, err);
    }
  }
  const double elapsed = seconds_since(t0);
  check(elapsed < 60.0, fmt("took %.1f s", elapsed));
  return fmt("%.0f tensors, max rel. error %.2g, %.1f s", static_cast<double>(tensors), worst,
             elapsed);
}

std::string geometry_consistency() {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t d = 2 + rng.below(127);
    const auto a = random_unit(rng, d);
    const auto b = random_unit(rng, d);
    const double dist = pairwise_distance(a, b);
    worst = std::max(worst, std::abs(dist * dist + 2.0 * similarity_index(a, b) - 2.0));
  }
  check(worst < 1e-9, fmt("max deviation %.3g", worst));
  return fmt("10000 pairs, max |D^2 + 2cos - 2| %.2g", worst);
}

std::string auc_oracle() {
  Rng rng(99);
  double worst = 0.0;
  int instances = 0;
  while (instances < 60) {
    const std::size_t n = 2 + rng.below(299);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so ties occur.
      scores[i] = static_cast<double>(rng.below(20)) / 4.0;
      labels[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<long>(n)) continue;
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != 1) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[j] != 0) continue;
        pairs += 1.0;
        wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
      }
    }
    worst = std::max(worst, std::abs(auc(roc_curve(scores, labels)) - wins / pairs));
    ++instances;
  }
  check(worst < 1e-9, fmt("max deviation %.3g", worst));
  return fmt("%.0f instances, max deviation %.2g", instances, worst);
}

std::string ci_reproduction() {
  const AccuracyInterval ci = accuracy_ci(604, 627, 0.95);
  const double acc = std::round(ci.accuracy_pct * 100.0) / 100.0;
  const double half = std::round(ci.half_width_pct * 100.0) / 100.0;
  check(acc == 96.33 && half == 1.47,
        fmt("got %.4f%% +/- %.4f%%", ci.accuracy_pct, ci.half_width_pct));
  return fmt("604/627 -> %.2f%% +/- %.2f%%", ci.accuracy_pct, ci.half_width_pct);
}

std::string segmentation() {
  auto stream = [](std::size_t rows) {
    FeatureMatrix fm;
    fm.rate_hz = 1.0;
    fm.feature_names = {"f0"};
    for (std::size_t r = 0; r < rows; ++r) {
      fm.times.push_back(static_cast<double>(r));
      fm.values.push_back(static_cast<double>(r));
    }
    return fm;
  };
  const PreprocessConfig config;
  const auto s600 = segment_stream(stream(600), config);
  const auto s320 = segment_stream(stream(320), config);
  const auto s330 = segment_stream(stream(330), config);
  check(s600.size() == 2, "600 s gave " + std::to_string(s600.size()) + " segments");
  check(s320.size() == 1 && s320[0].duration_s == 300.0, "320 s did not drop its 20 s tail");
  check(s330.size() == 2 && s330[1].duration_s == 30.0, "330 s did not keep its 30 s tail");
  return "600 s -> 2, 320 s -> 1 (20 s tail dropped), 330 s -> 2";
}

// Shared state of the synthetic end-to-end run.
struct EndToEnd {
  testing::TempDir dir{"acceptance"};
  DatasetIndex index;
  ModelConfig config;
  std::vector<LoadedSession> train;
  std::vector<LoadedSession> test;
  ModelBundle pretrained;
  ModelBundle bundle;
  ReferenceCorpus corpus;
  double seconds = 0.0;
  EvaluationReport report;
  std::string bundle_path;
  std::string corpus_path;
};

// Same-class vs cross-class geometry of one modality over held-out sessions.
std::string representation_for(const std::vector<std::vector<double>>& emb,
                               const std::vector<int>& labels, const char* name) {
  std::vector<double> same_cos;
  std::vector<double> cross_cos;
  double same_dist = 0.0;
  double cross_dist = 0.0;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    for (std::size_t j = i + 1; j < emb.size(); ++j) {
      const double c = similarity_index(emb[i], emb[j]);
      const double d = pairwise_distance(emb[i], emb[j]);
      if (labels[i] == labels[j]) {
        same_cos.push_back(c);
        same_dist += d;
      } else {
        cross_cos.push_back(c);
        cross_dist += d;
      }
    }
  }
  check(!same_cos.empty() && !cross_cos.empty(), "held-out set lacks pairs");
  same_dist /= static_cast<double>(same_cos.size());
  cross_dist /= static_cast<double>(cross_cos.size());
  // Fraction of (same-class pair, cross-class pair) comparisons won by the
  // same-class pair, ties counted half: sort once, count by binary search.
  std::sort(cross_cos.begin(), cross_cos.end());
  double wins = 0.0;
  for (double s : same_cos) {
    const auto lo = std::lower_bound(cross_cos.begin(), cross_cos.end(), s);
    const auto hi = std::upper_bound(cross_cos.begin(), cross_cos.end(), s);
    wins += static_cast<double>(lo - cross_cos.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  const double fraction =
      wins / (static_cast<double>(same_cos.size()) * static_cast<double>(cross_cos.size()));
  check(same_dist < cross_dist,
        std::string(name) + fmt(" same-class distance %.3f >= cross-class %.3f", same_dist,
                                cross_dist));
  check(fraction >= 0.9, std::string(name) + fmt(" same-class wins only %.3f of pairs", fraction));
  return std::string(name) +
         fmt(": dist %.3f < %.3f, cos ordering %.3f", same_dist, cross_dist, fraction);
}

std::string representation_property(const EndToEnd& e) {
  std::vector<std::vector<double>> visual;
  std::vector<std::vector<double>> audio;
  std::vector<int> labels;
  for (const auto& s : e.test) {
    const SessionEmbedding emb = embed_session(e.pretrained, s.prepared.input);
    visual.push_back(emb.visual);
    audio.push_back(emb.audio);
    labels.push_back(*s.prepared.input.label);
  }
  return representation_for(visual, labels, "visual") + "; " +
         representation_for(audio, labels, "audio");
}

void run_end_to_end(EndToEnd& e) {
  const auto t0 = Clock::now();
  SynthConfig synth;
  synth.n_sessions = 200;
  synth.seed = 1;
  e.index = synth_dataset(synth, (e.dir.path() / "data").string());
  e.config = config_for_dataset(e.index, desk_model_config());
  for (const auto& id : e.index.session_ids) {
    LoadedSession s = load_prepared(e.index.manifest_path(id), e.config);
    if (!s.prepared.usable) continue;
    (in_train_split(id) ? e.train : e.test).push_back(std::move(s));
  }
  std::vector<SessionInput> inputs;
  for (const auto& s : e.train) inputs.push_back(s.prepared.input);
  // train_model, split so the pretrained encoders can be inspected.
  PretrainBundleResult pre = pretrain_bundle(e.config, inputs, 5);
  e.pretrained = pre.bundle;
  TrainConfig fusion = e.config.fusion_train;
  fusion.seed = derive_seed(5, 13);
  e.bundle = train_fusion(pre.bundle, inputs, fusion).bundle;
  std::vector<ExemplarCandidate> candidates;
  for (std::size_t i = 0; i < e.train.size(); ++i) {
    candidates.push_back({&inputs[i], make_excerpt(e.train[i].prepared.cleaned_text),
                          std::filesystem::absolute(e.train[i].manifest_path).string()});
  }
  e.corpus = build_seed_corpus(e.bundle, candidates, 10);
  std::vector<LabeledPrediction> predictions;
  for (const auto& s : e.test) {
    predictions.push_back({s.prepared.input.id, *s.prepared.input.label,
                           classify_input(e.bundle, e.corpus, s.prepared.input, {})});
  }
  e.report = evaluate(predictions);
  e.seconds = seconds_since(t0);
  e.bundle_path = e.dir.file("bundle.ckpt");
  e.corpus_path = e.dir.file("corpus.jsonl");
  save_bundle(e.bundle, e.bundle_path);
  write_corpus_log(e.corpus_path, corpus_log_records(e.corpus));
}

std::string end_to_end(const EndToEnd& e) {
  const auto& r = e.report;
  const double acc = static_cast<double>(r.correct) / static_cast<double>(r.total);
  check(acc >= 0.9, fmt("accuracy %.3f", acc));
  check(r.auc >= 0.95, fmt("AUC %.4f", r.auc));
  check(e.seconds < 600.0, fmt("took %.0f s", e.seconds));
  return fmt("%.0f held-out sessions, accuracy %.2f%%, AUC %.4f", static_cast<double>(r.total),
             100.0 * acc, r.auc) +
         fmt(", %.0f s", e.seconds);
}

std::string service_consistency(const EndToEnd& e) {
  testing::TempDir dir("acceptance-service");
  ServiceConfig config;
  config.data_dir = dir.file("data");
  config.bundle_path = e.bundle_path;
  config.corpus_path = e.corpus_path;
  config.tokens = {{"u", {"patient", Role::kUser}}, {"c", {"clinician", Role::kClinician}}};
  const std::string user = "Bearer u";
  const std::string clinician = "Bearer c";
  auto call = [](Service& s, const std::string& method, const std::string& path,
                 const std::string& auth, const json& body = nullptr) {
    ApiRequest r{method, path, {}, auth, body.is_null() ? "" : body.dump()};
    const ApiResponse out = s.handle(r);
    return std::pair<int, json>(out.status, json::parse(out.body));
  };
  auto submission = [&](const LoadedSession& s) {
    const SessionPayload p = payload_from_manifest(s.manifest);
    json body{{"consent", true},
              {"visual_csv", p.visual_csv},
              {"audio_csv", p.audio_csv},
              {"transcript_tsv", p.transcript_tsv},
              {"phq8", *p.phq8}};
    if (p.text_embedding) body["text_embedding"] = *p.text_embedding;
    return body;
  };

  std::map<std::string, const LoadedSession*> source;
  std::string digest;
  std::size_t compared = 0;
  double worst_latency = 0.0;
  std::size_t during_job = 0;
  {
    Service service(config);
    for (std::size_t i = 0; i < 16 && i < e.test.size(); ++i) {
      const auto [status, body] = call(service, "POST", "/sessions", user, submission(e.test[i]));
      check(status == 202, "submit returned " + std::to_string(status));
      source[body["id"]] = &e.test[i];
    }
    service.wait_idle();

    // Bit-identical to offline classify under the same versions.
    auto compare_all = [&] {
      for (const auto& [id, s] : source) {
        const auto [status, view] = call(service, "GET", "/sessions/" + id, clinician);
        check(status == 200 && view["status"] == "processed", id + " not processed");
        const auto bv = view["bundle_version"].get<std::uint64_t>();
        const auto cv = view["corpus_version"].get<std::uint64_t>();
        if (bv != service.bundle_version() || cv != service.corpus_version()) continue;
        std::ostringstream out;
        std::ostringstream err;
        const std::vector<std::string> args{
            "classify", "--manifest", s->manifest_path, "--bundle",
            (std::filesystem::path(config.data_dir) / "bundles" /
             ("bundle-v" + std::to_string(bv) + ".ckpt"))
                .string(),
            "--corpus", (std::filesystem::path(config.data_dir) / "corpus.jsonl").string()};
        check(run_cli(args, out, err) == 0, "offline classify failed: " + err.str());
        const json offline = json::parse(out.str());
        check(offline["corpus_version"] == cv, "corpus version mismatch");
        check(prediction_from_json(offline["prediction"]) ==
                  prediction_from_json(view["prediction"]),
              id + " differs from offline classify");
        ++compared;
      }
    };
    compare_all();

    // Responsiveness while a retrain job runs.
    const auto [job_status, job] = call(service, "POST", "/retrain", clinician, json{{"epochs", 2}});
    check(job_status == 202, "retrain returned " + std::to_string(job_status));
    const std::string job_id = job["id"];
    std::size_t probe = 0;
    for (;;) {
      const auto t0 = Clock::now();
      const auto [s1, state] = call(service, "GET", "/retrain/" + job_id, clinician);
      const auto [s2, health] = call(service, "GET", "/healthz", "");
      const auto [s3, triage] = call(service, "GET", "/triage", clinician);
      const auto [s4, posted] = call(service, "POST", "/sessions", user,
                                     submission(e.test[16 + (probe++ % 4)]));
      worst_latency = std::max(worst_latency, seconds_since(t0));
      check(s1 == 200 && s2 == 200 && s3 == 200 && s4 == 202, "request failed during retrain");
      source[posted["id"]] = &e.test[16 + ((probe - 1) % 4)];
      if (state["status"] != "running") {
        check(state["status"] == "done", "retrain ended " + state.dump());
        break;
      }
      ++during_job;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    service.wait_idle();
    check(during_job > 0, "retrain finished before any request was observed");
    check(worst_latency < 1.0, fmt("slowest request batch %.2f s", worst_latency));
    compare_all();
    digest = service.state_digest();
  }
  Service restarted(config);
  restarted.wait_idle();
  check(restarted.state_digest() == digest, "replayed state differs");
  return fmt("%.0f predictions bit-identical to offline classify; ", static_cast<double>(compared)) +
         fmt("%.0f request batches during retrain, slowest %.3f s; replay identical",
             static_cast<double>(during_job), worst_latency);
}

}  // namespace
}  // namespace depscreen

int main() {
  using namespace depscreen;
  int failures = 0;
  auto report = [&](const char* name, const std::function<std::string()>& criterion) {
    try {
      const std::string detail = criterion();
      std::printf("PASS  %-28s %s\n", name, detail.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL  %-28s %s\n", name, e.what());
    }
    std::fflush(stdout);
  };

  report("loss-exactness", loss_exactness);
  report("gradient-correctness", gradient_correctness);
  report("geometry-consistency", geometry_consistency);
  report("auc-oracle", auc_oracle);
  report("ci-reproduction", ci_reproduction);
  EndToEnd e2e;
  bool trained = false;
  report("end-to-end-pipeline", [&] {
    run_end_to_end(e2e);
    trained = true;
    return end_to_end(e2e);
  });
  report("representation-property", [&] {
    check(trained, "end-to-end run did not complete");
    return representation_property(e2e);
  });
  report("segmentation", segmentation);
  report("service-consistency", [&] {
    check(trained, "end-to-end run did not complete");
    return service_consistency(e2e);
  });
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
