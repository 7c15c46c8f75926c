// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/cli.h"

#include <CLI11.hpp>
#include <pthread.h>
#include <signal.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "depscreen/checkpoint.h"
#include "depscreen/errors.h"
#include "depscreen/format.h"
#include "depscreen/pipeline.h"
#include "depscreen/random.h"
#include "depscreen/service.h"
#include "depscreen/synth.h"
#include "depscreen/wire.h"

namespace depscreen {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename T>
struct is_optional : std::false_type {};
template <typename T>
struct is_optional<std::optional<T>> : std::true_type {};

// A subcommand whose flags can also be set from a JSON config file. Keys are
// flag names without the leading dashes; config values override flags.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : app_(parent.add_subcommand(name, description)) {
    app_->add_option("--config", config_path_,
                     "JSON file whose keys (flag names without dashes) override flags");
  }

  template <typename T>
  CLI::Option* option(const std::string& name, T& target, const std::string& help) {
    setters_[name] = [&target, name](const json& v) {
      try {
        if constexpr (is_optional<T>::value) {
          target = v.get<typename T::value_type>();
        } else {
          target = v.get<T>();
        }
      } catch (const json::exception&) {
        throw ValidationError("config key '" + name + "' has the wrong type");
      }
    };
    return app_->add_option("--" + name, target, help);
  }

  bool parsed() const { return app_->parsed(); }

  void apply_config() const {
    if (config_path_.empty()) return;
    json j;
    try {
      j = json::parse(read_file(config_path_));
    } catch (const json::exception& e) {
      throw ParseError(config_path_ + ": " + e.what());
    }
    if (!j.is_object()) throw ValidationError(config_path_ + " must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      const auto it = setters_.find(key);
      if (it == setters_.end() || key == "config") {
        throw ValidationError("unknown config key '" + key + "' for " + app_->get_name());
      }
      it->second(value);
    }
  }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, std::function<void(const json&)>> setters_;
};

template <typename T>
const T& require(const std::optional<T>& v, const std::string& flag) {
  if (!v) throw ValidationError(flag + " is required");
  return *v;
}

void require(const std::string& v, const std::string& flag) {
  if (v.empty()) throw ValidationError(flag + " is required");
}

// ---- shared option groups -------------------------------------------------

struct ModelOptions {
  std::string preset = "default";
  std::string model_config;
  std::optional<std::size_t> epochs;
  std::optional<double> margin;

  void add_to(Command& c) {
    c.option("preset", preset, "Model size preset: default or desk (small, fast)")
        ->check(CLI::IsMember({"default", "desk"}));
    c.option("model-config", model_config, "JSON file with ModelConfig overrides");
    c.option("epochs", epochs, "Epochs for every training stage");
    c.option("margin", margin, "Contrastive margin for every training stage");
  }

  ModelConfig resolve(ModelConfig base) const {
    if (!model_config.empty()) base = model_config_from_json(read_file(model_config), base);
    for (TrainConfig* t : {&base.pretrain, &base.fusion_train}) {
      if (epochs) t->epochs = *epochs;
      if (margin) t->margin = *margin;
    }
    base.validate();
    return base;
  }

  ModelConfig preset_config(const DatasetIndex& index) const {
    return config_for_dataset(index, preset == "desk" ? desk_model_config() : ModelConfig{});
  }
};

std::vector<LoadedSession> usable_sessions(const DatasetIndex& index, const ModelConfig& config,
                                           SplitSelection split, std::vector<std::string>& notes) {
  std::vector<LoadedSession> out;
  for (const auto& id : index.session_ids) {
    if (split != SplitSelection::kAll && in_train_split(id) != (split == SplitSelection::kTrain)) {
      continue;
    }
    LoadedSession s = load_prepared(index.manifest_path(id), config);
    if (!s.prepared.usable || !s.prepared.input.label) {
      notes.push_back("skipped " + id + (s.prepared.usable ? ": unlabeled" : ": unusable"));
      continue;
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ValidationError("no usable labeled sessions in " + index.root);
  return out;
}

std::vector<SessionInput> inputs_of(const std::vector<LoadedSession>& sessions) {
  std::vector<SessionInput> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) out.push_back(s.prepared.input);
  return out;
}

ClassBoundary boundary_of(double threshold) {
  ClassBoundary b{threshold};
  b.validate();
  return b;
}

// ---- subcommands ----------------------------------------------------------

struct SynthOptions {
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t n = 200;
  double separation = 2.0;
  std::size_t visual_dim = 8;
  std::size_t audio_dim = 8;
  std::size_t text_dim = 64;

  void add_to(Command& c) {
    c.option("out", out, "Output dataset directory");
    c.option("seed", seed, "Generator seed (required)");
    c.option("n", n, "Number of sessions");
    c.option("separation", separation, "Norm of each class mean");
    c.option("visual-dim", visual_dim, "Visual feature count");
    c.option("audio-dim", audio_dim, "Audio feature count");
    c.option("text-dim", text_dim, "Text embedding dimension");
  }

  int run(std::ostream& out_stream) const {
    require(out, "--out");
    SynthConfig c;
    c.seed = require(seed, "--seed");
    c.n_sessions = n;
    c.separation = separation;
    c.visual_dim = visual_dim;
    c.audio_dim = audio_dim;
    c.text_dim = text_dim;
    const DatasetIndex index = synth_dataset(c, out);
    out_stream << json{{"out", out}, {"sessions", index.session_ids.size()}, {"seed", c.seed}}.dump()
               << "\n";
    return kExitOk;
  }
};

struct TrainOptions {
  std::string data_dir;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string bundle;  // train only: start from a pretrained bundle
  std::string split = "train";
  ModelOptions model;

  void add_to(Command& c, bool with_start_bundle) {
    c.option("data-dir", data_dir, "Dataset directory");
    c.option("seed", seed, "Training seed (required)");
    c.option("out", out, "Output checkpoint path");
    c.option("split", split, "Sessions to train on: train, test or all");
    if (with_start_bundle) {
      c.option("bundle", bundle, "Pretrained checkpoint to fine-tune instead of pretraining");
    }
    model.add_to(c);
  }

  int run(bool pretrain_only, std::ostream& out_stream) const {
    require(data_dir, "--data-dir");
    require(out, "--out");
    const std::uint64_t s = require(seed, "--seed");
    const DatasetIndex index = load_dataset_index(data_dir);
    std::optional<ModelBundle> start;
    ModelConfig config;
    if (!bundle.empty()) {
      start = load_bundle(bundle);
      config = model.resolve(start->config);
    } else {
      config = model.resolve(model.preset_config(index));
    }
    std::vector<std::string> notes;
    const auto sessions = usable_sessions(index, config, parse_split(split), notes);
    const auto inputs = inputs_of(sessions);

    json summary{{"sessions", inputs.size()}, {"seed", s}};
    ModelBundle result;
    if (pretrain_only) {
      PretrainBundleResult pre = pretrain_bundle(config, inputs, s);
      summary["visual_loss"] = pre.visual_history;
      summary["audio_loss"] = pre.audio_history;
      notes.insert(notes.end(), pre.warnings.begin(), pre.warnings.end());
      result = std::move(pre.bundle);
    } else if (start) {
      TrainConfig fusion = config.fusion_train;
      fusion.seed = derive_seed(s, 13);
      ModelBundle from = *start;
      from.config = config;
      FusionResult fused = train_fusion(from, inputs, fusion);
      summary["fusion_loss"] = fused.loss_history;
      notes.insert(notes.end(), fused.warnings.begin(), fused.warnings.end());
      result = std::move(fused.bundle);
      result.metadata.seed = s;
    } else {
      TrainOutcome t = train_model(config, inputs, s);
      summary["visual_loss"] = t.visual_history;
      summary["audio_loss"] = t.audio_history;
      summary["fusion_loss"] = t.fusion_history;
      notes.insert(notes.end(), t.warnings.begin(), t.warnings.end());
      result = std::move(t.bundle);
    }
    save_bundle(result, out);
    summary["bundle"] = out;
    summary["bundle_version"] = result.version;
    summary["notes"] = notes;
    out_stream << summary.dump() << "\n";
    return kExitOk;
  }
};

struct EvalOptions {
  std::string data_dir;
  std::string bundle;
  std::string corpus;
  double threshold = 0.5;
  std::string split = "test";
  std::string out;
  std::string roc_out;

  void add_to(Command& c, bool roc_export) {
    c.option("data-dir", data_dir, "Labeled dataset directory");
    c.option("bundle", bundle, "Model checkpoint");
    c.option("corpus", corpus, "Reference corpus log");
    c.option("threshold", threshold, "Class boundary: abstain below this similarity");
    c.option("split", split, "Sessions to evaluate: train, test or all");
    if (roc_export) {
      c.option("out", out, "ROC table path (stdout when absent)");
    } else {
      c.option("out", out, "Write the full report as JSON to this path");
      c.option("roc-out", roc_out, "Also write the ROC table to this path");
    }
  }

  DatasetEvaluation evaluate_now() const {
    require(data_dir, "--data-dir");
    require(bundle, "--bundle");
    require(corpus, "--corpus");
    const ModelBundle b = load_bundle(bundle);
    const ReferenceCorpus c = load_corpus(corpus);
    return evaluate_dataset(b, c, load_dataset_index(data_dir), parse_split(split),
                            boundary_of(threshold));
  }

  int run_eval(std::ostream& out_stream) const {
    const DatasetEvaluation ev = evaluate_now();
    out_stream << evaluation_summary(ev.report) << "excluded: " << ev.excluded << "\n";
    if (!out.empty()) {
      json j = json::parse(evaluation_to_json(ev.report));
      j["excluded"] = ev.excluded;
      write_file_atomic(out, j.dump(2) + "\n");
    }
    if (!roc_out.empty()) write_roc(roc_out, ev.report);
    return kExitOk;
  }

  int run_roc(std::ostream& out_stream) const {
    const DatasetEvaluation ev = evaluate_now();
    if (out.empty()) {
      write_roc_csv(out_stream, ev.report.roc, ev.report.auc);
    } else {
      write_roc(out, ev.report);
      out_stream << json{{"out", out}, {"auc", ev.report.auc}}.dump() << "\n";
    }
    return kExitOk;
  }

  static void write_roc(const std::string& path, const EvaluationReport& r) {
    std::ostringstream table;
    write_roc_csv(table, r.roc, r.auc);
    write_file_atomic(path, table.str());
  }
};

struct ClassifyOptions {
  std::string manifest;
  std::string bundle;
  std::string corpus;
  double threshold = 0.5;

  void add_to(Command& c) {
    c.option("manifest", manifest, "Session manifest JSON");
    c.option("bundle", bundle, "Model checkpoint");
    c.option("corpus", corpus, "Reference corpus log");
    c.option("threshold", threshold, "Class boundary: abstain below this similarity");
  }

  int run(std::ostream& out_stream) const {
    require(manifest, "--manifest");
    require(bundle, "--bundle");
    require(corpus, "--corpus");
    const ModelBundle b = load_bundle(bundle);
    const ReferenceCorpus c = load_corpus(corpus);
    const LoadedSession s = load_prepared(manifest, b.config);
    if (!s.prepared.usable) {
      std::string why;
      for (const auto& w : s.prepared.warnings) why += (why.empty() ? "" : "; ") + w;
      throw ValidationError("session " + s.manifest.session_id + " is unusable: " + why);
    }
    const Prediction p = classify_input(b, c, s.prepared.input, boundary_of(threshold));
    out_stream << json{{"session_id", s.manifest.session_id},
                       {"bundle_version", b.version},
                       {"corpus_version", c.version()},
                       {"prediction", prediction_to_json(p)}}
                      .dump()
               << "\n";
    return kExitOk;
  }
};

struct CorpusBuildOptions {
  std::string data_dir;
  std::string bundle;
  std::string out;
  std::size_t per_class = 10;
  std::string split = "train";

  void add_to(Command& c) {
    c.option("data-dir", data_dir, "Labeled dataset directory");
    c.option("bundle", bundle, "Model checkpoint used to embed exemplars");
    c.option("out", out, "Output corpus log");
    c.option("per-class", per_class, "Exemplars per class");
    c.option("split", split, "Sessions to draw exemplars from: train, test or all");
  }

  int run(std::ostream& out_stream) const {
    require(data_dir, "--data-dir");
    require(bundle, "--bundle");
    require(out, "--out");
    const ModelBundle b = load_bundle(bundle);
    std::vector<std::string> notes;
    const auto sessions =
        usable_sessions(load_dataset_index(data_dir), b.config, parse_split(split), notes);
    std::vector<ExemplarCandidate> candidates;
    for (const auto& s : sessions) {
      candidates.push_back({&s.prepared.input, make_excerpt(s.prepared.cleaned_text),
                            fs::absolute(s.manifest_path).lexically_normal().string()});
    }
    const ReferenceCorpus corpus = build_seed_corpus(b, candidates, per_class);
    write_corpus_log(out, corpus_log_records(corpus));
    out_stream << json{{"out", out},
                       {"version", corpus.version()},
                       {"class_counts", corpus.class_counts()},
                       {"notes", notes}}
                      .dump()
               << "\n";
    return kExitOk;
  }
};

struct CorpusAddOptions {
  std::string corpus;
  std::string bundle;
  std::string manifest;
  std::optional<int> label;
  std::string id;

  void add_to(Command& c) {
    c.option("corpus", corpus, "Corpus log to append to");
    c.option("bundle", bundle, "Model checkpoint used to embed the session");
    c.option("manifest", manifest, "Session manifest JSON");
    c.option("label", label, "Confirmed severity class 0-3 (required)");
    c.option("id", id, "Exemplar id (defaults to the session id)");
  }

  int run(std::ostream& out_stream) const {
    require(corpus, "--corpus");
    require(bundle, "--bundle");
    require(manifest, "--manifest");
    const int l = require(label, "--label");
    require_valid_label(l);
    const ModelBundle b = load_bundle(bundle);
    ReferenceCorpus c = load_corpus(corpus);
    const LoadedSession s = load_prepared(manifest, b.config);
    if (!s.prepared.usable) throw ValidationError("session " + s.manifest.session_id + " is unusable");
    Exemplar e;
    e.id = id.empty() ? s.manifest.session_id : id;
    e.embedding = embed_session(b, s.prepared.input).fused;
    e.label = l;
    e.excerpt = make_excerpt(s.prepared.cleaned_text);
    e.provenance = Provenance::kClinicianAdded;
    e.added_at_ms = 0;  // deterministic output
    e.source = fs::absolute(manifest).lexically_normal().string();
    const auto version = c.add(e);
    append_corpus_record(corpus, corpus_add_record(e, version, b.version));
    out_stream << json{{"corpus", corpus}, {"version", version}, {"id", e.id}}.dump() << "\n";
    return kExitOk;
  }
};

struct CorpusListOptions {
  std::string corpus;
  std::optional<std::uint64_t> version;

  void add_to(Command& c) {
    c.option("corpus", corpus, "Corpus log");
    c.option("version", version, "Show this historical version");
  }

  int run(std::ostream& out_stream) const {
    require(corpus, "--corpus");
    const ReferenceCorpus c = load_corpus(corpus, version);
    if (version && c.version() != *version) {
      throw NotFoundError("corpus has no version " + std::to_string(*version));
    }
    json list = json::array();
    for (const auto& e : c.exemplars()) list.push_back(exemplar_summary_json(e));
    out_stream << json{{"version", c.version()},
                       {"bundle_version", c.bundle_version()},
                       {"class_counts", c.class_counts()},
                       {"exemplars", std::move(list)}}
                      .dump(2)
               << "\n";
    return kExitOk;
  }
};

struct ServeOptions {
  std::string data_dir;
  std::string bundle;
  std::string corpus;
  std::string bind = "127.0.0.1:8080";
  std::vector<std::string> tokens;
  std::optional<double> threshold;
  std::string config;

  // Serve reads its config file as a service config rather than flag names.
  void add_to(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("serve", "Run the HTTP triage service");
    sub->add_option("--data-dir", data_dir, "Service data directory (logs, bundles, evalsets)");
    sub->add_option("--bundle", bundle, "Seed checkpoint copied in on first start");
    sub->add_option("--corpus", corpus, "Seed corpus log copied in on first start");
    sub->add_option("--bind", bind, "host:port to listen on (port 0 picks one)");
    sub->add_option("--token", tokens, "Bearer token as TOKEN:ID:ROLE, ROLE user or clinician");
    sub->add_option("--threshold", threshold, "Class boundary: abstain below this similarity");
    sub->add_option("--config", config,
                    "Service JSON (data_dir, bundle, corpus, threshold, bind, port, tokens); "
                    "overrides flags");
  }

  ServiceConfig resolve() const {
    ServiceConfig c;
    c.data_dir = data_dir;
    c.bundle_path = bundle;
    c.corpus_path = corpus;
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw ValidationError("--bind must be host:port");
    c.bind_host = bind.substr(0, colon);
    c.port = static_cast<int>(parse_int(bind.substr(colon + 1)));
    if (threshold) c.boundary.threshold = *threshold;
    for (const auto& t : tokens) {
      const auto parts = split(t, ':');
      if (parts.size() != 3 || (parts[2] != "user" && parts[2] != "clinician")) {
        throw ValidationError("--token must be TOKEN:ID:ROLE with ROLE user or clinician");
      }
      c.tokens[std::string(parts[0])] = {std::string(parts[1]),
                                         parts[2] == "clinician" ? Role::kClinician : Role::kUser};
    }
    if (!config.empty()) c = ServiceConfig::from_json(read_file(config), c);
    c.boundary.validate();
    require(c.data_dir, "--data-dir");
    if (c.tokens.empty()) throw ValidationError("at least one --token is required");
    return c;
  }

  int run(std::ostream& out_stream, std::ostream& err_stream) const {
    ServiceConfig c = resolve();
    auto log_mu = std::make_shared<std::mutex>();
    c.request_log = [log_mu, &err_stream](const std::string& line) {
      std::lock_guard lock(*log_mu);
      err_stream << line << std::endl;
    };
    // Signals are taken synchronously below; block them before any thread starts.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    Service service(c);
    HttpServer server(service, c.bind_host, c.port);
    const int port = server.start();
    out_stream << json{{"listening", c.bind_host},
                       {"port", port},
                       {"bundle_version", service.bundle_version()},
                       {"corpus_version", service.corpus_version()}}
                      .dump()
               << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
    service.wait_idle();
    return kExitOk;
  }
};

void print_error(std::ostream& err, std::string_view kind, std::string_view message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal depression screening: data, training, evaluation and service",
               "depscreen"};
  app.require_subcommand(1);

  SynthOptions synth;
  TrainOptions pretrain;
  TrainOptions train;
  EvalOptions eval;
  EvalOptions roc;
  ClassifyOptions classify_opts;
  CorpusBuildOptions corpus_build;
  CorpusAddOptions corpus_add;
  CorpusListOptions corpus_list;
  ServeOptions serve;

  Command synth_cmd(app, "synth", "Generate a seeded synthetic interview dataset");
  synth.add_to(synth_cmd);
  Command pretrain_cmd(app, "pretrain", "Contrastively pretrain both modality encoders");
  pretrain.add_to(pretrain_cmd, false);
  Command train_cmd(app, "train", "Train encoders and fusion end to end");
  train.add_to(train_cmd, true);
  Command eval_cmd(app, "eval", "Accuracy with CI, AUC and confusion matrix on a dataset");
  eval.add_to(eval_cmd, false);
  Command classify_cmd(app, "classify", "Classify one session manifest");
  classify_opts.add_to(classify_cmd);
  CLI::App* corpus = app.add_subcommand("corpus", "Build, extend or list a reference corpus");
  corpus->require_subcommand(1);
  Command build_cmd(*corpus, "build", "Select seed exemplars from a labeled dataset");
  corpus_build.add_to(build_cmd);
  Command add_cmd(*corpus, "add", "Append a clinician-confirmed exemplar");
  corpus_add.add_to(add_cmd);
  Command list_cmd(*corpus, "list", "Print corpus exemplars without embeddings");
  corpus_list.add_to(list_cmd);
  serve.add_to(app);
  Command roc_cmd(app, "roc-export", "Write the ROC table (threshold,fpr,tpr) for a dataset");
  roc.add_to(roc_cmd, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return kExitUserError;
  }

  try {
    if (synth_cmd.parsed()) {
      synth_cmd.apply_config();
      return synth.run(out);
    }
    if (pretrain_cmd.parsed()) {
      pretrain_cmd.apply_config();
      return pretrain.run(true, out);
    }
    if (train_cmd.parsed()) {
      train_cmd.apply_config();
      return train.run(false, out);
    }
    if (eval_cmd.parsed()) {
      eval_cmd.apply_config();
      return eval.run_eval(out);
    }
    if (classify_cmd.parsed()) {
      classify_cmd.apply_config();
      return classify_opts.run(out);
    }
    if (build_cmd.parsed()) {
      build_cmd.apply_config();
      return corpus_build.run(out);
    }
    if (add_cmd.parsed()) {
      add_cmd.apply_config();
      return corpus_add.run(out);
    }
    if (list_cmd.parsed()) {
      list_cmd.apply_config();
      return corpus_list.run(out);
    }
    if (roc_cmd.parsed()) {
      roc_cmd.apply_config();
      return roc.run_roc(out);
    }
    return serve.run(out, err);
  } catch (const Error& e) {
    print_error(err, e.kind(), e.what());
    return kExitUserError;
  } catch (const fs::filesystem_error& e) {
    print_error(err, "io", e.what());
    return kExitUserError;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return kExitInternalError;
  }
}

}  // namespace depscreen
