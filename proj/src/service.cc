// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/service.h"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "depscreen/checkpoint.h"
#include "depscreen/dataset.h"
#include "depscreen/errors.h"
#include "depscreen/format.h"
#include "depscreen/metrics.h"
#include "depscreen/pipeline.h"
#include "depscreen/random.h"
#include "depscreen/wire.h"

namespace depscreen {

namespace fs = std::filesystem;
using nlohmann::json;

ServiceConfig ServiceConfig::from_json(std::string_view text, ServiceConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("service config: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("service config must be a JSON object");
  static const std::set<std::string> kKeys{"data_dir", "bundle", "corpus", "threshold",
                                           "bind",     "port",   "tokens"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) throw ValidationError("unknown service config key '" + key + "'");
  }
  try {
    if (j.contains("data_dir")) base.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("bundle")) base.bundle_path = j["bundle"].get<std::string>();
    if (j.contains("corpus")) base.corpus_path = j["corpus"].get<std::string>();
    if (j.contains("threshold")) base.boundary.threshold = j["threshold"].get<double>();
    if (j.contains("bind")) base.bind_host = j["bind"].get<std::string>();
    if (j.contains("port")) base.port = j["port"].get<int>();
    if (j.contains("tokens")) {
      base.tokens.clear();
      for (const auto& t : j["tokens"]) {
        const auto role = t.at("role").get<std::string>();
        if (role != "user" && role != "clinician") {
          throw ValidationError("token role must be user or clinician");
        }
        base.tokens[t.at("token").get<std::string>()] = {
            t.at("id").get<std::string>(), role == "clinician" ? Role::kClinician : Role::kUser};
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("service config: ") + e.what());
  }
  base.boundary.validate();
  if (base.port < 0 || base.port > 65535) throw ValidationError("port out of range");
  return base;
}

namespace {

// An error with an explicit HTTP status; everything else maps by kind.
class HttpError : public std::runtime_error {
 public:
  HttpError(int status, std::string kind, const std::string& message)
      : std::runtime_error(message), status_(status), kind_(std::move(kind)) {}
  int status() const { return status_; }
  const std::string& kind() const { return kind_; }

 private:
  int status_;
  std::string kind_;
};

ApiResponse json_response(int status, const json& body) { return {status, body.dump()}; }

ApiResponse error_response(int status, std::string_view kind, std::string_view message) {
  return json_response(status, json{{"error", {{"kind", kind}, {"message", message}}}});
}

int status_for(const Error& e) {
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (dynamic_cast<const ConflictError*>(&e)) return 409;
  if (dynamic_cast<const IoError*>(&e)) return 500;
  return 400;
}

std::string sequence_id(std::string_view prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(n));
  return std::string(prefix) + buf;
}

// Numeric suffix of an id produced by sequence_id, 0 when malformed.
std::uint64_t sequence_of(const std::string& id) {
  const auto dash = id.rfind('-');
  if (dash == std::string::npos) return 0;
  try {
    return std::stoull(id.substr(dash + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  for (auto part : split(path, '/')) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

json parse_body(const std::string& body) {
  if (trim(body).empty()) return json::object();
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw HttpError(400, "validation", "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw HttpError(400, "parse", std::string("malformed JSON body: ") + e.what());
  }
}

void reject_unknown_keys(const json& body, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : body.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw HttpError(400, "validation", "unknown field '" + key + "'");
    }
  }
}

template <typename T>
std::optional<T> optional_field(const json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return std::nullopt;
  try {
    return body[key].get<T>();
  } catch (const json::exception&) {
    throw HttpError(400, "validation", std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T required_field(const json& body, const char* key) {
  auto v = optional_field<T>(body, key);
  if (!v) throw HttpError(400, "validation", std::string("missing field '") + key + "'");
  return *std::move(v);
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to " + path.string());
  out << line << '\n';
  out.flush();
  if (!out) throw IoError("short write to " + path.string());
}

// Calls `apply` on every JSON line of `path` (absent file: no lines).
template <typename F>
void replay_lines(const fs::path& path, F&& apply) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      apply(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
}

std::string bundle_file_name(std::uint64_t version) {
  return "bundle-v" + std::to_string(version) + ".ckpt";
}

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct Snapshot {
  std::shared_ptr<const ModelBundle> bundle;
  std::shared_ptr<const ReferenceCorpus> corpus;
};

struct SessionRecord {
  // Persisted.
  std::string id;
  std::string owner;
  std::string idempotency_key;
  std::string external_id;
  bool consent = false;
  std::optional<int> phq8;
  std::int64_t submitted_at_ms = 0;
  json payload;
  std::string status = "received";  // received | processed | failed
  std::optional<Prediction> prediction;
  std::uint64_t bundle_version = 0;
  std::uint64_t corpus_version = 0;
  std::int64_t classified_at_ms = 0;
  json error;  // null or {kind, message}
  std::vector<std::string> warnings;
  // Derived on demand from the payload.
  std::shared_ptr<const PreparedSession> prepared;

  json persisted() const {
    return json{{"id", id},
                {"owner", owner},
                {"idempotency_key", idempotency_key},
                {"external_id", external_id},
                {"consent", consent},
                {"phq8", phq8 ? json(*phq8) : json(nullptr)},
                {"submitted_at_ms", submitted_at_ms},
                {"payload", payload},
                {"status", status},
                {"prediction", prediction ? prediction_to_json(*prediction) : json(nullptr)},
                {"bundle_version", bundle_version},
                {"corpus_version", corpus_version},
                {"classified_at_ms", classified_at_ms},
                {"error", error},
                {"warnings", warnings}};
  }
};

struct Job {
  json record;  // last persisted state
  std::vector<double> live_history;
};

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  fs::path dir;

  mutable std::mutex mu;  // guards everything below
  std::condition_variable work_cv;
  std::condition_variable idle_cv;
  Snapshot snap;
  std::map<std::string, SessionRecord> sessions;
  std::map<std::string, std::string> idempotency;  // owner \n key -> session id
  std::uint64_t last_session = 0;
  std::deque<std::string> queue;
  bool worker_busy = false;
  bool stopping = false;
  bool paused = false;
  std::map<std::string, json> questionnaires;
  std::uint64_t last_questionnaire = 0;
  std::map<std::string, Job> jobs;
  std::uint64_t last_job = 0;
  std::optional<std::string> active_job;
  std::map<std::string, json> metrics_cache;

  // Serializes corpus mutations and snapshot publication.
  std::mutex corpus_mu;

  std::thread worker;
  std::thread job_thread;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    if (config.data_dir.empty()) throw ValidationError("service needs a data directory");
    config.boundary.validate();
    if (!config.clock) config.clock = system_clock_ms;
    dir = config.data_dir;
    fs::create_directories(dir / "bundles");
    fs::create_directories(dir / "evalsets");
    restore();
    worker = std::thread([this] { worker_loop(); });
  }

  ~Impl() {
    {
      std::lock_guard lock(mu);
      stopping = true;
    }
    work_cv.notify_all();
    if (worker.joinable()) worker.join();
    if (job_thread.joinable()) job_thread.join();
  }

  fs::path sessions_log() const { return dir / "sessions.jsonl"; }
  fs::path corpus_log() const { return dir / "corpus.jsonl"; }
  fs::path questionnaires_log() const { return dir / "questionnaires.jsonl"; }
  fs::path jobs_log() const { return dir / "jobs.jsonl"; }
  fs::path bundle_path(std::uint64_t v) const { return dir / "bundles" / bundle_file_name(v); }

  Snapshot snapshot() const {
    std::lock_guard lock(mu);
    return snap;
  }

  // ---- startup -----------------------------------------------------------

  void restore() {
    std::set<std::uint64_t> on_disk;
    for (const auto& entry : fs::directory_iterator(dir / "bundles")) {
      static const std::regex kName(R"(bundle-v(\d+)\.ckpt)");
      std::smatch m;
      const std::string name = entry.path().filename().string();
      if (std::regex_match(name, m, kName)) on_disk.insert(std::stoull(m[1].str()));
    }
    if (on_disk.empty()) {
      if (config.bundle_path.empty()) {
        throw ValidationError("data directory has no model bundle and none was given");
      }
      const ModelBundle seed = load_bundle(config.bundle_path);
      save_bundle(seed, bundle_path(seed.version).string());
      on_disk.insert(seed.version);
    }
    if (!fs::exists(corpus_log())) {
      std::string contents;
      if (!config.corpus_path.empty()) {
        contents = read_file(config.corpus_path);
        std::istringstream check(contents);
        replay_corpus_log(check);
      }
      write_file_atomic(corpus_log().string(), contents);
    }
    auto corpus = std::make_shared<ReferenceCorpus>(load_corpus(corpus_log().string()));

    std::uint64_t current = *on_disk.begin();
    replay_lines(jobs_log(), [&](const json& r) { apply_job_record(r); });
    for (const auto& [id, job] : jobs) {
      if (job.record.value("status", "") == "done") {
        const auto v = job.record.at("bundle_version").get<std::uint64_t>();
        if (on_disk.contains(v)) current = std::max(current, v);
      }
    }
    // A retrain that rebased the corpus but crashed before its job record.
    if (on_disk.contains(corpus->bundle_version())) {
      current = std::max(current, corpus->bundle_version());
    }
    auto bundle = std::make_shared<ModelBundle>(load_bundle(bundle_path(current).string()));
    bundle->version = current;
    snap = {std::move(bundle), std::move(corpus)};

    for (auto& [id, job] : jobs) {
      const auto status = job.record.value("status", "");
      if (status == "queued" || status == "running") {
        json r = job.record;
        r["status"] = "failed";
        r["error"] = {{"kind", "interrupted"}, {"message", "service restarted during the job"}};
        r["finished_at_ms"] = config.clock();
        append_line(jobs_log(), r.dump());
        apply_job_record(r);
      }
    }

    replay_lines(sessions_log(), [&](const json& r) { apply_session_record(r); });
    replay_lines(questionnaires_log(), [&](const json& r) { apply_questionnaire_record(r); });
    for (const auto& [id, s] : sessions) {
      if (s.status == "received") queue.push_back(id);
    }
  }

  // ---- record application (shared by live writes and replay) --------------

  void apply_session_record(const json& r) {
    const auto op = r.at("op").get<std::string>();
    const auto id = r.at("id").get<std::string>();
    if (op == "submit") {
      SessionRecord s;
      s.id = id;
      s.owner = r.at("owner").get<std::string>();
      s.idempotency_key = r.value("idempotency_key", "");
      s.external_id = r.value("external_id", "");
      s.consent = r.at("consent").get<bool>();
      if (!r.at("phq8").is_null()) s.phq8 = r.at("phq8").get<int>();
      s.submitted_at_ms = r.at("submitted_at_ms").get<std::int64_t>();
      s.payload = r.at("payload");
      if (!s.idempotency_key.empty()) idempotency[s.owner + "\n" + s.idempotency_key] = id;
      last_session = std::max(last_session, sequence_of(id));
      sessions[id] = std::move(s);
      return;
    }
    auto it = sessions.find(id);
    if (it == sessions.end()) throw ParseError("session log references unknown session " + id);
    SessionRecord& s = it->second;
    if (op == "result") {
      s.status = r.at("status").get<std::string>();
      s.prediction.reset();
      if (!r.at("prediction").is_null()) s.prediction = prediction_from_json(r.at("prediction"));
      s.bundle_version = r.at("bundle_version").get<std::uint64_t>();
      s.corpus_version = r.at("corpus_version").get<std::uint64_t>();
      s.classified_at_ms = r.at("at_ms").get<std::int64_t>();
      s.error = r.at("error");
      s.warnings = r.at("warnings").get<std::vector<std::string>>();
    } else {
      throw ParseError("unknown session log op '" + op + "'");
    }
  }

  void apply_questionnaire_record(const json& r) {
    const auto op = r.at("op").get<std::string>();
    if (op == "put") {
      const json& q = r.at("questionnaire");
      const auto id = q.at("id").get<std::string>();
      last_questionnaire = std::max(last_questionnaire, sequence_of(id));
      questionnaires[id] = q;
    } else if (op == "delete") {
      questionnaires.erase(r.at("id").get<std::string>());
    } else {
      throw ParseError("unknown questionnaire log op '" + op + "'");
    }
  }

  void apply_job_record(const json& r) {
    const auto id = r.at("id").get<std::string>();
    last_job = std::max(last_job, sequence_of(id));
    jobs[id].record = r;
  }

  // Appends then applies; caller holds `mu`.
  void commit_session(const json& r) {
    append_line(sessions_log(), r.dump());
    apply_session_record(r);
  }
  void commit_job(const json& r) {
    append_line(jobs_log(), r.dump());
    apply_job_record(r);
  }

  // ---- session processing -------------------------------------------------

  static SessionPayload payload_of(const SessionRecord& s) {
    SessionPayload p;
    p.session_id = s.id;
    p.visual_csv = s.payload.at("visual_csv").get<std::string>();
    p.audio_csv = s.payload.at("audio_csv").get<std::string>();
    p.transcript_tsv = s.payload.at("transcript_tsv").get<std::string>();
    if (s.payload.contains("text_embedding")) {
      p.text_embedding = s.payload.at("text_embedding").get<std::vector<double>>();
    }
    p.phq8 = s.phq8;
    return p;
  }

  // Prepared inputs of a stored session, parsed once and cached.
  std::shared_ptr<const PreparedSession> prepared_for(const std::string& id,
                                                      const ModelConfig& model) {
    SessionPayload payload;
    {
      std::lock_guard lock(mu);
      const SessionRecord& s = sessions.at(id);
      if (s.prepared) return s.prepared;
      payload = payload_of(s);
    }
    auto prepared =
        std::make_shared<PreparedSession>(prepare_session(parse_session_payload(payload, model), model));
    std::lock_guard lock(mu);
    sessions.at(id).prepared = prepared;
    return prepared;
  }

  json result_record(const std::string& id, const std::string& status,
                     const std::optional<Prediction>& prediction, const Snapshot& s,
                     const json& error, const std::vector<std::string>& warnings) {
    return json{{"op", "result"},
                {"id", id},
                {"status", status},
                {"prediction", prediction ? prediction_to_json(*prediction) : json(nullptr)},
                {"bundle_version", s.bundle->version},
                {"corpus_version", s.corpus->version()},
                {"at_ms", config.clock()},
                {"error", error},
                {"warnings", warnings}};
  }

  // Classifies with one consistent snapshot and persists the outcome.
  void classify_and_record(const std::string& id) {
    const Snapshot s = snapshot();
    json record;
    try {
      const auto prepared = prepared_for(id, s.bundle->config);
      const Prediction p = classify_input(*s.bundle, *s.corpus, prepared->input, config.boundary);
      record = result_record(id, "processed", p, s, nullptr, prepared->warnings);
    } catch (const Error& e) {
      record = result_record(id, "failed", std::nullopt, s,
                             json{{"kind", e.kind()}, {"message", e.what()}}, {});
    }
    std::lock_guard lock(mu);
    commit_session(record);
  }

  void worker_loop() {
    for (;;) {
      std::string id;
      {
        std::unique_lock lock(mu);
        work_cv.wait(lock, [&] { return stopping || (!paused && !queue.empty()); });
        if (stopping) return;
        id = queue.front();
        queue.pop_front();
        worker_busy = true;
      }
      try {
        classify_and_record(id);
      } catch (const std::exception&) {
        // Log write failure: the session stays received and is retried on restart.
      }
      {
        std::lock_guard lock(mu);
        worker_busy = false;
      }
      idle_cv.notify_all();
    }
  }

  void wait_idle() {
    std::unique_lock lock(mu);
    idle_cv.wait(lock, [&] {
      return stopping ||
             ((queue.empty() || paused) && !worker_busy && !active_job.has_value());
    });
  }

  void set_paused(bool value) {
    {
      std::lock_guard lock(mu);
      paused = value;
    }
    work_cv.notify_all();
    idle_cv.notify_all();
  }

  // ---- views --------------------------------------------------------------

  json session_view(const SessionRecord& s, const ReferenceCorpus& corpus) const {
    json v{{"id", s.id},
           {"status", s.status},
           {"pending", s.status == "received"},
           {"external_id", s.external_id},
           {"consent", s.consent},
           {"submitted_at_ms", s.submitted_at_ms}};
    if (s.status == "received") return v;
    v["bundle_version"] = s.bundle_version;
    v["corpus_version"] = s.corpus_version;
    v["classified_at_ms"] = s.classified_at_ms;
    v["warnings"] = s.warnings;
    if (!s.error.is_null()) v["error"] = s.error;
    if (s.prediction) {
      json p = prediction_to_json(*s.prediction);
      json nearest = json::array();
      for (int k = 0; k < kNumClasses; ++k) {
        const auto& eid = s.prediction->nearest_ids[static_cast<std::size_t>(k)];
        const Exemplar* e = corpus.find(eid);
        nearest.push_back({{"class", k},
                           {"exemplar_id", eid},
                           {"similarity", s.prediction->class_similarity[static_cast<std::size_t>(k)]},
                           {"excerpt", e ? json(e->excerpt) : json(nullptr)},
                           {"provenance", e ? json(provenance_name(e->provenance)) : json(nullptr)}});
      }
      p["nearest"] = std::move(nearest);
      v["prediction"] = std::move(p);
    }
    return v;
  }

  // ---- request handling ---------------------------------------------------

  Principal authenticate(const ApiRequest& req) const {
    constexpr std::string_view kBearer = "Bearer ";
    const std::string_view h = trim(req.authorization);
    if (!h.starts_with(kBearer)) {
      throw HttpError(401, "unauthorized", "missing bearer token");
    }
    const auto it = config.tokens.find(std::string(trim(h.substr(kBearer.size()))));
    if (it == config.tokens.end()) throw HttpError(401, "unauthorized", "unknown token");
    return it->second;
  }

  static void require_clinician(const Principal& p) {
    if (p.role != Role::kClinician) {
      throw HttpError(403, "forbidden", "this operation requires a clinician");
    }
  }

  ApiResponse route(const ApiRequest& req, std::string& principal_id) {
    const auto parts = split_path(req.path);
    const std::string& m = req.method;
    if (parts.size() == 1 && parts[0] == "healthz" && m == "GET") {
      const Snapshot s = snapshot();
      return json_response(200, json{{"status", "ok"},
                                     {"bundle_version", s.bundle->version},
                                     {"corpus_version", s.corpus->version()}});
    }
    const Principal who = authenticate(req);
    principal_id = who.id;
    if (parts.empty()) throw HttpError(404, "not_found", "no such route");
    const std::string& head = parts[0];

    if (head == "sessions") {
      if (parts.size() == 1 && m == "POST") return submit(who, req);
      if (parts.size() == 1 && m == "GET") return list_sessions(who);
      if (parts.size() == 2 && m == "GET") return get_session(who, parts[1]);
      if (parts.size() == 3 && parts[2] == "reclassify" && m == "POST") {
        require_clinician(who);
        return reclassify(parts[1]);
      }
    } else if (head == "triage" && parts.size() == 1 && m == "GET") {
      require_clinician(who);
      return triage(req);
    } else if (head == "corpus") {
      require_clinician(who);
      if (parts.size() == 1 && m == "GET") return get_corpus(req);
      if (parts.size() == 2 && parts[1] == "exemplars" && m == "POST") {
        return add_exemplar(who, req);
      }
    } else if (head == "retrain") {
      require_clinician(who);
      if (parts.size() == 1 && m == "POST") return start_retrain(who, req);
      if (parts.size() == 2 && m == "GET") return get_job(parts[1]);
    } else if (head == "metrics") {
      require_clinician(who);
      if (parts.size() == 1 && m == "GET") return list_eval_sets();
      if (parts.size() == 2 && m == "GET") return metrics(parts[1], req);
    } else if (head == "questionnaires") {
      require_clinician(who);
      if (parts.size() == 1 && m == "GET") return list_questionnaires(who);
      if (parts.size() == 1 && m == "POST") return put_questionnaire(who, std::nullopt, req);
      if (parts.size() == 2 && m == "GET") return get_questionnaire(who, parts[1]);
      if (parts.size() == 2 && m == "PUT") return put_questionnaire(who, parts[1], req);
      if (parts.size() == 2 && m == "DELETE") return delete_questionnaire(who, parts[1]);
    }
    throw HttpError(404, "not_found", "no route for " + m + " " + req.path);
  }

  ApiResponse submit(const Principal& who, const ApiRequest& req) {
    const json body = parse_body(req.body);
    reject_unknown_keys(body, {"idempotency_key", "consent", "phq8", "visual_csv", "audio_csv",
                               "transcript_tsv", "text_embedding", "external_id"});
    const auto key = optional_field<std::string>(body, "idempotency_key").value_or("");
    const bool consent = required_field<bool>(body, "consent");
    const auto phq8 = optional_field<int>(body, "phq8");
    if (phq8) phq8_to_label(*phq8);
    json payload{{"visual_csv", required_field<std::string>(body, "visual_csv")},
                 {"audio_csv", required_field<std::string>(body, "audio_csv")},
                 {"transcript_tsv", required_field<std::string>(body, "transcript_tsv")}};
    if (auto t = optional_field<std::vector<double>>(body, "text_embedding")) {
      payload["text_embedding"] = *t;
    }
    const auto external = optional_field<std::string>(body, "external_id").value_or("");

    if (!key.empty()) {
      std::lock_guard lock(mu);
      if (auto it = idempotency.find(who.id + "\n" + key); it != idempotency.end()) {
        return json_response(200, json{{"id", it->second}, {"duplicate", true}});
      }
    }

    // Parse before taking an id so malformed payloads cost no lock time.
    const Snapshot s = snapshot();
    std::shared_ptr<PreparedSession> prepared;
    json failure;
    {
      SessionRecord probe;
      probe.payload = payload;
      probe.phq8 = phq8;
      try {
        prepared = std::make_shared<PreparedSession>(
            prepare_session(parse_session_payload(payload_of(probe), s.bundle->config),
                            s.bundle->config));
        if (!prepared->usable) {
          std::string why;
          for (const auto& w : prepared->warnings) why += (why.empty() ? "" : "; ") + w;
          failure = {{"kind", "unusable"}, {"message", "session is unusable: " + why}};
        }
      } catch (const Error& e) {
        failure = {{"kind", e.kind()}, {"message", e.what()}};
      }
    }

    std::unique_lock lock(mu);
    if (!key.empty()) {
      if (auto it = idempotency.find(who.id + "\n" + key); it != idempotency.end()) {
        return json_response(200, json{{"id", it->second}, {"duplicate", true}});
      }
    }
    const std::string id = sequence_id("s-", last_session + 1);
    commit_session(json{{"op", "submit"},
                        {"id", id},
                        {"owner", who.id},
                        {"idempotency_key", key},
                        {"external_id", external},
                        {"consent", consent},
                        {"phq8", phq8 ? json(*phq8) : json(nullptr)},
                        {"submitted_at_ms", config.clock()},
                        {"payload", std::move(payload)}});
    if (!failure.is_null()) {
      commit_session(result_record(id, "failed", std::nullopt, s, failure,
                                   prepared ? prepared->warnings : std::vector<std::string>{}));
      return json_response(422, json{{"id", id}, {"status", "failed"}, {"error", failure}});
    }
    prepared->input.id = id;
    sessions.at(id).prepared = std::move(prepared);
    queue.push_back(id);
    lock.unlock();
    work_cv.notify_one();
    return json_response(202, json{{"id", id}, {"status", "received"}});
  }

  ApiResponse list_sessions(const Principal& who) const {
    std::lock_guard lock(mu);
    json out = json::array();
    for (const auto& [id, s] : sessions) {
      if (who.role != Role::kClinician && s.owner != who.id) continue;
      out.push_back({{"id", id}, {"status", s.status}, {"submitted_at_ms", s.submitted_at_ms}});
    }
    return json_response(200, json{{"sessions", std::move(out)}});
  }

  const SessionRecord& visible_session(const Principal& who, const std::string& id) const {
    const auto it = sessions.find(id);
    if (it == sessions.end() || (who.role != Role::kClinician && it->second.owner != who.id)) {
      throw NotFoundError("no session '" + id + "'");
    }
    return it->second;
  }

  ApiResponse get_session(const Principal& who, const std::string& id) const {
    const Snapshot s = snapshot();
    std::lock_guard lock(mu);
    const SessionRecord& rec = visible_session(who, id);
    return json_response(rec.status == "received" ? 202 : 200, session_view(rec, *s.corpus));
  }

  ApiResponse reclassify(const std::string& id) {
    {
      std::lock_guard lock(mu);
      const auto it = sessions.find(id);
      if (it == sessions.end()) throw NotFoundError("no session '" + id + "'");
      if (it->second.status == "received") {
        throw ConflictError("session " + id + " has not been processed yet");
      }
    }
    classify_and_record(id);
    const Snapshot s = snapshot();
    std::lock_guard lock(mu);
    return json_response(200, session_view(sessions.at(id), *s.corpus));
  }

  ApiResponse triage(const ApiRequest& req) const {
    std::vector<TriageEntry> entries;
    std::map<std::string, const SessionRecord*> by_id;
    std::lock_guard lock(mu);
    for (const auto& [id, s] : sessions) {
      if (s.status != "processed" || !s.prediction) continue;
      entries.push_back({id, *s.prediction});
      by_id[id] = &s;
    }
    std::size_t limit = entries.size();
    if (auto it = req.query.find("limit"); it != req.query.end()) {
      limit = static_cast<std::size_t>(parse_int(it->second));
    }
    json out = json::array();
    for (const auto& e : triage_rank(std::move(entries))) {
      if (out.size() >= limit) break;
      const SessionRecord& s = *by_id.at(e.session_id);
      json row = prediction_to_json(e.prediction);
      row["id"] = e.session_id;
      row["external_id"] = s.external_id;
      row["submitted_at_ms"] = s.submitted_at_ms;
      row["bundle_version"] = s.bundle_version;
      row["corpus_version"] = s.corpus_version;
      out.push_back(std::move(row));
    }
    return json_response(200, json{{"sessions", std::move(out)}});
  }

  static json corpus_view(const ReferenceCorpus& c, bool embeddings) {
    json list = json::array();
    for (const auto& e : c.exemplars()) {
      json j = exemplar_summary_json(e);
      if (embeddings) j["embedding"] = e.embedding;
      list.push_back(std::move(j));
    }
    return json{{"version", c.version()},
                {"bundle_version", c.bundle_version()},
                {"class_counts", c.class_counts()},
                {"exemplars", std::move(list)}};
  }

  ApiResponse get_corpus(const ApiRequest& req) {
    const bool embeddings = req.query.contains("embeddings") && req.query.at("embeddings") == "1";
    const Snapshot s = snapshot();
    if (auto it = req.query.find("version"); it != req.query.end()) {
      const auto v = static_cast<std::uint64_t>(parse_int(it->second));
      if (v > s.corpus->version()) throw NotFoundError("no corpus version " + it->second);
      std::lock_guard guard(corpus_mu);
      return json_response(200, corpus_view(load_corpus(corpus_log().string(), v), embeddings));
    }
    return json_response(200, corpus_view(*s.corpus, embeddings));
  }

  ApiResponse add_exemplar(const Principal& who, const ApiRequest& req) {
    const json body = parse_body(req.body);
    reject_unknown_keys(body, {"session_id", "label"});
    const auto session_id = required_field<std::string>(body, "session_id");
    const int label = required_field<int>(body, "label");
    require_valid_label(label);
    {
      std::lock_guard lock(mu);
      const auto it = sessions.find(session_id);
      if (it == sessions.end()) throw NotFoundError("no session '" + session_id + "'");
      if (it->second.status != "processed") {
        throw ConflictError("session " + session_id + " is not processed");
      }
    }
    std::lock_guard guard(corpus_mu);
    const Snapshot s = snapshot();
    const auto prepared = prepared_for(session_id, s.bundle->config);
    auto next = std::make_shared<ReferenceCorpus>(*s.corpus);
    Exemplar e;
    e.id = session_id + "@v" + std::to_string(next->version() + 1);
    e.embedding = embed_session(*s.bundle, prepared->input).fused;
    e.label = label;
    e.excerpt = make_excerpt(prepared->cleaned_text);
    e.provenance = Provenance::kClinicianAdded;
    e.added_at_ms = config.clock();
    e.source = "session:" + session_id;
    const auto version = next->add(e);
    append_corpus_record(corpus_log().string(), corpus_add_record(e, version, s.bundle->version));
    {
      std::lock_guard lock(mu);
      snap.corpus = next;
    }
    json view = exemplar_summary_json(e);
    view["added_by"] = who.id;
    return json_response(201, json{{"corpus_version", version}, {"exemplar", std::move(view)}});
  }

  // ---- retraining ---------------------------------------------------------

  ApiResponse start_retrain(const Principal& who, const ApiRequest& req) {
    const json body = parse_body(req.body);
    reject_unknown_keys(body, {"epochs", "margin", "seed", "learning_rate"});
    const Snapshot s = snapshot();
    TrainConfig train = s.bundle->config.fusion_train;
    if (auto v = optional_field<std::size_t>(body, "epochs")) train.epochs = *v;
    if (train.epochs == 0) throw ValidationError("retraining needs at least one epoch");
    if (auto v = optional_field<double>(body, "margin")) train.margin = *v;
    if (auto v = optional_field<double>(body, "learning_rate")) train.adam.learning_rate = *v;
    train.validate();

    std::unique_lock lock(mu);
    if (active_job) throw ConflictError("retrain job " + *active_job + " is still running");
    const std::string id = sequence_id("job-", last_job + 1);
    train.seed = optional_field<std::uint64_t>(body, "seed").value_or(derive_seed(last_job + 1, 7));
    json record{{"id", id},
                {"status", "running"},
                {"requested_by", who.id},
                {"created_at_ms", config.clock()},
                {"base_bundle_version", s.bundle->version},
                {"epochs", train.epochs},
                {"margin", train.margin},
                {"seed", train.seed}};
    commit_job(record);
    active_job = id;
    if (job_thread.joinable()) job_thread.join();
    job_thread = std::thread([this, id, train, record] { run_job(id, train, record); });
    return json_response(202, record);
  }

  // Consented labeled sessions plus sessions a clinician added to the corpus,
  // the latter with the clinician's label.
  std::vector<SessionInput> training_inputs(const Snapshot& s, std::size_t& from_consent,
                                            std::size_t& from_corpus) {
    std::map<std::string, int> labels;
    {
      std::lock_guard lock(mu);
      for (const auto& [id, rec] : sessions) {
        if (rec.status == "processed" && rec.consent && rec.phq8) {
          labels[id] = phq8_to_label(*rec.phq8);
          ++from_consent;
        }
      }
    }
    for (const auto& e : s.corpus->exemplars()) {
      if (e.provenance != Provenance::kClinicianAdded || !e.source.starts_with("session:")) {
        continue;
      }
      if (!labels.contains(e.source.substr(8))) ++from_corpus;
      labels[e.source.substr(8)] = e.label;
    }
    std::vector<SessionInput> out;
    for (const auto& [id, label] : labels) {
      SessionInput in = prepared_for(id, s.bundle->config)->input;
      in.label = label;
      out.push_back(std::move(in));
    }
    return out;
  }

  SessionInput exemplar_input(const Exemplar& e, const ModelConfig& model) {
    if (e.source.starts_with("session:")) {
      const std::string id = e.source.substr(8);
      {
        std::lock_guard lock(mu);
        if (!sessions.contains(id)) throw NotFoundError("exemplar source " + e.source + " is gone");
      }
      return prepared_for(id, model)->input;
    }
    if (e.source.empty()) throw ValidationError("exemplar " + e.id + " has no source to re-embed");
    return load_prepared(e.source, model).prepared.input;
  }

  void run_job(const std::string& id, const TrainConfig& train, json record) {
    try {
      const Snapshot s = snapshot();
      std::size_t from_consent = 0;
      std::size_t from_corpus = 0;
      const auto inputs = training_inputs(s, from_consent, from_corpus);
      record["training_sessions"] = inputs.size();
      record["consented_sessions"] = from_consent;
      record["clinician_sessions"] = from_corpus;
      FusionResult fused = train_fusion(*s.bundle, inputs, train, [&](std::size_t, double loss) {
        std::lock_guard lock(mu);
        jobs[id].live_history.push_back(loss);
      });
      ModelBundle next = std::move(fused.bundle);
      std::uint64_t version = 0;
      {
        std::lock_guard guard(corpus_mu);
        const Snapshot now = snapshot();
        version = now.bundle->version + 1;
        next.version = version;
        next.config.fusion_train = train;
        next.metadata.fusion_epochs = train.epochs;
        next.metadata.seed = train.seed;
        if (!fused.loss_history.empty()) next.metadata.final_loss = fused.loss_history.back();
        auto bundle = std::make_shared<const ModelBundle>(std::move(next));
        auto reembedded = reembed_exemplars(*bundle, *now.corpus, [&](const Exemplar& e) {
          return exemplar_input(e, bundle->config);
        });
        auto corpus = std::make_shared<ReferenceCorpus>(*now.corpus);
        const auto corpus_version = corpus->rebase(std::move(reembedded), version);
        save_bundle(*bundle, bundle_path(version).string());
        append_corpus_record(corpus_log().string(),
                             corpus_rebase_record(corpus->exemplars(), corpus_version, version,
                                                  config.clock()));
        record["status"] = "done";
        record["bundle_version"] = version;
        record["corpus_version"] = corpus_version;
        record["loss_history"] = fused.loss_history;
        record["warnings"] = fused.warnings;
        record["finished_at_ms"] = config.clock();
        std::lock_guard lock(mu);
        snap = {std::move(bundle), std::move(corpus)};
        commit_job(record);
        active_job.reset();
      }
    } catch (const std::exception& e) {
      const auto* err = dynamic_cast<const Error*>(&e);
      record["status"] = "failed";
      record["error"] = {{"kind", err ? err->kind() : "internal"}, {"message", e.what()}};
      record["finished_at_ms"] = config.clock();
      std::lock_guard lock(mu);
      try {
        commit_job(record);
      } catch (const std::exception&) {
        apply_job_record(record);
      }
      active_job.reset();
    }
    idle_cv.notify_all();
  }

  ApiResponse get_job(const std::string& id) const {
    std::lock_guard lock(mu);
    const auto it = jobs.find(id);
    if (it == jobs.end()) throw NotFoundError("no retrain job '" + id + "'");
    json view = it->second.record;
    if (view.value("status", "") == "running") view["loss_history"] = it->second.live_history;
    return json_response(200, view);
  }

  // ---- metrics ------------------------------------------------------------

  ApiResponse list_eval_sets() const {
    json out = json::array();
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir / "evalsets")) {
      if (fs::exists(entry.path() / "dataset.json")) names.push_back(entry.path().filename());
    }
    std::sort(names.begin(), names.end());
    for (auto& n : names) out.push_back(std::move(n));
    return json_response(200, json{{"eval_sets", std::move(out)}});
  }

  ApiResponse metrics(const std::string& eval_id, const ApiRequest& req) {
    static const std::regex kId(R"([A-Za-z0-9_.-]+)");
    if (!std::regex_match(eval_id, kId) || eval_id.starts_with(".")) {
      throw ValidationError("bad evaluation set name '" + eval_id + "'");
    }
    const std::string split_name = req.query.contains("split") ? req.query.at("split") : "all";
    const SplitSelection split = parse_split(split_name);
    const fs::path root = dir / "evalsets" / eval_id;
    if (!fs::exists(root / "dataset.json")) throw NotFoundError("no evaluation set '" + eval_id + "'");
    const Snapshot s = snapshot();
    const std::string key = eval_id + "|" + split_name + "|" + std::to_string(s.bundle->version) +
                            "|" + std::to_string(s.corpus->version());
    {
      std::lock_guard lock(mu);
      if (auto it = metrics_cache.find(key); it != metrics_cache.end()) {
        return json_response(200, it->second);
      }
    }
    const DatasetEvaluation ev =
        evaluate_dataset(*s.bundle, *s.corpus, load_dataset_index(root.string()), split,
                         config.boundary);
    json out = json::parse(evaluation_to_json(ev.report));
    out["eval_set"] = eval_id;
    out["split"] = split_name;
    out["excluded"] = ev.excluded;
    out["bundle_version"] = s.bundle->version;
    out["corpus_version"] = s.corpus->version();
    std::lock_guard lock(mu);
    metrics_cache[key] = out;
    return json_response(200, out);
  }

  // ---- questionnaires -----------------------------------------------------

  const json& owned_questionnaire(const Principal& who, const std::string& id) const {
    const auto it = questionnaires.find(id);
    if (it == questionnaires.end() || it->second.at("owner") != who.id) {
      throw NotFoundError("no questionnaire '" + id + "'");
    }
    return it->second;
  }

  ApiResponse list_questionnaires(const Principal& who) const {
    std::lock_guard lock(mu);
    json out = json::array();
    for (const auto& [id, q] : questionnaires) {
      if (q.at("owner") == who.id) out.push_back(q);
    }
    return json_response(200, json{{"questionnaires", std::move(out)}});
  }

  ApiResponse get_questionnaire(const Principal& who, const std::string& id) const {
    std::lock_guard lock(mu);
    return json_response(200, owned_questionnaire(who, id));
  }

  ApiResponse put_questionnaire(const Principal& who, const std::optional<std::string>& id,
                                const ApiRequest& req) {
    const json body = parse_body(req.body);
    reject_unknown_keys(body, {"title", "questions"});
    const auto title = optional_field<std::string>(body, "title").value_or("");
    const auto questions = required_field<std::vector<std::string>>(body, "questions");
    if (questions.empty()) throw ValidationError("a questionnaire needs at least one question");
    for (const auto& q : questions) {
      if (trim(q).empty()) throw ValidationError("questions must not be blank");
    }
    std::lock_guard lock(mu);
    const std::int64_t now = config.clock();
    json q;
    if (id) {
      q = owned_questionnaire(who, *id);
    } else {
      q = {{"id", sequence_id("q-", last_questionnaire + 1)},
           {"owner", who.id},
           {"created_at_ms", now}};
    }
    q["title"] = title;
    q["questions"] = questions;
    q["updated_at_ms"] = now;
    const json record{{"op", "put"}, {"questionnaire", q}};
    append_line(questionnaires_log(), record.dump());
    apply_questionnaire_record(record);
    return json_response(id ? 200 : 201, q);
  }

  ApiResponse delete_questionnaire(const Principal& who, const std::string& id) {
    std::lock_guard lock(mu);
    owned_questionnaire(who, id);
    const json record{{"op", "delete"}, {"id", id}, {"at_ms", config.clock()}};
    append_line(questionnaires_log(), record.dump());
    apply_questionnaire_record(record);
    return json_response(200, json{{"id", id}, {"deleted", true}});
  }

  // ---- entry point --------------------------------------------------------

  ApiResponse handle(const ApiRequest& req) {
    const auto started = std::chrono::steady_clock::now();
    std::string principal_id;
    ApiResponse res;
    try {
      res = route(req, principal_id);
    } catch (const HttpError& e) {
      res = error_response(e.status(), e.kind(), e.what());
    } catch (const Error& e) {
      res = error_response(status_for(e), e.kind(), e.what());
    } catch (const json::exception& e) {
      res = error_response(400, "validation", e.what());
    } catch (const std::exception& e) {
      res = error_response(500, "internal", e.what());
    }
    if (config.request_log) {
      const auto elapsed = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - started)
                               .count();
      config.request_log(json{{"ts_ms", config.clock()},
                              {"method", req.method},
                              {"path", req.path},
                              {"status", res.status},
                              {"principal", principal_id},
                              {"duration_ms", elapsed}}
                             .dump());
    }
    return res;
  }

  std::string state_digest() const {
    const Snapshot s = snapshot();
    std::lock_guard lock(mu);
    json state;
    state["bundle_version"] = s.bundle->version;
    state["corpus"] = corpus_view(*s.corpus, true);
    json list = json::object();
    for (const auto& [id, rec] : sessions) list[id] = rec.persisted();
    state["sessions"] = std::move(list);
    state["questionnaires"] = questionnaires;
    json job_list = json::object();
    for (const auto& [id, job] : jobs) job_list[id] = job.record;
    state["jobs"] = std::move(job_list);
    return state.dump();
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Service::~Service() = default;

ApiResponse Service::handle(const ApiRequest& request) { return impl_->handle(request); }
void Service::wait_idle() { impl_->wait_idle(); }
void Service::set_processing_paused(bool paused) { impl_->set_paused(paused); }
std::uint64_t Service::bundle_version() const { return impl_->snapshot().bundle->version; }
std::uint64_t Service::corpus_version() const { return impl_->snapshot().corpus->version(); }
std::string Service::state_digest() const { return impl_->state_digest(); }

}  // namespace depscreen
