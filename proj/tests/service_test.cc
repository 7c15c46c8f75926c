// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/service.h"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <set>
#include <nlohmann/json.hpp>

#include "depscreen/checkpoint.h"
#include "depscreen/errors.h"
#include "depscreen/wire.h"
#include "fixture.h"

namespace depscreen {
namespace {

using nlohmann::json;
using testing::tiny_artifacts;

constexpr char kUser[] = "Bearer user-token";
constexpr char kOtherUser[] = "Bearer other-token";
constexpr char kClinician[] = "Bearer clinician-token";
constexpr char kOtherClinician[] = "Bearer clinician2-token";

ServiceConfig make_config(const std::string& data_dir) {
  const auto& a = tiny_artifacts();
  ServiceConfig c;
  c.data_dir = data_dir;
  c.bundle_path = a.bundle_path;
  c.corpus_path = a.corpus_path;
  c.tokens = {{"user-token", {"alice", Role::kUser}},
              {"other-token", {"bob", Role::kUser}},
              {"clinician-token", {"dr-lee", Role::kClinician}},
              {"clinician2-token", {"dr-kim", Role::kClinician}}};
  auto tick = std::make_shared<std::atomic<std::int64_t>>(1'000'000);
  c.clock = [tick] { return tick->fetch_add(1); };
  return c;
}

struct Reply {
  int status;
  json body;
};

Reply call(Service& s, std::string method, std::string path, std::string auth,
           const json& body = nullptr, std::map<std::string, std::string> query = {}) {
  ApiRequest r;
  r.method = std::move(method);
  r.path = std::move(path);
  r.authorization = std::move(auth);
  r.query = std::move(query);
  if (!body.is_null()) r.body = body.dump();
  const ApiResponse out = s.handle(r);
  return {out.status, json::parse(out.body)};
}

std::uint64_t base_version() { return tiny_artifacts().bundle.version; }

std::string manifest(std::size_t i) {
  const auto& a = tiny_artifacts();
  return a.index.manifest_path(a.index.session_ids.at(i));
}

std::string submit(Service& s, std::size_t i, const std::string& auth = kUser,
                   bool consent = true) {
  const Reply r = call(s, "POST", "/sessions", auth, testing::submission_body(manifest(i), consent));
  EXPECT_EQ(r.status, 202) << r.body.dump();
  return r.body.at("id").get<std::string>();
}

class ServiceTest : public ::testing::Test {
 protected:
  testing::TempDir dir_{"service"};
};

TEST_F(ServiceTest, SubmittedSessionIsClassifiedWithRecordedVersions) {
  Service s(make_config(dir_.str()));
  const std::string id = submit(s, 0);
  s.wait_idle();
  const Reply r = call(s, "GET", "/sessions/" + id, kUser);
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["status"], "processed");
  EXPECT_EQ(r.body["bundle_version"], base_version());
  EXPECT_EQ(r.body["corpus_version"], tiny_artifacts().corpus.version());

  const auto& a = tiny_artifacts();
  const LoadedSession loaded = load_prepared(manifest(0), a.bundle.config);
  const Prediction direct = classify_input(a.bundle, a.corpus, loaded.prepared.input, {});
  EXPECT_EQ(prediction_from_json(r.body["prediction"]), direct);
  ASSERT_EQ(r.body["prediction"]["nearest"].size(), 4u);
  EXPECT_TRUE(r.body["prediction"]["nearest"][0]["excerpt"].is_string());
}

TEST_F(ServiceTest, PendingSessionReturnsMarker) {
  Service s(make_config(dir_.str()));
  s.set_processing_paused(true);
  const std::string id = submit(s, 1);
  const Reply pending = call(s, "GET", "/sessions/" + id, kUser);
  EXPECT_EQ(pending.status, 202);
  EXPECT_EQ(pending.body["pending"], true);
  EXPECT_FALSE(pending.body.contains("prediction"));
  s.set_processing_paused(false);
  s.wait_idle();
  EXPECT_EQ(call(s, "GET", "/sessions/" + id, kUser).status, 200);
}

TEST_F(ServiceTest, IdempotencyKeyReturnsSameSession) {
  Service s(make_config(dir_.str()));
  json body = testing::submission_body(manifest(2));
  body["idempotency_key"] = "retry-1";
  const Reply first = call(s, "POST", "/sessions", kUser, body);
  const Reply second = call(s, "POST", "/sessions", kUser, body);
  ASSERT_EQ(first.status, 202);
  EXPECT_EQ(second.status, 200);
  EXPECT_EQ(first.body["id"], second.body["id"]);
  // Keys are scoped per submitter.
  const Reply other = call(s, "POST", "/sessions", kOtherUser, body);
  EXPECT_NE(other.body["id"], first.body["id"]);
}

TEST_F(ServiceTest, MalformedPayloadIsRejectedWithLineAndPersistedAsFailed) {
  Service s(make_config(dir_.str()));
  json body = testing::submission_body(manifest(3));
  std::string csv = body["visual_csv"];
  const auto third_line = csv.find('\n', csv.find('\n', csv.find('\n') + 1) + 1);
  const auto comma = csv.find(',', third_line);
  csv.replace(comma + 1, csv.find(',', comma + 1) - comma - 1, "nan");
  body["visual_csv"] = csv;
  const Reply r = call(s, "POST", "/sessions", kUser, body);
  ASSERT_EQ(r.status, 422) << r.body.dump();
  const std::string message = r.body["error"]["message"];
  EXPECT_NE(message.find("visual"), std::string::npos) << message;
  EXPECT_NE(message.find("line 4"), std::string::npos) << message;
  const Reply stored = call(s, "GET", "/sessions/" + r.body["id"].get<std::string>(), kUser);
  EXPECT_EQ(stored.status, 200);
  EXPECT_EQ(stored.body["status"], "failed");
}

TEST_F(ServiceTest, InvalidRequestsAreRejected) {
  Service s(make_config(dir_.str()));
  EXPECT_EQ(call(s, "GET", "/sessions/s-999999", kUser).status, 404);
  EXPECT_EQ(call(s, "POST", "/sessions", kUser, json{{"consent", true}}).status, 400);
  json extra = testing::submission_body(manifest(0));
  extra["surprise"] = 1;
  EXPECT_EQ(call(s, "POST", "/sessions", kUser, extra).status, 400);
  json bad_phq = testing::submission_body(manifest(0));
  bad_phq["phq8"] = 30;
  EXPECT_EQ(call(s, "POST", "/sessions", kUser, bad_phq).status, 400);
  ApiRequest raw{"POST", "/sessions", {}, kUser, "{not json"};
  EXPECT_EQ(s.handle(raw).status, 400);
  EXPECT_EQ(call(s, "GET", "/nowhere", kUser).status, 404);
}

TEST_F(ServiceTest, AuthenticationAndRoles) {
  std::vector<std::string> log;
  std::mutex log_mu;
  ServiceConfig config = make_config(dir_.str());
  config.request_log = [&](const std::string& line) {
    std::lock_guard lock(log_mu);
    log.push_back(line);
  };
  Service s(config);
  EXPECT_EQ(call(s, "GET", "/healthz", "").status, 200);
  EXPECT_EQ(call(s, "GET", "/triage", "").status, 401);
  EXPECT_EQ(call(s, "GET", "/triage", "Bearer nope").status, 401);
  EXPECT_EQ(call(s, "GET", "/triage", kUser).status, 403);
  EXPECT_EQ(call(s, "GET", "/triage", kClinician).status, 200);
  EXPECT_EQ(call(s, "POST", "/retrain", kUser, json::object()).status, 403);

  const std::string id = submit(s, 4);
  s.wait_idle();
  EXPECT_EQ(call(s, "GET", "/sessions/" + id, kOtherUser).status, 404);
  EXPECT_EQ(call(s, "GET", "/sessions/" + id, kClinician).status, 200);

  ASSERT_EQ(log.size(), 9u);
  const json last = json::parse(log.back());
  EXPECT_EQ(last["status"], 200);
  EXPECT_EQ(last["principal"], "dr-lee");
  EXPECT_FALSE(last.contains("body"));
}

TEST_F(ServiceTest, TriageMatchesRankingOfProcessedSessions) {
  Service s(make_config(dir_.str()));
  std::vector<TriageEntry> expected;
  for (std::size_t i = 0; i < 10; ++i) submit(s, i);
  s.wait_idle();
  const Reply list = call(s, "GET", "/sessions", kClinician);
  for (const auto& row : list.body["sessions"]) {
    const Reply one = call(s, "GET", "/sessions/" + row["id"].get<std::string>(), kClinician);
    expected.push_back({one.body["id"], prediction_from_json(one.body["prediction"])});
  }
  expected = triage_rank(expected);
  const Reply triage = call(s, "GET", "/triage", kClinician);
  ASSERT_EQ(triage.status, 200);
  ASSERT_EQ(triage.body["sessions"].size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(triage.body["sessions"][i]["id"], expected[i].session_id) << i;
  }
  const Reply limited = call(s, "GET", "/triage", kClinician, nullptr, {{"limit", "3"}});
  EXPECT_EQ(limited.body["sessions"].size(), 3u);
}

TEST_F(ServiceTest, EmptyStoreHasEmptyTriage) {
  Service s(make_config(dir_.str()));
  const Reply r = call(s, "GET", "/triage", kClinician);
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["sessions"], json::array());
}

TEST_F(ServiceTest, PredictionsReproduceFromRecordedVersions) {
  Service s(make_config(dir_.str()));
  std::map<std::string, std::size_t> source;
  for (std::size_t i = 0; i < 12; ++i) source[submit(s, i)] = i;
  s.wait_idle();
  call(s, "POST", "/corpus/exemplars", kClinician, json{{"session_id", "s-000002"}, {"label", 1}});
  ASSERT_EQ(call(s, "POST", "/retrain", kClinician, json{{"epochs", 1}}).status, 202);
  for (std::size_t i = 12; i < 16; ++i) source[submit(s, i)] = i;
  s.wait_idle();
  call(s, "POST", "/sessions/s-000004/reclassify", kClinician);

  std::set<std::pair<std::uint64_t, std::uint64_t>> versions;
  for (const auto& [id, i] : source) {
    const Reply r = call(s, "GET", "/sessions/" + id, kClinician);
    ASSERT_EQ(r.body["status"], "processed");
    const std::uint64_t bv = r.body["bundle_version"];
    const std::uint64_t cv = r.body["corpus_version"];
    versions.insert({bv, cv});
    const ModelBundle bundle =
        load_bundle((dir_.path() / "bundles" / ("bundle-v" + std::to_string(bv) + ".ckpt")).string());
    const ReferenceCorpus corpus = load_corpus((dir_.path() / "corpus.jsonl").string(), cv);
    ASSERT_EQ(corpus.version(), cv);
    const auto prepared = prepare_session(
        parse_session_payload(payload_from_manifest(load_manifest(manifest(i))), bundle.config),
        bundle.config);
    EXPECT_EQ(classify_input(bundle, corpus, prepared.input, {}),
              prediction_from_json(r.body["prediction"]))
        << id;
  }
  EXPECT_GE(versions.size(), 2u);
}

TEST_F(ServiceTest, ClinicianExemplarBumpsVersionAndMatchesExactly) {
  Service s(make_config(dir_.str()));
  const std::string id = submit(s, 5);
  s.wait_idle();
  const std::uint64_t before = s.corpus_version();

  EXPECT_EQ(call(s, "POST", "/corpus/exemplars", kClinician,
                 json{{"session_id", id}, {"label", 7}})
                .status,
            400);
  EXPECT_EQ(call(s, "POST", "/corpus/exemplars", kClinician,
                 json{{"session_id", "s-424242"}, {"label", 1}})
                .status,
            404);
  EXPECT_EQ(s.corpus_version(), before);

  const Reply added =
      call(s, "POST", "/corpus/exemplars", kClinician, json{{"session_id", id}, {"label", 3}});
  ASSERT_EQ(added.status, 201) << added.body.dump();
  EXPECT_EQ(added.body["corpus_version"], before + 1);
  EXPECT_EQ(added.body["exemplar"]["provenance"], "clinician-added");
  EXPECT_EQ(s.corpus_version(), before + 1);

  const Reply again = call(s, "POST", "/sessions/" + id + "/reclassify", kClinician);
  ASSERT_EQ(again.status, 200) << again.body.dump();
  EXPECT_NEAR(again.body["prediction"]["top_similarity"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(again.body["prediction"]["class_similarity"][3].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(again.body["corpus_version"], before + 1);

  // Earlier versions stay readable.
  const Reply old = call(s, "GET", "/corpus", kClinician, nullptr,
                         {{"version", std::to_string(before)}});
  EXPECT_EQ(old.body["version"], before);
  EXPECT_EQ(old.body["exemplars"].size(), tiny_artifacts().corpus.size());
  EXPECT_EQ(call(s, "GET", "/corpus", kClinician, nullptr, {{"version", "999"}}).status, 404);
}

TEST_F(ServiceTest, ExemplarFromUnprocessedSessionConflicts) {
  Service s(make_config(dir_.str()));
  s.set_processing_paused(true);
  const std::string id = submit(s, 6);
  EXPECT_EQ(call(s, "POST", "/corpus/exemplars", kClinician, json{{"session_id", id}, {"label", 1}})
                .status,
            409);
  EXPECT_EQ(call(s, "POST", "/sessions/" + id + "/reclassify", kClinician).status, 409);
}

TEST_F(ServiceTest, RetrainPublishesNewBundleWhileStayingResponsive) {
  Service s(make_config(dir_.str()));
  for (std::size_t i = 0; i < 16; ++i) submit(s, i);
  s.wait_idle();
  const Reply job = call(s, "POST", "/retrain", kClinician, json{{"epochs", 3}});
  ASSERT_EQ(job.status, 202) << job.body.dump();
  const std::string job_id = job.body["id"];

  EXPECT_EQ(call(s, "POST", "/retrain", kClinician, json::object()).status, 409);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(call(s, "GET", "/healthz", "").status, 200);
  const std::string during = submit(s, 20);
  EXPECT_EQ(call(s, "GET", "/triage", kClinician).status, 200);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(elapsed, 1.0);

  s.wait_idle();
  const Reply done = call(s, "GET", "/retrain/" + job_id, kClinician);
  ASSERT_EQ(done.body["status"], "done") << done.body.dump();
  EXPECT_EQ(done.body["bundle_version"], base_version() + 1);
  EXPECT_EQ(done.body["loss_history"].size(), 3u);
  EXPECT_EQ(s.bundle_version(), base_version() + 1);
  const Reply corpus = call(s, "GET", "/corpus", kClinician);
  EXPECT_EQ(corpus.body["bundle_version"], base_version() + 1);

  const std::string after = submit(s, 21);
  s.wait_idle();
  EXPECT_EQ(call(s, "GET", "/sessions/" + after, kUser).body["bundle_version"], base_version() + 1);
  const auto during_version = call(s, "GET", "/sessions/" + during, kUser).body["bundle_version"];
  EXPECT_TRUE(during_version == base_version() || during_version == base_version() + 1);
  EXPECT_EQ(call(s, "GET", "/retrain/job-999999", kClinician).status, 404);
}

TEST_F(ServiceTest, FailedRetrainKeepsPreviousBundle) {
  Service s(make_config(dir_.str()));
  // Only non-depressed sessions carry consent: a single class cannot train.
  const auto& a = tiny_artifacts();
  std::size_t submitted = 0;
  for (std::size_t i = 0; i < a.index.session_ids.size() && submitted < 4; ++i) {
    const auto m = load_manifest(manifest(i));
    if (m.phq8 && phq8_to_label(*m.phq8) == 0) {
      submit(s, i);
      ++submitted;
    }
  }
  s.wait_idle();
  const Reply job = call(s, "POST", "/retrain", kClinician, json{{"epochs", 1}});
  ASSERT_EQ(job.status, 202);
  s.wait_idle();
  const Reply done = call(s, "GET", "/retrain/" + job.body["id"].get<std::string>(), kClinician);
  EXPECT_EQ(done.body["status"], "failed");
  EXPECT_TRUE(done.body["error"]["message"].is_string());
  EXPECT_EQ(s.bundle_version(), base_version());
  EXPECT_EQ(call(s, "POST", "/retrain", kClinician, json{{"epochs", 0}}).status, 400);
}

TEST_F(ServiceTest, QuestionnaireCrudIsOwnerScoped) {
  Service s(make_config(dir_.str()));
  EXPECT_EQ(call(s, "POST", "/questionnaires", kClinician, json{{"questions", json::array()}})
                .status,
            400);
  EXPECT_EQ(call(s, "POST", "/questionnaires", kClinician, json{{"questions", {"  "}}}).status,
            400);
  const Reply made =
      call(s, "POST", "/questionnaires", kClinician,
           json{{"title", "Follow-up"}, {"questions", {"Sleep?", "Appetite?", "Energy?"}}});
  ASSERT_EQ(made.status, 201);
  const std::string id = made.body["id"];
  const Reply mine = call(s, "GET", "/questionnaires", kClinician);
  ASSERT_EQ(mine.body["questionnaires"].size(), 1u);
  EXPECT_EQ(mine.body["questionnaires"][0]["questions"].size(), 3u);
  EXPECT_EQ(call(s, "GET", "/questionnaires/" + id, kOtherClinician).status, 404);
  EXPECT_EQ(call(s, "GET", "/questionnaires", kOtherClinician).body["questionnaires"].size(), 0u);

  const Reply reordered = call(s, "PUT", "/questionnaires/" + id, kClinician,
                               json{{"questions", {"Energy?", "Sleep?", "Appetite?"}}});
  EXPECT_EQ(reordered.status, 200);
  EXPECT_EQ(call(s, "GET", "/questionnaires/" + id, kClinician).body["questions"],
            json({"Energy?", "Sleep?", "Appetite?"}));

  const Reply updated =
      call(s, "PUT", "/questionnaires/" + id, kClinician, json{{"questions", {"Mood?"}}});
  EXPECT_EQ(updated.status, 200);
  EXPECT_EQ(updated.body["questions"], json({"Mood?"}));
  EXPECT_EQ(call(s, "DELETE", "/questionnaires/" + id, kOtherClinician).status, 404);
  EXPECT_EQ(call(s, "DELETE", "/questionnaires/" + id, kClinician).status, 200);
  EXPECT_EQ(call(s, "GET", "/questionnaires/" + id, kClinician).status, 404);
  EXPECT_EQ(call(s, "GET", "/questionnaires", kClinician, nullptr).body["questionnaires"].size(),
            0u);
}

TEST_F(ServiceTest, MetricsOverRegisteredEvaluationSet) {
  const auto& a = tiny_artifacts();
  std::filesystem::create_directories(dir_.path() / "evalsets");
  std::filesystem::copy(a.index.root, dir_.path() / "evalsets" / "tiny",
                        std::filesystem::copy_options::recursive);
  Service s(make_config(dir_.str()));
  const Reply r = call(s, "GET", "/metrics/tiny", kClinician);
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["total"], a.index.session_ids.size());
  EXPECT_EQ(r.body["bundle_version"], base_version());
  EXPECT_TRUE(r.body.contains("auc"));
  EXPECT_TRUE(r.body.contains("roc"));

  const DatasetEvaluation direct =
      evaluate_dataset(a.bundle, a.corpus, load_dataset_index(a.index.root), SplitSelection::kAll,
                       {});
  EXPECT_EQ(r.body["correct"], direct.report.correct);
  EXPECT_EQ(call(s, "GET", "/metrics", kClinician).body["eval_sets"], json({"tiny"}));
  EXPECT_EQ(call(s, "GET", "/metrics/missing", kClinician).status, 404);
  EXPECT_EQ(call(s, "GET", "/metrics/..", kClinician).status, 400);

  DatasetIndex empty;
  empty.root = (dir_.path() / "evalsets" / "empty").string();
  empty.visual_dim = a.index.visual_dim;
  empty.audio_dim = a.index.audio_dim;
  empty.text_dim = a.index.text_dim;
  std::filesystem::create_directories(empty.root);
  write_dataset_index(empty);
  EXPECT_EQ(call(s, "GET", "/metrics/empty", kClinician).status, 400);
}

TEST_F(ServiceTest, RestartReplaysToIdenticalState) {
  std::string digest;
  {
    Service s(make_config(dir_.str()));
    for (std::size_t i = 0; i < 12; ++i) submit(s, i, i % 2 ? kUser : kOtherUser);
    s.wait_idle();
    json body = testing::submission_body(manifest(0));
    body["visual_csv"] = "t,a\n";
    EXPECT_EQ(call(s, "POST", "/sessions", kUser, body).status, 422);
    call(s, "POST", "/corpus/exemplars", kClinician, json{{"session_id", "s-000003"}, {"label", 2}});
    call(s, "POST", "/questionnaires", kClinician, json{{"questions", {"Energy?"}}});
    const Reply job = call(s, "POST", "/retrain", kClinician, json{{"epochs", 1}});
    ASSERT_EQ(job.status, 202);
    s.wait_idle();
    call(s, "POST", "/sessions/s-000001/reclassify", kClinician);
    digest = s.state_digest();
    EXPECT_EQ(s.bundle_version(), base_version() + 1);
  }
  Service restarted(make_config(dir_.str()));
  restarted.wait_idle();
  EXPECT_EQ(restarted.state_digest(), digest);
  EXPECT_EQ(restarted.bundle_version(), base_version() + 1);
  // New ids continue after the replayed ones.
  EXPECT_EQ(submit(restarted, 30), "s-000014");
}

TEST_F(ServiceTest, RestartResumesUnprocessedSessions) {
  std::string id;
  {
    Service s(make_config(dir_.str()));
    s.set_processing_paused(true);
    id = submit(s, 7);
  }
  Service restarted(make_config(dir_.str()));
  restarted.wait_idle();
  EXPECT_EQ(call(restarted, "GET", "/sessions/" + id, kUser).body["status"], "processed");
}

TEST_F(ServiceTest, RequiresABundle) {
  ServiceConfig c = make_config(dir_.str());
  c.bundle_path.clear();
  EXPECT_THROW(Service{c}, ValidationError);
}

TEST(ServiceConfigJson, ParsesAndRejects) {
  const ServiceConfig c = ServiceConfig::from_json(
      R"({"data_dir":"d","threshold":0.4,"port":9000,
          "tokens":[{"token":"t","id":"x","role":"clinician"}]})",
      {});
  EXPECT_EQ(c.data_dir, "d");
  EXPECT_EQ(c.boundary.threshold, 0.4);
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.tokens.at("t").role, Role::kClinician);
  EXPECT_THROW(ServiceConfig::from_json(R"({"prt":1})", {}), ValidationError);
  EXPECT_THROW(ServiceConfig::from_json(R"({"threshold":2})", {}), ValidationError);
  EXPECT_THROW(ServiceConfig::from_json(R"({"tokens":[{"token":"t","id":"x","role":"admin"}]})", {}),
               ValidationError);
  EXPECT_THROW(ServiceConfig::from_json("[", {}), ParseError);
}

TEST_F(ServiceTest, HttpRoundTrip) {
  Service s(make_config(dir_.str()));
  HttpServer server(s, "127.0.0.1", 0);
  const int port = server.start();
  ASSERT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);
  const auto health = client.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

  const httplib::Headers auth{{"Authorization", kUser}};
  const auto posted = client.Post("/sessions", auth, testing::submission_body(manifest(0)).dump(),
                                  "application/json");
  ASSERT_TRUE(posted);
  ASSERT_EQ(posted->status, 202) << posted->body;
  const std::string id = json::parse(posted->body)["id"];
  s.wait_idle();
  const auto got = client.Get("/sessions/" + id, auth);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  EXPECT_EQ(json::parse(got->body)["status"], "processed");
  EXPECT_EQ(client.Get("/triage", auth)->status, 403);
  server.stop();
}

}  // namespace
}  // namespace depscreen
