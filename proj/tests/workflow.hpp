#pragma once

#include <gtest/gtest.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <set>
#include <thread>

#include "mtocs/api/config.hpp"
#include "mtocs/api/server.hpp"
#include "mtocs/error.hpp"
#include "support.hpp"

namespace testing_support {

/// Parallel registrations in one organization get distinct ids that are
/// exactly the first `threads` ids of the sequence.
inline void check_parallel_registrations(int threads) {
  Harness h;
  std::vector<std::string> ids(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  std::atomic<int> errors{0};
  for (int i = 0; i < threads; ++i) {
    pool.emplace_back([&, i] {
      try {
        const auto name = "Person Number" + std::string(1, static_cast<char>('a' + i % 26));
        ids[static_cast<std::size_t>(i)] =
            h.service.register_participant(h.screener, sample_demographics(name), h.org).participant_id.str();
      } catch (const Error&) {
        ++errors;
      }
    });
  }
  for (auto& t : pool) t.join();
  EXPECT_EQ(errors.load(), 0);
  const std::set<std::string> distinct(ids.begin(), ids.end());
  ASSERT_EQ(distinct.size(), static_cast<std::size_t>(threads));
  std::set<std::string> expected;
  for (int n = 1; n <= threads; ++n) expected.insert(ids::ParticipantId::from_ordinal(n).str());
  EXPECT_EQ(distinct, expected);
}

/// Two graders submit the same imaged visit at once: one wins, one gets IllegalState.
inline void check_parallel_gradings(int rounds) {
  using grading::DrGrade;
  for (int round = 0; round < rounds; ++round) {
    Harness h;
    const auto v = h.imaged_visit();
    std::atomic<int> ok{0}, conflicts{0};
    std::vector<std::thread> pool;
    for (int i = 0; i < 2; ++i) {
      pool.emplace_back([&, i] {
        try {
          h.service.submit_grading(h.grader, h.org, v.visit_id,
                                   grading::EyeAssessment{i == 0 ? DrGrade::MildNPDR : DrGrade::SevereNPDR, ""},
                                   std::nullopt);
          ++ok;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::IllegalState) ++conflicts;
        }
      });
    }
    for (auto& t : pool) t.join();
    EXPECT_EQ(ok.load(), 1);
    EXPECT_EQ(conflicts.load(), 1);
    EXPECT_EQ(h.service.grading_history(h.grader, h.org, v.visit_id).size(), 1u);
  }
}

/// Full workflow over HTTP against a freshly started dev-plaintext service,
/// including every out-of-order step along the way. Startup counts toward
/// the five-second budget.
inline void check_http_workflow() {
  spdlog::set_level(spdlog::level::warn);
  using api::Config;
  using survey::json;
  auto parse = [](const httplib::Result& r) { return json::parse(r->body); };
  const auto started = std::chrono::steady_clock::now();
  TempDir dir;
  Config c;
  c.dev_plaintext = true;
  c.database = dir.path() / "m.db";
  c.storage_root = dir.path() / "images";
  c.schema_path = schema_path();
  c.templates_dir = templates_dir();
  api::App app(c);
  const OrganizationId org("riverside-clinic");
  app.service().create_account("screener1", "screener-pass", access::Role::Screener, org);
  app.service().create_account("grader1", "grader-pass", access::Role::Grader, org);
  app.service().create_account("staff1", "staff-pass1", access::Role::Staff, org);
  const int port = app.server().bind("127.0.0.1", 0);
  app.server().start();
  httplib::Client http("127.0.0.1", port);

  auto login = [&](const char* user, const char* pass) {
    auto r = http.Post("/api/auth/login", json{{"username", user}, {"password", pass}}.dump(), "application/json");
    return httplib::Headers{{"Authorization", "Bearer " + parse(r)["token"].get<std::string>()}};
  };
  const auto screener = login("screener1", "screener-pass");
  const auto grader = login("grader1", "grader-pass");
  const auto staff = login("staff1", "staff-pass1");

  auto expect = [](const httplib::Result& r, int status) {
    EXPECT_TRUE(r);
    if (r) EXPECT_EQ(r->status, status) << r->body;
    return r ? json::parse(r->body.empty() || r->body[0] != '{' ? "{}" : r->body) : json{};
  };

  auto p = expect(http.Post("/api/participants", screener,
                            domain::to_json(sample_demographics()).dump(), "application/json"),
                  201);
  EXPECT_EQ(p["participant_id"], "AAA001");
  auto v = expect(http.Post("/api/participants/AAA001/visits", screener, "", "application/json"), 201);
  EXPECT_EQ(v["visit_id"], "AAA001001");
  const std::string base = "/api/visits/AAA001001";

  // Letter before grading.
  expect(http.Post("/api/reports/AAA001001/letter", staff, "", "application/json"), 409);
  expect(http.Post(base + "/transition", screener, R"({"target":"imaged"})", "application/json"), 409);

  v = expect(http.Put(base + "/survey", screener,
                      json{{"answers", complete_answers()}, {"expected_version", v["version"]}}.dump(),
                      "application/json"),
             200);
  expect(http.Post(base + "/images?eye=left", screener, "fundus-left", "application/octet-stream"), 201);
  expect(http.Post(base + "/transition", screener, R"({"target":"imaged"})", "application/json"), 200);
  expect(http.Post(base + "/transition", screener, R"({"target":"closed"})", "application/json"), 403);

  auto queue = expect(http.Get("/api/grading/queue", grader), 200);
  ASSERT_EQ(queue["items"].size(), 1u);
  const auto key = queue["items"][0]["image_refs"][0]["storage_key"].get<std::string>();
  auto img = http.Get("/api/images/" + key, grader);
  EXPECT_EQ(img->body, "fundus-left");
  expect(http.Post("/api/reports/AAA001001/sent", staff, "", "application/json"), 409);
  expect(http.Post("/api/grading/AAA001001", grader,
                   R"({"left":{"grade":"moderate-npdr","comment":"hemorrhages"},"right":{"grade":"no-apparent-dr"}})",
                   "application/json"),
         201);
  expect(http.Post("/api/grading/AAA001001", grader, R"({"left":{"grade":"mild-npdr"}})", "application/json"), 409);

  auto pending = expect(http.Get("/api/reports/pending", staff), 200);
  ASSERT_EQ(pending["total"], 1);
  EXPECT_EQ(pending["items"][0]["template_key"], "letter-moderate-npdr-es");
  expect(http.Post("/api/reports/AAA001001/followups", staff, R"({"channel":"text","comment":"x"})", "application/json"),
         409);
  auto letter = http.Post("/api/reports/AAA001001/letter?format=html", staff, "", "application/json");
  ASSERT_EQ(letter->status, 201);
  EXPECT_NE(letter->body.find("Ana Maria Garcia"), std::string::npos);
  EXPECT_EQ(letter->body.find("{participant_name}"), std::string::npos);
  auto sent = expect(http.Post("/api/reports/AAA001001/sent", staff, "", "application/json"), 200);
  EXPECT_EQ(sent["sent"], true);
  expect(http.Post("/api/reports/AAA001001/followups", staff, R"({"channel":"phone_call","comment":"scheduled exam"})",
                   "application/json"),
         201);
  auto followups = expect(http.Get("/api/reports/AAA001001/followups", staff), 200);
  EXPECT_EQ(followups["total"], 1);
  auto visit = expect(http.Get(base, screener), 200);
  EXPECT_EQ(visit["state"], "notified");
  expect(http.Post(base + "/transition", staff, R"({"target":"closed"})", "application/json"), 200);
  expect(http.Post(base + "/transition", staff, R"({"target":"notified"})", "application/json"), 409);

  app.server().stop();
  const auto elapsed = std::chrono::steady_clock::now() - started;
  EXPECT_LT(elapsed, std::chrono::seconds(5));
}

}  // namespace testing_support
