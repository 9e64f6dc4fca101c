#pragma once

// Property checks shared by the unit suites and the acceptance binary.

#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "mtocs/access.hpp"
#include "mtocs/grading.hpp"
#include "mtocs/survey.hpp"
#include "support.hpp"

namespace testing_support {

using survey::json;

inline json raw_schema() {
  std::ifstream in(schema_path());
  return json::parse(in);
}

/// Forward pass straight over the schema document.
inline std::set<std::string> oracle_visible(const json& doc, const json& answers) {
  std::set<std::string> visible;
  for (const auto& q : doc.at("questions")) {
    bool shown = true;
    for (const auto& c : q.value("visible_when", json::array())) {
      const auto ref = c.at("question").get<std::string>();
      if (!visible.count(ref) || !answers.contains(ref) || answers.at(ref) != c.at("equals")) shown = false;
    }
    if (shown) visible.insert(q.at("id").get<std::string>());
  }
  return visible;
}

inline json random_valid_value(const json& q, std::mt19937_64& rng) {
  const auto kind = q.at("kind").get<std::string>();
  std::uniform_int_distribution<int> coin(0, 1);
  if (kind == "yes_no") return coin(rng) == 1;
  if (kind == "number") {
    const double lo = q.value("min", 0.0), hi = q.value("max", 100.0);
    return std::uniform_int_distribution<int>(static_cast<int>(lo), static_cast<int>(hi))(rng);
  }
  if (kind == "free_text") return "text " + std::to_string(rng() % 1000);
  const auto& options = q.at("options");
  if (kind == "single_choice") return options[rng() % options.size()].at("value");
  json picked = json::array();
  for (const auto& o : options) {
    if (coin(rng)) picked.push_back(o.at("value"));
  }
  if (picked.empty()) picked.push_back(options[0].at("value"));
  return picked;
}

/// Random answer sets against the shipped schema: visibility equals the
/// oracle's, and validate() flags an answer as hidden iff the oracle hides it.
inline void check_branching(const survey::Questionnaire& schema, int trials, std::uint64_t seed) {
  const auto doc = raw_schema();
  std::mt19937_64 rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    json answers = json::object();
    for (const auto& q : doc.at("questions")) {
      if (rng() % 10 < 6) answers[q.at("id").get<std::string>()] = random_valid_value(q, rng);
    }
    const auto expected_visible = oracle_visible(doc, answers);
    const auto visible = survey::visible_questions(schema, answers);
    ASSERT_EQ(std::set<std::string>(visible.begin(), visible.end()), expected_visible) << answers.dump();

    const auto report = survey::validate(schema, survey::AnswerSet{schema.version(), answers});
    for (const auto& q : doc.at("questions")) {
      const auto id = q.at("id").get<std::string>();
      const bool flagged = report.has(survey::ViolationKind::HiddenAnswered, id);
      ASSERT_EQ(flagged, answers.contains(id) && !expected_visible.count(id)) << id << " in " << answers.dump();
    }
    for (const auto& v : report.violations) {
      ASSERT_TRUE(v.kind == survey::ViolationKind::HiddenAnswered || v.kind == survey::ViolationKind::MissingRequired)
          << to_string(v.kind) << " " << v.question;
    }
  }
}

/// Diabetes Yes shows exactly type and duration; No and unanswered hide them.
inline void check_diabetes_toggle(const survey::Questionnaire& q) {
  auto has = [](const std::vector<std::string>& ids, const char* id) {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
  };
  const auto none = survey::visible_questions(q, json::object());
  EXPECT_FALSE(has(none, "diabetes_type"));
  EXPECT_FALSE(has(none, "diabetes_duration"));
  const auto yes = survey::visible_questions(q, {{"has_diabetes", true}});
  EXPECT_TRUE(has(yes, "diabetes_type"));
  EXPECT_TRUE(has(yes, "diabetes_duration"));
  const auto no = survey::visible_questions(q, {{"has_diabetes", false}});
  EXPECT_FALSE(has(no, "diabetes_type"));
  EXPECT_FALSE(has(no, "diabetes_duration"));
  EXPECT_EQ(yes.size(), no.size() + 2);
}

/// Hand-written permission table: the roles allowed for each action.
inline const std::map<access::Action, std::set<access::Role>>& declared_matrix() {
  using access::Action;
  using access::Role;
  static const std::map<Action, std::set<Role>> m{
      {Action::RegisterParticipant, {Role::Screener}},
      {Action::SearchParticipants, {Role::Screener}},
      {Action::EditParticipant, {Role::Screener}},
      {Action::OpenVisit, {Role::Screener}},
      {Action::EditSurvey, {Role::Screener}},
      {Action::AttachImage, {Role::Screener}},
      {Action::ViewQuestionnaire, {Role::Screener, Role::Grader}},
      {Action::TransitionVisit, {Role::Screener, Role::Grader, Role::Staff}},
      {Action::TransitionToImaged, {Role::Screener}},
      {Action::ViewGradingQueue, {Role::Grader}},
      {Action::SubmitGrading, {Role::Grader}},
      {Action::EditGrading, {Role::Grader}},
      {Action::TransitionToGraded, {Role::Grader}},
      {Action::ReadParticipantPii, {Role::Staff}},
      {Action::ViewPendingReports, {Role::Staff}},
      {Action::RenderLetter, {Role::Staff}},
      {Action::MarkLetterSent, {Role::Staff}},
      {Action::AddFollowUp, {Role::Staff}},
      {Action::ListFollowUps, {Role::Staff}},
      {Action::TransitionToNotified, {Role::Staff}},
      {Action::TransitionToClosed, {Role::Staff}},
      {Action::ExportData, {Role::Admin}},
  };
  return m;
}

inline void check_access_matrix() {
  ASSERT_EQ(declared_matrix().size(), access::kAllActions.size());
  for (auto role : access::kAllRoles) {
    for (auto action : access::kAllActions) {
      const bool expected = declared_matrix().at(action).count(role) == 1;
      EXPECT_EQ(access::permitted(role, action), expected) << access::token(role) << " " << access::token(action);
    }
  }
}

// Every 3-character window of these words contains a 'q', a letter that never
// appears in the fixed parts of a grader view.
inline std::string q_word(std::mt19937_64& rng) {
  static const char* kSyllables[] = {"qua", "qei", "qio", "quo", "qai", "qel", "qim", "qor"};
  std::string w;
  const int n = 2 + static_cast<int>(rng() % 2);
  for (int i = 0; i < n; ++i) w += kSyllables[rng() % 8];
  w[0] = static_cast<char>(std::toupper(w[0]));
  return w;
}

inline domain::Participant random_participant(std::mt19937_64& rng, int index) {
  domain::Participant p;
  p.participant_id = ids::ParticipantId::from_ordinal(1 + index);
  p.organization_id = OrganizationId("org-a");
  auto& d = p.demographics;
  d.first_name = q_word(rng);
  d.last_name = q_word(rng);
  d.name = d.first_name + " " + q_word(rng) + " " + d.last_name;
  d.date_of_birth = Date{std::chrono::year{1930 + static_cast<int>(rng() % 70)},
                         std::chrono::month{1 + static_cast<unsigned>(rng() % 12)},
                         std::chrono::day{1 + static_cast<unsigned>(rng() % 28)}};
  d.city = q_word(rng) + "ville";
  d.state = "WI";
  // Zip codes ending in 00 or 001 would collide with digit runs of visit ids.
  int zip = 0;
  do {
    zip = 10000 + static_cast<int>(rng() % 90000);
  } while (zip % 100 == 0 || zip % 1000 == 1);
  d.zipcode = std::to_string(zip);
  d.country = "USA";
  d.primary_phone = "(414) 555-" + std::to_string(1000 + rng() % 9000);
  if (rng() % 2) d.secondary_phone = "262-555-" + std::to_string(1000 + rng() % 9000);
  if (rng() % 2) d.email = q_word(rng) + "@" + q_word(rng) + ".org";
  return p;
}

inline std::vector<std::string> pii_values(const domain::Participant& p) {
  const auto& d = p.demographics;
  std::vector<std::string> v{d.name, d.first_name, d.last_name, d.city, d.zipcode, d.primary_phone,
                             format_date(d.date_of_birth)};
  if (d.secondary_phone) v.push_back(*d.secondary_phone);
  if (d.email) v.push_back(*d.email);
  std::erase_if(v, [](const std::string& s) { return s.size() < 4; });
  return v;
}

inline void collect_keys(const json& j, std::set<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      out.insert(k);
      collect_keys(v, out);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) collect_keys(v, out);
  }
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string without_masks(std::string s) {
  const std::string mask = "[redacted]";
  for (auto pos = s.find(mask); pos != std::string::npos; pos = s.find(mask)) s.erase(pos, mask.size());
  return s;
}

/// Grader views of random participants carry no PII key and no PII value,
/// even when free-text answers quote the participant in mixed case.
inline void check_grader_views(int participants, std::uint64_t seed) {
  const std::set<std::string> forbidden_keys{"name",          "first_name",      "last_name", "phone",
                                             "primary_phone", "secondary_phone", "email",     "address",
                                             "city",          "zipcode",         "date_of_birth"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < participants; ++i) {
    const auto p = random_participant(rng, i);
    domain::Visit v;
    v.visit_id = ids::VisitId(p.participant_id, 1 + static_cast<int>(rng() % 3));
    v.participant_id = p.participant_id;
    v.organization_id = p.organization_id;
    v.survey_taken_at = at(2018, 1 + static_cast<unsigned>(rng() % 12), 5);
    v.image_refs.push_back(
        {domain::Eye::Left, domain::image_storage_key(v.visit_id, domain::Eye::Left, 1), v.survey_taken_at});
    const auto pii = pii_values(p);
    std::string notes = "seen today;";
    for (const auto& value : pii) notes += " " + (rng() % 2 ? value : lower(value));
    v.answers.answers = complete_answers();
    v.answers.answers["eye_surgery"] = true;
    v.answers.answers["eye_surgery_details"] = "cataract, " + p.demographics.last_name;
    v.answers.answers["notes"] = notes;

    const auto j = grading::to_json(access::redact_for_grader(p, v));
    std::set<std::string> keys;
    collect_keys(j, keys);
    for (const auto& k : forbidden_keys) ASSERT_FALSE(keys.count(k)) << k;

    const auto text = lower(without_masks(j.dump()));
    for (const auto& value : pii) ASSERT_EQ(text.find(lower(value)), std::string::npos) << value << " in " << j.dump();
  }
}

}  // namespace testing_support
