#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "mtocs/error.hpp"
#include "mtocs/survey.hpp"
#include "properties.hpp"
#include "support.hpp"

using namespace mtocs::survey;
using mtocs::ErrorCode;
using testing_support::raw_schema;
using testing_support::schema_path;

namespace {

const Questionnaire& shipped() {
  static const Questionnaire q = Questionnaire::load(schema_path());
  return q;
}

json minimal_schema() {
  return json::parse(R"({
    "version": "t1", "locales": ["en", "es"],
    "questions": [
      {"id": "a", "kind": "yes_no", "prompt": "p.a"},
      {"id": "b", "kind": "number", "prompt": "p.b", "min": 0, "max": 10,
       "visible_when": [{"question": "a", "equals": true}]}
    ],
    "strings": {"en": {"p.a": "A?", "p.b": "B?"}, "es": {"p.a": "¿A?", "p.b": "¿B?"}}
  })");
}

void expect_schema_error(const json& doc) {
  try {
    Questionnaire::from_json(doc);
    ADD_FAILURE() << "accepted " << doc.dump();
  } catch (const mtocs::Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError) << e.what();
  }
}

}  // namespace

TEST(Questionnaire, ShippedSchemaLoads) {
  EXPECT_EQ(shipped().version(), "1");
  EXPECT_TRUE(shipped().supports("en"));
  EXPECT_TRUE(shipped().supports("es"));
  EXPECT_FALSE(shipped().supports("fr"));
  ASSERT_NE(shipped().find("diabetes_type"), nullptr);
  EXPECT_EQ(shipped().find("diabetes_type")->options.size(), 4u);
}

TEST(Questionnaire, MinimalSchemaLoads) { EXPECT_NO_THROW(Questionnaire::from_json(minimal_schema())); }

TEST(Questionnaire, RejectsBrokenSchemas) {
  auto doc = minimal_schema();
  doc["questions"][1]["visible_when"][0]["question"] = "zzz";
  expect_schema_error(doc);

  doc = minimal_schema();
  doc["questions"][1]["id"] = "a";
  expect_schema_error(doc);

  doc = minimal_schema();
  doc["questions"][0]["kind"] = "slider";
  expect_schema_error(doc);

  doc = minimal_schema();
  doc["strings"]["es"].erase("p.b");
  expect_schema_error(doc);

  doc = minimal_schema();
  doc["locales"] = {"en"};
  expect_schema_error(doc);

  doc = minimal_schema();
  doc["questions"][0]["options"] = json::array({{{"value", "x"}, {"label", "p.a"}}});
  expect_schema_error(doc);

  // Forward references are not allowed.
  doc = minimal_schema();
  std::swap(doc["questions"][0], doc["questions"][1]);
  expect_schema_error(doc);
}

TEST(Survey, DiabetesToggleShowsAndHidesBranch) { testing_support::check_diabetes_toggle(shipped()); }

TEST(Survey, HiddenAnswerFlagged) {
  AnswerSet set{"1", {{"has_diabetes", false}, {"diabetes_type", "Type 2"}}};
  const auto report = validate(shipped(), set);
  EXPECT_TRUE(report.has(ViolationKind::HiddenAnswered, "diabetes_type"));
  EXPECT_EQ(prune_hidden(shipped(), set.answers).count("diabetes_type"), 0u);
}

TEST(Survey, ValueChecks) {
  auto one = [](json answers) { return validate(shipped(), AnswerSet{"1", std::move(answers)}).ignoring_missing(); };
  EXPECT_TRUE(one({{"has_diabetes", "yes"}}).has(ViolationKind::TypeMismatch, "has_diabetes"));
  EXPECT_TRUE(one({{"has_diabetes", true}, {"diabetes_duration", 101}}).has(ViolationKind::OutOfRange, "diabetes_duration"));
  EXPECT_TRUE(one({{"has_diabetes", true}, {"diabetes_type", "Type 3"}}).has(ViolationKind::InvalidOption, "diabetes_type"));
  EXPECT_TRUE(one({{"eye_problems", {"floaters", "floaters"}}}).has(ViolationKind::InvalidOption, "eye_problems"));
  EXPECT_TRUE(one({{"shoe_size", 9}}).has(ViolationKind::UnknownQuestion, "shoe_size"));
  EXPECT_TRUE(validate(shipped(), AnswerSet{"0", json::object()}).has(ViolationKind::VersionMismatch, ""));
  EXPECT_TRUE(one(testing_support::complete_answers()).ok());
  EXPECT_TRUE(validate(shipped(), AnswerSet{"1", testing_support::complete_answers()}).ok());
}

TEST(Survey, MissingRequiredOnlyWhenVisible) {
  const auto report = validate(shipped(), AnswerSet{"1", {{"has_diabetes", false}}});
  EXPECT_TRUE(report.has(ViolationKind::MissingRequired, "hypertension"));
  EXPECT_FALSE(report.has(ViolationKind::MissingRequired, "diabetes_type"));
  EXPECT_FALSE(report.has(ViolationKind::MissingRequired, "notes"));
}

TEST(Survey, RenderIsLocaleIndependentInStructure) {
  const auto en = render(shipped(), "en");
  const auto es = render(shipped(), "es");
  ASSERT_EQ(en.questions.size(), es.questions.size());
  for (std::size_t i = 0; i < en.questions.size(); ++i) {
    EXPECT_EQ(en.questions[i].id, es.questions[i].id);
    EXPECT_EQ(en.questions[i].kind, es.questions[i].kind);
    ASSERT_EQ(en.questions[i].options.size(), es.questions[i].options.size());
    for (std::size_t k = 0; k < en.questions[i].options.size(); ++k) {
      EXPECT_EQ(en.questions[i].options[k].value, es.questions[i].options[k].value);
    }
  }
  EXPECT_EQ(es.questions[4].prompt, "¿Algún médico le ha dicho que tiene diabetes?");
  try {
    render(shipped(), "de");
    FAIL();
  } catch (const mtocs::Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedLocale);
  }
}

TEST(SurveyProperty, RandomAnswerSetsMatchForwardPassOracle) { testing_support::check_branching(shipped(), 1000, 404); }
