#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "mtocs/error.hpp"
#include "mtocs/survey.hpp"

namespace mtocs::survey {

namespace {

[[noreturn]] void schema_error(std::string message, std::string where = {}) {
  fail(ErrorCode::SchemaError, std::move(message),
       where.empty() ? std::nullopt : std::optional<std::string>(std::move(where)));
}

const json& require_member(const json& obj, std::string_view key, std::string_view where) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) schema_error("missing '" + std::string(key) + "'", std::string(where));
  return *it;
}

std::string require_string(const json& obj, std::string_view key, std::string_view where) {
  const json& v = require_member(obj, key, where);
  if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
    schema_error("'" + std::string(key) + "' must be a non-empty string", std::string(where));
  }
  return v.get<std::string>();
}

/// Resolves a string-table key into one text per locale.
LocalizedText localize(const json& tables, const std::vector<std::string>& locales,
                       const std::string& key, const std::string& where) {
  LocalizedText text;
  for (const auto& locale : locales) {
    const json& table = tables.at(locale);
    auto it = table.find(key);
    if (it == table.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
      schema_error("string '" + key + "' missing for locale " + locale, where);
    }
    text.by_locale.emplace(locale, it->get<std::string>());
  }
  return text;
}

}  // namespace

std::string_view to_string(QuestionKind kind) noexcept {
  switch (kind) {
    case QuestionKind::SingleChoice: return "single_choice";
    case QuestionKind::MultiChoice: return "multi_choice";
    case QuestionKind::YesNo: return "yes_no";
    case QuestionKind::Number: return "number";
    case QuestionKind::FreeText: return "free_text";
  }
  return "free_text";
}

std::optional<QuestionKind> parse_question_kind(std::string_view token) noexcept {
  for (auto k : {QuestionKind::SingleChoice, QuestionKind::MultiChoice, QuestionKind::YesNo,
                 QuestionKind::Number, QuestionKind::FreeText}) {
    if (to_string(k) == token) return k;
  }
  return std::nullopt;
}

const std::string& LocalizedText::in(std::string_view locale) const {
  auto it = by_locale.find(locale);
  if (it == by_locale.end()) {
    fail(ErrorCode::UnsupportedLocale, "no text for locale '" + std::string(locale) + "'");
  }
  return it->second;
}

const Option* Question::find_option(std::string_view value) const noexcept {
  for (const auto& o : options) {
    if (o.value == value) return &o;
  }
  return nullptr;
}

Questionnaire Questionnaire::from_json(const json& doc) {
  if (!doc.is_object()) schema_error("schema document must be a JSON object");

  Questionnaire q;
  q.version_ = require_string(doc, "version", "version");

  const json& locales = require_member(doc, "locales", "locales");
  if (!locales.is_array()) schema_error("'locales' must be an array", "locales");
  for (const auto& l : locales) {
    if (!l.is_string() || l.get_ref<const std::string&>().empty()) {
      schema_error("locale names must be non-empty strings", "locales");
    }
    q.locales_.push_back(l.get<std::string>());
  }
  for (const char* mandatory : {"en", "es"}) {
    if (!q.supports(mandatory)) {
      schema_error(std::string("locale '") + mandatory + "' must be shipped", "locales");
    }
  }

  const json& strings = require_member(doc, "strings", "strings");
  if (!strings.is_object()) schema_error("'strings' must be an object", "strings");
  for (const auto& locale : q.locales_) {
    if (!strings.contains(locale) || !strings.at(locale).is_object()) {
      schema_error("no string table for locale " + locale, "strings");
    }
  }

  const json& questions = require_member(doc, "questions", "questions");
  if (!questions.is_array() || questions.empty()) {
    schema_error("'questions' must be a non-empty array", "questions");
  }

  std::set<std::string, std::less<>> seen;
  for (const auto& qj : questions) {
    if (!qj.is_object()) schema_error("question entries must be objects", "questions");
    Question question;
    question.id = require_string(qj, "id", "questions");
    const std::string where = "questions." + question.id;
    if (seen.count(question.id)) schema_error("duplicate question id", where);

    auto kind = parse_question_kind(require_string(qj, "kind", where));
    if (!kind) schema_error("unknown question kind", where);
    question.kind = *kind;
    question.prompt = localize(strings, q.locales_, require_string(qj, "prompt", where), where);
    if (auto it = qj.find("required"); it != qj.end()) {
      if (!it->is_boolean()) schema_error("'required' must be boolean", where);
      question.required = it->get<bool>();
    }

    if (auto it = qj.find("options"); it != qj.end()) {
      if (!it->is_array()) schema_error("'options' must be an array", where);
      std::set<std::string, std::less<>> values;
      for (const auto& oj : *it) {
        Option opt;
        opt.value = require_string(oj, "value", where);
        if (!values.insert(opt.value).second) schema_error("duplicate option value", where);
        opt.label = localize(strings, q.locales_, require_string(oj, "label", where), where);
        question.options.push_back(std::move(opt));
      }
    }
    if (question.is_choice() && question.options.size() < 2) {
      schema_error("choice questions need at least two options", where);
    }
    if (!question.is_choice() && !question.options.empty()) {
      schema_error("only choice questions carry options", where);
    }

    for (const char* bound : {"min", "max"}) {
      if (auto it = qj.find(bound); it != qj.end()) {
        if (question.kind != QuestionKind::Number || !it->is_number()) {
          schema_error(std::string("'") + bound + "' applies to number questions only", where);
        }
        (bound[1] == 'i' ? question.min : question.max) = it->get<double>();
      }
    }

    if (auto it = qj.find("visible_when"); it != qj.end()) {
      if (!it->is_array()) schema_error("'visible_when' must be an array", where);
      for (const auto& cj : *it) {
        Condition c;
        c.question = require_string(cj, "question", where);
        c.equals = require_member(cj, "equals", where);
        // Only earlier questions may be referenced; this also rules out cycles.
        if (!seen.count(c.question)) {
          schema_error("condition references '" + c.question + "', which is not an earlier question",
                       where);
        }
        question.visible_when.push_back(std::move(c));
      }
    }

    seen.insert(question.id);
    q.questions_.push_back(std::move(question));
  }
  return q;
}

Questionnaire Questionnaire::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) schema_error("cannot open questionnaire file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    schema_error(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

const Question* Questionnaire::find(std::string_view id) const noexcept {
  for (const auto& q : questions_) {
    if (q.id == id) return &q;
  }
  return nullptr;
}

bool Questionnaire::supports(std::string_view locale) const noexcept {
  for (const auto& l : locales_) {
    if (l == locale) return true;
  }
  return false;
}

}  // namespace mtocs::survey
