#include <cmath>
#include <set>
#include <unordered_map>

#include "mtocs/error.hpp"
#include "mtocs/survey.hpp"

namespace mtocs::survey {

namespace {

bool answered(const json& answers, const std::string& id) {
  auto it = answers.find(id);
  return it != answers.end() && !it->is_null();
}

/// Visibility flag per question, in schema order.
std::vector<bool> visibility(const Questionnaire& schema, const json& answers) {
  const auto& questions = schema.questions();
  std::vector<bool> visible(questions.size(), false);
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const Question& q = questions[i];
    bool shown = true;
    for (const auto& cond : q.visible_when) {
      const std::size_t ref = index.at(cond.question);
      // A hidden question's answer never counts, so dependents hide with it.
      if (!visible[ref] || !answered(answers, cond.question) ||
          answers.at(cond.question) != cond.equals) {
        shown = false;
        break;
      }
    }
    visible[i] = shown;
    index.emplace(q.id, i);
  }
  return visible;
}

std::optional<Violation> check_value(const Question& q, const json& value) {
  auto mismatch = [&](std::string msg) {
    return Violation{ViolationKind::TypeMismatch, q.id, std::move(msg)};
  };
  switch (q.kind) {
    case QuestionKind::YesNo:
      if (!value.is_boolean()) return mismatch("expected true or false");
      break;
    case QuestionKind::Number: {
      if (!value.is_number()) return mismatch("expected a number");
      const double v = value.get<double>();
      if (!std::isfinite(v) || (q.min && v < *q.min) || (q.max && v > *q.max)) {
        return Violation{ViolationKind::OutOfRange, q.id, "value outside the allowed range"};
      }
      break;
    }
    case QuestionKind::FreeText:
      if (!value.is_string()) return mismatch("expected text");
      break;
    case QuestionKind::SingleChoice:
      if (!value.is_string()) return mismatch("expected one option value");
      if (!q.find_option(value.get_ref<const std::string&>())) {
        return Violation{ViolationKind::InvalidOption, q.id, "not one of the listed options"};
      }
      break;
    case QuestionKind::MultiChoice: {
      if (!value.is_array()) return mismatch("expected a list of option values");
      std::set<std::string, std::less<>> picked;
      for (const auto& v : value) {
        if (!v.is_string()) return mismatch("expected a list of option values");
        if (!q.find_option(v.get_ref<const std::string&>()) ||
            !picked.insert(v.get<std::string>()).second) {
          return Violation{ViolationKind::InvalidOption, q.id,
                           "unknown or repeated option '" + v.get<std::string>() + "'"};
        }
      }
      break;
    }
  }
  return std::nullopt;
}

bool is_blank(const Question& q, const json& value) {
  if (q.kind == QuestionKind::MultiChoice && value.is_array()) return value.empty();
  if (q.kind == QuestionKind::FreeText && value.is_string()) {
    return value.get_ref<const std::string&>().find_first_not_of(" \t\r\n") == std::string::npos;
  }
  return false;
}

}  // namespace

std::vector<std::string> visible_questions(const Questionnaire& schema, const json& answers) {
  if (!answers.is_object()) fail(ErrorCode::SchemaError, "answers must be a JSON object");
  for (const auto& [key, _] : answers.items()) {
    if (!schema.find(key)) fail(ErrorCode::SchemaError, "unknown question '" + key + "'", key);
  }
  const auto flags = visibility(schema, answers);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) out.push_back(schema.questions()[i].id);
  }
  return out;
}

json prune_hidden(const Questionnaire& schema, const json& answers) {
  const auto flags = visibility(schema, answers);
  json out = json::object();
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const auto& id = schema.questions()[i].id;
    if (flags[i] && answers.contains(id)) out[id] = answers.at(id);
  }
  return out;
}

std::string_view to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::HiddenAnswered: return "hidden_answered";
    case ViolationKind::TypeMismatch: return "type_mismatch";
    case ViolationKind::MissingRequired: return "missing_required";
    case ViolationKind::UnknownQuestion: return "unknown_question";
    case ViolationKind::InvalidOption: return "invalid_option";
    case ViolationKind::OutOfRange: return "out_of_range";
    case ViolationKind::VersionMismatch: return "version_mismatch";
  }
  return "type_mismatch";
}

bool ValidationReport::has(ViolationKind kind, std::string_view question) const noexcept {
  for (const auto& v : violations) {
    if (v.kind == kind && v.question == question) return true;
  }
  return false;
}

ValidationReport ValidationReport::ignoring_missing() const {
  ValidationReport out;
  for (const auto& v : violations) {
    if (v.kind != ViolationKind::MissingRequired) out.violations.push_back(v);
  }
  return out;
}

ValidationReport validate(const Questionnaire& schema, const AnswerSet& set) {
  ValidationReport report;
  if (!set.schema_version.empty() && set.schema_version != schema.version()) {
    report.violations.push_back({ViolationKind::VersionMismatch, "",
                                 "answers were recorded against schema " + set.schema_version});
  }
  if (!set.answers.is_object()) {
    report.violations.push_back({ViolationKind::TypeMismatch, "", "answers must be an object"});
    return report;
  }
  for (const auto& [key, _] : set.answers.items()) {
    if (!schema.find(key)) {
      report.violations.push_back({ViolationKind::UnknownQuestion, key, "no such question"});
    }
  }

  const auto flags = visibility(schema, set.answers);
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const Question& q = schema.questions()[i];
    const bool has_answer = answered(set.answers, q.id);
    if (!flags[i]) {
      if (has_answer) {
        report.violations.push_back(
            {ViolationKind::HiddenAnswered, q.id, "question is not shown for these answers"});
      }
      continue;
    }
    if (!has_answer) {
      if (q.required) {
        report.violations.push_back({ViolationKind::MissingRequired, q.id, "answer required"});
      }
      continue;
    }
    const json& value = set.answers.at(q.id);
    if (auto v = check_value(q, value)) {
      report.violations.push_back(std::move(*v));
    } else if (q.required && is_blank(q, value)) {
      report.violations.push_back({ViolationKind::MissingRequired, q.id, "answer required"});
    }
  }
  return report;
}

RenderedForm render(const Questionnaire& schema, std::string_view locale) {
  if (!schema.supports(locale)) {
    fail(ErrorCode::UnsupportedLocale, "locale '" + std::string(locale) + "' is not shipped",
         "locale");
  }
  RenderedForm form{schema.version(), std::string(locale), {}};
  for (const auto& q : schema.questions()) {
    RenderedQuestion rq{q.id, q.kind, q.prompt.in(locale), q.required, {}, q.visible_when};
    for (const auto& o : q.options) rq.options.push_back({o.value, o.label.in(locale)});
    form.questions.push_back(std::move(rq));
  }
  return form;
}

json to_json(const RenderedForm& form) {
  json questions = json::array();
  for (const auto& q : form.questions) {
    json item{{"id", q.id}, {"kind", to_string(q.kind)}, {"prompt", q.prompt},
              {"required", q.required}};
    if (!q.options.empty()) {
      json options = json::array();
      for (const auto& o : q.options) options.push_back({{"value", o.value}, {"label", o.label}});
      item["options"] = std::move(options);
    }
    if (!q.visible_when.empty()) {
      json conds = json::array();
      for (const auto& c : q.visible_when) {
        conds.push_back({{"question", c.question}, {"equals", c.equals}});
      }
      item["visible_when"] = std::move(conds);
    }
    questions.push_back(std::move(item));
  }
  return {{"version", form.version}, {"locale", form.locale}, {"questions", std::move(questions)}};
}

json to_json(const ValidationReport& report) {
  json out = json::array();
  for (const auto& v : report.violations) {
    out.push_back({{"kind", to_string(v.kind)}, {"question", v.question}, {"message", v.message}});
  }
  return out;
}

}  // namespace mtocs::survey
