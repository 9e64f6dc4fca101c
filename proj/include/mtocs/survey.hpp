#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mtocs::survey {

using json = nlohmann::json;

enum class QuestionKind { SingleChoice, MultiChoice, YesNo, Number, FreeText };

std::string_view to_string(QuestionKind kind) noexcept;
std::optional<QuestionKind> parse_question_kind(std::string_view token) noexcept;

/// One string per shipped locale ("en", "es", ...).
struct LocalizedText {
  std::map<std::string, std::string, std::less<>> by_locale;

  const std::string& in(std::string_view locale) const;
};

struct Option {
  std::string value;  // stable answer token, identical across locales
  LocalizedText label;
};

/// Equality test against the answer of an earlier question.
struct Condition {
  std::string question;
  json equals;
};

struct Question {
  std::string id;
  QuestionKind kind = QuestionKind::FreeText;
  LocalizedText prompt;
  std::vector<Option> options;
  bool required = true;
  std::optional<double> min;
  std::optional<double> max;
  /// Conjunction; empty means always visible.
  std::vector<Condition> visible_when;

  bool is_choice() const noexcept {
    return kind == QuestionKind::SingleChoice || kind == QuestionKind::MultiChoice;
  }
  const Option* find_option(std::string_view value) const noexcept;
};

/// Immutable, versioned question tree. Construction checks every schema
/// invariant and throws Error(SchemaError) on the first breach.
class Questionnaire {
 public:
  static Questionnaire from_json(const json& doc);
  static Questionnaire load(const std::filesystem::path& path);

  const std::string& version() const noexcept { return version_; }
  const std::vector<std::string>& locales() const noexcept { return locales_; }
  const std::vector<Question>& questions() const noexcept { return questions_; }
  const Question* find(std::string_view id) const noexcept;
  bool supports(std::string_view locale) const noexcept;

 private:
  std::string version_;
  std::vector<std::string> locales_;
  std::vector<Question> questions_;
};

/// Survey answers keyed by question id. Absent key or null means unanswered.
struct AnswerSet {
  std::string schema_version;
  json answers = json::object();
};

/// Ids of the questions shown for the given answers, in schema order.
/// Evaluated in a single forward pass; answers to hidden questions never
/// influence later visibility. Throws Error(SchemaError) when an answer key
/// names no question.
std::vector<std::string> visible_questions(const Questionnaire& schema, const json& answers);

/// Copy of `answers` with every answer to an invisible question removed.
json prune_hidden(const Questionnaire& schema, const json& answers);

enum class ViolationKind {
  HiddenAnswered,
  TypeMismatch,
  MissingRequired,
  UnknownQuestion,
  InvalidOption,
  OutOfRange,
  VersionMismatch,
};

std::string_view to_string(ViolationKind kind) noexcept;

struct Violation {
  ViolationKind kind;
  std::string question;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool has(ViolationKind kind, std::string_view question) const noexcept;
  /// Same report without MissingRequired entries (partial answer sets).
  ValidationReport ignoring_missing() const;
};

ValidationReport validate(const Questionnaire& schema, const AnswerSet& answers);

struct RenderedOption {
  std::string value;
  std::string label;
};

struct RenderedQuestion {
  std::string id;
  QuestionKind kind;
  std::string prompt;
  bool required;
  std::vector<RenderedOption> options;
  std::vector<Condition> visible_when;
};

struct RenderedForm {
  std::string version;
  std::string locale;
  std::vector<RenderedQuestion> questions;
};

/// Form description with every string in `locale`; ids, order and kinds do
/// not depend on the locale. Throws Error(UnsupportedLocale).
RenderedForm render(const Questionnaire& schema, std::string_view locale);

json to_json(const RenderedForm& form);
json to_json(const ValidationReport& report);

}  // namespace mtocs::survey
