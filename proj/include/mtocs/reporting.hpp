#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtocs/domain.hpp"
#include "mtocs/grading.hpp"

namespace mtocs::reporting {

using grading::DrGrade;

/// Locales result letters are shipped in.
inline constexpr std::array<std::string_view, 2> kLetterLocales{"en", "es"};

/// Letters go out in Spanish to Spanish speakers and in English otherwise.
std::string_view letter_locale(domain::Language language) noexcept;

/// "letter-<grade-slug>-<locale>", e.g. "letter-moderate-npdr-es".
std::string select_letter(DrGrade grade, domain::Language language);

/// Every key the template manifest must list (8 grades x 2 locales).
std::vector<std::string> required_template_keys();

struct LetterTemplate {
  std::string key;
  std::string subject;
  std::string body;
};

/// Letter templates plus the per-locale phrases substituted into them.
/// Loading validates the manifest and throws Error(MissingTemplate) when any
/// required template is absent or malformed.
///
/// Directory layout:
///   manifest.json            {"templates": [keys...], "phrases": {locale: {...}}}
///   letter-<slug>-<loc>.txt  "Subject: ...\n\n<body>"
class LetterLibrary {
 public:
  static constexpr std::array<std::string_view, 4> kPlaceholders{
      "participant_name", "address_block", "grade_statement", "recommendation"};

  static LetterLibrary load(const std::filesystem::path& dir);

  const LetterTemplate& get(std::string_view key) const;
  /// Localized phrase; throws Error(MissingTemplate) when absent.
  const std::string& phrase(std::string_view locale, std::string_view id) const;
  std::size_t size() const noexcept { return templates_.size(); }

 private:
  std::map<std::string, LetterTemplate, std::less<>> templates_;
  std::map<std::string, std::map<std::string, std::string, std::less<>>, std::less<>> phrases_;
};

/// Replaces each {name} with its value. Unknown placeholders are left as-is.
std::string fill_placeholders(std::string_view text,
                              const std::map<std::string, std::string, std::less<>>& values);

struct Letter {
  std::string visit_id;
  std::string template_key;
  std::string locale;
  std::string subject;
  std::string body;
  /// Self-contained printable page.
  std::string html;
};

/// Builds the printable letter for a participant's grading.
Letter compose_letter(const LetterLibrary& library, const domain::Participant& participant,
                      const grading::GradingRecord& grading);

std::string address_block(const domain::Participant& participant);

struct LetterDispatch {
  std::int64_t dispatch_id = 0;
  std::string visit_id;
  std::string template_key;
  Timestamp rendered_at{};
  bool sent = false;
  std::optional<Timestamp> sent_marked_at;
  bool active = true;
};

enum class Channel { PhoneCall, Text };

std::string_view token(Channel c) noexcept;
std::optional<Channel> parse_channel(std::string_view token) noexcept;

struct FollowUp {
  std::int64_t followup_id = 0;
  std::string visit_id;
  Channel channel = Channel::PhoneCall;
  std::string comment;
  Timestamp created_at{};
  std::string staff_id;
};

survey::json to_json(const Letter& letter);
survey::json to_json(const LetterDispatch& dispatch);
survey::json to_json(const FollowUp& followup);

}  // namespace mtocs::reporting
