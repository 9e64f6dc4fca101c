#include <fstream>
#include <set>
#include <sstream>

#include "mtocs/error.hpp"
#include "mtocs/reporting.hpp"

namespace mtocs::reporting {

namespace {

[[noreturn]] void missing(std::string message) { fail(ErrorCode::MissingTemplate, std::move(message)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) missing("cannot read template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Names between braces, in order of appearance.
std::vector<std::string> placeholders_in(std::string_view text) {
  std::vector<std::string> names;
  for (std::size_t pos = 0; (pos = text.find('{', pos)) != std::string_view::npos;) {
    const auto close = text.find('}', pos);
    if (close == std::string_view::npos) {
      names.emplace_back(text.substr(pos));
      break;
    }
    names.emplace_back(text.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return names;
}

LetterTemplate parse_template(const std::string& key, const std::string& text) {
  static constexpr std::string_view kPrefix = "Subject:";
  const auto eol = text.find('\n');
  if (text.compare(0, kPrefix.size(), kPrefix) != 0 || eol == std::string::npos) {
    missing("template " + key + " must start with a 'Subject:' line");
  }
  LetterTemplate t;
  t.key = key;
  t.subject = text.substr(kPrefix.size(), eol - kPrefix.size());
  if (auto first = t.subject.find_first_not_of(' '); first != std::string::npos) {
    t.subject.erase(0, first);
  }
  if (!t.subject.empty() && t.subject.back() == '\r') t.subject.pop_back();
  auto body_start = eol + 1;
  while (body_start < text.size() && (text[body_start] == '\n' || text[body_start] == '\r')) {
    ++body_start;
  }
  t.body = text.substr(body_start);
  if (t.body.empty()) missing("template " + key + " has an empty body");

  for (const auto& name : placeholders_in(t.subject + t.body)) {
    bool known = false;
    for (auto p : LetterLibrary::kPlaceholders) known = known || p == name;
    if (!known) missing("template " + key + " uses unknown placeholder {" + name + "}");
  }
  return t;
}

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string printable_page(const std::string& locale, const std::string& subject,
                           const std::string& body) {
  std::string html = "<!DOCTYPE html>\n<html lang=\"" + locale +
                     "\">\n<head>\n<meta charset=\"utf-8\">\n<title>" + html_escape(subject) +
                     "</title>\n</head>\n"
                     "<body style=\"margin:2cm;font-family:serif;font-size:12pt;line-height:1.4\">\n"
                     "<pre style=\"white-space:pre-wrap;font-family:inherit\">" +
                     html_escape(body) + "</pre>\n</body>\n</html>\n";
  return html;
}

}  // namespace

std::string_view letter_locale(domain::Language language) noexcept {
  return language == domain::Language::Spanish ? "es" : "en";
}

std::string select_letter(DrGrade grade, domain::Language language) {
  return "letter-" + std::string(grading::slug(grade)) + "-" + std::string(letter_locale(language));
}

std::vector<std::string> required_template_keys() {
  std::vector<std::string> keys;
  for (DrGrade g : grading::kAllGrades) {
    for (auto locale : kLetterLocales) {
      keys.push_back("letter-" + std::string(grading::slug(g)) + "-" + std::string(locale));
    }
  }
  return keys;
}

LetterLibrary LetterLibrary::load(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  survey::json manifest;
  try {
    manifest = survey::json::parse(read_file(manifest_path));
  } catch (const survey::json::parse_error& e) {
    missing("template manifest is not valid JSON: " + std::string(e.what()));
  }

  const auto listed = manifest.value("templates", survey::json::array());
  std::set<std::string> keys;
  for (const auto& k : listed) {
    if (k.is_string()) keys.insert(k.get<std::string>());
  }
  const auto required = required_template_keys();
  for (const auto& key : required) {
    if (!keys.count(key)) missing("manifest does not list " + key);
  }
  if (keys.size() != required.size()) {
    missing("manifest lists " + std::to_string(keys.size()) + " templates, expected " +
            std::to_string(required.size()));
  }

  LetterLibrary lib;
  for (const auto& key : required) {
    const auto path = dir / (key + ".txt");
    if (!std::filesystem::exists(path)) missing("template file missing: " + path.string());
    lib.templates_.emplace(key, parse_template(key, read_file(path)));
  }

  const auto phrases = manifest.value("phrases", survey::json::object());
  for (auto locale : kLetterLocales) {
    auto it = phrases.find(std::string(locale));
    if (it == phrases.end() || !it->is_object()) {
      missing("manifest has no phrases for locale " + std::string(locale));
    }
    auto& table = lib.phrases_[std::string(locale)];
    for (const auto& [id, text] : it->items()) {
      if (text.is_string()) table.emplace(id, text.get<std::string>());
    }
    std::vector<std::string> needed{"eye.left", "eye.right", "eye.not_graded"};
    for (DrGrade g : grading::kAllGrades) {
      needed.push_back("grade." + std::string(grading::slug(g)));
      needed.push_back("recommendation." + std::string(grading::slug(g)));
    }
    for (const auto& id : needed) {
      if (!table.count(id)) missing("phrase '" + id + "' missing for locale " + std::string(locale));
    }
  }
  return lib;
}

const LetterTemplate& LetterLibrary::get(std::string_view key) const {
  auto it = templates_.find(key);
  if (it == templates_.end()) missing("no template " + std::string(key));
  return it->second;
}

const std::string& LetterLibrary::phrase(std::string_view locale, std::string_view id) const {
  auto table = phrases_.find(locale);
  if (table != phrases_.end()) {
    auto it = table->second.find(id);
    if (it != table->second.end()) return it->second;
  }
  missing("no phrase '" + std::string(id) + "' for locale " + std::string(locale));
}

std::string fill_placeholders(std::string_view text,
                              const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find('}', open);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    auto it = values.find(text.substr(open + 1, close - open - 1));
    if (it != values.end()) {
      out += it->second;
    } else {
      out.append(text.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  out.append(text.substr(pos));
  return out;
}

std::string address_block(const domain::Participant& participant) {
  const auto& d = participant.demographics;
  return d.name + "\n" + d.city + ", " + d.state + " " + d.zipcode + "\n" + d.country;
}

Letter compose_letter(const LetterLibrary& library, const domain::Participant& participant,
                      const grading::GradingRecord& grading) {
  const DrGrade overall = grading::overall_grade(grading);
  const auto language = participant.demographics.language;
  const std::string locale(letter_locale(language));
  const std::string key = select_letter(overall, language);
  const LetterTemplate& tpl = library.get(key);

  auto eye_line = [&](const char* eye_id, const std::optional<grading::EyeAssessment>& eye) {
    const auto& result = eye ? library.phrase(locale, "grade." + std::string(grading::slug(eye->grade)))
                             : library.phrase(locale, "eye.not_graded");
    return library.phrase(locale, eye_id) + ": " + result;
  };

  // Participant-supplied text must not open new placeholders in the output.
  auto sanitize = [](std::string s) {
    for (char& c : s) {
      if (c == '{') c = '(';
      if (c == '}') c = ')';
    }
    return s;
  };

  const std::map<std::string, std::string, std::less<>> values{
      {"participant_name", sanitize(participant.demographics.name)},
      {"address_block", sanitize(address_block(participant))},
      {"grade_statement", eye_line("eye.left", grading.left) + "\n" + eye_line("eye.right", grading.right)},
      {"recommendation", library.phrase(locale, "recommendation." + std::string(grading::slug(overall)))},
  };

  Letter letter;
  letter.visit_id = grading.visit_id.str();
  letter.template_key = key;
  letter.locale = locale;
  letter.subject = fill_placeholders(tpl.subject, values);
  letter.body = fill_placeholders(tpl.body, values);
  letter.html = printable_page(locale, letter.subject, letter.body);
  return letter;
}

std::string_view token(Channel c) noexcept { return c == Channel::PhoneCall ? "phone_call" : "text"; }

std::optional<Channel> parse_channel(std::string_view t) noexcept {
  if (t == "phone_call") return Channel::PhoneCall;
  if (t == "text") return Channel::Text;
  return std::nullopt;
}

survey::json to_json(const Letter& letter) {
  return {{"visit_id", letter.visit_id}, {"template_key", letter.template_key},
          {"locale", letter.locale},     {"subject", letter.subject},
          {"body", letter.body},         {"html", letter.html}};
}

survey::json to_json(const LetterDispatch& d) {
  return {{"dispatch_id", d.dispatch_id},
          {"visit_id", d.visit_id},
          {"template_key", d.template_key},
          {"rendered_at", format_timestamp(d.rendered_at)},
          {"sent", d.sent},
          {"sent_marked_at", d.sent_marked_at ? survey::json(format_timestamp(*d.sent_marked_at))
                                              : survey::json(nullptr)},
          {"active", d.active}};
}

survey::json to_json(const FollowUp& f) {
  return {{"followup_id", f.followup_id}, {"visit_id", f.visit_id},
          {"channel", token(f.channel)},   {"comment", f.comment},
          {"created_at", format_timestamp(f.created_at)}, {"staff_id", f.staff_id}};
}

}  // namespace mtocs::reporting
