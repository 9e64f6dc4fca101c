#include "mtocs/access.hpp"

#include <sodium.h>

#include <algorithm>
#include <cctype>
#include <mutex>
#include <stdexcept>

#include "mtocs/error.hpp"

namespace mtocs::access {

std::string_view token(Role r) noexcept {
  switch (r) {
    case Role::Screener: return "screener";
    case Role::Grader: return "grader";
    case Role::Staff: return "staff";
    case Role::Admin: return "admin";
  }
  return "screener";
}

std::optional<Role> parse_role(std::string_view t) noexcept {
  for (Role r : kAllRoles) {
    if (token(r) == t) return r;
  }
  return std::nullopt;
}

std::string_view token(Action a) noexcept {
  switch (a) {
    case Action::RegisterParticipant: return "register-participant";
    case Action::SearchParticipants: return "search-participants";
    case Action::EditParticipant: return "edit-participant";
    case Action::OpenVisit: return "open-visit";
    case Action::EditSurvey: return "edit-survey";
    case Action::AttachImage: return "attach-image";
    case Action::ViewQuestionnaire: return "view-questionnaire";
    case Action::TransitionVisit: return "transition-visit";
    case Action::TransitionToImaged: return "transition-to-imaged";
    case Action::ViewGradingQueue: return "view-grading-queue";
    case Action::SubmitGrading: return "submit-grading";
    case Action::EditGrading: return "edit-grading";
    case Action::TransitionToGraded: return "transition-to-graded";
    case Action::ReadParticipantPii: return "read-participant-pii";
    case Action::ViewPendingReports: return "view-pending-reports";
    case Action::RenderLetter: return "render-letter";
    case Action::MarkLetterSent: return "mark-letter-sent";
    case Action::AddFollowUp: return "add-followup";
    case Action::ListFollowUps: return "list-followups";
    case Action::TransitionToNotified: return "transition-to-notified";
    case Action::TransitionToClosed: return "transition-to-closed";
    case Action::ExportData: return "export-data";
  }
  return "unknown";
}

bool permitted(Role role, Action action) noexcept {
  switch (action) {
    case Action::RegisterParticipant:
    case Action::SearchParticipants:
    case Action::EditParticipant:
    case Action::OpenVisit:
    case Action::EditSurvey:
    case Action::AttachImage:
    case Action::TransitionToImaged:
      return role == Role::Screener;
    case Action::ViewQuestionnaire:
      return role == Role::Screener || role == Role::Grader;
    case Action::ViewGradingQueue:
    case Action::SubmitGrading:
    case Action::EditGrading:
    case Action::TransitionToGraded:
      return role == Role::Grader;
    case Action::ReadParticipantPii:
    case Action::ViewPendingReports:
    case Action::RenderLetter:
    case Action::MarkLetterSent:
    case Action::AddFollowUp:
    case Action::ListFollowUps:
    case Action::TransitionToNotified:
    case Action::TransitionToClosed:
      return role == Role::Staff;
    case Action::TransitionVisit:
      return role != Role::Admin;
    case Action::ExportData:
      return role == Role::Admin;
  }
  return false;
}

Action transition_action(domain::VisitState target) noexcept {
  switch (target) {
    case domain::VisitState::Imaged: return Action::TransitionToImaged;
    case domain::VisitState::Graded: return Action::TransitionToGraded;
    case domain::VisitState::Notified: return Action::TransitionToNotified;
    case domain::VisitState::Closed: return Action::TransitionToClosed;
    case domain::VisitState::Surveyed: break;
  }
  // Nothing may move a visit back to Surveyed; no role holds this action.
  return Action::TransitionToImaged;
}

bool Account::serves(const OrganizationId& org) const {
  if (role == Role::Admin || org == organization_id) return true;
  return std::find(extra_organizations.begin(), extra_organizations.end(), org) !=
         extra_organizations.end();
}

std::string_view token(Outcome o) noexcept { return o == Outcome::Allowed ? "allowed" : "denied"; }

Outcome Authorizer::authorize(const Account& account, Action action, std::string_view entity,
                              const OrganizationId* entity_org) const {
  const bool ok = permitted(account.role, action) && (!entity_org || account.serves(*entity_org));
  const Outcome outcome = ok ? Outcome::Allowed : Outcome::Denied;
  sink_.append(AuditEvent{account.account_id, std::string(token(action)), std::string(entity),
                          clock_.now(), outcome});
  return outcome;
}

void Authorizer::require(const Account& account, Action action, std::string_view entity,
                         const OrganizationId* entity_org) const {
  if (authorize(account, action, entity, entity_org) == Outcome::Denied) {
    fail(ErrorCode::Unauthorized, std::string(token(account.role)) + " may not " +
                                      std::string(token(action)));
  }
}

void Authorizer::record(const Account& account, std::string_view action,
                        std::string_view entity) const {
  sink_.append(AuditEvent{account.account_id, std::string(action), std::string(entity),
                          clock_.now(), Outcome::Allowed});
}

namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  });
}

std::string to_hex(const unsigned char* data, std::size_t size) {
  std::string out(size * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), data, size);
  out.pop_back();
  return out;
}

}  // namespace

std::string PasswordHasher::hash(std::string_view password) {
  ensure_sodium();
  char out[crypto_pwhash_STRBYTES];
  if (crypto_pwhash_str(out, password.data(), password.size(), crypto_pwhash_OPSLIMIT_INTERACTIVE,
                        crypto_pwhash_MEMLIMIT_INTERACTIVE) != 0) {
    fail(ErrorCode::Internal, "password hashing ran out of memory");
  }
  return out;
}

bool PasswordHasher::verify(std::string_view hash, std::string_view password) {
  ensure_sodium();
  const std::string h(hash);
  return crypto_pwhash_str_verify(h.c_str(), password.data(), password.size()) == 0;
}

std::string random_token(std::size_t bytes) {
  ensure_sodium();
  std::vector<unsigned char> buf(bytes);
  randombytes_buf(buf.data(), buf.size());
  return to_hex(buf.data(), buf.size());
}

std::string token_digest(std::string_view token) {
  ensure_sodium();
  unsigned char out[crypto_generichash_BYTES];
  crypto_generichash(out, sizeof out, reinterpret_cast<const unsigned char*>(token.data()),
                     token.size(), nullptr, 0);
  return to_hex(out, sizeof out);
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Identifying values of a participant, each at least three characters.
std::vector<std::string> identifying_values(const domain::Participant& p) {
  const auto& d = p.demographics;
  std::vector<std::string> values{d.name,    d.first_name, d.last_name, d.primary_phone,
                                  d.city,    d.zipcode,    format_date(d.date_of_birth)};
  if (d.secondary_phone) values.push_back(*d.secondary_phone);
  if (d.email) values.push_back(*d.email);
  // Individual words of the display name, e.g. a middle name.
  std::size_t start = 0;
  while (start < d.name.size()) {
    auto end = d.name.find(' ', start);
    if (end == std::string::npos) end = d.name.size();
    values.push_back(d.name.substr(start, end - start));
    start = end + 1;
  }
  std::erase_if(values, [](const std::string& v) { return v.size() < 3; });
  // Longest first so "Ana Garcia" is removed before "Garcia".
  std::sort(values.begin(), values.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return values;
}

std::string scrub(std::string text, const std::vector<std::string>& values) {
  static constexpr std::string_view kMask = "[redacted]";
  for (const auto& value : values) {
    const std::string needle = lower(value);
    std::string haystack = lower(text);
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
      text.replace(pos, needle.size(), kMask);
      haystack.replace(pos, needle.size(), kMask);
      pos += kMask.size();
    }
  }
  return text;
}

survey::json scrub_json(const survey::json& value, const std::vector<std::string>& pii) {
  if (value.is_string()) return scrub(value.get<std::string>(), pii);
  if (value.is_array()) {
    survey::json out = survey::json::array();
    for (const auto& v : value) out.push_back(scrub_json(v, pii));
    return out;
  }
  if (value.is_object()) {
    survey::json out = survey::json::object();
    for (const auto& [k, v] : value.items()) out[k] = scrub_json(v, pii);
    return out;
  }
  return value;
}

}  // namespace

grading::GraderView redact_for_grader(const domain::Participant& participant,
                                      const domain::Visit& visit) {
  const int age = age_on(participant.demographics.date_of_birth, date_of(visit.survey_taken_at));
  grading::GraderView view;
  view.visit_id = visit.visit_id.str();
  view.organization_id = visit.organization_id.str();
  view.age_band = grading::age_band(age);
  view.sex = std::string(domain::token(participant.demographics.sex));
  view.survey_taken_at = format_timestamp(visit.survey_taken_at);
  view.answers = scrub_json(visit.answers.answers, identifying_values(participant));
  view.image_refs = visit.image_refs;
  return view;
}

}  // namespace mtocs::access
