#include "mtocs/domain.hpp"

#include <algorithm>
#include <cctype>

#include "mtocs/error.hpp"

namespace mtocs {

OrganizationId::OrganizationId(std::string value) : value_(std::move(value)) {
  if (!valid(value_)) {
    fail(ErrorCode::Validation, "malformed organization id '" + value_ + "'", "organization_id");
  }
}

bool OrganizationId::valid(std::string_view value) noexcept {
  if (value.empty() || value.size() > 64) return false;
  return std::all_of(value.begin(), value.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

}  // namespace mtocs

namespace mtocs::domain {

std::string_view token(Sex v) noexcept {
  switch (v) {
    case Sex::Female: return "female";
    case Sex::Male: return "male";
    case Sex::Other: return "other";
  }
  return "other";
}

std::string_view label(Sex v) noexcept {
  switch (v) {
    case Sex::Female: return "Female";
    case Sex::Male: return "Male";
    case Sex::Other: return "Other/Unreported";
  }
  return "Other/Unreported";
}

std::string_view token(Ethnicity v) noexcept {
  switch (v) {
    case Ethnicity::HispanicLatino: return "hispanic_latino";
    case Ethnicity::BlackAfricanAmerican: return "black_african_american";
    case Ethnicity::White: return "white";
    case Ethnicity::AsianPacificIslander: return "asian_pacific_islander";
    case Ethnicity::NativeAmerican: return "native_american";
    case Ethnicity::Other: return "other";
  }
  return "other";
}

std::string_view label(Ethnicity v) noexcept {
  switch (v) {
    case Ethnicity::HispanicLatino: return "Hispanic or Latino";
    case Ethnicity::BlackAfricanAmerican: return "Black or African American";
    case Ethnicity::White: return "White";
    case Ethnicity::AsianPacificIslander: return "Asian or Pacific Islander";
    case Ethnicity::NativeAmerican: return "Native American";
    case Ethnicity::Other: return "Other/Unreported";
  }
  return "Other/Unreported";
}

std::string_view token(Language v) noexcept {
  switch (v) {
    case Language::English: return "english";
    case Language::Spanish: return "spanish";
    case Language::Both: return "both";
    case Language::Other: return "other";
  }
  return "other";
}

std::string_view label(Language v) noexcept {
  switch (v) {
    case Language::English: return "English";
    case Language::Spanish: return "Spanish";
    case Language::Both: return "Both";
    case Language::Other: return "Other";
  }
  return "Other";
}

std::string_view token(Insurance v) noexcept {
  switch (v) {
    case Insurance::None: return "none";
    case Insurance::Private: return "private";
    case Insurance::Medicare: return "medicare";
    case Insurance::Medicaid: return "medicaid";
    case Insurance::MedicareMedicaid: return "medicare_medicaid";
    case Insurance::Other: return "other";
  }
  return "other";
}

std::string_view label(Insurance v) noexcept {
  switch (v) {
    case Insurance::None: return "No insurance";
    case Insurance::Private: return "Private insurance";
    case Insurance::Medicare: return "Medicare";
    case Insurance::Medicaid: return "Medicaid";
    case Insurance::MedicareMedicaid: return "Medicare and Medicaid";
    case Insurance::Other: return "Other insurance";
  }
  return "Other insurance";
}

namespace {

template <class Enum, std::size_t N>
std::optional<Enum> find_token(const std::array<Enum, N>& all, std::string_view text) noexcept {
  for (Enum v : all) {
    if (token(v) == text) return v;
  }
  return std::nullopt;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void require(const std::string& value, const char* field) {
  if (blank(value)) fail(ErrorCode::Validation, std::string(field) + " is required", field);
}

}  // namespace

template <>
std::optional<Sex> parse_token<Sex>(std::string_view t) noexcept { return find_token(kAllSexes, t); }
template <>
std::optional<Ethnicity> parse_token<Ethnicity>(std::string_view t) noexcept {
  return find_token(kAllEthnicities, t);
}
template <>
std::optional<Language> parse_token<Language>(std::string_view t) noexcept {
  return find_token(kAllLanguages, t);
}
template <>
std::optional<Insurance> parse_token<Insurance>(std::string_view t) noexcept {
  return find_token(kAllInsurances, t);
}
template <>
std::optional<VisitState> parse_token<VisitState>(std::string_view t) noexcept {
  return find_token(kAllVisitStates, t);
}
template <>
std::optional<Eye> parse_token<Eye>(std::string_view t) noexcept {
  return find_token(std::array{Eye::Left, Eye::Right}, t);
}

void normalize_and_validate(Demographics& d) {
  d.name = trim(d.name);
  d.first_name = trim(d.first_name);
  d.last_name = trim(d.last_name);
  if (d.name.empty() && !d.first_name.empty() && !d.last_name.empty()) {
    d.name = d.first_name + " " + d.last_name;
  }
  require(d.name, "name");
  if (d.first_name.empty() || d.last_name.empty()) {
    const auto space_first = d.name.find(' ');
    const auto space_last = d.name.rfind(' ');
    if (d.first_name.empty()) d.first_name = d.name.substr(0, space_first);
    if (d.last_name.empty()) {
      d.last_name = space_last == std::string::npos ? d.name : d.name.substr(space_last + 1);
    }
  }
  if (!d.date_of_birth.ok()) fail(ErrorCode::Validation, "date_of_birth is required", "date_of_birth");
  for (auto [value, field] : {std::pair{&d.city, "city"}, std::pair{&d.state, "state"},
                              std::pair{&d.zipcode, "zipcode"}, std::pair{&d.country, "country"},
                              std::pair{&d.primary_phone, "primary_phone"}}) {
    *value = trim(*value);
    require(*value, field);
  }
  for (auto* opt : {&d.secondary_phone, &d.email}) {
    if (opt->has_value()) {
      **opt = trim(**opt);
      if ((*opt)->empty()) opt->reset();
    }
  }
  if (d.email && d.email->find('@') == std::string::npos) {
    fail(ErrorCode::Validation, "email must contain '@'", "email");
  }
}

std::string_view token(VisitState v) noexcept {
  switch (v) {
    case VisitState::Surveyed: return "surveyed";
    case VisitState::Imaged: return "imaged";
    case VisitState::Graded: return "graded";
    case VisitState::Notified: return "notified";
    case VisitState::Closed: return "closed";
  }
  return "surveyed";
}

bool is_legal_transition(VisitState from, VisitState to) noexcept {
  if (from == VisitState::Graded && to == VisitState::Graded) return true;
  return rank(to) == rank(from) + 1;
}

std::string_view token(Eye e) noexcept { return e == Eye::Left ? "left" : "right"; }

char letter(Eye e) noexcept { return e == Eye::Left ? 'L' : 'R'; }

std::string image_storage_key(const VisitId& visit, Eye eye, int index) {
  return visit.str() + "-" + letter(eye) + "-" + std::to_string(index);
}

std::optional<SearchField> parse_search_field(std::string_view t) noexcept {
  if (t == "id") return SearchField::Id;
  if (t == "name") return SearchField::Name;
  if (t == "date_of_birth" || t == "dob") return SearchField::DateOfBirth;
  if (t == "phone") return SearchField::Phone;
  return std::nullopt;
}

bool matches(const Participant& p, SearchField field, std::string_view query) {
  const std::string q = trim(query);
  const auto& d = p.demographics;
  switch (field) {
    case SearchField::Id: return p.participant_id.str() == q;
    case SearchField::Name: {
      const auto lq = lower(q);
      return lower(d.first_name) == lq || lower(d.last_name) == lq;
    }
    case SearchField::DateOfBirth: return format_date(d.date_of_birth) == q;
    case SearchField::Phone: return d.primary_phone == q || (d.secondary_phone && *d.secondary_phone == q);
  }
  return false;
}

}  // namespace mtocs::domain
