#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtocs/ids.hpp"
#include "mtocs/survey.hpp"
#include "mtocs/time.hpp"

namespace mtocs {

/// Tenant key. Lowercase letters, digits, '-' and '_', at most 64 chars;
/// it doubles as a directory name in the image store.
class OrganizationId {
 public:
  OrganizationId() = default;
  explicit OrganizationId(std::string value);

  static bool valid(std::string_view value) noexcept;

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }
  auto operator<=>(const OrganizationId&) const = default;

 private:
  std::string value_;
};

}  // namespace mtocs

namespace mtocs::domain {

using ids::ParticipantId;
using ids::VisitId;

enum class Sex { Female, Male, Other };
enum class Ethnicity { HispanicLatino, BlackAfricanAmerican, White, AsianPacificIslander, NativeAmerican, Other };
enum class Language { English, Spanish, Both, Other };
enum class Insurance { None, Private, Medicare, Medicaid, MedicareMedicaid, Other };

inline constexpr std::array kAllSexes{Sex::Female, Sex::Male, Sex::Other};
inline constexpr std::array kAllEthnicities{Ethnicity::HispanicLatino, Ethnicity::BlackAfricanAmerican,
                                            Ethnicity::White,          Ethnicity::AsianPacificIslander,
                                            Ethnicity::NativeAmerican, Ethnicity::Other};
inline constexpr std::array kAllLanguages{Language::English, Language::Spanish, Language::Both,
                                          Language::Other};
inline constexpr std::array kAllInsurances{Insurance::None,     Insurance::Private,
                                           Insurance::Medicare, Insurance::Medicaid,
                                           Insurance::MedicareMedicaid, Insurance::Other};

// Stable wire tokens ("hispanic_latino") and human labels ("Hispanic or Latino").
std::string_view token(Sex v) noexcept;
std::string_view token(Ethnicity v) noexcept;
std::string_view token(Language v) noexcept;
std::string_view token(Insurance v) noexcept;
std::string_view label(Sex v) noexcept;
std::string_view label(Ethnicity v) noexcept;
std::string_view label(Language v) noexcept;
std::string_view label(Insurance v) noexcept;

template <class Enum>
std::optional<Enum> parse_token(std::string_view text) noexcept;

enum class VisitState;
enum class Eye;

template <> std::optional<Sex> parse_token<Sex>(std::string_view) noexcept;
template <> std::optional<Ethnicity> parse_token<Ethnicity>(std::string_view) noexcept;
template <> std::optional<Language> parse_token<Language>(std::string_view) noexcept;
template <> std::optional<Insurance> parse_token<Insurance>(std::string_view) noexcept;
template <> std::optional<VisitState> parse_token<VisitState>(std::string_view) noexcept;
template <> std::optional<Eye> parse_token<Eye>(std::string_view) noexcept;

/// Demographics as collected at registration; everything but the id and
/// bookkeeping fields.
struct Demographics {
  std::string name;
  std::string first_name;
  std::string last_name;
  Date date_of_birth{};
  Sex sex = Sex::Other;
  Ethnicity ethnicity = Ethnicity::Other;
  Language language = Language::Other;
  Insurance insurance = Insurance::Other;
  std::string city;
  std::string state;
  std::string zipcode;
  std::string country;
  std::string primary_phone;
  std::optional<std::string> secondary_phone;
  std::optional<std::string> email;
};

struct Participant {
  ParticipantId participant_id = ParticipantId::first();
  Demographics demographics;
  OrganizationId organization_id;
  Timestamp created_at{};
  int version = 1;
};

/// Fills first/last name from the display name when absent and checks every
/// required field; throws Error(Validation) naming the first bad field.
void normalize_and_validate(Demographics& d);

enum class VisitState { Surveyed, Imaged, Graded, Notified, Closed };

inline constexpr std::array kAllVisitStates{VisitState::Surveyed, VisitState::Imaged,
                                            VisitState::Graded, VisitState::Notified,
                                            VisitState::Closed};

std::string_view token(VisitState v) noexcept;

/// Edges of the visit lifecycle: Surveyed -> Imaged -> Graded -> Notified ->
/// Closed, plus the Graded self-loop taken by grading edits.
bool is_legal_transition(VisitState from, VisitState to) noexcept;

/// Lifecycle position, for "state at least X" checks.
constexpr int rank(VisitState s) noexcept { return static_cast<int>(s); }

enum class Eye { Left, Right };

std::string_view token(Eye e) noexcept;
/// 'L' or 'R', as used in storage keys.
char letter(Eye e) noexcept;

struct ImageRef {
  Eye eye = Eye::Left;
  std::string storage_key;
  Timestamp captured_at{};
};

/// Storage key for the n-th image (1-based) of one eye of a visit:
/// "AAA001001-L-1". Never contains anything but the visit id.
std::string image_storage_key(const VisitId& visit, Eye eye, int index);

struct Visit {
  VisitId visit_id{ParticipantId::first(), 1};
  ParticipantId participant_id = ParticipantId::first();
  survey::AnswerSet answers;
  std::vector<ImageRef> image_refs;
  VisitState state = VisitState::Surveyed;
  Timestamp survey_taken_at{};
  std::optional<Timestamp> graded_at;
  OrganizationId organization_id;
  /// Set when grading changes after a letter went out; cleared by a new letter.
  bool requires_reissue = false;
  int version = 1;
};

struct Transition {
  VisitState from;
  VisitState to;
  Timestamp at;
  std::string actor;
};

enum class SearchField { Id, Name, DateOfBirth, Phone };

std::optional<SearchField> parse_search_field(std::string_view token) noexcept;

/// Search predicate: Name compares first or last name case-insensitively,
/// Phone compares primary and secondary phone, Id and DateOfBirth compare the
/// canonical rendering. All comparisons are whole-value.
bool matches(const Participant& p, SearchField field, std::string_view query);

// JSON wire form; field names follow the struct members.
survey::json to_json(const Demographics& d);
survey::json to_json(const Participant& p);
survey::json to_json(const Visit& v);
survey::json to_json(const ImageRef& ref);

/// Parses registration input. Throws Error(Validation) with the field name
/// for a missing, mistyped or out-of-domain value. Does not run
/// normalize_and_validate.
Demographics demographics_from_json(const survey::json& j);

/// Applies a partial update (only keys present in `patch`) on top of `base`.
/// Rejects identity and bookkeeping keys such as participant_id.
Demographics apply_patch(const Demographics& base, const survey::json& patch);

}  // namespace mtocs::domain
