#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtocs/domain.hpp"

namespace mtocs::grading {

using domain::VisitId;

/// Diabetic retinopathy outcome for one eye. One result letter exists per value.
enum class DrGrade {
  NoApparentDR,
  MildNPDR,
  ModerateNPDR,
  SevereNPDR,
  ProliferativeDR,
  MacularEdemaSuspected,
  OtherFindings,
  Ungradable,
};

inline constexpr std::array kAllGrades{
    DrGrade::NoApparentDR,          DrGrade::MildNPDR,      DrGrade::ModerateNPDR,
    DrGrade::SevereNPDR,            DrGrade::ProliferativeDR, DrGrade::MacularEdemaSuspected,
    DrGrade::OtherFindings,         DrGrade::Ungradable};

/// Kebab-case slug used in letter keys and exports ("moderate-npdr").
std::string_view slug(DrGrade g) noexcept;
std::optional<DrGrade> parse_grade(std::string_view slug) noexcept;
std::string_view display_name(DrGrade g) noexcept;

/// Position in the combined-severity order used to pick one letter for two eyes:
/// Ungradable < NoApparentDR < OtherFindings < MildNPDR < ModerateNPDR <
/// MacularEdemaSuspected < SevereNPDR < ProliferativeDR.
int severity(DrGrade g) noexcept;

struct EyeAssessment {
  DrGrade grade = DrGrade::NoApparentDR;
  std::string comment;

  bool operator==(const EyeAssessment&) const = default;
};

struct GradingRecord {
  VisitId visit_id{domain::ParticipantId::first(), 1};
  std::optional<EyeAssessment> left;
  std::optional<EyeAssessment> right;
  std::string grader_id;
  Timestamp graded_at{};
  int revision = 1;
};

/// Single grade summarizing both eyes: the most severe graded eye, where an
/// Ungradable eye only wins if every graded eye is Ungradable.
/// Precondition: at least one eye present.
DrGrade overall_grade(const GradingRecord& record);

/// Partial update for a grading edit. Unset members keep the previous value;
/// a member holding nullopt clears that eye.
struct GradingPatch {
  std::optional<std::optional<EyeAssessment>> left;
  std::optional<std::optional<EyeAssessment>> right;
};

/// What a grader sees about a visit: no name, contact details, address or
/// exact date of birth.
struct GraderView {
  std::string visit_id;
  std::string organization_id;
  std::string age_band;
  std::string sex;
  std::string survey_taken_at;
  survey::json answers;
  std::vector<domain::ImageRef> image_refs;
};

/// Decade band of an age: 48 -> "40–49".
std::string age_band(int age);

survey::json to_json(const GraderView& view);
survey::json to_json(const GradingRecord& record);

}  // namespace mtocs::grading
