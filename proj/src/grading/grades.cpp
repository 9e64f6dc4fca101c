#include "mtocs/error.hpp"
#include "mtocs/grading.hpp"

namespace mtocs::grading {

std::string_view slug(DrGrade g) noexcept {
  switch (g) {
    case DrGrade::NoApparentDR: return "no-apparent-dr";
    case DrGrade::MildNPDR: return "mild-npdr";
    case DrGrade::ModerateNPDR: return "moderate-npdr";
    case DrGrade::SevereNPDR: return "severe-npdr";
    case DrGrade::ProliferativeDR: return "proliferative-dr";
    case DrGrade::MacularEdemaSuspected: return "macular-edema-suspected";
    case DrGrade::OtherFindings: return "other-findings";
    case DrGrade::Ungradable: return "ungradable";
  }
  return "ungradable";
}

std::optional<DrGrade> parse_grade(std::string_view text) noexcept {
  for (DrGrade g : kAllGrades) {
    if (slug(g) == text) return g;
  }
  return std::nullopt;
}

std::string_view display_name(DrGrade g) noexcept {
  switch (g) {
    case DrGrade::NoApparentDR: return "No apparent diabetic retinopathy";
    case DrGrade::MildNPDR: return "Mild non-proliferative diabetic retinopathy";
    case DrGrade::ModerateNPDR: return "Moderate non-proliferative diabetic retinopathy";
    case DrGrade::SevereNPDR: return "Severe non-proliferative diabetic retinopathy";
    case DrGrade::ProliferativeDR: return "Proliferative diabetic retinopathy";
    case DrGrade::MacularEdemaSuspected: return "Suspected macular edema";
    case DrGrade::OtherFindings: return "Other findings";
    case DrGrade::Ungradable: return "Ungradable images";
  }
  return "Ungradable images";
}

int severity(DrGrade g) noexcept {
  switch (g) {
    case DrGrade::Ungradable: return 0;
    case DrGrade::NoApparentDR: return 1;
    case DrGrade::OtherFindings: return 2;
    case DrGrade::MildNPDR: return 3;
    case DrGrade::ModerateNPDR: return 4;
    case DrGrade::MacularEdemaSuspected: return 5;
    case DrGrade::SevereNPDR: return 6;
    case DrGrade::ProliferativeDR: return 7;
  }
  return 0;
}

DrGrade overall_grade(const GradingRecord& record) {
  std::optional<DrGrade> worst;
  for (const auto* eye : {&record.left, &record.right}) {
    if (!eye->has_value()) continue;
    const DrGrade g = (*eye)->grade;
    if (!worst || severity(g) > severity(*worst)) worst = g;
  }
  if (!worst) fail(ErrorCode::Validation, "grading has no graded eye", "left");
  return *worst;
}

std::string age_band(int age) {
  if (age < 0) age = 0;
  const int low = age / 10 * 10;
  return std::to_string(low) + "–" + std::to_string(low + 9);
}

namespace {

survey::json eye_json(const std::optional<EyeAssessment>& eye) {
  if (!eye) return nullptr;
  return {{"grade", slug(eye->grade)}, {"comment", eye->comment}};
}

}  // namespace

survey::json to_json(const GraderView& view) {
  survey::json images = survey::json::array();
  for (const auto& ref : view.image_refs) {
    images.push_back({{"eye", domain::token(ref.eye)},
                      {"storage_key", ref.storage_key},
                      {"captured_at", format_timestamp(ref.captured_at)}});
  }
  return {{"visit_id", view.visit_id},
          {"organization_id", view.organization_id},
          {"age_band", view.age_band},
          {"sex", view.sex},
          {"survey_taken_at", view.survey_taken_at},
          {"answers", view.answers},
          {"image_refs", std::move(images)}};
}

survey::json to_json(const GradingRecord& record) {
  return {{"visit_id", record.visit_id.str()},
          {"left", eye_json(record.left)},
          {"right", eye_json(record.right)},
          {"overall_grade", slug(overall_grade(record))},
          {"grader_id", record.grader_id},
          {"graded_at", format_timestamp(record.graded_at)},
          {"revision", record.revision}};
}

}  // namespace mtocs::grading
