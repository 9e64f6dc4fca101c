#include "mtocs/storage/export.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <tuple>

#include "mtocs/error.hpp"
#include "mtocs/storage/csv.hpp"

namespace mtocs::storage {

using survey::json;
namespace chr = std::chrono;

namespace {

std::string yes_no(const json& answers, const char* key) {
  auto it = answers.find(key);
  if (it == answers.end() || it->is_null()) return {};
  if (it->is_boolean()) return it->get<bool>() ? "yes" : "no";
  return it->dump();
}

std::string text_answer(const json& answers, const char* key) {
  auto it = answers.find(key);
  if (it == answers.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

std::string grade_cell(const std::optional<grading::EyeAssessment>& eye) {
  return eye ? std::string(grading::slug(eye->grade)) : std::string();
}

}  // namespace

std::vector<std::string> ExportRow::cells() const {
  return {participant_id, visit_id,       std::to_string(age_at_visit), sex,          ethnicity,
          language,       insurance,      city,                         state,        zipcode,
          country,        survey_date,    has_diabetes,                 diabetes_type, diabetes_duration,
          hypertension,   left_grade,     right_grade,                  letter_sent,  std::to_string(followup_count)};
}

std::vector<ExportRow> export_rows(Tx& tx, const std::optional<OrganizationId>& org) {
  std::map<std::pair<OrganizationId, ParticipantId>, Participant> people;
  for (auto& p : tx.participants(org)) people.emplace(std::pair{p.organization_id, p.participant_id}, std::move(p));

  auto visits = tx.visits(org);
  std::sort(visits.begin(), visits.end(), [](const Visit& a, const Visit& b) {
    return std::tie(a.participant_id, a.visit_id, a.organization_id) <
           std::tie(b.participant_id, b.visit_id, b.organization_id);
  });

  std::vector<ExportRow> rows;
  rows.reserve(visits.size());
  for (const auto& v : visits) {
    const auto& p = people.at({v.organization_id, v.participant_id});
    const auto& d = p.demographics;
    const Date day = date_of(v.survey_taken_at);
    const auto& answers = v.answers.answers;

    ExportRow r;
    r.participant_id = p.participant_id.str();
    r.visit_id = v.visit_id.str();
    r.age_at_visit = age_on(d.date_of_birth, day);
    r.sex = domain::token(d.sex);
    r.ethnicity = domain::token(d.ethnicity);
    r.language = domain::token(d.language);
    r.insurance = domain::token(d.insurance);
    r.city = d.city;
    r.state = d.state;
    r.zipcode = d.zipcode;
    r.country = d.country;
    r.survey_date = format_date(day);
    r.has_diabetes = yes_no(answers, "has_diabetes");
    r.diabetes_type = text_answer(answers, "diabetes_type");
    r.diabetes_duration = text_answer(answers, "diabetes_duration");
    r.hypertension = yes_no(answers, "hypertension");
    if (auto g = tx.latest_grading(v.organization_id, v.visit_id)) {
      r.left_grade = grade_cell(g->left);
      r.right_grade = grade_cell(g->right);
    }
    if (auto dispatch = tx.active_dispatch(v.organization_id, v.visit_id)) {
      r.letter_sent = dispatch->sent ? "yes" : "no";
    }
    r.followup_count = static_cast<int>(tx.followups_for_visit(v.organization_id, v.visit_id).size());
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string to_csv(const std::vector<ExportRow>& rows) {
  std::string out;
  csv::append_row(out, csv::Row(kExportColumns.begin(), kExportColumns.end()));
  for (const auto& r : rows) csv::append_row(out, r.cells());
  return out;
}

namespace {

class RowReader {
 public:
  RowReader(const csv::Row& cells, std::size_t row_number) : cells_(cells), row_(row_number) {}

  [[noreturn]] void reject(std::size_t col, const std::string& why) const {
    const std::string where = "row " + std::to_string(row_) + ", column " + std::string(kExportColumns[col]);
    fail(ErrorCode::FormatError, where + ": " + why, where);
  }

  const std::string& text(std::size_t col) const { return cells_[col]; }

  int integer(std::size_t col, int lo, int hi) const {
    const auto& s = cells_[col];
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v < lo || v > hi) {
      reject(col, "expected an integer in " + std::to_string(lo) + ".." + std::to_string(hi) + ", got '" + s + "'");
    }
    return v;
  }

  template <class Enum>
  std::string token(std::size_t col) const {
    if (!domain::parse_token<Enum>(cells_[col])) reject(col, "unknown value '" + cells_[col] + "'");
    return cells_[col];
  }

  std::string one_of(std::size_t col, std::initializer_list<std::string_view> allowed) const {
    for (auto a : allowed) {
      if (cells_[col] == a) return cells_[col];
    }
    reject(col, "unexpected value '" + cells_[col] + "'");
  }

  std::string grade(std::size_t col) const {
    if (!cells_[col].empty() && !grading::parse_grade(cells_[col])) reject(col, "unknown grade '" + cells_[col] + "'");
    return cells_[col];
  }

 private:
  const csv::Row& cells_;
  std::size_t row_;
};

enum Col : std::size_t {
  kParticipant, kVisit, kAge, kSex, kEthnicity, kLanguage, kInsurance, kCity, kState, kZip, kCountry,
  kSurveyDate, kHasDiabetes, kDiabetesType, kDiabetesDuration, kHypertension, kLeft, kRight, kLetter, kFollowups
};

}  // namespace

std::vector<ExportRow> parse_export(std::string_view text) {
  const auto table = csv::parse(text);
  if (table.empty()) fail(ErrorCode::FormatError, "missing header row", "row 1");
  const auto& header = table.front();
  if (header.size() != kExportColumns.size() || !std::equal(header.begin(), header.end(), kExportColumns.begin())) {
    fail(ErrorCode::FormatError,
         "header must be exactly the " + std::to_string(kExportColumns.size()) + " export columns (got " +
             std::to_string(header.size()) + ")",
         "row 1");
  }

  std::vector<ExportRow> rows;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& cells = table[i];
    const std::size_t row_number = i + 1;
    if (cells.size() != kExportColumns.size()) {
      fail(ErrorCode::FormatError,
           "row " + std::to_string(row_number) + " has " + std::to_string(cells.size()) + " fields",
           "row " + std::to_string(row_number));
    }
    RowReader in(cells, row_number);
    ExportRow r;
    auto pid = ids::ParticipantId::parse(in.text(kParticipant));
    if (!pid) in.reject(kParticipant, "malformed participant id '" + in.text(kParticipant) + "'");
    auto vid = ids::VisitId::parse(in.text(kVisit));
    if (!vid) in.reject(kVisit, "malformed visit id '" + in.text(kVisit) + "'");
    if (vid->participant() != *pid) in.reject(kVisit, "visit id does not extend the participant id");
    r.participant_id = pid->str();
    r.visit_id = vid->str();
    r.age_at_visit = in.integer(kAge, 0, 130);
    r.sex = in.token<domain::Sex>(kSex);
    r.ethnicity = in.token<domain::Ethnicity>(kEthnicity);
    r.language = in.token<domain::Language>(kLanguage);
    r.insurance = in.token<domain::Insurance>(kInsurance);
    r.city = in.text(kCity);
    r.state = in.text(kState);
    r.zipcode = in.text(kZip);
    r.country = in.text(kCountry);
    if (!parse_date(in.text(kSurveyDate))) in.reject(kSurveyDate, "expected YYYY-MM-DD");
    r.survey_date = in.text(kSurveyDate);
    r.has_diabetes = in.one_of(kHasDiabetes, {"", "yes", "no"});
    r.diabetes_type = in.text(kDiabetesType);
    r.diabetes_duration = in.text(kDiabetesDuration);
    if (!r.diabetes_duration.empty()) {
      const json n = json::parse(r.diabetes_duration, nullptr, false);
      if (!n.is_number() || n.dump() != r.diabetes_duration) in.reject(kDiabetesDuration, "expected a number");
    }
    r.hypertension = in.one_of(kHypertension, {"", "yes", "no"});
    r.left_grade = in.grade(kLeft);
    r.right_grade = in.grade(kRight);
    r.letter_sent = in.one_of(kLetter, {"", "no", "yes"});
    r.followup_count = in.integer(kFollowups, 0, 1000000);
    if (!r.letter_sent.empty() && r.left_grade.empty() && r.right_grade.empty()) {
      in.reject(kLetter, "a letter requires a grade");
    }
    if (r.followup_count > 0 && r.letter_sent != "yes") in.reject(kFollowups, "follow-ups require a sent letter");
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

Date minus_years(Date d, int years) {
  Date r{d.year() - chr::years(years), d.month(), d.day()};
  if (!r.ok()) r = Date{r.year() / r.month() / chr::last};
  return r;
}

Timestamp midnight(Date d) { return Timestamp{chr::sys_days(d).time_since_epoch()}; }

bool same_person(const ExportRow& a, const ExportRow& b) {
  return std::tie(a.sex, a.ethnicity, a.language, a.insurance, a.city, a.state, a.zipcode, a.country) ==
         std::tie(b.sex, b.ethnicity, b.language, b.insurance, b.city, b.state, b.zipcode, b.country);
}

std::optional<grading::EyeAssessment> eye_from(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  return grading::EyeAssessment{*grading::parse_grade(cell), ""};
}

}  // namespace

std::size_t import_rows(Tx& tx, const OrganizationId& org, const std::vector<ExportRow>& rows,
                        const survey::Questionnaire& schema, Timestamp imported_at) {
  // Rows of one participant must agree on demographics and admit one birth date.
  std::map<std::string, std::vector<const ExportRow*>> by_participant;
  for (const auto& r : rows) by_participant[r.participant_id].push_back(&r);

  std::optional<ParticipantId> highest;
  for (const auto& [pid_text, visits] : by_participant) {
    const auto pid = ParticipantId::parse_or_throw(pid_text);
    const ExportRow& first = *visits.front();
    Date lower = Date{chr::year{1}, chr::January, chr::day{1}};
    Date upper = Date{chr::year{9999}, chr::December, chr::day{31}};
    Timestamp earliest = midnight(*parse_date(first.survey_date));
    for (const ExportRow* r : visits) {
      if (!same_person(first, *r)) {
        fail(ErrorCode::FormatError, "visit " + r->visit_id + " disagrees with earlier rows of " + pid_text,
             "visit " + r->visit_id);
      }
      const Date day = *parse_date(r->survey_date);
      earliest = std::min(earliest, midnight(day));
      lower = std::max(lower, Date{chr::sys_days(minus_years(day, r->age_at_visit + 1)) + chr::days(1)});
      upper = std::min(upper, minus_years(day, r->age_at_visit));
    }
    const Date dob = lower;
    for (const ExportRow* r : visits) {
      if (dob > upper || age_on(dob, *parse_date(r->survey_date)) != r->age_at_visit) {
        fail(ErrorCode::FormatError, "ages of " + pid_text + " are inconsistent across visits",
             "visit " + r->visit_id);
      }
    }

    Participant p;
    p.participant_id = pid;
    p.organization_id = org;
    p.created_at = std::min(earliest, imported_at);
    auto& d = p.demographics;
    d.name = d.first_name = d.last_name = pid_text;
    d.date_of_birth = dob;
    d.sex = *domain::parse_token<domain::Sex>(first.sex);
    d.ethnicity = *domain::parse_token<domain::Ethnicity>(first.ethnicity);
    d.language = *domain::parse_token<domain::Language>(first.language);
    d.insurance = *domain::parse_token<domain::Insurance>(first.insurance);
    d.city = first.city;
    d.state = first.state;
    d.zipcode = first.zipcode;
    d.country = first.country;
    d.primary_phone = "unknown";
    tx.insert_participant(p);
    highest = highest ? std::max(*highest, pid) : pid;

    for (const ExportRow* r : visits) {
      Visit v;
      v.visit_id = VisitId::parse_or_throw(r->visit_id);
      v.participant_id = pid;
      v.organization_id = org;
      v.survey_taken_at = midnight(*parse_date(r->survey_date));
      v.answers.schema_version = schema.version();
      auto& a = v.answers.answers;
      if (!r->has_diabetes.empty()) a["has_diabetes"] = r->has_diabetes == "yes";
      if (!r->diabetes_type.empty()) a["diabetes_type"] = r->diabetes_type;
      if (!r->diabetes_duration.empty()) a["diabetes_duration"] = json::parse(r->diabetes_duration);
      if (!r->hypertension.empty()) a["hypertension"] = r->hypertension == "yes";
      const auto report = survey::validate(schema, v.answers).ignoring_missing();
      if (!report.ok()) {
        const auto& bad = report.violations.front();
        fail(ErrorCode::FormatError, "visit " + r->visit_id + ": " + bad.message, "visit " + r->visit_id + ", " + bad.question);
      }

      const bool graded = !r->left_grade.empty() || !r->right_grade.empty();
      v.state = r->letter_sent == "yes" ? VisitState::Notified : graded ? VisitState::Graded : VisitState::Surveyed;
      if (graded) v.graded_at = v.survey_taken_at;
      tx.insert_visit(v);

      if (!graded) continue;
      grading::GradingRecord g;
      g.visit_id = v.visit_id;
      g.left = eye_from(r->left_grade);
      g.right = eye_from(r->right_grade);
      g.grader_id = "import";
      g.graded_at = v.survey_taken_at;
      tx.insert_grading(org, g);

      if (r->letter_sent.empty()) continue;
      const auto key = reporting::select_letter(grading::overall_grade(g), d.language);
      const auto dispatch = tx.insert_dispatch(org, v.visit_id, key, v.survey_taken_at);
      if (r->letter_sent == "yes") tx.mark_dispatch_sent(dispatch.dispatch_id, v.survey_taken_at);
      for (int i = 0; i < r->followup_count; ++i) {
        reporting::FollowUp f;
        f.visit_id = v.visit_id.str();
        f.channel = reporting::Channel::PhoneCall;
        f.comment = "imported";
        f.created_at = v.survey_taken_at;
        f.staff_id = "import";
        tx.insert_followup(org, f);
      }
    }
  }

  if (highest) {
    const auto current = tx.last_participant_id(org);
    if (!current || *current < *highest) tx.set_last_participant_id(org, *highest);
  }
  return rows.size();
}

}  // namespace mtocs::storage
