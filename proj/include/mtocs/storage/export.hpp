#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtocs/storage/store.hpp"
#include "mtocs/survey.hpp"

namespace mtocs::storage {

inline constexpr std::array<std::string_view, 20> kExportColumns{
    "participant_id", "visit_id",      "age_at_visit",      "sex",          "ethnicity",
    "language",       "insurance",     "city",              "state",        "zipcode",
    "country",        "survey_date",   "has_diabetes",      "diabetes_type", "diabetes_duration",
    "hypertension",   "left_grade",    "right_grade",       "letter_sent",  "followup_count"};

/// One visit, flattened. Empty strings stand for absent values; letter_sent is
/// "" (no letter rendered), "no" (rendered, not sent) or "yes".
struct ExportRow {
  std::string participant_id;
  std::string visit_id;
  int age_at_visit = 0;
  std::string sex;
  std::string ethnicity;
  std::string language;
  std::string insurance;
  std::string city;
  std::string state;
  std::string zipcode;
  std::string country;
  std::string survey_date;
  std::string has_diabetes;
  std::string diabetes_type;
  std::string diabetes_duration;
  std::string hypertension;
  std::string left_grade;
  std::string right_grade;
  std::string letter_sent;
  int followup_count = 0;

  std::vector<std::string> cells() const;
};

/// Rows for every visit (optionally of one organization), ordered by
/// participant id, then visit sequence, then organization.
std::vector<ExportRow> export_rows(Tx& tx, const std::optional<OrganizationId>& org);

/// Header plus rows, LF line ends.
std::string to_csv(const std::vector<ExportRow>& rows);

/// Parses an export document. Throws Error(FormatError) with a "row N,
/// column NAME" locator on any malformed cell or a header that is not exactly
/// kExportColumns.
std::vector<ExportRow> parse_export(std::string_view text);

/// Recreates participants, visits, gradings, letters and follow-ups from
/// exported rows inside `org`. Identity and contact fields that the export
/// does not carry are filled with placeholders (the name becomes the
/// participant id). Survey timestamps are midnight UTC of survey_date.
/// Returns the number of visits imported.
std::size_t import_rows(Tx& tx, const OrganizationId& org, const std::vector<ExportRow>& rows,
                        const survey::Questionnaire& schema, Timestamp imported_at);

}  // namespace mtocs::storage
