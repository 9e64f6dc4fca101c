#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mtocs/storage/export.hpp"

namespace mtocs::analytics {

enum class Failure { DivisionByZero, EmptyInput, JoinFailure, InfeasibleTargets, BadInput };

std::string_view to_string(Failure f) noexcept;

class AnalyticsError : public std::runtime_error {
 public:
  AnalyticsError(Failure kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Failure kind() const noexcept { return kind_; }

 private:
  Failure kind_;
};

/// Fixed-point value in hundredths, so 61.27 is {6127}. Keeps two-decimal
/// results exact for comparison and printing.
struct Hundredths {
  std::int64_t value = 0;

  double as_double() const noexcept { return static_cast<double>(value) / 100.0; }
  std::string str() const;
  auto operator<=>(const Hundredths&) const = default;
};

/// round-half-up(num / den) in hundredths, exact for non-negative integers.
Hundredths ratio_hundredths(std::int64_t num, std::int64_t den);
/// round-half-up of a non-negative real to two decimals.
Hundredths round2(double x);

/// Percentage part/whole, rounded half up to two decimals.
Hundredths pct(std::int64_t part, std::int64_t whole);

struct AgeSummary {
  Hundredths mean;
  int min = 0;
  int max = 0;
  std::size_t count = 0;
};

AgeSummary age_summary(const std::vector<int>& ages);

struct LikertSummary {
  std::size_t count = 0;
  double mean = 0;
  /// Sample standard deviation (n - 1 denominator); 0 for a single response.
  double sd = 0;
  Hundredths mean_2dp;
  Hundredths sd_2dp;
};

/// Values must lie in 1..5.
LikertSummary likert_summary(const std::vector<int>& values);

using LikertCounts = std::array<int, 5>;  // responses with value 1..5

std::vector<int> expand(const LikertCounts& counts);

/// Some count vector of `n` responses whose mean and sample SD round (half
/// up, two decimals) to the targets, or nullopt. Among all such vectors the
/// one closest to the targets is returned; `accept` can veto candidates.
std::optional<LikertCounts> find_likert_counts(int n, Hundredths mean, Hundredths sd,
                                               const std::function<bool(const LikertCounts&)>& accept = {});

struct CategoryCount {
  std::string category;
  std::int64_t count = 0;
  Hundredths percent;
};

struct FieldSummary {
  std::string field;
  std::vector<CategoryCount> categories;
};

/// Table-1 style overview. Each participant counts once, with the age and
/// attributes of their earliest visit; percentages are of all participants.
struct DemographicSummary {
  std::int64_t participants = 0;
  AgeSummary age;
  std::vector<FieldSummary> fields;  // sex, ethnicity, country, insurance, language

  const CategoryCount* find(std::string_view field, std::string_view category) const;
};

DemographicSummary demographics(const std::vector<storage::ExportRow>& rows);

// Satisfaction responses ----------------------------------------------------

inline constexpr std::array<std::string_view, 8> kThemes{
    "Comfort", "Location", "Privacy", "Involvement", "Dissemination", "Connection", "Language", "General acceptance"};

inline constexpr std::array<std::string_view, 4> kResponseColumns{"visit_id", "theme", "value", "preferred_language"};

struct Response {
  std::string visit_id;
  std::string theme;
  int value = 0;
  std::string preferred_language;  // "English", "Spanish" or empty/anything else
};

std::vector<Response> parse_responses(std::string_view csv_text);
std::string responses_to_csv(const std::vector<Response>& responses);

struct ThemeSummary {
  std::string theme;
  LikertSummary stats;
};

/// One row per theme present, in kThemes order (unknown themes last, by name).
std::vector<ThemeSummary> likert_by_theme(const std::vector<Response>& responses);

/// Distinct visits that answered at least one question.
std::size_t respondents(const std::vector<Response>& responses);

enum class LanguageGroup { English, Spanish, NoneOther };

inline constexpr std::array kLanguageGroups{LanguageGroup::English, LanguageGroup::Spanish, LanguageGroup::NoneOther};

std::string_view label(LanguageGroup g) noexcept;
LanguageGroup language_group(std::string_view preferred_language) noexcept;

struct Stratified {
  std::string theme;
  std::map<LanguageGroup, LikertCounts> histograms;
};

/// Per-language histograms of one theme. Every response must belong to a
/// visit of `cohort`; otherwise AnalyticsError(JoinFailure).
Stratified stratify_by_language(const std::vector<Response>& responses, std::string_view theme,
                                const std::vector<storage::ExportRow>& cohort);

// Fixture synthesis ----------------------------------------------------------

struct ThemeTarget {
  std::string theme;
  int count = 0;
  Hundredths mean;
  Hundredths sd;
};

struct CohortTargets {
  /// When set, every field below must sum to this total.
  std::optional<int> total;
  std::vector<std::pair<std::string, int>> sex;        // tokens
  std::vector<std::pair<std::string, int>> ethnicity;  // tokens
  std::vector<std::pair<std::string, int>> country;    // free text
  std::vector<std::pair<std::string, int>> insurance;  // tokens
  std::vector<std::pair<std::string, int>> language;   // tokens
  Hundredths age_mean;
  int age_min = 0;
  int age_max = 0;
  /// Participants that get a second visit.
  int repeat_visits = 0;

  int distributed = 0;  // satisfaction surveys handed out
  std::vector<std::pair<std::string, int>> respondent_languages;  // "English", "Spanish", "" (none)
  std::vector<ThemeTarget> themes;
  /// Exact number of Spanish-preferring respondents giving 5 to the Language theme.
  std::optional<int> spanish_language_strongly_agree;
};

/// Targets taken from the published participant and satisfaction tables.
CohortTargets published_targets();

struct Cohort {
  std::vector<storage::ExportRow> rows;
  std::vector<Response> responses;
};

/// Deterministic for a given seed and targets. Without a demanded total the
/// cohort size is the largest field sum and shorter fields are padded with
/// their escape value ("other", or "Unreported" for country). Throws
/// AnalyticsError(InfeasibleTargets) when the targets cannot be met.
Cohort synthesize_cohort(const CohortTargets& targets, std::uint64_t seed);

}  // namespace mtocs::analytics
