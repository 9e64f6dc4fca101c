#include "mtocs/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mtocs/error.hpp"
#include "mtocs/storage/csv.hpp"

namespace mtocs::analytics {

namespace chr = std::chrono;

std::string_view to_string(Failure f) noexcept {
  switch (f) {
    case Failure::DivisionByZero: return "division_by_zero";
    case Failure::EmptyInput: return "empty_input";
    case Failure::JoinFailure: return "join_failure";
    case Failure::InfeasibleTargets: return "infeasible_targets";
    case Failure::BadInput: return "bad_input";
  }
  return "bad_input";
}

std::string Hundredths::str() const {
  const bool negative = value < 0;
  const std::int64_t v = negative ? -value : value;
  std::string frac = std::to_string(v % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return (negative ? "-" : "") + std::to_string(v / 100) + "." + frac;
}

Hundredths ratio_hundredths(std::int64_t num, std::int64_t den) {
  if (den == 0) throw AnalyticsError(Failure::DivisionByZero, "division by zero");
  if (num < 0 || den < 0) throw AnalyticsError(Failure::BadInput, "negative operand");
  // floor(100 * num / den + 1/2) without leaving integers.
  return {(200 * num + den) / (2 * den)};
}

Hundredths round2(double x) {
  if (!(x >= 0)) throw AnalyticsError(Failure::BadInput, "cannot round a negative or NaN value");
  // The nudge absorbs representation error for inputs like 4.805 stored as 4.80499999.
  return {static_cast<std::int64_t>(std::floor(x * 100.0 + 0.5 + 1e-9))};
}

Hundredths pct(std::int64_t part, std::int64_t whole) {
  if (whole <= 0) throw AnalyticsError(Failure::DivisionByZero, "percentage of an empty whole");
  if (part < 0 || part > whole) throw AnalyticsError(Failure::BadInput, "part outside 0..whole");
  return ratio_hundredths(100 * part, whole);
}

AgeSummary age_summary(const std::vector<int>& ages) {
  if (ages.empty()) throw AnalyticsError(Failure::EmptyInput, "no ages");
  AgeSummary s;
  std::int64_t sum = 0;
  s.min = s.max = ages.front();
  for (int a : ages) {
    if (a < 0) throw AnalyticsError(Failure::BadInput, "negative age");
    sum += a;
    s.min = std::min(s.min, a);
    s.max = std::max(s.max, a);
  }
  s.count = ages.size();
  s.mean = ratio_hundredths(sum, static_cast<std::int64_t>(ages.size()));
  return s;
}

LikertSummary likert_summary(const std::vector<int>& values) {
  if (values.empty()) throw AnalyticsError(Failure::EmptyInput, "no responses");
  // Welford's update: one pass, no catastrophic cancellation.
  double mean = 0, m2 = 0;
  std::size_t n = 0;
  for (int v : values) {
    if (v < 1 || v > 5) throw AnalyticsError(Failure::BadInput, "Likert value " + std::to_string(v) + " outside 1..5");
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  LikertSummary s;
  s.count = n;
  s.mean = mean;
  s.sd = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
  const auto sum = std::accumulate(values.begin(), values.end(), std::int64_t{0});
  s.mean_2dp = ratio_hundredths(sum, static_cast<std::int64_t>(n));
  s.sd_2dp = round2(s.sd);
  return s;
}

std::vector<int> expand(const LikertCounts& counts) {
  std::vector<int> out;
  for (int k = 0; k < 5; ++k) out.insert(out.end(), static_cast<std::size_t>(counts[k]), k + 1);
  return out;
}

std::optional<LikertCounts> find_likert_counts(int n, Hundredths mean, Hundredths sd,
                                               const std::function<bool(const LikertCounts&)>& accept) {
  if (n < 2) return std::nullopt;
  const double target_mean = mean.as_double();
  const double target_sd = sd.as_double();
  std::optional<LikertCounts> best;
  double best_distance = 0;

  // Fix the sum S and sum of squares Q, then every (n1, n2) pins down n3..n5:
  //   n3 + n4 + n5 = A,  3n3 + 4n4 + 5n5 = B,  9n3 + 16n4 + 25n5 = C
  //   => n5 = (C - 7B + 12A) / 2,  n4 = B - 3A - 2n5,  n3 = A - n4 - n5.
  for (std::int64_t s = n; s <= 5LL * n; ++s) {
    if (ratio_hundredths(s, n) != mean) continue;
    const double m = static_cast<double>(s) / n;
    const double sd_lo = std::max(0.0, target_sd - 0.006), sd_hi = target_sd + 0.006;
    const auto q_lo = static_cast<std::int64_t>(std::floor(sd_lo * sd_lo * (n - 1) + static_cast<double>(s) * s / n));
    const auto q_hi = static_cast<std::int64_t>(std::ceil(sd_hi * sd_hi * (n - 1) + static_cast<double>(s) * s / n));
    for (std::int64_t q = q_lo; q <= q_hi; ++q) {
      const double var = (static_cast<double>(q) - static_cast<double>(s) * s / n) / (n - 1);
      if (var < 0) continue;
      const double this_sd = std::sqrt(var);
      if (round2(this_sd) != sd) continue;
      const double distance = std::abs(m - target_mean) + std::abs(this_sd - target_sd);
      if (best && distance >= best_distance) continue;
      for (std::int64_t n1 = 0; n1 <= n; ++n1) {
        for (std::int64_t n2 = 0; n1 + n2 <= n; ++n2) {
          const std::int64_t a = n - n1 - n2, b = s - n1 - 2 * n2, c = q - n1 - 4 * n2;
          const std::int64_t twice_n5 = c - 7 * b + 12 * a;
          if (twice_n5 < 0 || twice_n5 % 2 != 0) continue;
          const std::int64_t n5 = twice_n5 / 2;
          const std::int64_t n4 = b - 3 * a - 2 * n5;
          const std::int64_t n3 = a - n4 - n5;
          if (n4 < 0 || n3 < 0) continue;
          LikertCounts counts{static_cast<int>(n1), static_cast<int>(n2), static_cast<int>(n3), static_cast<int>(n4),
                              static_cast<int>(n5)};
          if (accept && !accept(counts)) continue;
          best = counts;
          best_distance = distance;
          goto next_q;
        }
      }
    next_q:;
    }
  }
  return best;
}

// -- demographics ----------------------------------------------------------------

const CategoryCount* DemographicSummary::find(std::string_view field, std::string_view category) const {
  for (const auto& f : fields) {
    if (f.field != field) continue;
    for (const auto& c : f.categories) {
      if (c.category == category) return &c;
    }
  }
  return nullptr;
}

namespace {

template <class Enum, std::size_t N>
FieldSummary enum_field(std::string name, const std::array<Enum, N>& all, const std::vector<std::string>& tokens,
                        std::int64_t whole) {
  FieldSummary f{std::move(name), {}};
  for (Enum v : all) {
    const auto n = std::count(tokens.begin(), tokens.end(), domain::token(v));
    f.categories.push_back({std::string(domain::label(v)), n, pct(n, whole)});
  }
  return f;
}

}  // namespace

DemographicSummary demographics(const std::vector<storage::ExportRow>& rows) {
  if (rows.empty()) throw AnalyticsError(Failure::EmptyInput, "no visits");
  // Earliest visit per participant: visit ids sort by sequence within a participant.
  std::map<std::string, const storage::ExportRow*> first;
  for (const auto& r : rows) {
    auto [it, inserted] = first.emplace(r.participant_id, &r);
    if (!inserted && r.visit_id < it->second->visit_id) it->second = &r;
  }
  const auto whole = static_cast<std::int64_t>(first.size());

  std::vector<int> ages;
  std::vector<std::string> sex, ethnicity, insurance, language;
  std::map<std::string, std::int64_t> countries;
  for (const auto& [_, r] : first) {
    ages.push_back(r->age_at_visit);
    sex.push_back(r->sex);
    ethnicity.push_back(r->ethnicity);
    insurance.push_back(r->insurance);
    language.push_back(r->language);
    ++countries[r->country];
  }

  DemographicSummary s;
  s.participants = whole;
  s.age = age_summary(ages);
  s.fields.push_back(enum_field("sex", domain::kAllSexes, sex, whole));
  s.fields.push_back(enum_field("ethnicity", domain::kAllEthnicities, ethnicity, whole));
  FieldSummary country{"country", {}};
  for (const auto& [name, n] : countries) country.categories.push_back({name, n, pct(n, whole)});
  std::stable_sort(country.categories.begin(), country.categories.end(),
                   [](const CategoryCount& a, const CategoryCount& b) { return a.count > b.count; });
  s.fields.push_back(std::move(country));
  s.fields.push_back(enum_field("insurance", domain::kAllInsurances, insurance, whole));
  s.fields.push_back(enum_field("language", domain::kAllLanguages, language, whole));
  return s;
}

// -- satisfaction responses --------------------------------------------------------

std::vector<Response> parse_responses(std::string_view csv_text) {
  std::vector<storage::csv::Row> table;
  try {
    table = storage::csv::parse(csv_text);
  } catch (const Error& e) {
    throw AnalyticsError(Failure::BadInput, e.what());
  }
  if (table.empty() || table.front() != storage::csv::Row(kResponseColumns.begin(), kResponseColumns.end())) {
    throw AnalyticsError(Failure::BadInput, "response header must be visit_id,theme,value,preferred_language");
  }
  std::vector<Response> out;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& row = table[i];
    const auto where = "row " + std::to_string(i + 1);
    if (row.size() != kResponseColumns.size()) throw AnalyticsError(Failure::BadInput, where + ": wrong field count");
    if (!ids::VisitId::parse(row[0])) throw AnalyticsError(Failure::BadInput, where + ": malformed visit id");
    if (row[1].empty()) throw AnalyticsError(Failure::BadInput, where + ": empty theme");
    if (row[2].size() != 1 || row[2][0] < '1' || row[2][0] > '5') {
      throw AnalyticsError(Failure::BadInput, where + ": value must be 1..5");
    }
    out.push_back({row[0], row[1], row[2][0] - '0', row[3]});
  }
  return out;
}

std::string responses_to_csv(const std::vector<Response>& responses) {
  std::string out;
  storage::csv::append_row(out, storage::csv::Row(kResponseColumns.begin(), kResponseColumns.end()));
  for (const auto& r : responses) {
    storage::csv::append_row(out, {r.visit_id, r.theme, std::to_string(r.value), r.preferred_language});
  }
  return out;
}

std::vector<ThemeSummary> likert_by_theme(const std::vector<Response>& responses) {
  std::map<std::string, std::vector<int>> by_theme;
  for (const auto& r : responses) by_theme[r.theme].push_back(r.value);
  std::vector<ThemeSummary> out;
  for (auto theme : kThemes) {
    auto it = by_theme.find(std::string(theme));
    if (it == by_theme.end()) continue;
    out.push_back({it->first, likert_summary(it->second)});
    by_theme.erase(it);
  }
  for (const auto& [theme, values] : by_theme) out.push_back({theme, likert_summary(values)});
  return out;
}

std::size_t respondents(const std::vector<Response>& responses) {
  std::set<std::string> visits;
  for (const auto& r : responses) visits.insert(r.visit_id);
  return visits.size();
}

std::string_view label(LanguageGroup g) noexcept {
  switch (g) {
    case LanguageGroup::English: return "English";
    case LanguageGroup::Spanish: return "Spanish";
    case LanguageGroup::NoneOther: return "None/Other";
  }
  return "None/Other";
}

LanguageGroup language_group(std::string_view preferred) noexcept {
  auto lower = std::string(preferred);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "english") return LanguageGroup::English;
  if (lower == "spanish") return LanguageGroup::Spanish;
  return LanguageGroup::NoneOther;
}

Stratified stratify_by_language(const std::vector<Response>& responses, std::string_view theme,
                                const std::vector<storage::ExportRow>& cohort) {
  std::set<std::string> visits;
  for (const auto& r : cohort) visits.insert(r.visit_id);
  Stratified out{std::string(theme), {}};
  for (auto g : kLanguageGroups) out.histograms[g] = LikertCounts{};
  for (const auto& r : responses) {
    if (r.theme != theme) continue;
    if (!visits.count(r.visit_id)) {
      throw AnalyticsError(Failure::JoinFailure, "response for unknown visit " + r.visit_id);
    }
    ++out.histograms[language_group(r.preferred_language)][static_cast<std::size_t>(r.value - 1)];
  }
  return out;
}

// -- synthesis -------------------------------------------------------------------------

CohortTargets published_targets() {
  CohortTargets t;
  t.total = 865;
  t.sex = {{"female", 530}, {"male", 335}};
  t.ethnicity = {{"hispanic_latino", 317},
                 {"black_african_american", 245},
                 {"white", 117},
                 {"asian_pacific_islander", 95},
                 {"native_american", 76},
                 {"other", 15}};
  t.country = {{"USA", 483},
               {"Mexico", 253},
               {"Myanmar (Burma)", 24},
               {"Laos", 21},
               {"Puerto Rico", 8},
               {"South America", 4},
               {"Other Central America", 14},
               {"Other Carribean", 1},
               {"Other", 15},
               {"Unreported", 42}};
  t.insurance = {{"none", 341}, {"private", 224}, {"medicare", 58},
                 {"medicaid", 146}, {"medicare_medicaid", 44}, {"other", 52}};
  t.language = {{"english", 502}, {"spanish", 265}, {"both", 13}, {"other", 85}};
  t.age_mean = {4991};
  t.age_min = 15;
  t.age_max = 89;
  t.repeat_visits = 60;
  t.distributed = 400;
  t.respondent_languages = {{"English", 225}, {"Spanish", 103}, {"", 50}};
  t.themes = {{"Comfort", 376, {481}, {48}},       {"Location", 370, {481}, {49}},
              {"Privacy", 358, {258}, {154}},      {"Involvement", 368, {458}, {70}},
              {"Dissemination", 368, {477}, {55}}, {"Connection", 368, {467}, {64}},
              {"Language", 338, {420}, {98}},      {"General acceptance", 371, {478}, {51}}};
  t.spanish_language_strongly_agree = 95;
  return t;
}

namespace {

using Rng = std::mt19937_64;

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

int field_sum(const std::vector<std::pair<std::string, int>>& field) {
  int sum = 0;
  for (const auto& [_, n] : field) {
    if (n < 0) throw AnalyticsError(Failure::InfeasibleTargets, "negative target count");
    sum += n;
  }
  return sum;
}

/// Exactly `n` labels with the requested multiplicities, padded with `escape`, shuffled.
std::vector<std::string> deal(const std::vector<std::pair<std::string, int>>& field, int n, const std::string& escape,
                              Rng& rng) {
  std::vector<std::string> out;
  for (const auto& [value, count] : field) out.insert(out.end(), static_cast<std::size_t>(count), value);
  out.resize(static_cast<std::size_t>(n), escape);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

Date minus_years(Date d, int years) {
  Date r{d.year() - chr::years(years), d.month(), d.day()};
  if (!r.ok()) r = Date{r.year() / r.month() / chr::last};
  return r;
}

std::vector<int> ages_with_sum(int n, int lo, int hi, std::int64_t sum, double mean, Rng& rng) {
  std::vector<int> ages(static_cast<std::size_t>(n));
  std::normal_distribution<double> spread(mean, 14.0);
  for (auto& a : ages) a = std::clamp(static_cast<int>(std::lround(spread(rng))), lo, hi);
  ages[0] = lo;
  if (n > 1) ages[1] = hi;
  std::int64_t current = std::accumulate(ages.begin(), ages.end(), std::int64_t{0});
  // Nudge free entries one year at a time until the total is exact.
  while (current != sum) {
    const auto i = static_cast<std::size_t>(uniform(rng, n > 1 ? 2 : 1, n - 1));
    if (current < sum && ages[i] < hi) {
      ++ages[i];
      ++current;
    } else if (current > sum && ages[i] > lo) {
      --ages[i];
      --current;
    }
  }
  return ages;
}

}  // namespace

Cohort synthesize_cohort(const CohortTargets& t, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<const std::vector<std::pair<std::string, int>>*> fields{&t.sex, &t.ethnicity, &t.country,
                                                                            &t.insurance, &t.language};
  int n = t.total.value_or(0);
  for (const auto* f : fields) {
    const int sum = field_sum(*f);
    if (t.total && sum != *t.total) {
      throw AnalyticsError(Failure::InfeasibleTargets, "a field sums to " + std::to_string(sum) + ", not the demanded total " +
                                                           std::to_string(*t.total));
    }
    n = std::max(n, sum);
  }
  if (n < 2) throw AnalyticsError(Failure::InfeasibleTargets, "cohort needs at least two participants");
  if (t.age_min > t.age_max || t.age_min < 0) throw AnalyticsError(Failure::InfeasibleTargets, "bad age range");
  if (t.repeat_visits < 0 || t.repeat_visits > n) throw AnalyticsError(Failure::InfeasibleTargets, "bad repeat count");

  // Age total whose mean rounds to the target, closest to it.
  std::optional<std::int64_t> age_sum;
  const auto ideal = static_cast<std::int64_t>(std::llround(t.age_mean.as_double() * n));
  for (std::int64_t d = 0; d <= n && !age_sum; ++d) {
    for (std::int64_t s : {ideal - d, ideal + d}) {
      const std::int64_t lo = t.age_min + t.age_max + std::int64_t{t.age_min} * (n - 2);
      const std::int64_t hi = t.age_min + t.age_max + std::int64_t{t.age_max} * (n - 2);
      if (s >= lo && s <= hi && ratio_hundredths(s, n) == t.age_mean) {
        age_sum = s;
        break;
      }
    }
  }
  if (!age_sum) throw AnalyticsError(Failure::InfeasibleTargets, "no age total reaches the target mean");

  const auto sex = deal(t.sex, n, "other", rng);
  const auto ethnicity = deal(t.ethnicity, n, "other", rng);
  const auto country = deal(t.country, n, "Unreported", rng);
  const auto insurance = deal(t.insurance, n, "other", rng);
  const auto language = deal(t.language, n, "other", rng);
  const auto ages = ages_with_sum(n, t.age_min, t.age_max, *age_sum, t.age_mean.as_double(), rng);

  std::vector<bool> repeats(static_cast<std::size_t>(n), false);
  std::fill(repeats.begin(), repeats.begin() + t.repeat_visits, true);
  std::shuffle(repeats.begin(), repeats.end(), rng);

  static const std::array<std::array<const char*, 2>, 4> kPlaces{
      {{"Milwaukee", "53204"}, {"Milwaukee", "53215"}, {"Racine", "53403"}, {"Waukesha", "53186"}}};
  static const std::array<const char*, 4> kDiabetesTypes{"Type 1", "Type 2", "Gestational", "Not sure"};
  const Date first_day{chr::year{2017}, chr::June, chr::day{3}};

  Cohort cohort;
  auto pid = ids::ParticipantId::first();
  for (int i = 0; i < n; ++i) {
    if (i > 0) pid = ids::next_participant_id(pid);
    const auto& place = kPlaces[static_cast<std::size_t>(uniform(rng, 0, 3))];
    const Date visit1{chr::sys_days(first_day) + chr::days(uniform(rng, 0, 750))};
    // Birth date strictly inside the year that yields the target age at the first visit.
    Date dob = Date{chr::sys_days(minus_years(visit1, ages[static_cast<std::size_t>(i)])) - chr::days(uniform(rng, 0, 360))};
    if (age_on(dob, visit1) != ages[static_cast<std::size_t>(i)]) dob = minus_years(visit1, ages[static_cast<std::size_t>(i)]);

    std::vector<Date> dates{visit1};
    if (repeats[static_cast<std::size_t>(i)]) dates.push_back(Date{chr::sys_days(visit1) + chr::days(uniform(rng, 150, 400))});

    for (std::size_t k = 0; k < dates.size(); ++k) {
      storage::ExportRow r;
      const auto at = static_cast<std::size_t>(i);
      r.participant_id = pid.str();
      r.visit_id = ids::VisitId(pid, static_cast<int>(k) + 1).str();
      r.age_at_visit = age_on(dob, dates[k]);
      r.sex = sex[at];
      r.ethnicity = ethnicity[at];
      r.language = language[at];
      r.insurance = insurance[at];
      r.city = place[0];
      r.state = "WI";
      r.zipcode = place[1];
      r.country = country[at];
      r.survey_date = format_date(dates[k]);
      const bool diabetic = chance(rng, 0.7);
      r.has_diabetes = diabetic ? "yes" : "no";
      if (diabetic) {
        r.diabetes_type = kDiabetesTypes[static_cast<std::size_t>(uniform(rng, 0, 3))];
        r.diabetes_duration = std::to_string(uniform(rng, 0, std::min(40, r.age_at_visit)));
      }
      r.hypertension = chance(rng, 0.45) ? "yes" : "no";
      if (chance(rng, 0.9)) {
        auto pick = [&] {
          const int roll = uniform(rng, 0, 99);
          const auto g = roll < 60 ? grading::DrGrade::NoApparentDR
                         : roll < 72 ? grading::DrGrade::MildNPDR
                         : roll < 80 ? grading::DrGrade::ModerateNPDR
                         : roll < 83 ? grading::DrGrade::SevereNPDR
                         : roll < 85 ? grading::DrGrade::ProliferativeDR
                         : roll < 89 ? grading::DrGrade::MacularEdemaSuspected
                         : roll < 95 ? grading::DrGrade::OtherFindings
                                     : grading::DrGrade::Ungradable;
          return std::string(grading::slug(g));
        };
        r.left_grade = pick();
        r.right_grade = pick();
        if (chance(rng, 0.03)) r.right_grade.clear();
        const int roll = uniform(rng, 0, 99);
        r.letter_sent = roll < 85 ? "yes" : roll < 90 ? "no" : "";
        if (r.letter_sent == "yes") r.followup_count = uniform(rng, 0, 2);
      }
      cohort.rows.push_back(std::move(r));
    }
  }

  // Satisfaction survey among first visits.
  const int answering = field_sum(t.respondent_languages);
  if (answering > t.distributed || t.distributed > n) {
    throw AnalyticsError(Failure::InfeasibleTargets, "more respondents than surveys or surveys than participants");
  }
  if (answering == 0) return cohort;
  std::vector<std::string> first_visits;
  for (const auto& r : cohort.rows) {
    if (r.visit_id.ends_with("001")) first_visits.push_back(r.visit_id);
  }
  std::shuffle(first_visits.begin(), first_visits.end(), rng);
  std::vector<std::string> who(first_visits.begin(), first_visits.begin() + answering);
  std::sort(who.begin(), who.end());
  auto prefs = deal(t.respondent_languages, answering, "", rng);

  // Each theme skips a distinct block of respondents, so everyone answers something.
  int skipped_so_far = 0;
  for (const auto& theme : t.themes) {
    if (theme.count > answering) throw AnalyticsError(Failure::InfeasibleTargets, theme.theme + " has more answers than respondents");
    skipped_so_far += answering - theme.count;
  }
  if (skipped_so_far >= answering) throw AnalyticsError(Failure::InfeasibleTargets, "too many skipped answers");

  // Keep Spanish speakers out of the Language theme's skipped block.
  if (t.spanish_language_strongly_agree) {
    int lo = 0;
    for (const auto& theme : t.themes) {
      const int hi = lo + (answering - theme.count);
      if (theme.theme == "Language") {
        int outside = hi;
        for (int k = lo; k < hi; ++k) {
          if (language_group(prefs[static_cast<std::size_t>(k)]) != LanguageGroup::Spanish) continue;
          while (outside < answering && language_group(prefs[static_cast<std::size_t>(outside)]) == LanguageGroup::Spanish) {
            ++outside;
          }
          if (outside == answering) break;
          std::swap(prefs[static_cast<std::size_t>(k)], prefs[static_cast<std::size_t>(outside)]);
        }
      }
      lo = hi;
    }
  }

  std::vector<Response> responses;
  int offset = 0;
  for (const auto& theme : t.themes) {
    const bool pinned = theme.theme == "Language" && t.spanish_language_strongly_agree.has_value();
    std::vector<std::size_t> answerers;
    for (int k = 0; k < answering; ++k) {
      if (k < offset || k >= offset + (answering - theme.count)) answerers.push_back(static_cast<std::size_t>(k));
    }
    offset += answering - theme.count;

    int spanish_answering = 0;
    for (auto k : answerers) spanish_answering += language_group(prefs[k]) == LanguageGroup::Spanish;
    const int pin = pinned ? *t.spanish_language_strongly_agree : 0;
    if (pinned && spanish_answering < pin) {
      throw AnalyticsError(Failure::InfeasibleTargets, "too few Spanish respondents answer the Language theme");
    }
    auto counts = find_likert_counts(theme.count, theme.mean, theme.sd, [&](const LikertCounts& c) {
      return !pinned || (c[4] >= pin && theme.count - c[4] >= spanish_answering - pin);
    });
    if (!counts) throw AnalyticsError(Failure::InfeasibleTargets, "no response vector matches " + theme.theme);

    auto values = expand(*counts);
    std::shuffle(values.begin(), values.end(), rng);
    if (pinned) {
      // Spanish answerers first: the first `pin` of them take fives, the rest non-fives.
      std::stable_partition(answerers.begin(), answerers.end(),
                            [&](std::size_t k) { return language_group(prefs[k]) == LanguageGroup::Spanish; });
      std::stable_partition(values.begin(), values.end(), [](int v) { return v == 5; });
      std::vector<int> fives(values.begin(), values.begin() + (*counts)[4]);
      std::vector<int> others(values.begin() + (*counts)[4], values.end());
      values.clear();
      values.insert(values.end(), fives.begin(), fives.begin() + pin);
      values.insert(values.end(), others.begin(), others.begin() + (spanish_answering - pin));
      std::vector<int> rest(fives.begin() + pin, fives.end());
      rest.insert(rest.end(), others.begin() + (spanish_answering - pin), others.end());
      std::shuffle(rest.begin(), rest.end(), rng);
      values.insert(values.end(), rest.begin(), rest.end());
    }
    for (std::size_t j = 0; j < answerers.size(); ++j) {
      const auto k = answerers[j];
      responses.push_back({who[k], theme.theme, values[j], prefs[k]});
    }
  }
  std::stable_sort(responses.begin(), responses.end(),
                   [](const Response& a, const Response& b) { return a.visit_id < b.visit_id; });
  cohort.responses = std::move(responses);
  return cohort;
}

}  // namespace mtocs::analytics
