#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include <unistd.h>

#include "mtocs/service.hpp"
#include "mtocs/storage/object_store.hpp"
#include "mtocs/storage/store.hpp"

namespace testing_support {

using namespace mtocs;
namespace fs = std::filesystem;

inline fs::path data_dir() { return MTOCS_DATA_DIR; }
inline fs::path schema_path() { return data_dir() / "questionnaire" / "v1.json"; }
inline fs::path templates_dir() { return data_dir() / "templates"; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("mtocs-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
};

inline Timestamp at(int y, unsigned m, unsigned d, int hour = 9) {
  return Timestamp{std::chrono::sys_days(Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}})
                       .time_since_epoch() +
                   std::chrono::hours(hour)};
}

inline domain::Demographics sample_demographics(std::string name = "Ana Maria Garcia",
                                                domain::Language language = domain::Language::Spanish) {
  domain::Demographics d;
  d.name = std::move(name);
  d.date_of_birth = Date{std::chrono::year{1968}, std::chrono::March, std::chrono::day{14}};
  d.sex = domain::Sex::Female;
  d.ethnicity = domain::Ethnicity::HispanicLatino;
  d.language = language;
  d.insurance = domain::Insurance::Medicaid;
  d.city = "Milwaukee";
  d.state = "WI";
  d.zipcode = "53204";
  d.country = "Mexico";
  d.primary_phone = "(414) 555-0187";
  d.email = "ana.garcia@example.org";
  return d;
}

/// Every required question answered, diabetes branch open.
inline survey::json complete_answers() {
  return {{"eye_problems", {"blurry_vision"}},
          {"last_eye_exam", "over_2_years"},
          {"eye_surgery", false},
          {"has_diabetes", true},
          {"diabetes_type", "Type 2"},
          {"diabetes_duration", 7},
          {"diabetes_knowledge", true},
          {"family_history_diabetes", true},
          {"hypertension", false}};
}

/// In-process service over an in-memory database and a temp image directory.
struct Harness {
  TempDir dir;
  storage::Store store;
  survey::Questionnaire schema = survey::Questionnaire::load(schema_path());
  reporting::LetterLibrary letters = reporting::LetterLibrary::load(templates_dir());
  std::unique_ptr<storage::ObjectStoreProvider> images = storage::filesystem_provider(dir.path() / "images");
  ManualClock clock{at(2018, 6, 2)};
  Service service{store, schema, letters, *images, clock};

  OrganizationId org{"riverside-clinic"};
  Account screener = service.create_account("screener1", "screener-pass", access::Role::Screener, org);
  Account grader = service.create_account("grader1", "grader-pass", access::Role::Grader, org);
  Account staff = service.create_account("staff1", "staff-pass1", access::Role::Staff, org);
  Account admin = service.create_account("admin1", "admin-pass1", access::Role::Admin, org);

  explicit Harness(const std::string& db = ":memory:") : store(db) {}

  Account& as(access::Role role) {
    switch (role) {
      case access::Role::Screener: return screener;
      case access::Role::Grader: return grader;
      case access::Role::Staff: return staff;
      case access::Role::Admin: return admin;
    }
    return admin;
  }

  /// Registered participant with one visit that has a complete survey and a left image.
  Visit imaged_visit(const std::string& name = "Ana Maria Garcia",
                     domain::Language language = domain::Language::Spanish) {
    auto p = service.register_participant(screener, sample_demographics(name, language), org);
    auto v = service.open_visit(screener, org, p.participant_id);
    v = service.edit_survey(screener, org, v.visit_id, complete_answers(), v.version);
    service.attach_image(screener, org, v.visit_id, domain::Eye::Left, "fundus-bytes-left");
    return service.transition_visit(screener, org, v.visit_id, VisitState::Imaged);
  }

  Visit graded_visit(grading::DrGrade grade = grading::DrGrade::ModerateNPDR,
                     domain::Language language = domain::Language::Spanish) {
    auto v = imaged_visit("Ana Maria Garcia", language);
    service.submit_grading(grader, org, v.visit_id, grading::EyeAssessment{grade, ""},
                           grading::EyeAssessment{grading::DrGrade::NoApparentDR, ""});
    return service.visit(screener, org, v.visit_id);
  }
};

}  // namespace testing_support
