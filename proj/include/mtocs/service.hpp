#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtocs/access.hpp"
#include "mtocs/domain.hpp"
#include "mtocs/grading.hpp"
#include "mtocs/reporting.hpp"
#include "mtocs/storage/object_store.hpp"
#include "mtocs/storage/store.hpp"
#include "mtocs/survey.hpp"

namespace mtocs {

using access::Account;
using domain::Participant;
using domain::ParticipantId;
using domain::Visit;
using domain::VisitId;
using domain::VisitState;

/// A graded visit waiting for (or needing a reissue of) its letter, with the
/// contact details staff need to mail it.
struct PendingReport {
  Visit visit;
  Participant participant;
  grading::GradingRecord grading;
  std::string template_key;
};

struct RenderedLetter {
  reporting::Letter letter;
  reporting::LetterDispatch dispatch;
};

struct Session {
  std::string token;
  Account account;
  Timestamp expires_at{};
};

/// The portals' operations. Every call names the acting account and the
/// organization it works in; authorization happens before any data is read.
class Service {
 public:
  Service(storage::Store& store, const survey::Questionnaire& schema, const reporting::LetterLibrary& letters,
          storage::ObjectStoreProvider& images, const Clock& clock,
          std::chrono::seconds session_ttl = std::chrono::hours(12));

  // Accounts and sessions.
  Account create_account(std::string username, std::string_view password, access::Role role,
                         OrganizationId org, std::vector<OrganizationId> extra_organizations = {});
  /// Throws Error(Unauthenticated) for an unknown user or a wrong password.
  Session login(std::string_view username, std::string_view password);
  void logout(std::string_view token);
  /// Account behind a live session token; throws Error(Unauthenticated).
  Account authenticate(std::string_view token);

  const access::Authorizer& authorizer() const noexcept { return authorizer_; }
  const survey::Questionnaire& schema() const noexcept { return schema_; }

  // Screener portal.
  Participant register_participant(const Account& by, domain::Demographics demographics, const OrganizationId& org);
  std::vector<Participant> search_participants(const Account& by, const OrganizationId& org,
                                               domain::SearchField field, std::string_view query);
  Participant edit_participant(const Account& by, const OrganizationId& org, ParticipantId id,
                               const survey::json& patch, int expected_version);
  Visit open_visit(const Account& by, const OrganizationId& org, ParticipantId id);
  /// Replaces the survey answers. Hidden, mistyped or out-of-domain answers
  /// are rejected with Error(Validation); unanswered required questions are
  /// allowed until the visit moves to Imaged.
  Visit edit_survey(const Account& by, const OrganizationId& org, const VisitId& id, const survey::json& answers,
                    int expected_version);
  Visit attach_image(const Account& by, const OrganizationId& org, const VisitId& id, domain::Eye eye,
                     std::string_view bytes);
  Visit visit(const Account& by, const OrganizationId& org, const VisitId& id);
  /// Generic lifecycle move. Imaged needs at least one image and a complete
  /// survey, Graded needs a grading, Notified needs a sent letter.
  Visit transition_visit(const Account& by, const OrganizationId& org, const VisitId& id, VisitState target);
  survey::RenderedForm questionnaire(const Account& by, std::string_view locale);

  // Grader portal.
  /// Imaged visits of every organization the grader serves, oldest first.
  std::vector<grading::GraderView> grading_queue(const Account& by);
  grading::GradingRecord submit_grading(const Account& by, const OrganizationId& org, const VisitId& id,
                                        std::optional<grading::EyeAssessment> left,
                                        std::optional<grading::EyeAssessment> right);
  grading::GradingRecord edit_grading(const Account& by, const OrganizationId& org, const VisitId& id,
                                      const grading::GradingPatch& patch);
  std::vector<grading::GradingRecord> grading_history(const Account& by, const OrganizationId& org,
                                                      const VisitId& id);
  std::string image(const Account& by, const OrganizationId& org, std::string_view storage_key);

  // Report distribution portal.
  std::vector<PendingReport> pending_reports(const Account& by, const OrganizationId& org);
  RenderedLetter render_letter(const Account& by, const OrganizationId& org, const VisitId& id);
  reporting::LetterDispatch mark_sent(const Account& by, const OrganizationId& org, const VisitId& id);
  reporting::FollowUp add_followup(const Account& by, const OrganizationId& org, const VisitId& id,
                                   reporting::Channel channel, std::string comment);
  std::vector<reporting::FollowUp> list_followups(const Account& by, const OrganizationId& org, const VisitId& id);
  /// Follow-ups the calling staff member logged, oldest first.
  std::vector<reporting::FollowUp> my_followups(const Account& by, const OrganizationId& org);

  // Data management portal.
  std::string export_csv(const Account& by, const std::optional<OrganizationId>& org);

 private:
  storage::Store& store_;
  const survey::Questionnaire& schema_;
  const reporting::LetterLibrary& letters_;
  storage::ObjectStoreProvider& images_;
  const Clock& clock_;
  std::chrono::seconds session_ttl_;
  access::Authorizer authorizer_;
};

}  // namespace mtocs
