#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtocs/access.hpp"
#include "mtocs/domain.hpp"
#include "mtocs/grading.hpp"
#include "mtocs/reporting.hpp"
#include "mtocs/storage/sqlite.hpp"

namespace mtocs::storage {

using domain::Participant;
using domain::ParticipantId;
using domain::Visit;
using domain::VisitId;
using domain::VisitState;

struct SessionRecord {
  std::string account_id;
  Timestamp expires_at{};
};

/// Data access inside one transaction. Obtained only through Store::read or
/// Store::write; never outlives the callback it is passed to.
class Tx {
 public:
  explicit Tx(sqlite::Connection& db) : db_(db) {}

  // Accounts and sessions.
  void insert_account(const access::Account& account);
  std::optional<access::Account> account(std::string_view account_id);
  std::optional<access::Account> account_by_username(std::string_view username);
  void insert_session(std::string_view digest, std::string_view account_id, Timestamp expires_at);
  std::optional<SessionRecord> session(std::string_view digest);
  void delete_session(std::string_view digest);
  void delete_expired_sessions(Timestamp now);

  // Per-organization participant id counter.
  std::optional<ParticipantId> last_participant_id(const OrganizationId& org);
  void set_last_participant_id(const OrganizationId& org, ParticipantId id);

  // Participants.
  void insert_participant(const Participant& p);
  std::optional<Participant> participant(const OrganizationId& org, ParticipantId id);
  /// Stores `updated` as version expected_version + 1 and keeps the replaced
  /// row in the revision history. Throws Error(Conflict) when the stored
  /// version is not `expected_version`.
  Participant update_participant(const Participant& updated, int expected_version,
                                 std::string_view actor, Timestamp at);
  std::vector<Participant> participants(const std::optional<OrganizationId>& org);
  std::vector<Participant> search_participants(const OrganizationId& org, domain::SearchField field,
                                               std::string_view query);
  std::vector<survey::json> participant_revisions(const OrganizationId& org, ParticipantId id);

  // Visits.
  int visit_count(const OrganizationId& org, ParticipantId id);
  void insert_visit(const Visit& v);
  std::optional<Visit> visit(const OrganizationId& org, const VisitId& id);
  /// Visits ordered by survey time then id; optional organization and state filters.
  std::vector<Visit> visits(const std::optional<OrganizationId>& org,
                            std::optional<VisitState> state = std::nullopt);
  /// Survey answers update with the same versioning contract as participants.
  Visit update_answers(const OrganizationId& org, const VisitId& id, const survey::AnswerSet& answers,
                       int expected_version, std::string_view actor, Timestamp at);
  std::vector<survey::json> survey_revisions(const OrganizationId& org, const VisitId& id);
  /// Moves the visit from `from` to `to` only if it is still in `from`;
  /// returns false when another writer got there first.
  bool compare_and_set_state(const OrganizationId& org, const VisitId& id, VisitState from,
                             VisitState to, std::string_view actor, Timestamp at);
  void set_requires_reissue(const OrganizationId& org, const VisitId& id, bool value);
  std::vector<domain::Transition> transitions(const OrganizationId& org, const VisitId& id);
  void insert_image(const OrganizationId& org, const VisitId& id, const domain::ImageRef& ref);
  int image_count(const OrganizationId& org, const VisitId& id, domain::Eye eye);

  // Grading history.
  void insert_grading(const OrganizationId& org, const grading::GradingRecord& record);
  std::optional<grading::GradingRecord> latest_grading(const OrganizationId& org, const VisitId& id);
  std::vector<grading::GradingRecord> grading_history(const OrganizationId& org, const VisitId& id);

  // Letters and follow-ups.
  std::optional<reporting::LetterDispatch> active_dispatch(const OrganizationId& org, const VisitId& id);
  /// New active, unsent dispatch; any previous active one is superseded.
  reporting::LetterDispatch insert_dispatch(const OrganizationId& org, const VisitId& id,
                                            std::string_view template_key, Timestamp at);
  void mark_dispatch_sent(std::int64_t dispatch_id, Timestamp at);
  std::vector<reporting::LetterDispatch> dispatches(const OrganizationId& org, const VisitId& id);
  reporting::FollowUp insert_followup(const OrganizationId& org, reporting::FollowUp followup);
  std::vector<reporting::FollowUp> followups_for_visit(const OrganizationId& org, const VisitId& id);
  std::vector<reporting::FollowUp> followups_by_staff(const OrganizationId& org, std::string_view staff_id);

  // Audit trail.
  void insert_audit(const access::AuditEvent& event);
  std::vector<access::AuditEvent> audit_events();

 private:
  sqlite::Connection& db_;
};

/// Owner of the database connection. All access is serialized through one
/// mutex; every callback runs inside a single SQLite transaction that is
/// rolled back if the callback throws.
///
/// Audit events appended through the AuditSink interface are committed on
/// their own, so a denial is recorded even when the surrounding operation
/// fails. Do not call append() from inside a read/write callback.
class Store final : public access::AuditSink {
 public:
  /// Opens or creates the database at `path` (":memory:" for a private
  /// in-memory store) and applies the schema.
  explicit Store(const std::string& path = ":memory:");

  template <class F>
  decltype(auto) write(F&& fn) {
    return run("BEGIN IMMEDIATE", std::forward<F>(fn));
  }

  /// Snapshot read: everything inside `fn` sees one consistent state.
  template <class F>
  decltype(auto) read(F&& fn) {
    return run("BEGIN", std::forward<F>(fn));
  }

  void append(const access::AuditEvent& event) override;

 private:
  template <class F>
  decltype(auto) run(const char* begin, F&& fn) {
    std::lock_guard lock(mutex_);
    db_.exec(begin);
    Tx tx(db_);
    try {
      if constexpr (std::is_void_v<decltype(fn(tx))>) {
        fn(tx);
        db_.exec("COMMIT");
      } else {
        auto result = fn(tx);
        db_.exec("COMMIT");
        return result;
      }
    } catch (...) {
      try {
        db_.exec("ROLLBACK");
      } catch (...) {
      }
      throw;
    }
  }

  std::mutex mutex_;
  sqlite::Connection db_;
};

}  // namespace mtocs::storage
