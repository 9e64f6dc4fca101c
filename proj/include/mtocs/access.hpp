#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtocs/domain.hpp"
#include "mtocs/grading.hpp"
#include "mtocs/time.hpp"

namespace mtocs::access {

/// One role per portal.
enum class Role { Screener, Grader, Staff, Admin };

inline constexpr std::array kAllRoles{Role::Screener, Role::Grader, Role::Staff, Role::Admin};

std::string_view token(Role r) noexcept;
std::optional<Role> parse_role(std::string_view token) noexcept;

/// Every protected operation the service exposes.
enum class Action {
  RegisterParticipant,
  SearchParticipants,
  EditParticipant,
  OpenVisit,
  EditSurvey,
  AttachImage,
  ViewQuestionnaire,
  TransitionVisit,
  TransitionToImaged,
  ViewGradingQueue,
  SubmitGrading,
  EditGrading,
  TransitionToGraded,
  ReadParticipantPii,
  ViewPendingReports,
  RenderLetter,
  MarkLetterSent,
  AddFollowUp,
  ListFollowUps,
  TransitionToNotified,
  TransitionToClosed,
  ExportData,
};

inline constexpr std::array kAllActions{
    Action::RegisterParticipant, Action::SearchParticipants, Action::EditParticipant,
    Action::OpenVisit,           Action::EditSurvey,         Action::AttachImage,
    Action::ViewQuestionnaire,   Action::TransitionVisit,    Action::TransitionToImaged,
    Action::ViewGradingQueue,    Action::SubmitGrading,      Action::EditGrading,
    Action::TransitionToGraded,  Action::ReadParticipantPii, Action::ViewPendingReports,
    Action::RenderLetter,        Action::MarkLetterSent,     Action::AddFollowUp,
    Action::ListFollowUps,       Action::TransitionToNotified, Action::TransitionToClosed,
    Action::ExportData};

std::string_view token(Action a) noexcept;

/// Static permission matrix; no action belongs to more than one portal
/// except the generic visit transition, which is refined per target state.
bool permitted(Role role, Action action) noexcept;

/// Fine-grained action needed to move a visit into `target`.
Action transition_action(domain::VisitState target) noexcept;

struct Account {
  std::string account_id;
  std::string username;
  std::string credential_hash;
  Role role = Role::Screener;
  OrganizationId organization_id;
  /// Further organizations a grader serves besides its own.
  std::vector<OrganizationId> extra_organizations;

  /// Admins serve every organization.
  bool serves(const OrganizationId& org) const;
};

enum class Outcome { Allowed, Denied };

std::string_view token(Outcome o) noexcept;

struct AuditEvent {
  std::string actor;
  std::string action;
  std::string entity;
  Timestamp at{};
  Outcome outcome = Outcome::Allowed;
};

/// Append-only destination for audit events. Implementations must accept
/// concurrent appends.
class AuditSink {
 public:
  virtual ~AuditSink() = default;
  virtual void append(const AuditEvent& event) = 0;
};

/// Applies the permission matrix plus organization scoping and records every
/// decision.
class Authorizer {
 public:
  Authorizer(AuditSink& sink, const Clock& clock) : sink_(sink), clock_(clock) {}

  Outcome authorize(const Account& account, Action action, std::string_view entity = {},
                    const OrganizationId* entity_org = nullptr) const;

  /// authorize() that throws Error(Unauthorized) on denial.
  void require(const Account& account, Action action, std::string_view entity = {},
               const OrganizationId* entity_org = nullptr) const;

  /// Records a completed mutation.
  void record(const Account& account, std::string_view action, std::string_view entity) const;

 private:
  AuditSink& sink_;
  const Clock& clock_;
};

/// Argon2id password hashing at libsodium's interactive work factor.
class PasswordHasher {
 public:
  static std::string hash(std::string_view password);
  static bool verify(std::string_view hash, std::string_view password);
};

/// Hex-encoded random token of `bytes` random bytes.
std::string random_token(std::size_t bytes = 32);
/// One-way digest used to store session tokens.
std::string token_digest(std::string_view token);

/// Grader-facing projection of a visit: age collapsed to a decade band,
/// identity and contact fields dropped, and free-text answers scrubbed of
/// any identifying value of the participant.
grading::GraderView redact_for_grader(const domain::Participant& participant, const domain::Visit& visit);

}  // namespace mtocs::access
