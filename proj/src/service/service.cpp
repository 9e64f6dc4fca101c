#include "mtocs/service.hpp"

#include <algorithm>

#include "mtocs/error.hpp"
#include "mtocs/storage/export.hpp"

namespace mtocs {

using access::Action;
using storage::Tx;
using survey::json;

namespace {

Participant require_participant(Tx& tx, const OrganizationId& org, ParticipantId id) {
  auto p = tx.participant(org, id);
  if (!p) fail(ErrorCode::UnknownParticipant, "no participant " + id.str(), "participant_id");
  return *p;
}

Visit require_visit(Tx& tx, const OrganizationId& org, const VisitId& id) {
  auto v = tx.visit(org, id);
  if (!v) fail(ErrorCode::UnknownVisit, "no visit " + id.str(), "visit_id");
  return *v;
}

void require_state_at_least(const Visit& v, VisitState floor, std::string_view what) {
  if (domain::rank(v.state) < domain::rank(floor)) {
    fail(ErrorCode::IllegalState, std::string(what) + " needs visit " + v.visit_id.str() + " to be " +
                                      std::string(domain::token(floor)) + " or later, it is " +
                                      std::string(domain::token(v.state)));
  }
}

void reject_survey_violations(const survey::ValidationReport& report) {
  if (report.ok()) return;
  const auto& first = report.violations.front();
  fail(ErrorCode::Validation, first.message, first.question);
}

}  // namespace

Service::Service(storage::Store& store, const survey::Questionnaire& schema, const reporting::LetterLibrary& letters,
                 storage::ObjectStoreProvider& images, const Clock& clock, std::chrono::seconds session_ttl)
    : store_(store),
      schema_(schema),
      letters_(letters),
      images_(images),
      clock_(clock),
      session_ttl_(session_ttl),
      authorizer_(store, clock) {}

// -- accounts ------------------------------------------------------------------

Account Service::create_account(std::string username, std::string_view password, access::Role role,
                                OrganizationId org, std::vector<OrganizationId> extra_organizations) {
  if (username.empty()) fail(ErrorCode::Validation, "username is required", "username");
  if (password.size() < 8) fail(ErrorCode::Validation, "password must have at least 8 characters", "password");
  Account a;
  a.account_id = "acct-" + access::random_token(8);
  a.username = std::move(username);
  a.credential_hash = access::PasswordHasher::hash(password);
  a.role = role;
  a.organization_id = std::move(org);
  a.extra_organizations = std::move(extra_organizations);
  store_.write([&](Tx& tx) {
    if (tx.account_by_username(a.username)) fail(ErrorCode::Conflict, "username already taken", "username");
    tx.insert_account(a);
  });
  return a;
}

Session Service::login(std::string_view username, std::string_view password) {
  auto account = store_.read([&](Tx& tx) { return tx.account_by_username(username); });
  if (!account || !access::PasswordHasher::verify(account->credential_hash, password)) {
    store_.append({account ? account->account_id : std::string(), "login", std::string(username), clock_.now(),
                   access::Outcome::Denied});
    fail(ErrorCode::Unauthenticated, "unknown user or wrong password");
  }
  Session s{access::random_token(), *account, clock_.now() + session_ttl_};
  const auto digest = access::token_digest(s.token);
  store_.write([&](Tx& tx) {
    tx.delete_expired_sessions(clock_.now());
    tx.insert_session(digest, account->account_id, s.expires_at);
  });
  authorizer_.record(*account, "login", account->account_id);
  return s;
}

void Service::logout(std::string_view token) {
  const auto digest = access::token_digest(token);
  store_.write([&](Tx& tx) { tx.delete_session(digest); });
}

Account Service::authenticate(std::string_view token) {
  if (token.empty()) fail(ErrorCode::Unauthenticated, "missing session token");
  const auto digest = access::token_digest(token);
  const auto now = clock_.now();
  auto account = store_.read([&](Tx& tx) -> std::optional<Account> {
    auto session = tx.session(digest);
    if (!session || session->expires_at <= now) return std::nullopt;
    return tx.account(session->account_id);
  });
  if (!account) fail(ErrorCode::Unauthenticated, "session expired or unknown");
  return *account;
}

// -- screener portal -------------------------------------------------------------

Participant Service::register_participant(const Account& by, domain::Demographics demographics,
                                          const OrganizationId& org) {
  authorizer_.require(by, Action::RegisterParticipant, "participant", &org);
  domain::normalize_and_validate(demographics);
  auto p = store_.write([&](Tx& tx) {
    const auto last = tx.last_participant_id(org);
    Participant p;
    p.participant_id = last ? ids::next_participant_id(*last) : ParticipantId::first();
    p.demographics = std::move(demographics);
    p.organization_id = org;
    p.created_at = clock_.now();
    tx.insert_participant(p);
    tx.set_last_participant_id(org, p.participant_id);
    return p;
  });
  authorizer_.record(by, "participant-created", p.participant_id.str());
  return p;
}

std::vector<Participant> Service::search_participants(const Account& by, const OrganizationId& org,
                                                      domain::SearchField field, std::string_view query) {
  authorizer_.require(by, Action::SearchParticipants, query, &org);
  if (query.empty()) fail(ErrorCode::Validation, "search query is empty", "q");
  return store_.read([&](Tx& tx) { return tx.search_participants(org, field, query); });
}

Participant Service::edit_participant(const Account& by, const OrganizationId& org, ParticipantId id,
                                      const json& patch, int expected_version) {
  authorizer_.require(by, Action::EditParticipant, id.str(), &org);
  auto p = store_.write([&](Tx& tx) {
    auto current = require_participant(tx, org, id);
    auto updated = current;
    updated.demographics = domain::apply_patch(current.demographics, patch);
    domain::normalize_and_validate(updated.demographics);
    return tx.update_participant(updated, expected_version, by.account_id, clock_.now());
  });
  authorizer_.record(by, "participant-edited", id.str());
  return p;
}

Visit Service::open_visit(const Account& by, const OrganizationId& org, ParticipantId id) {
  authorizer_.require(by, Action::OpenVisit, id.str(), &org);
  auto v = store_.write([&](Tx& tx) {
    require_participant(tx, org, id);
    Visit v;
    v.visit_id = ids::next_visit_id(id, tx.visit_count(org, id));
    v.participant_id = id;
    v.organization_id = org;
    v.answers.schema_version = schema_.version();
    v.survey_taken_at = clock_.now();
    tx.insert_visit(v);
    return v;
  });
  authorizer_.record(by, "visit-opened", v.visit_id.str());
  return v;
}

Visit Service::edit_survey(const Account& by, const OrganizationId& org, const VisitId& id, const json& answers,
                           int expected_version) {
  authorizer_.require(by, Action::EditSurvey, id.str(), &org);
  if (!answers.is_object()) fail(ErrorCode::Validation, "answers must be a JSON object", "answers");
  survey::AnswerSet set{schema_.version(), answers};
  reject_survey_violations(survey::validate(schema_, set).ignoring_missing());
  auto v = store_.write([&](Tx& tx) {
    auto current = require_visit(tx, org, id);
    if (current.state == VisitState::Closed) fail(ErrorCode::IllegalState, "visit " + id.str() + " is closed");
    return tx.update_answers(org, id, set, expected_version, by.account_id, clock_.now());
  });
  authorizer_.record(by, "survey-edited", id.str());
  return v;
}

Visit Service::attach_image(const Account& by, const OrganizationId& org, const VisitId& id, domain::Eye eye,
                            std::string_view bytes) {
  authorizer_.require(by, Action::AttachImage, id.str(), &org);
  if (bytes.empty()) fail(ErrorCode::Validation, "image is empty", "image");
  auto& blobs = images_.for_organization(org);
  auto v = store_.write([&](Tx& tx) {
    auto current = require_visit(tx, org, id);
    if (domain::rank(current.state) > domain::rank(VisitState::Imaged)) {
      fail(ErrorCode::IllegalState, "visit " + id.str() + " is already " + std::string(domain::token(current.state)));
    }
    domain::ImageRef ref{eye, domain::image_storage_key(id, eye, tx.image_count(org, id, eye) + 1), clock_.now()};
    blobs.put(ref.storage_key, bytes);
    tx.insert_image(org, id, ref);
    return *tx.visit(org, id);
  });
  authorizer_.record(by, "image-attached", id.str());
  return v;
}

Visit Service::visit(const Account& by, const OrganizationId& org, const VisitId& id) {
  authorizer_.require(by, Action::EditSurvey, id.str(), &org);
  return store_.read([&](Tx& tx) { return require_visit(tx, org, id); });
}

Visit Service::transition_visit(const Account& by, const OrganizationId& org, const VisitId& id, VisitState target) {
  authorizer_.require(by, access::transition_action(target), id.str(), &org);
  auto v = store_.write([&](Tx& tx) {
    auto current = require_visit(tx, org, id);
    if (!domain::is_legal_transition(current.state, target)) {
      fail(ErrorCode::IllegalTransition, "visit " + id.str() + " cannot move from " +
                                             std::string(domain::token(current.state)) + " to " +
                                             std::string(domain::token(target)));
    }
    switch (target) {
      case VisitState::Imaged:
        if (tx.image_count(org, id, domain::Eye::Left) + tx.image_count(org, id, domain::Eye::Right) == 0) {
          fail(ErrorCode::IllegalState, "visit " + id.str() + " has no images");
        }
        reject_survey_violations(survey::validate(schema_, current.answers));
        break;
      case VisitState::Graded:
        if (!tx.latest_grading(org, id)) fail(ErrorCode::IllegalState, "visit " + id.str() + " has no grading");
        break;
      case VisitState::Notified: {
        auto d = tx.active_dispatch(org, id);
        if (!d || !d->sent) fail(ErrorCode::IllegalState, "no letter for visit " + id.str() + " was sent");
        break;
      }
      case VisitState::Surveyed:
      case VisitState::Closed:
        break;
    }
    if (!tx.compare_and_set_state(org, id, current.state, target, by.account_id, clock_.now())) {
      fail(ErrorCode::Conflict, "visit " + id.str() + " changed concurrently");
    }
    return *tx.visit(org, id);
  });
  authorizer_.record(by, "visit-" + std::string(domain::token(target)), id.str());
  return v;
}

survey::RenderedForm Service::questionnaire(const Account& by, std::string_view locale) {
  authorizer_.require(by, Action::ViewQuestionnaire, schema_.version());
  return survey::render(schema_, locale);
}

// -- grader portal -------------------------------------------------------------------

std::vector<grading::GraderView> Service::grading_queue(const Account& by) {
  authorizer_.require(by, Action::ViewGradingQueue, "queue");
  return store_.read([&](Tx& tx) {
    std::vector<grading::GraderView> out;
    for (const auto& v : tx.visits(std::nullopt, VisitState::Imaged)) {
      if (!by.serves(v.organization_id)) continue;
      out.push_back(access::redact_for_grader(*tx.participant(v.organization_id, v.participant_id), v));
    }
    return out;
  });
}

grading::GradingRecord Service::submit_grading(const Account& by, const OrganizationId& org, const VisitId& id,
                                               std::optional<grading::EyeAssessment> left,
                                               std::optional<grading::EyeAssessment> right) {
  authorizer_.require(by, Action::SubmitGrading, id.str(), &org);
  if (!left && !right) fail(ErrorCode::Validation, "grade at least one eye", "left");
  auto record = store_.write([&](Tx& tx) {
    auto current = require_visit(tx, org, id);
    if (current.state != VisitState::Imaged) {
      fail(ErrorCode::IllegalState,
           "visit " + id.str() + " is " + std::string(domain::token(current.state)) + ", not imaged");
    }
    grading::GradingRecord r;
    r.visit_id = id;
    r.left = std::move(left);
    r.right = std::move(right);
    r.grader_id = by.account_id;
    r.graded_at = clock_.now();
    r.revision = 1;
    tx.insert_grading(org, r);
    if (!tx.compare_and_set_state(org, id, VisitState::Imaged, VisitState::Graded, by.account_id, r.graded_at)) {
      fail(ErrorCode::IllegalState, "visit " + id.str() + " was graded concurrently");
    }
    return r;
  });
  authorizer_.record(by, "grading-submitted", id.str());
  return record;
}

grading::GradingRecord Service::edit_grading(const Account& by, const OrganizationId& org, const VisitId& id,
                                             const grading::GradingPatch& patch) {
  authorizer_.require(by, Action::EditGrading, id.str(), &org);
  auto record = store_.write([&](Tx& tx) {
    auto current = require_visit(tx, org, id);
    require_state_at_least(current, VisitState::Graded, "editing a grading");
    auto r = *tx.latest_grading(org, id);
    if (patch.left) r.left = *patch.left;
    if (patch.right) r.right = *patch.right;
    if (!r.left && !r.right) fail(ErrorCode::Validation, "grade at least one eye", "left");
    r.revision += 1;
    r.grader_id = by.account_id;
    r.graded_at = clock_.now();
    tx.insert_grading(org, r);
    if (current.state == VisitState::Graded) {
      tx.compare_and_set_state(org, id, VisitState::Graded, VisitState::Graded, by.account_id, r.graded_at);
    }
    const auto dispatches = tx.dispatches(org, id);
    if (std::any_of(dispatches.begin(), dispatches.end(), [](const auto& d) { return d.sent; })) {
      tx.set_requires_reissue(org, id, true);
    }
    return r;
  });
  authorizer_.record(by, "grading-edited", id.str());
  return record;
}

std::vector<grading::GradingRecord> Service::grading_history(const Account& by, const OrganizationId& org,
                                                             const VisitId& id) {
  authorizer_.require(by, Action::EditGrading, id.str(), &org);
  return store_.read([&](Tx& tx) {
    require_visit(tx, org, id);
    return tx.grading_history(org, id);
  });
}

std::string Service::image(const Account& by, const OrganizationId& org, std::string_view storage_key) {
  authorizer_.require(by, Action::ViewGradingQueue, storage_key, &org);
  return images_.for_organization(org).get(storage_key);
}

// -- report distribution portal ------------------------------------------------------

std::vector<PendingReport> Service::pending_reports(const Account& by, const OrganizationId& org) {
  authorizer_.require(by, Action::ViewPendingReports, "pending", &org);
  authorizer_.require(by, Action::ReadParticipantPii, "pending", &org);
  return store_.read([&](Tx& tx) {
    std::vector<PendingReport> out;
    for (auto& v : tx.visits(org)) {
      if (v.state != VisitState::Graded && !v.requires_reissue) continue;
      auto g = tx.latest_grading(org, v.visit_id);
      if (!g) continue;
      auto p = *tx.participant(org, v.participant_id);
      auto key = reporting::select_letter(grading::overall_grade(*g), p.demographics.language);
      out.push_back({std::move(v), std::move(p), std::move(*g), std::move(key)});
    }
    return out;
  });
}

RenderedLetter Service::render_letter(const Account& by, const OrganizationId& org, const VisitId& id) {
  authorizer_.require(by, Action::RenderLetter, id.str(), &org);
  auto result = store_.write([&](Tx& tx) {
    auto v = require_visit(tx, org, id);
    require_state_at_least(v, VisitState::Graded, "a letter");
    auto g = tx.latest_grading(org, id);
    if (!g) fail(ErrorCode::IllegalState, "visit " + id.str() + " has no grading");
    const auto p = require_participant(tx, org, v.participant_id);
    auto letter = reporting::compose_letter(letters_, p, *g);
    auto dispatch = tx.insert_dispatch(org, id, letter.template_key, clock_.now());
    if (v.requires_reissue) tx.set_requires_reissue(org, id, false);
    return RenderedLetter{std::move(letter), std::move(dispatch)};
  });
  authorizer_.record(by, "letter-rendered", id.str());
  return result;
}

reporting::LetterDispatch Service::mark_sent(const Account& by, const OrganizationId& org, const VisitId& id) {
  authorizer_.require(by, Action::MarkLetterSent, id.str(), &org);
  auto dispatch = store_.write([&](Tx& tx) {
    auto v = require_visit(tx, org, id);
    auto d = tx.active_dispatch(org, id);
    if (!d) fail(ErrorCode::NoActiveDispatch, "no letter was rendered for visit " + id.str());
    if (d->sent) return *d;
    const auto now = clock_.now();
    tx.mark_dispatch_sent(d->dispatch_id, now);
    if (v.state == VisitState::Graded &&
        !tx.compare_and_set_state(org, id, VisitState::Graded, VisitState::Notified, by.account_id, now)) {
      fail(ErrorCode::Conflict, "visit " + id.str() + " changed concurrently");
    }
    return *tx.active_dispatch(org, id);
  });
  authorizer_.record(by, "letter-sent", id.str());
  return dispatch;
}

reporting::FollowUp Service::add_followup(const Account& by, const OrganizationId& org, const VisitId& id,
                                          reporting::Channel channel, std::string comment) {
  authorizer_.require(by, Action::AddFollowUp, id.str(), &org);
  if (comment.empty()) fail(ErrorCode::Validation, "comment is required", "comment");
  auto f = store_.write([&](Tx& tx) {
    require_state_at_least(require_visit(tx, org, id), VisitState::Notified, "a follow-up");
    reporting::FollowUp f;
    f.visit_id = id.str();
    f.channel = channel;
    f.comment = std::move(comment);
    f.created_at = clock_.now();
    f.staff_id = by.account_id;
    return tx.insert_followup(org, std::move(f));
  });
  authorizer_.record(by, "followup-added", id.str());
  return f;
}

std::vector<reporting::FollowUp> Service::list_followups(const Account& by, const OrganizationId& org,
                                                         const VisitId& id) {
  authorizer_.require(by, Action::ListFollowUps, id.str(), &org);
  return store_.read([&](Tx& tx) {
    require_visit(tx, org, id);
    return tx.followups_for_visit(org, id);
  });
}

std::vector<reporting::FollowUp> Service::my_followups(const Account& by, const OrganizationId& org) {
  authorizer_.require(by, Action::ListFollowUps, by.account_id, &org);
  return store_.read([&](Tx& tx) { return tx.followups_by_staff(org, by.account_id); });
}

// -- data management portal ------------------------------------------------------------

std::string Service::export_csv(const Account& by, const std::optional<OrganizationId>& org) {
  authorizer_.require(by, Action::ExportData, org ? org->str() : "all", org ? &*org : nullptr);
  return store_.read([&](Tx& tx) { return storage::to_csv(storage::export_rows(tx, org)); });
}

}  // namespace mtocs
