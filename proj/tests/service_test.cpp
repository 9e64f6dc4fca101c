#include <gtest/gtest.h>


#include "mtocs/error.hpp"
#include "support.hpp"
#include "workflow.hpp"

using namespace mtocs;
using grading::DrGrade;
using grading::EyeAssessment;
using testing_support::complete_answers;
using testing_support::Harness;
using testing_support::sample_demographics;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST(Workflow, HappyPathReachesClosed) {
  Harness h;
  auto& s = h.service;
  auto p = s.register_participant(h.screener, sample_demographics(), h.org);
  EXPECT_EQ(p.participant_id.str(), "AAA001");
  auto v = s.open_visit(h.screener, h.org, p.participant_id);
  EXPECT_EQ(v.visit_id.str(), "AAA001001");
  EXPECT_EQ(v.state, VisitState::Surveyed);
  v = s.edit_survey(h.screener, h.org, v.visit_id, complete_answers(), v.version);
  v = s.attach_image(h.screener, h.org, v.visit_id, domain::Eye::Left, "left-bytes");
  v = s.attach_image(h.screener, h.org, v.visit_id, domain::Eye::Right, "right-bytes");
  ASSERT_EQ(v.image_refs.size(), 2u);
  EXPECT_EQ(v.image_refs[1].storage_key, "AAA001001-R-1");
  v = s.transition_visit(h.screener, h.org, v.visit_id, VisitState::Imaged);

  const auto queue = s.grading_queue(h.grader);
  ASSERT_EQ(queue.size(), 1u);
  EXPECT_EQ(queue[0].visit_id, "AAA001001");
  EXPECT_EQ(s.image(h.grader, h.org, queue[0].image_refs[0].storage_key), "left-bytes");

  s.submit_grading(h.grader, h.org, v.visit_id, EyeAssessment{DrGrade::MildNPDR, "few microaneurysms"},
                   EyeAssessment{DrGrade::NoApparentDR, ""});
  EXPECT_TRUE(s.grading_queue(h.grader).empty());

  const auto pending = s.pending_reports(h.staff, h.org);
  ASSERT_EQ(pending.size(), 1u);
  EXPECT_EQ(pending[0].template_key, "letter-mild-npdr-es");
  EXPECT_EQ(pending[0].participant.demographics.primary_phone, "(414) 555-0187");

  const auto rendered = s.render_letter(h.staff, h.org, v.visit_id);
  EXPECT_EQ(rendered.letter.locale, "es");
  const auto d = s.mark_sent(h.staff, h.org, v.visit_id);
  EXPECT_TRUE(d.sent);
  EXPECT_EQ(s.visit(h.screener, h.org, v.visit_id).state, VisitState::Notified);
  EXPECT_TRUE(s.pending_reports(h.staff, h.org).empty());

  s.add_followup(h.staff, h.org, v.visit_id, reporting::Channel::PhoneCall, "booked an exam");
  EXPECT_EQ(s.list_followups(h.staff, h.org, v.visit_id).size(), 1u);
  EXPECT_EQ(s.my_followups(h.staff, h.org).size(), 1u);

  v = s.transition_visit(h.staff, h.org, v.visit_id, VisitState::Closed);
  EXPECT_EQ(v.state, VisitState::Closed);
  EXPECT_EQ(code_of([&] { s.edit_survey(h.screener, h.org, v.visit_id, complete_answers(), v.version); }),
            ErrorCode::IllegalState);
}

TEST(Workflow, OutOfOrderStepsFail) {
  Harness h;
  auto& s = h.service;
  auto p = s.register_participant(h.screener, sample_demographics(), h.org);
  auto v = s.open_visit(h.screener, h.org, p.participant_id);

  // Surveyed: no images, incomplete survey, nothing graded yet.
  EXPECT_EQ(code_of([&] { s.transition_visit(h.screener, h.org, v.visit_id, VisitState::Imaged); }),
            ErrorCode::IllegalState);
  EXPECT_EQ(code_of([&] { s.transition_visit(h.grader, h.org, v.visit_id, VisitState::Graded); }),
            ErrorCode::IllegalTransition);
  EXPECT_EQ(code_of([&] { s.render_letter(h.staff, h.org, v.visit_id); }), ErrorCode::IllegalState);
  EXPECT_EQ(code_of([&] { s.mark_sent(h.staff, h.org, v.visit_id); }), ErrorCode::NoActiveDispatch);
  EXPECT_EQ(code_of([&] { s.add_followup(h.staff, h.org, v.visit_id, reporting::Channel::Text, "x"); }),
            ErrorCode::IllegalState);
  EXPECT_EQ(code_of([&] {
              s.submit_grading(h.grader, h.org, v.visit_id, EyeAssessment{DrGrade::MildNPDR, ""}, std::nullopt);
            }),
            ErrorCode::IllegalState);

  s.attach_image(h.screener, h.org, v.visit_id, domain::Eye::Left, "x");
  // Image present but required answers missing.
  EXPECT_EQ(code_of([&] { s.transition_visit(h.screener, h.org, v.visit_id, VisitState::Imaged); }),
            ErrorCode::Validation);

  const auto graded = h.graded_visit();
  EXPECT_EQ(code_of([&] { s.transition_visit(h.staff, h.org, graded.visit_id, VisitState::Notified); }),
            ErrorCode::IllegalState);
  EXPECT_EQ(code_of([&] { s.transition_visit(h.staff, h.org, graded.visit_id, VisitState::Closed); }),
            ErrorCode::IllegalTransition);
  EXPECT_EQ(code_of([&] { s.mark_sent(h.staff, h.org, graded.visit_id); }), ErrorCode::NoActiveDispatch);
  EXPECT_EQ(code_of([&] {
              s.submit_grading(h.grader, h.org, graded.visit_id, EyeAssessment{DrGrade::MildNPDR, ""}, std::nullopt);
            }),
            ErrorCode::IllegalState);
  EXPECT_EQ(code_of([&] { s.attach_image(h.screener, h.org, graded.visit_id, domain::Eye::Right, "late"); }),
            ErrorCode::IllegalState);
}

TEST(Workflow, RoleChecksPrecedeData) {
  Harness h;
  auto& s = h.service;
  const auto v = h.graded_visit();
  EXPECT_EQ(code_of([&] { s.pending_reports(h.grader, h.org); }), ErrorCode::Unauthorized);
  EXPECT_EQ(code_of([&] { s.render_letter(h.screener, h.org, v.visit_id); }), ErrorCode::Unauthorized);
  EXPECT_EQ(code_of([&] { s.register_participant(h.staff, sample_demographics(), h.org); }), ErrorCode::Unauthorized);
  EXPECT_EQ(code_of([&] { s.export_csv(h.staff, std::nullopt); }), ErrorCode::Unauthorized);
  EXPECT_EQ(code_of([&] { s.grading_queue(h.admin); }), ErrorCode::Unauthorized);
  // Unknown visit after authorization passes.
  EXPECT_EQ(code_of([&] { s.render_letter(h.staff, h.org, VisitId(ParticipantId::first(), 9)); }),
            ErrorCode::UnknownVisit);
}

TEST(Workflow, MarkSentIsIdempotent) {
  Harness h;
  const auto v = h.graded_visit();
  h.service.render_letter(h.staff, h.org, v.visit_id);
  const auto first = h.service.mark_sent(h.staff, h.org, v.visit_id);
  h.clock.advance(std::chrono::hours(1));
  const auto second = h.service.mark_sent(h.staff, h.org, v.visit_id);
  EXPECT_EQ(first.dispatch_id, second.dispatch_id);
  EXPECT_EQ(first.sent_marked_at, second.sent_marked_at);
}

TEST(Workflow, EditAfterSendRequiresReissue) {
  Harness h;
  auto& s = h.service;
  const auto v = h.graded_visit(DrGrade::MildNPDR);
  s.render_letter(h.staff, h.org, v.visit_id);
  s.mark_sent(h.staff, h.org, v.visit_id);
  EXPECT_TRUE(s.pending_reports(h.staff, h.org).empty());

  grading::GradingPatch patch;
  patch.left = EyeAssessment{DrGrade::SevereNPDR, "re-read"};
  const auto r = s.edit_grading(h.grader, h.org, v.visit_id, patch);
  EXPECT_EQ(r.revision, 2);
  EXPECT_EQ(r.right->grade, DrGrade::NoApparentDR);
  EXPECT_EQ(s.grading_history(h.grader, h.org, v.visit_id).size(), 2u);

  const auto pending = s.pending_reports(h.staff, h.org);
  ASSERT_EQ(pending.size(), 1u);
  EXPECT_TRUE(pending[0].visit.requires_reissue);
  EXPECT_EQ(pending[0].template_key, "letter-severe-npdr-es");
  const auto again = s.render_letter(h.staff, h.org, v.visit_id);
  EXPECT_EQ(again.dispatch.template_key, "letter-severe-npdr-es");
  EXPECT_FALSE(again.dispatch.sent);
  EXPECT_TRUE(s.pending_reports(h.staff, h.org).empty());
  EXPECT_EQ(s.visit(h.screener, h.org, v.visit_id).state, VisitState::Notified);
}

TEST(Workflow, EditBeforeSendStaysGraded) {
  Harness h;
  const auto v = h.graded_visit(DrGrade::MildNPDR, domain::Language::English);
  grading::GradingPatch patch;
  patch.right = std::optional<EyeAssessment>{};
  h.service.edit_grading(h.grader, h.org, v.visit_id, patch);
  const auto current = h.service.visit(h.screener, h.org, v.visit_id);
  EXPECT_EQ(current.state, VisitState::Graded);
  EXPECT_FALSE(current.requires_reissue);
  const auto pending = h.service.pending_reports(h.staff, h.org);
  ASSERT_EQ(pending.size(), 1u);
  EXPECT_FALSE(pending[0].grading.right);
  EXPECT_EQ(pending[0].template_key, "letter-mild-npdr-en");
  grading::GradingPatch clear_all;
  clear_all.left = std::optional<EyeAssessment>{};
  EXPECT_EQ(code_of([&] { h.service.edit_grading(h.grader, h.org, v.visit_id, clear_all); }), ErrorCode::Validation);
}

TEST(Workflow, SurveyEditsValidatedAndVersioned) {
  Harness h;
  auto& s = h.service;
  auto p = s.register_participant(h.screener, sample_demographics(), h.org);
  auto v = s.open_visit(h.screener, h.org, p.participant_id);
  auto hidden = complete_answers();
  hidden["has_diabetes"] = false;
  EXPECT_EQ(code_of([&] { s.edit_survey(h.screener, h.org, v.visit_id, hidden, v.version); }), ErrorCode::Validation);
  const auto partial = survey::json{{"has_diabetes", false}};
  auto v2 = s.edit_survey(h.screener, h.org, v.visit_id, partial, v.version);
  EXPECT_EQ(v2.version, v.version + 1);
  EXPECT_EQ(code_of([&] { s.edit_survey(h.screener, h.org, v.visit_id, complete_answers(), v.version); }),
            ErrorCode::Conflict);
}

TEST(Workflow, EditParticipantKeepsRevisions) {
  Harness h;
  auto p = h.service.register_participant(h.screener, sample_demographics(), h.org);
  auto q = h.service.edit_participant(h.screener, h.org, p.participant_id, {{"city", "Racine"}}, p.version);
  EXPECT_EQ(q.demographics.city, "Racine");
  EXPECT_EQ(code_of([&] {
              h.service.edit_participant(h.screener, h.org, p.participant_id, {{"city", "Kenosha"}}, p.version);
            }),
            ErrorCode::Conflict);
  const auto found = h.service.search_participants(h.screener, h.org, domain::SearchField::Name, "garcia");
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].demographics.city, "Racine");
}

TEST(Concurrency, ParallelRegistrationsAreGapless) { testing_support::check_parallel_registrations(100); }

TEST(Concurrency, OneOfTwoParallelGradingsWins) { testing_support::check_parallel_gradings(10); }

TEST(Organizations, DataStaysInItsOrganization) {
  Harness h;
  const OrganizationId other("lakeside-clinic");
  auto other_screener = h.service.create_account("screener2", "screener-pass", access::Role::Screener, other);
  auto a = h.service.register_participant(h.screener, sample_demographics(), h.org);
  auto b = h.service.register_participant(other_screener, sample_demographics("Bea Ruiz"), other);
  EXPECT_EQ(a.participant_id, b.participant_id);
  EXPECT_EQ(code_of([&] { h.service.open_visit(h.screener, other, b.participant_id); }), ErrorCode::Unauthorized);
  const auto found = h.service.search_participants(h.screener, h.org, domain::SearchField::Name, "ruiz");
  EXPECT_TRUE(found.empty());

  // A grader serving both organizations sees both queues.
  auto shared = h.service.create_account("grader2", "grader-pass", access::Role::Grader, h.org, {other});
  h.imaged_visit();
  auto v = h.service.open_visit(other_screener, other, b.participant_id);
  h.service.edit_survey(other_screener, other, v.visit_id, complete_answers(), v.version);
  h.service.attach_image(other_screener, other, v.visit_id, domain::Eye::Right, "x");
  h.service.transition_visit(other_screener, other, v.visit_id, VisitState::Imaged);
  EXPECT_EQ(h.service.grading_queue(h.grader).size(), 1u);
  EXPECT_EQ(h.service.grading_queue(shared).size(), 2u);

  const auto csv = h.service.export_csv(h.admin, h.org);
  EXPECT_EQ(csv.find("lakeside"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Sessions, LoginAuthenticateExpire) {
  Harness h;
  EXPECT_EQ(code_of([&] { h.service.login("staff1", "wrong-pass"); }), ErrorCode::Unauthenticated);
  EXPECT_EQ(code_of([&] { h.service.login("nobody", "staff-pass1"); }), ErrorCode::Unauthenticated);
  const auto s = h.service.login("staff1", "staff-pass1");
  EXPECT_EQ(h.service.authenticate(s.token).account_id, h.staff.account_id);
  EXPECT_EQ(s.expires_at, h.clock.now() + std::chrono::hours(12));
  h.clock.advance(std::chrono::hours(12));
  EXPECT_EQ(code_of([&] { h.service.authenticate(s.token); }), ErrorCode::Unauthenticated);

  const auto t = h.service.login("staff1", "staff-pass1");
  h.service.logout(t.token);
  EXPECT_EQ(code_of([&] { h.service.authenticate(t.token); }), ErrorCode::Unauthenticated);
  EXPECT_EQ(code_of([&] { h.service.authenticate(""); }), ErrorCode::Unauthenticated);
  EXPECT_EQ(code_of([&] { h.service.create_account("staff1", "another-pass", access::Role::Staff, h.org); }),
            ErrorCode::Conflict);
}

TEST(Audit, DeniedAndAllowedActionsRecorded) {
  Harness h;
  const auto v = h.graded_visit();
  EXPECT_THROW(h.service.pending_reports(h.grader, h.org), Error);
  const auto events = h.store.read([](storage::Tx& tx) { return tx.audit_events(); });
  const auto denied = std::count_if(events.begin(), events.end(), [&](const access::AuditEvent& e) {
    return e.outcome == access::Outcome::Denied && e.actor == h.grader.account_id;
  });
  EXPECT_EQ(denied, 1);
  const auto graded = std::count_if(events.begin(), events.end(), [&](const access::AuditEvent& e) {
    return e.action == "grading-submitted" && e.entity == v.visit_id.str();
  });
  EXPECT_EQ(graded, 1);
}
