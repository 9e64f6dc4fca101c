#include <gtest/gtest.h>

#include <random>

#include "mtocs/error.hpp"
#include "mtocs/storage/csv.hpp"
#include "mtocs/storage/export.hpp"
#include "mtocs/storage/store.hpp"
#include "support.hpp"

using namespace mtocs;
using namespace mtocs::storage;
using testing_support::at;
using testing_support::sample_demographics;
using testing_support::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

std::string random_field(std::mt19937_64& rng) {
  static const std::string alphabet = "ab,\"\n\r xyZ09;é";
  std::string s;
  const auto n = rng() % 8;
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
  return s;
}

Participant participant(const OrganizationId& org, ParticipantId id, const std::string& name = "Ana Maria Garcia") {
  Participant p;
  p.participant_id = id;
  p.organization_id = org;
  p.demographics = sample_demographics(name);
  domain::normalize_and_validate(p.demographics);
  p.created_at = at(2018, 6, 2);
  return p;
}

Visit visit(const OrganizationId& org, const VisitId& id) {
  Visit v;
  v.visit_id = id;
  v.participant_id = id.participant();
  v.organization_id = org;
  v.answers.schema_version = "1";
  v.survey_taken_at = at(2018, 6, 2);
  return v;
}

std::string header() {
  std::string h;
  for (auto c : kExportColumns) h += (h.empty() ? "" : ",") + std::string(c);
  return h + "\n";
}

const char* kRow =
    "AAA001,AAA001001,50,female,hispanic_latino,spanish,medicaid,Milwaukee,WI,53204,Mexico,2018-06-02,yes,Type 2,7,"
    "no,moderate-npdr,no-apparent-dr,yes,1\n";

}  // namespace

TEST(Csv, EscapeOnlyWhenNeeded) {
  EXPECT_EQ(csv::escape("plain"), "plain");
  EXPECT_EQ(csv::escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv::escape("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, ParseAcceptsCrlfAndRejectsStrayQuotes) {
  const auto rows = csv::parse("a,b\r\n\"c,d\",\"e\"\"f\"\r\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "c,d");
  EXPECT_EQ(rows[1][1], "e\"f");
  EXPECT_EQ(code_of([] { csv::parse("a,b\"c\n"); }), ErrorCode::FormatError);
  EXPECT_EQ(code_of([] { csv::parse("\"abc\"x\n"); }), ErrorCode::FormatError);
  EXPECT_EQ(code_of([] { csv::parse("\"unterminated\n"); }), ErrorCode::FormatError);
}

TEST(CsvProperty, RoundTripRandomRows) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<csv::Row> rows(1 + rng() % 5);
    const auto width = 1 + rng() % 4;
    for (auto& r : rows) {
      for (std::size_t i = 0; i < width; ++i) r.push_back(random_field(rng));
    }
    // A lone empty field is indistinguishable from a blank line.
    if (width == 1) {
      for (auto& r : rows) {
        if (r[0].empty()) r[0] = "x";
      }
    }
    std::string text;
    for (const auto& r : rows) csv::append_row(text, r);
    ASSERT_EQ(csv::parse(text), rows) << text;
  }
}

TEST(Store, CompositeKeysSeparateOrganizations) {
  Store store;
  const OrganizationId a("org-a"), b("org-b");
  store.write([&](Tx& tx) {
    tx.insert_participant(participant(a, ParticipantId::first(), "Ana Lopez"));
    tx.insert_participant(participant(b, ParticipantId::first(), "Bea Ruiz"));
  });
  store.read([&](Tx& tx) {
    EXPECT_EQ(tx.participant(a, ParticipantId::first())->demographics.name, "Ana Lopez");
    EXPECT_EQ(tx.participant(b, ParticipantId::first())->demographics.name, "Bea Ruiz");
    EXPECT_FALSE(tx.participant(OrganizationId("org-c"), ParticipantId::first()));
    EXPECT_EQ(tx.participants(std::nullopt).size(), 2u);
    EXPECT_EQ(tx.participants(a).size(), 1u);
  });
  EXPECT_EQ(code_of([&] { store.write([&](Tx& tx) { tx.insert_participant(participant(a, ParticipantId::first())); }); }),
            ErrorCode::Conflict);
}

TEST(Store, RollbackOnException) {
  Store store;
  const OrganizationId org("org-a");
  EXPECT_THROW(store.write([&](Tx& tx) {
    tx.insert_participant(participant(org, ParticipantId::first()));
    fail(ErrorCode::Validation, "abort");
  }),
               Error);
  EXPECT_FALSE(store.read([&](Tx& tx) { return tx.participant(org, ParticipantId::first()); }));
}

TEST(Store, OptimisticVersions) {
  Store store;
  const OrganizationId org("org-a");
  auto p = participant(org, ParticipantId::first());
  store.write([&](Tx& tx) { tx.insert_participant(p); });
  p.demographics.city = "Racine";
  const auto updated = store.write([&](Tx& tx) { return tx.update_participant(p, 1, "acct-1", at(2018, 6, 3)); });
  EXPECT_EQ(updated.version, 2);
  EXPECT_EQ(code_of([&] { store.write([&](Tx& tx) { tx.update_participant(p, 1, "acct-2", at(2018, 6, 3)); }); }),
            ErrorCode::Conflict);
  const auto revisions = store.read([&](Tx& tx) { return tx.participant_revisions(org, ParticipantId::first()); });
  ASSERT_EQ(revisions.size(), 1u);
  EXPECT_EQ(revisions[0]["city"], "Milwaukee");
}

TEST(Store, CompareAndSetState) {
  Store store;
  const OrganizationId org("org-a");
  const VisitId id(ParticipantId::first(), 1);
  store.write([&](Tx& tx) {
    tx.insert_participant(participant(org, ParticipantId::first()));
    tx.insert_visit(visit(org, id));
  });
  store.write([&](Tx& tx) {
    EXPECT_TRUE(tx.compare_and_set_state(org, id, VisitState::Surveyed, VisitState::Imaged, "a", at(2018, 6, 2)));
    EXPECT_FALSE(tx.compare_and_set_state(org, id, VisitState::Surveyed, VisitState::Imaged, "b", at(2018, 6, 2)));
    EXPECT_TRUE(tx.compare_and_set_state(org, id, VisitState::Imaged, VisitState::Graded, "c", at(2018, 6, 3)));
  });
  store.read([&](Tx& tx) {
    const auto v = *tx.visit(org, id);
    EXPECT_EQ(v.state, VisitState::Graded);
    EXPECT_EQ(v.graded_at, at(2018, 6, 3));
    const auto log = tx.transitions(org, id);
    ASSERT_EQ(log.size(), 2u);
    EXPECT_EQ(log[1].actor, "c");
  });
}

TEST(Store, NewDispatchSupersedesActiveOne) {
  Store store;
  const OrganizationId org("org-a");
  const VisitId id(ParticipantId::first(), 1);
  store.write([&](Tx& tx) {
    tx.insert_participant(participant(org, ParticipantId::first()));
    tx.insert_visit(visit(org, id));
    const auto first = tx.insert_dispatch(org, id, "letter-mild-npdr-es", at(2018, 6, 4));
    tx.mark_dispatch_sent(first.dispatch_id, at(2018, 6, 5));
    tx.insert_dispatch(org, id, "letter-severe-npdr-es", at(2018, 6, 6));
  });
  store.read([&](Tx& tx) {
    const auto all = tx.dispatches(org, id);
    ASSERT_EQ(all.size(), 2u);
    EXPECT_EQ(std::count_if(all.begin(), all.end(), [](const auto& d) { return d.active; }), 1);
    const auto active = *tx.active_dispatch(org, id);
    EXPECT_EQ(active.template_key, "letter-severe-npdr-es");
    EXPECT_FALSE(active.sent);
  });
}

TEST(Store, PersistsAcrossReopen) {
  TempDir dir;
  const auto path = (dir.path() / "m.db").string();
  const OrganizationId org("org-a");
  {
    Store store(path);
    store.write([&](Tx& tx) { tx.insert_participant(participant(org, ParticipantId::first())); });
  }
  Store again(path);
  EXPECT_TRUE(again.read([&](Tx& tx) { return tx.participant(org, ParticipantId::first()); }));
}

TEST(Export, ParseValidDocument) {
  const auto rows = parse_export(header() + kRow);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].age_at_visit, 50);
  EXPECT_EQ(rows[0].left_grade, "moderate-npdr");
  EXPECT_EQ(rows[0].followup_count, 1);
  EXPECT_EQ(to_csv(rows), header() + kRow);
}

TEST(Export, ErrorsNameRowAndColumn) {
  auto broken = std::string(kRow);
  broken.replace(broken.find("female"), 6, "f");
  try {
    parse_export(header() + broken);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
    EXPECT_EQ(e.field(), "row 2, column sex");
  }
  EXPECT_EQ(code_of([] { parse_export("participant_id,visit_id\n"); }), ErrorCode::FormatError);
  auto bad_grade = std::string(kRow);
  bad_grade.replace(bad_grade.find("moderate-npdr"), 13, "moderate");
  EXPECT_EQ(code_of([&] { parse_export(header() + bad_grade); }), ErrorCode::FormatError);
  auto short_row = std::string(kRow);
  short_row.erase(short_row.rfind(','));
  EXPECT_EQ(code_of([&] { parse_export(header() + short_row + "\n"); }), ErrorCode::FormatError);
}

TEST(Export, ImportRebuildsWorkflowState) {
  const auto schema = survey::Questionnaire::load(testing_support::schema_path());
  Store store;
  const OrganizationId org("org-a");
  const auto rows = parse_export(header() + kRow);
  store.write([&](Tx& tx) { import_rows(tx, org, rows, schema, at(2020, 1, 1)); });
  store.read([&](Tx& tx) {
    const VisitId id(ParticipantId::first(), 1);
    const auto v = *tx.visit(org, id);
    EXPECT_EQ(v.state, VisitState::Notified);
    EXPECT_EQ(tx.followups_for_visit(org, id).size(), 1u);
    EXPECT_EQ(tx.active_dispatch(org, id)->template_key, "letter-moderate-npdr-es");
    EXPECT_EQ(*tx.last_participant_id(org), ParticipantId::first());
    const auto p = *tx.participant(org, ParticipantId::first());
    EXPECT_EQ(age_on(p.demographics.date_of_birth, Date{std::chrono::year{2018}, std::chrono::June, std::chrono::day{2}}), 50);
    EXPECT_EQ(to_csv(export_rows(tx, org)), header() + kRow);
  });
}

TEST(Export, ImportRejectsInconsistentAges) {
  const auto schema = survey::Questionnaire::load(testing_support::schema_path());
  Store store;
  std::string second = kRow;
  second.replace(second.find("AAA001001"), 9, "AAA001002");
  second.replace(second.find(",50,"), 4, ",55,");
  const auto rows = parse_export(header() + kRow + second);
  EXPECT_EQ(code_of([&] { store.write([&](Tx& tx) { import_rows(tx, OrganizationId("o"), rows, schema, at(2020, 1, 1)); }); }),
            ErrorCode::FormatError);
}
