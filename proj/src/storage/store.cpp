#include "mtocs/storage/store.hpp"

#include "mtocs/error.hpp"

namespace mtocs::storage {

using survey::json;

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS accounts (
  account_id TEXT PRIMARY KEY,
  username TEXT NOT NULL UNIQUE,
  credential_hash TEXT NOT NULL,
  role TEXT NOT NULL,
  organization_id TEXT NOT NULL,
  extra_organizations TEXT NOT NULL DEFAULT '[]'
);
CREATE TABLE IF NOT EXISTS sessions (
  token_digest TEXT PRIMARY KEY,
  account_id TEXT NOT NULL REFERENCES accounts(account_id),
  expires_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS audit_events (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  actor TEXT NOT NULL,
  action TEXT NOT NULL,
  entity TEXT NOT NULL,
  at TEXT NOT NULL,
  outcome TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS id_counters (
  organization_id TEXT PRIMARY KEY,
  last_participant_id TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS participants (
  organization_id TEXT NOT NULL,
  participant_id TEXT NOT NULL,
  name TEXT NOT NULL,
  first_name TEXT NOT NULL,
  last_name TEXT NOT NULL,
  date_of_birth TEXT NOT NULL,
  sex TEXT NOT NULL,
  ethnicity TEXT NOT NULL,
  language TEXT NOT NULL,
  insurance TEXT NOT NULL,
  city TEXT NOT NULL,
  state TEXT NOT NULL,
  zipcode TEXT NOT NULL,
  country TEXT NOT NULL,
  primary_phone TEXT NOT NULL,
  secondary_phone TEXT,
  email TEXT,
  created_at TEXT NOT NULL,
  version INTEGER NOT NULL,
  PRIMARY KEY (organization_id, participant_id)
);
CREATE INDEX IF NOT EXISTS participants_first ON participants(organization_id, lower(first_name));
CREATE INDEX IF NOT EXISTS participants_last ON participants(organization_id, lower(last_name));
CREATE INDEX IF NOT EXISTS participants_dob ON participants(organization_id, date_of_birth);
CREATE INDEX IF NOT EXISTS participants_phone ON participants(organization_id, primary_phone);
CREATE TABLE IF NOT EXISTS participant_revisions (
  organization_id TEXT NOT NULL,
  participant_id TEXT NOT NULL,
  version INTEGER NOT NULL,
  snapshot TEXT NOT NULL,
  replaced_at TEXT NOT NULL,
  actor TEXT NOT NULL,
  PRIMARY KEY (organization_id, participant_id, version),
  FOREIGN KEY (organization_id, participant_id) REFERENCES participants(organization_id, participant_id)
);
CREATE TABLE IF NOT EXISTS visits (
  organization_id TEXT NOT NULL,
  visit_id TEXT NOT NULL,
  participant_id TEXT NOT NULL,
  schema_version TEXT NOT NULL,
  answers TEXT NOT NULL,
  state TEXT NOT NULL,
  survey_taken_at TEXT NOT NULL,
  graded_at TEXT,
  requires_reissue INTEGER NOT NULL DEFAULT 0,
  version INTEGER NOT NULL,
  PRIMARY KEY (organization_id, visit_id),
  FOREIGN KEY (organization_id, participant_id) REFERENCES participants(organization_id, participant_id)
);
CREATE INDEX IF NOT EXISTS visits_state ON visits(state, survey_taken_at);
CREATE TABLE IF NOT EXISTS survey_revisions (
  organization_id TEXT NOT NULL,
  visit_id TEXT NOT NULL,
  version INTEGER NOT NULL,
  answers TEXT NOT NULL,
  replaced_at TEXT NOT NULL,
  actor TEXT NOT NULL,
  PRIMARY KEY (organization_id, visit_id, version),
  FOREIGN KEY (organization_id, visit_id) REFERENCES visits(organization_id, visit_id)
);
CREATE TABLE IF NOT EXISTS visit_images (
  organization_id TEXT NOT NULL,
  visit_id TEXT NOT NULL,
  eye TEXT NOT NULL,
  idx INTEGER NOT NULL,
  storage_key TEXT NOT NULL,
  captured_at TEXT NOT NULL,
  PRIMARY KEY (organization_id, storage_key),
  FOREIGN KEY (organization_id, visit_id) REFERENCES visits(organization_id, visit_id)
);
CREATE TABLE IF NOT EXISTS visit_transitions (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  organization_id TEXT NOT NULL,
  visit_id TEXT NOT NULL,
  from_state TEXT NOT NULL,
  to_state TEXT NOT NULL,
  at TEXT NOT NULL,
  actor TEXT NOT NULL,
  FOREIGN KEY (organization_id, visit_id) REFERENCES visits(organization_id, visit_id)
);
CREATE TABLE IF NOT EXISTS grading_revisions (
  organization_id TEXT NOT NULL,
  visit_id TEXT NOT NULL,
  revision INTEGER NOT NULL,
  left_grade TEXT,
  left_comment TEXT,
  right_grade TEXT,
  right_comment TEXT,
  grader_id TEXT NOT NULL,
  graded_at TEXT NOT NULL,
  PRIMARY KEY (organization_id, visit_id, revision),
  FOREIGN KEY (organization_id, visit_id) REFERENCES visits(organization_id, visit_id),
  CHECK (left_grade IS NOT NULL OR right_grade IS NOT NULL)
);
CREATE TABLE IF NOT EXISTS dispatches (
  dispatch_id INTEGER PRIMARY KEY AUTOINCREMENT,
  organization_id TEXT NOT NULL,
  visit_id TEXT NOT NULL,
  template_key TEXT NOT NULL,
  rendered_at TEXT NOT NULL,
  sent INTEGER NOT NULL DEFAULT 0,
  sent_marked_at TEXT,
  active INTEGER NOT NULL DEFAULT 1,
  FOREIGN KEY (organization_id, visit_id) REFERENCES visits(organization_id, visit_id),
  CHECK (sent = 0 OR sent_marked_at IS NOT NULL)
);
CREATE UNIQUE INDEX IF NOT EXISTS dispatches_one_active
  ON dispatches(organization_id, visit_id) WHERE active = 1;
CREATE TABLE IF NOT EXISTS followups (
  followup_id INTEGER PRIMARY KEY AUTOINCREMENT,
  organization_id TEXT NOT NULL,
  visit_id TEXT NOT NULL,
  channel TEXT NOT NULL,
  comment TEXT NOT NULL,
  created_at TEXT NOT NULL,
  staff_id TEXT NOT NULL,
  FOREIGN KEY (organization_id, visit_id) REFERENCES visits(organization_id, visit_id)
);
)sql";

Timestamp timestamp_column(const sqlite::Statement& st, int col) {
  auto t = parse_timestamp(st.text(col));
  if (!t) fail(ErrorCode::Internal, "corrupt timestamp in database: " + st.text(col));
  return *t;
}

template <class Enum>
Enum enum_column(const sqlite::Statement& st, int col) {
  auto v = domain::parse_token<Enum>(st.text(col));
  if (!v) fail(ErrorCode::Internal, "corrupt enum value in database: " + st.text(col));
  return *v;
}

constexpr const char* kParticipantColumns =
    "organization_id, participant_id, name, first_name, last_name, date_of_birth, sex, ethnicity, "
    "language, insurance, city, state, zipcode, country, primary_phone, secondary_phone, email, "
    "created_at, version";

Participant read_participant(const sqlite::Statement& st) {
  Participant p;
  p.organization_id = OrganizationId(st.text(0));
  p.participant_id = ParticipantId::parse_or_throw(st.text(1));
  auto& d = p.demographics;
  d.name = st.text(2);
  d.first_name = st.text(3);
  d.last_name = st.text(4);
  d.date_of_birth = parse_date(st.text(5)).value_or(Date{});
  d.sex = enum_column<domain::Sex>(st, 6);
  d.ethnicity = enum_column<domain::Ethnicity>(st, 7);
  d.language = enum_column<domain::Language>(st, 8);
  d.insurance = enum_column<domain::Insurance>(st, 9);
  d.city = st.text(10);
  d.state = st.text(11);
  d.zipcode = st.text(12);
  d.country = st.text(13);
  d.primary_phone = st.text(14);
  d.secondary_phone = st.optional_text(15);
  d.email = st.optional_text(16);
  p.created_at = timestamp_column(st, 17);
  p.version = st.integer(18);
  return p;
}

void bind_demographics(sqlite::Statement& st, int first, const domain::Demographics& d) {
  st.bind(first, d.name)
      .bind(first + 1, d.first_name)
      .bind(first + 2, d.last_name)
      .bind(first + 3, format_date(d.date_of_birth))
      .bind(first + 4, domain::token(d.sex))
      .bind(first + 5, domain::token(d.ethnicity))
      .bind(first + 6, domain::token(d.language))
      .bind(first + 7, domain::token(d.insurance))
      .bind(first + 8, d.city)
      .bind(first + 9, d.state)
      .bind(first + 10, d.zipcode)
      .bind(first + 11, d.country)
      .bind(first + 12, d.primary_phone)
      .bind(first + 13, d.secondary_phone)
      .bind(first + 14, d.email);
}

constexpr const char* kVisitColumns =
    "organization_id, visit_id, participant_id, schema_version, answers, state, survey_taken_at, "
    "graded_at, requires_reissue, version";

Visit read_visit_row(const sqlite::Statement& st) {
  Visit v;
  v.organization_id = OrganizationId(st.text(0));
  v.visit_id = VisitId::parse_or_throw(st.text(1));
  v.participant_id = ParticipantId::parse_or_throw(st.text(2));
  v.answers.schema_version = st.text(3);
  v.answers.answers = json::parse(st.text(4));
  v.state = enum_column<VisitState>(st, 5);
  v.survey_taken_at = timestamp_column(st, 6);
  if (!st.is_null(7)) v.graded_at = timestamp_column(st, 7);
  v.requires_reissue = st.int64(8) != 0;
  v.version = st.integer(9);
  return v;
}

std::optional<grading::EyeAssessment> read_eye(const sqlite::Statement& st, int grade_col) {
  if (st.is_null(grade_col)) return std::nullopt;
  auto g = grading::parse_grade(st.text(grade_col));
  if (!g) fail(ErrorCode::Internal, "corrupt grade in database: " + st.text(grade_col));
  return grading::EyeAssessment{*g, st.text(grade_col + 1)};
}

grading::GradingRecord read_grading(const sqlite::Statement& st) {
  grading::GradingRecord r;
  r.visit_id = VisitId::parse_or_throw(st.text(0));
  r.revision = st.integer(1);
  r.left = read_eye(st, 2);
  r.right = read_eye(st, 4);
  r.grader_id = st.text(6);
  r.graded_at = timestamp_column(st, 7);
  return r;
}

reporting::LetterDispatch read_dispatch(const sqlite::Statement& st) {
  reporting::LetterDispatch d;
  d.dispatch_id = st.int64(0);
  d.visit_id = st.text(1);
  d.template_key = st.text(2);
  d.rendered_at = timestamp_column(st, 3);
  d.sent = st.int64(4) != 0;
  if (!st.is_null(5)) d.sent_marked_at = timestamp_column(st, 5);
  d.active = st.int64(6) != 0;
  return d;
}

reporting::FollowUp read_followup(const sqlite::Statement& st) {
  reporting::FollowUp f;
  f.followup_id = st.int64(0);
  f.visit_id = st.text(1);
  f.channel = reporting::parse_channel(st.text(2)).value_or(reporting::Channel::PhoneCall);
  f.comment = st.text(3);
  f.created_at = timestamp_column(st, 4);
  f.staff_id = st.text(5);
  return f;
}

access::Account read_account(const sqlite::Statement& st) {
  access::Account a;
  a.account_id = st.text(0);
  a.username = st.text(1);
  a.credential_hash = st.text(2);
  a.role = access::parse_role(st.text(3)).value_or(access::Role::Screener);
  a.organization_id = OrganizationId(st.text(4));
  for (const auto& org : json::parse(st.text(5))) {
    a.extra_organizations.emplace_back(org.get<std::string>());
  }
  return a;
}

constexpr const char* kAccountColumns =
    "account_id, username, credential_hash, role, organization_id, extra_organizations";

}  // namespace

Store::Store(const std::string& path) : db_(path) { db_.exec(kSchema); }

void Store::append(const access::AuditEvent& event) {
  write([&](Tx& tx) { tx.insert_audit(event); });
}

// -- accounts --------------------------------------------------------------

void Tx::insert_account(const access::Account& a) {
  json extra = json::array();
  for (const auto& org : a.extra_organizations) extra.push_back(org.str());
  db_.prepare("INSERT INTO accounts(" + std::string(kAccountColumns) + ") VALUES (?,?,?,?,?,?)")
      .bind(1, a.account_id)
      .bind(2, a.username)
      .bind(3, a.credential_hash)
      .bind(4, access::token(a.role))
      .bind(5, a.organization_id.str())
      .bind(6, extra.dump())
      .run();
}

std::optional<access::Account> Tx::account(std::string_view account_id) {
  auto st = db_.prepare("SELECT " + std::string(kAccountColumns) + " FROM accounts WHERE account_id = ?");
  st.bind(1, account_id);
  if (!st.step()) return std::nullopt;
  return read_account(st);
}

std::optional<access::Account> Tx::account_by_username(std::string_view username) {
  auto st = db_.prepare("SELECT " + std::string(kAccountColumns) + " FROM accounts WHERE username = ?");
  st.bind(1, username);
  if (!st.step()) return std::nullopt;
  return read_account(st);
}

void Tx::insert_session(std::string_view digest, std::string_view account_id, Timestamp expires_at) {
  db_.prepare("INSERT INTO sessions(token_digest, account_id, expires_at) VALUES (?,?,?)")
      .bind(1, digest)
      .bind(2, account_id)
      .bind(3, format_timestamp(expires_at))
      .run();
}

std::optional<SessionRecord> Tx::session(std::string_view digest) {
  auto st = db_.prepare("SELECT account_id, expires_at FROM sessions WHERE token_digest = ?");
  st.bind(1, digest);
  if (!st.step()) return std::nullopt;
  return SessionRecord{st.text(0), timestamp_column(st, 1)};
}

void Tx::delete_session(std::string_view digest) {
  db_.prepare("DELETE FROM sessions WHERE token_digest = ?").bind(1, digest).run();
}

void Tx::delete_expired_sessions(Timestamp now) {
  db_.prepare("DELETE FROM sessions WHERE expires_at <= ?").bind(1, format_timestamp(now)).run();
}

// -- id counters -------------------------------------------------------------

std::optional<ParticipantId> Tx::last_participant_id(const OrganizationId& org) {
  auto st = db_.prepare("SELECT last_participant_id FROM id_counters WHERE organization_id = ?");
  st.bind(1, org.str());
  if (!st.step()) return std::nullopt;
  return ParticipantId::parse_or_throw(st.text(0));
}

void Tx::set_last_participant_id(const OrganizationId& org, ParticipantId id) {
  db_.prepare(
         "INSERT INTO id_counters(organization_id, last_participant_id) VALUES (?, ?) "
         "ON CONFLICT(organization_id) DO UPDATE SET last_participant_id = excluded.last_participant_id")
      .bind(1, org.str())
      .bind(2, id.str())
      .run();
}

// -- participants ------------------------------------------------------------

void Tx::insert_participant(const Participant& p) {
  auto st = db_.prepare("INSERT INTO participants(" + std::string(kParticipantColumns) +
                        ") VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)");
  st.bind(1, p.organization_id.str()).bind(2, p.participant_id.str());
  bind_demographics(st, 3, p.demographics);
  st.bind(18, format_timestamp(p.created_at)).bind(19, p.version);
  st.run();
}

std::optional<Participant> Tx::participant(const OrganizationId& org, ParticipantId id) {
  auto st = db_.prepare("SELECT " + std::string(kParticipantColumns) +
                        " FROM participants WHERE organization_id = ? AND participant_id = ?");
  st.bind(1, org.str()).bind(2, id.str());
  if (!st.step()) return std::nullopt;
  return read_participant(st);
}

Participant Tx::update_participant(const Participant& updated, int expected_version,
                                   std::string_view actor, Timestamp at) {
  auto current = participant(updated.organization_id, updated.participant_id);
  if (!current) {
    fail(ErrorCode::UnknownParticipant, "no participant " + updated.participant_id.str());
  }
  if (current->version != expected_version) {
    fail(ErrorCode::Conflict, "participant " + updated.participant_id.str() + " is at version " +
                                  std::to_string(current->version) + ", not " +
                                  std::to_string(expected_version));
  }
  db_.prepare(
         "INSERT INTO participant_revisions(organization_id, participant_id, version, snapshot, "
         "replaced_at, actor) VALUES (?,?,?,?,?,?)")
      .bind(1, current->organization_id.str())
      .bind(2, current->participant_id.str())
      .bind(3, current->version)
      .bind(4, domain::to_json(*current).dump())
      .bind(5, format_timestamp(at))
      .bind(6, actor)
      .run();

  auto st = db_.prepare(
      "UPDATE participants SET name=?, first_name=?, last_name=?, date_of_birth=?, sex=?, "
      "ethnicity=?, language=?, insurance=?, city=?, state=?, zipcode=?, country=?, "
      "primary_phone=?, secondary_phone=?, email=?, version = version + 1 "
      "WHERE organization_id = ? AND participant_id = ? AND version = ?");
  bind_demographics(st, 1, updated.demographics);
  st.bind(16, updated.organization_id.str())
      .bind(17, updated.participant_id.str())
      .bind(18, expected_version);
  st.run();
  if (db_.changes() != 1) fail(ErrorCode::Conflict, "participant changed concurrently");
  return *participant(updated.organization_id, updated.participant_id);
}

std::vector<Participant> Tx::participants(const std::optional<OrganizationId>& org) {
  std::vector<Participant> out;
  auto st = db_.prepare("SELECT " + std::string(kParticipantColumns) +
                        " FROM participants WHERE (?1 IS NULL OR organization_id = ?1) "
                        "ORDER BY participant_id, organization_id");
  if (org) {
    st.bind(1, org->str());
  } else {
    st.bind(1, std::nullopt);
  }
  while (st.step()) out.push_back(read_participant(st));
  return out;
}

std::vector<Participant> Tx::search_participants(const OrganizationId& org, domain::SearchField field,
                                                 std::string_view query) {
  std::string where;
  switch (field) {
    case domain::SearchField::Id: where = "participant_id = ?2"; break;
    case domain::SearchField::Name: where = "(lower(first_name) = lower(?2) OR lower(last_name) = lower(?2))"; break;
    case domain::SearchField::DateOfBirth: where = "date_of_birth = ?2"; break;
    case domain::SearchField::Phone: where = "(primary_phone = ?2 OR secondary_phone = ?2)"; break;
  }
  auto st = db_.prepare("SELECT " + std::string(kParticipantColumns) +
                        " FROM participants WHERE organization_id = ?1 AND " + where +
                        " ORDER BY participant_id");
  st.bind(1, org.str()).bind(2, query);
  std::vector<Participant> out;
  while (st.step()) out.push_back(read_participant(st));
  return out;
}

std::vector<json> Tx::participant_revisions(const OrganizationId& org, ParticipantId id) {
  auto st = db_.prepare(
      "SELECT snapshot FROM participant_revisions WHERE organization_id = ? AND participant_id = ? "
      "ORDER BY version");
  st.bind(1, org.str()).bind(2, id.str());
  std::vector<json> out;
  while (st.step()) out.push_back(json::parse(st.text(0)));
  return out;
}

// -- visits ------------------------------------------------------------------

int Tx::visit_count(const OrganizationId& org, ParticipantId id) {
  auto st = db_.prepare("SELECT count(*) FROM visits WHERE organization_id = ? AND participant_id = ?");
  st.bind(1, org.str()).bind(2, id.str());
  st.step();
  return st.integer(0);
}

void Tx::insert_visit(const Visit& v) {
  db_.prepare("INSERT INTO visits(" + std::string(kVisitColumns) + ") VALUES (?,?,?,?,?,?,?,?,?,?)")
      .bind(1, v.organization_id.str())
      .bind(2, v.visit_id.str())
      .bind(3, v.participant_id.str())
      .bind(4, v.answers.schema_version)
      .bind(5, v.answers.answers.dump())
      .bind(6, domain::token(v.state))
      .bind(7, format_timestamp(v.survey_taken_at))
      .bind(8, v.graded_at ? std::optional<std::string>(format_timestamp(*v.graded_at)) : std::nullopt)
      .bind(9, v.requires_reissue)
      .bind(10, v.version)
      .run();
  for (const auto& ref : v.image_refs) insert_image(v.organization_id, v.visit_id, ref);
}

namespace {

void load_images(sqlite::Connection& db, Visit& v) {
  auto st = db.prepare(
      "SELECT eye, storage_key, captured_at FROM visit_images WHERE organization_id = ? AND "
      "visit_id = ? ORDER BY captured_at, eye, idx");
  st.bind(1, v.organization_id.str()).bind(2, v.visit_id.str());
  while (st.step()) {
    v.image_refs.push_back(
        domain::ImageRef{enum_column<domain::Eye>(st, 0), st.text(1), timestamp_column(st, 2)});
  }
}

}  // namespace

std::optional<Visit> Tx::visit(const OrganizationId& org, const VisitId& id) {
  auto st = db_.prepare("SELECT " + std::string(kVisitColumns) +
                        " FROM visits WHERE organization_id = ? AND visit_id = ?");
  st.bind(1, org.str()).bind(2, id.str());
  if (!st.step()) return std::nullopt;
  Visit v = read_visit_row(st);
  load_images(db_, v);
  return v;
}

std::vector<Visit> Tx::visits(const std::optional<OrganizationId>& org, std::optional<VisitState> state) {
  auto st = db_.prepare("SELECT " + std::string(kVisitColumns) +
                        " FROM visits WHERE (?1 IS NULL OR organization_id = ?1) AND "
                        "(?2 IS NULL OR state = ?2) ORDER BY survey_taken_at, visit_id, organization_id");
  if (org) {
    st.bind(1, org->str());
  } else {
    st.bind(1, std::nullopt);
  }
  if (state) {
    st.bind(2, domain::token(*state));
  } else {
    st.bind(2, std::nullopt);
  }
  std::vector<Visit> out;
  while (st.step()) out.push_back(read_visit_row(st));
  for (auto& v : out) load_images(db_, v);
  return out;
}

Visit Tx::update_answers(const OrganizationId& org, const VisitId& id, const survey::AnswerSet& answers,
                         int expected_version, std::string_view actor, Timestamp at) {
  auto current = visit(org, id);
  if (!current) fail(ErrorCode::UnknownVisit, "no visit " + id.str());
  if (current->version != expected_version) {
    fail(ErrorCode::Conflict, "visit " + id.str() + " is at version " +
                                  std::to_string(current->version) + ", not " +
                                  std::to_string(expected_version));
  }
  db_.prepare(
         "INSERT INTO survey_revisions(organization_id, visit_id, version, answers, replaced_at, actor) "
         "VALUES (?,?,?,?,?,?)")
      .bind(1, org.str())
      .bind(2, id.str())
      .bind(3, current->version)
      .bind(4, json{{"schema_version", current->answers.schema_version},
                    {"answers", current->answers.answers}}
                   .dump())
      .bind(5, format_timestamp(at))
      .bind(6, actor)
      .run();
  db_.prepare(
         "UPDATE visits SET answers = ?, schema_version = ?, version = version + 1 "
         "WHERE organization_id = ? AND visit_id = ? AND version = ?")
      .bind(1, answers.answers.dump())
      .bind(2, answers.schema_version)
      .bind(3, org.str())
      .bind(4, id.str())
      .bind(5, expected_version)
      .run();
  if (db_.changes() != 1) fail(ErrorCode::Conflict, "visit changed concurrently");
  return *visit(org, id);
}

std::vector<json> Tx::survey_revisions(const OrganizationId& org, const VisitId& id) {
  auto st = db_.prepare(
      "SELECT answers FROM survey_revisions WHERE organization_id = ? AND visit_id = ? ORDER BY version");
  st.bind(1, org.str()).bind(2, id.str());
  std::vector<json> out;
  while (st.step()) out.push_back(json::parse(st.text(0)));
  return out;
}

bool Tx::compare_and_set_state(const OrganizationId& org, const VisitId& id, VisitState from,
                               VisitState to, std::string_view actor, Timestamp at) {
  db_.prepare(
         "UPDATE visits SET state = ?1, version = version + 1, "
         "graded_at = CASE WHEN ?1 = 'graded' THEN ?2 ELSE graded_at END "
         "WHERE organization_id = ?3 AND visit_id = ?4 AND state = ?5")
      .bind(1, domain::token(to))
      .bind(2, format_timestamp(at))
      .bind(3, org.str())
      .bind(4, id.str())
      .bind(5, domain::token(from))
      .run();
  if (db_.changes() != 1) return false;
  db_.prepare(
         "INSERT INTO visit_transitions(organization_id, visit_id, from_state, to_state, at, actor) "
         "VALUES (?,?,?,?,?,?)")
      .bind(1, org.str())
      .bind(2, id.str())
      .bind(3, domain::token(from))
      .bind(4, domain::token(to))
      .bind(5, format_timestamp(at))
      .bind(6, actor)
      .run();
  return true;
}

void Tx::set_requires_reissue(const OrganizationId& org, const VisitId& id, bool value) {
  db_.prepare("UPDATE visits SET requires_reissue = ? WHERE organization_id = ? AND visit_id = ?")
      .bind(1, value)
      .bind(2, org.str())
      .bind(3, id.str())
      .run();
}

std::vector<domain::Transition> Tx::transitions(const OrganizationId& org, const VisitId& id) {
  auto st = db_.prepare(
      "SELECT from_state, to_state, at, actor FROM visit_transitions WHERE organization_id = ? AND "
      "visit_id = ? ORDER BY seq");
  st.bind(1, org.str()).bind(2, id.str());
  std::vector<domain::Transition> out;
  while (st.step()) {
    out.push_back({enum_column<VisitState>(st, 0), enum_column<VisitState>(st, 1),
                   timestamp_column(st, 2), st.text(3)});
  }
  return out;
}

void Tx::insert_image(const OrganizationId& org, const VisitId& id, const domain::ImageRef& ref) {
  const auto dash = ref.storage_key.rfind('-');
  const int idx = dash == std::string::npos ? 0 : std::stoi(ref.storage_key.substr(dash + 1));
  db_.prepare(
         "INSERT INTO visit_images(organization_id, visit_id, eye, idx, storage_key, captured_at) "
         "VALUES (?,?,?,?,?,?)")
      .bind(1, org.str())
      .bind(2, id.str())
      .bind(3, domain::token(ref.eye))
      .bind(4, idx)
      .bind(5, ref.storage_key)
      .bind(6, format_timestamp(ref.captured_at))
      .run();
}

int Tx::image_count(const OrganizationId& org, const VisitId& id, domain::Eye eye) {
  auto st = db_.prepare(
      "SELECT count(*) FROM visit_images WHERE organization_id = ? AND visit_id = ? AND eye = ?");
  st.bind(1, org.str()).bind(2, id.str()).bind(3, domain::token(eye));
  st.step();
  return st.integer(0);
}

// -- grading -----------------------------------------------------------------

void Tx::insert_grading(const OrganizationId& org, const grading::GradingRecord& r) {
  auto grade_text = [](const std::optional<grading::EyeAssessment>& e) -> std::optional<std::string> {
    if (!e) return std::nullopt;
    return std::string(grading::slug(e->grade));
  };
  auto comment_text = [](const std::optional<grading::EyeAssessment>& e) -> std::optional<std::string> {
    if (!e) return std::nullopt;
    return e->comment;
  };
  db_.prepare(
         "INSERT INTO grading_revisions(organization_id, visit_id, revision, left_grade, "
         "left_comment, right_grade, right_comment, grader_id, graded_at) VALUES (?,?,?,?,?,?,?,?,?)")
      .bind(1, org.str())
      .bind(2, r.visit_id.str())
      .bind(3, r.revision)
      .bind(4, grade_text(r.left))
      .bind(5, comment_text(r.left))
      .bind(6, grade_text(r.right))
      .bind(7, comment_text(r.right))
      .bind(8, r.grader_id)
      .bind(9, format_timestamp(r.graded_at))
      .run();
}

namespace {
constexpr const char* kGradingColumns =
    "visit_id, revision, left_grade, left_comment, right_grade, right_comment, grader_id, graded_at";
}

std::optional<grading::GradingRecord> Tx::latest_grading(const OrganizationId& org, const VisitId& id) {
  auto st = db_.prepare("SELECT " + std::string(kGradingColumns) +
                        " FROM grading_revisions WHERE organization_id = ? AND visit_id = ? "
                        "ORDER BY revision DESC LIMIT 1");
  st.bind(1, org.str()).bind(2, id.str());
  if (!st.step()) return std::nullopt;
  return read_grading(st);
}

std::vector<grading::GradingRecord> Tx::grading_history(const OrganizationId& org, const VisitId& id) {
  auto st = db_.prepare("SELECT " + std::string(kGradingColumns) +
                        " FROM grading_revisions WHERE organization_id = ? AND visit_id = ? "
                        "ORDER BY revision");
  st.bind(1, org.str()).bind(2, id.str());
  std::vector<grading::GradingRecord> out;
  while (st.step()) out.push_back(read_grading(st));
  return out;
}

// -- dispatches and follow-ups -------------------------------------------------

namespace {
constexpr const char* kDispatchColumns =
    "dispatch_id, visit_id, template_key, rendered_at, sent, sent_marked_at, active";
constexpr const char* kFollowupColumns = "followup_id, visit_id, channel, comment, created_at, staff_id";
}  // namespace

std::optional<reporting::LetterDispatch> Tx::active_dispatch(const OrganizationId& org, const VisitId& id) {
  auto st = db_.prepare("SELECT " + std::string(kDispatchColumns) +
                        " FROM dispatches WHERE organization_id = ? AND visit_id = ? AND active = 1");
  st.bind(1, org.str()).bind(2, id.str());
  if (!st.step()) return std::nullopt;
  return read_dispatch(st);
}

reporting::LetterDispatch Tx::insert_dispatch(const OrganizationId& org, const VisitId& id,
                                              std::string_view template_key, Timestamp at) {
  db_.prepare("UPDATE dispatches SET active = 0 WHERE organization_id = ? AND visit_id = ? AND active = 1")
      .bind(1, org.str())
      .bind(2, id.str())
      .run();
  db_.prepare(
         "INSERT INTO dispatches(organization_id, visit_id, template_key, rendered_at, sent, active) "
         "VALUES (?,?,?,?,0,1)")
      .bind(1, org.str())
      .bind(2, id.str())
      .bind(3, template_key)
      .bind(4, format_timestamp(at))
      .run();
  return *active_dispatch(org, id);
}

void Tx::mark_dispatch_sent(std::int64_t dispatch_id, Timestamp at) {
  db_.prepare("UPDATE dispatches SET sent = 1, sent_marked_at = ? WHERE dispatch_id = ?")
      .bind(1, format_timestamp(at))
      .bind(2, dispatch_id)
      .run();
}

std::vector<reporting::LetterDispatch> Tx::dispatches(const OrganizationId& org, const VisitId& id) {
  auto st = db_.prepare("SELECT " + std::string(kDispatchColumns) +
                        " FROM dispatches WHERE organization_id = ? AND visit_id = ? ORDER BY dispatch_id");
  st.bind(1, org.str()).bind(2, id.str());
  std::vector<reporting::LetterDispatch> out;
  while (st.step()) out.push_back(read_dispatch(st));
  return out;
}

reporting::FollowUp Tx::insert_followup(const OrganizationId& org, reporting::FollowUp f) {
  db_.prepare(
         "INSERT INTO followups(organization_id, visit_id, channel, comment, created_at, staff_id) "
         "VALUES (?,?,?,?,?,?)")
      .bind(1, org.str())
      .bind(2, f.visit_id)
      .bind(3, reporting::token(f.channel))
      .bind(4, f.comment)
      .bind(5, format_timestamp(f.created_at))
      .bind(6, f.staff_id)
      .run();
  f.followup_id = db_.last_insert_rowid();
  return f;
}

std::vector<reporting::FollowUp> Tx::followups_for_visit(const OrganizationId& org, const VisitId& id) {
  auto st = db_.prepare("SELECT " + std::string(kFollowupColumns) +
                        " FROM followups WHERE organization_id = ? AND visit_id = ? "
                        "ORDER BY created_at, followup_id");
  st.bind(1, org.str()).bind(2, id.str());
  std::vector<reporting::FollowUp> out;
  while (st.step()) out.push_back(read_followup(st));
  return out;
}

std::vector<reporting::FollowUp> Tx::followups_by_staff(const OrganizationId& org, std::string_view staff_id) {
  auto st = db_.prepare("SELECT " + std::string(kFollowupColumns) +
                        " FROM followups WHERE organization_id = ? AND staff_id = ? "
                        "ORDER BY created_at, followup_id");
  st.bind(1, org.str()).bind(2, staff_id);
  std::vector<reporting::FollowUp> out;
  while (st.step()) out.push_back(read_followup(st));
  return out;
}

// -- audit -------------------------------------------------------------------

void Tx::insert_audit(const access::AuditEvent& e) {
  db_.prepare("INSERT INTO audit_events(actor, action, entity, at, outcome) VALUES (?,?,?,?,?)")
      .bind(1, e.actor)
      .bind(2, e.action)
      .bind(3, e.entity)
      .bind(4, format_timestamp(e.at))
      .bind(5, access::token(e.outcome))
      .run();
}

std::vector<access::AuditEvent> Tx::audit_events() {
  auto st = db_.prepare("SELECT actor, action, entity, at, outcome FROM audit_events ORDER BY seq");
  std::vector<access::AuditEvent> out;
  while (st.step()) {
    out.push_back({st.text(0), st.text(1), st.text(2), timestamp_column(st, 3),
                   st.text(4) == "denied" ? access::Outcome::Denied : access::Outcome::Allowed});
  }
  return out;
}

}  // namespace mtocs::storage
