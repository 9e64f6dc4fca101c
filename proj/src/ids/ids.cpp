#include "mtocs/ids.hpp"

#include "mtocs/error.hpp"

namespace mtocs::ids {

namespace {

constexpr std::int64_t kLetterSpan = 1000;

bool all_digits(std::string_view s) noexcept {
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

int to_int(std::string_view digits) noexcept {
  int v = 0;
  for (char c : digits) v = v * 10 + (c - '0');
  return v;
}

void append_padded(std::string& out, int value) {
  out.push_back(static_cast<char>('0' + value / 100));
  out.push_back(static_cast<char>('0' + value / 10 % 10));
  out.push_back(static_cast<char>('0' + value % 10));
}

}  // namespace

std::optional<ParticipantId> ParticipantId::parse(std::string_view text) noexcept {
  if (text.size() != 6) return std::nullopt;
  std::int64_t letters = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const char c = text[i];
    if (c < 'A' || c > 'Z') return std::nullopt;
    letters = letters * 26 + (c - 'A');
  }
  const auto digits = text.substr(3);
  if (!all_digits(digits)) return std::nullopt;
  return ParticipantId{letters * kLetterSpan + to_int(digits)};
}

ParticipantId ParticipantId::parse_or_throw(std::string_view text, std::string_view field) {
  if (auto id = parse(text)) return *id;
  fail(ErrorCode::Validation, "malformed participant id '" + std::string(text) + "'",
       std::string(field));
}

ParticipantId ParticipantId::from_ordinal(std::int64_t ordinal) noexcept {
  return ParticipantId{ordinal};
}

std::string ParticipantId::letters() const {
  std::int64_t n = ordinal_ / kLetterSpan;
  std::string out(3, 'A');
  for (int i = 2; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<char>('A' + n % 26);
    n /= 26;
  }
  return out;
}

std::string ParticipantId::str() const {
  std::string out = letters();
  append_padded(out, digits());
  return out;
}

ParticipantId next_participant_id(ParticipantId current) {
  if (current.ordinal() + 1 >= ParticipantId::kKeyspace) {
    fail(ErrorCode::IdExhausted, "participant id space exhausted after " + current.str());
  }
  return ParticipantId::from_ordinal(current.ordinal() + 1);
}

VisitId::VisitId(ParticipantId participant, int sequence)
    : participant_(participant), sequence_(sequence) {
  if (sequence < 1 || sequence > kMaxSequence) {
    fail(ErrorCode::Validation, "visit sequence out of range", "visit_id");
  }
}

std::optional<VisitId> VisitId::parse(std::string_view text) noexcept {
  if (text.size() != 9) return std::nullopt;
  auto participant = ParticipantId::parse(text.substr(0, 6));
  const auto seq = text.substr(6);
  if (!participant || !all_digits(seq)) return std::nullopt;
  const int n = to_int(seq);
  if (n < 1) return std::nullopt;
  return VisitId{*participant, n};
}

VisitId VisitId::parse_or_throw(std::string_view text, std::string_view field) {
  if (auto id = parse(text)) return *id;
  fail(ErrorCode::Validation, "malformed visit id '" + std::string(text) + "'", std::string(field));
}

std::string VisitId::str() const {
  std::string out = participant_.str();
  append_padded(out, sequence_);
  return out;
}

VisitId next_visit_id(ParticipantId participant, int prior_visit_count) {
  if (prior_visit_count >= VisitId::kMaxSequence) {
    fail(ErrorCode::VisitSequenceExhausted,
         "participant " + participant.str() + " has no visit numbers left");
  }
  return VisitId{participant, prior_visit_count + 1};
}

}  // namespace mtocs::ids
