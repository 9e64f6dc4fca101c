#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mtocs::ids {

/// Sequential de-identifiable participant pseudonym: three letters A-Z
/// followed by three digits, e.g. "AAA001".
///
/// The digits run 000..999; past 999 they wrap to 000 and the letters
/// increment as a base-26 number, rightmost letter first ("AAA999" ->
/// "AAB000", "AAZ999" -> "ABA000"). "ZZZ999" is the last identifier.
class ParticipantId {
 public:
  static constexpr std::int64_t kKeyspace = 26LL * 26 * 26 * 1000;

  /// The identifier every organization starts from.
  static ParticipantId first() noexcept { return from_ordinal(1); }
  static std::optional<ParticipantId> parse(std::string_view text) noexcept;
  /// Throws Error(Validation) on malformed input.
  static ParticipantId parse_or_throw(std::string_view text, std::string_view field = "participant_id");
  /// Position in the keyspace: "AAA000" is 0, "ZZZ999" is kKeyspace - 1.
  static ParticipantId from_ordinal(std::int64_t ordinal) noexcept;

  std::int64_t ordinal() const noexcept { return ordinal_; }
  std::string letters() const;
  int digits() const noexcept { return static_cast<int>(ordinal_ % 1000); }
  std::string str() const;

  /// Ordinal order coincides with lexicographic order of the rendering.
  auto operator<=>(const ParticipantId&) const = default;

 private:
  explicit ParticipantId(std::int64_t ordinal) noexcept : ordinal_(ordinal) {}
  std::int64_t ordinal_;
};

/// Successor under the wrap-and-carry rule. Throws Error(IdExhausted) on "ZZZ999".
ParticipantId next_participant_id(ParticipantId current);

/// Participant identifier plus a three-digit per-participant visit
/// sequence starting at 001, e.g. "AAA001002" for the second visit.
class VisitId {
 public:
  static constexpr int kMaxSequence = 999;

  VisitId(ParticipantId participant, int sequence);

  static std::optional<VisitId> parse(std::string_view text) noexcept;
  static VisitId parse_or_throw(std::string_view text, std::string_view field = "visit_id");

  ParticipantId participant() const noexcept { return participant_; }
  int sequence() const noexcept { return sequence_; }
  std::string str() const;

  auto operator<=>(const VisitId&) const = default;

 private:
  ParticipantId participant_;
  int sequence_;
};

/// Identifier for the visit after `prior_visit_count` earlier visits.
/// Throws Error(VisitSequenceExhausted) once 999 visits exist.
VisitId next_visit_id(ParticipantId participant, int prior_visit_count);

}  // namespace mtocs::ids
