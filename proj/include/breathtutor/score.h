/**
 * @file score.h
 * @brief Pipe-score model: breath-annotated monophonic songs.
 *
 * A pipe score is a list of notes grouped into sentences ("pipes"), each
 * preceded by a breath hint telling the learner when and how deeply to
 * inhale. Scores are immutable after parsing and may be shared freely.
 */

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace breathtutor {

/// Milliseconds on the song or session clock.
using Millis = std::int64_t;

struct Note {
  int midi = 69;
  Millis start = 0;
  Millis duration = 0;
  std::string syllable;

  Millis end() const { return start + duration; }
  bool operator==(const Note&) const = default;
};

/// Inclusive range of note indices forming one sung sentence.
struct Sentence {
  std::size_t first_note = 0;
  std::size_t last_note = 0;
  bool operator==(const Sentence&) const = default;
};

/// Gray breathing block shown before a sentence.
struct BreathHint {
  std::size_t before_sentence = 0;
  Millis window_start = 0;
  Millis window_end = 0;
  double target_fraction = 1.0;  ///< fraction of a calibrated lungful, in (0, 1]
  bool operator==(const BreathHint&) const = default;
};

struct PipeScore {
  std::string title;
  double tempo_bpm = 120.0;
  int beats_per_measure = 4;
  int measures = 1;
  std::vector<Note> notes;
  std::vector<Sentence> sentences;
  std::vector<BreathHint> hints;

  double beat_ms() const { return 60000.0 / tempo_bpm; }
  double measure_ms() const { return beat_ms() * beats_per_measure; }
  /// Length of the notated grid (measures x beats).
  Millis length_ms() const;
  /// Start time of a 1-based measure.
  Millis measure_start(int measure) const;

  bool operator==(const PipeScore&) const = default;
};

/// Parse or invariant failure. `element` names the offending item, e.g. "notes[3]".
class ScoreError : public std::runtime_error {
 public:
  ScoreError(std::string element, const std::string& what)
      : std::runtime_error(element.empty() ? what : element + ": " + what),
        element_(std::move(element)) {}
  const std::string& element() const { return element_; }

 private:
  std::string element_;
};

PipeScore parse_score(std::string_view text);
std::string serialize_score(const PipeScore& score);
PipeScore load_score_file(const std::string& path);

/// Throws ScoreError on the first violated invariant.
void check_invariants(const PipeScore& score);

/// Histogram of |midi[i+1] - midi[i]| over consecutive notes.
using IntervalHistogram = std::map<int, int>;

IntervalHistogram interval_histogram(const PipeScore& score);

/// Reference interval statistics shared by the bundled songs.
IntervalHistogram reference_histogram();

struct ValidationReport {
  int lowest_midi = 0;
  int highest_midi = 0;
  bool range_ok = false;     ///< lowest/highest equal the expected bounds
  bool coverage_ok = false;  ///< every chromatic pitch in the range appears
  std::vector<int> missing_pitches;
  bool histogram_ok = false;
  IntervalHistogram histogram;
  std::size_t hint_count = 0;
  std::vector<double> hint_fractions;

  bool passed() const { return range_ok && coverage_ok && histogram_ok; }
};

inline constexpr int kLowestPitch = 57;   // A3
inline constexpr int kHighestPitch = 72;  // C5

ValidationReport validate_difficulty(const PipeScore& score,
                                     const IntervalHistogram& reference,
                                     int lowest = kLowestPitch,
                                     int highest = kHighestPitch);

/// Two scores share difficulty when both validate and their hint plans match.
bool same_difficulty(const ValidationReport& a, const ValidationReport& b);

/// Note sounding at `t` using half-open [start, start + duration) intervals.
std::optional<std::pair<std::size_t, Note>> note_at(const PipeScore& score, Millis t);

/// Movable-do syllable for a MIDI pitch with C as do (chromatic: di, ri, fi, si, li).
std::string solfa_for(int midi);

}  // namespace breathtutor
