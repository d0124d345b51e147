/**
 * @file metrics.h
 * @brief Take scoring: note correctness, pitch accuracy, breathing dynamic range,
 *        hint compliance, and before/after breathing comparison.
 */

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "breathtutor/breath.h"
#include "breathtutor/pitch.h"
#include "breathtutor/score.h"

namespace breathtutor {

/// Analysis frame length assumed by the scorer.
inline constexpr Millis kPitchFrameMs = 50;

struct NoteResult {
  std::size_t note_index = 0;
  bool correct = false;
  Millis correct_ms = 0;     ///< in-tune voiced time overlapping the note
  double required_ms = 0.0;  ///< 10 % of the note duration; correct needs strictly more

  bool operator==(const NoteResult&) const = default;
};

/// Frames are stamped with song-position time.
NoteResult score_note(const Note& note, std::span<const PitchFrame> frames,
                      std::size_t note_index = 0);

struct AccuracyResult {
  std::size_t correct_notes = 0;
  std::size_t total_notes = 0;
  double percent = 0.0;
  std::vector<NoteResult> notes;
};

AccuracyResult score_take(const PipeScore& score, std::span<const PitchFrame> frames);
double pitch_accuracy(const PipeScore& score, std::span<const PitchFrame> frames);

/// max - min of a filtered channel over the take. Throws BreathError for < 2 samples.
double bdr(std::span<const BreathSample> samples, Channel channel);

struct ChannelRange {
  double la = 0.0, bw = 0.0, rb = 0.0;
  bool operator==(const ChannelRange&) const = default;
};

struct HintCompliance {
  std::size_t hint = 0;
  double target = 0.0;
  double achieved = 0.0;
  bool operator==(const HintCompliance&) const = default;
};

/// Peak volume inside each hint window, 0 when the window holds no samples.
std::vector<HintCompliance> hint_compliance(const PipeScore& score,
                                            std::span<const BreathSample> samples);

/// Breath samples (song-position time) whose t lies in the hint window.
std::vector<BreathSample> samples_in_window(const BreathHint& hint,
                                            std::span<const BreathSample> samples);

/// Classify each hint window. Windows too short to judge come back indeterminate.
std::vector<BreathPattern> patterns_by_hint(const PipeScore& score,
                                            std::span<const BreathSample> samples,
                                            const PatternThresholds& th);

struct TakeMetrics {
  double accuracy_pct = 0.0;
  std::size_t correct_notes = 0;
  std::size_t total_notes = 0;
  std::vector<NoteResult> notes;
  ChannelRange bdr;
  std::vector<BreathPattern> pattern_by_hint;
  std::vector<HintCompliance> hint_compliance;

  bool operator==(const TakeMetrics&) const = default;
};

/**
 * Score one take. Pitch frames and breath samples carry song-position time.
 * Without a calibration (pitch-only mode) the breath fields stay empty.
 */
TakeMetrics compute_take_metrics(const PipeScore& score, std::span<const PitchFrame> frames,
                                 std::span<const BreathSample> samples,
                                 const std::optional<Calibration>& cal);

struct BreathImprovement {
  bool abdomen_support_improved = false;
  bool ribs_portion_reduced = false;
  bool both = false;
  double delta_bdr_la = 0.0;
  double delta_bdr_rb = 0.0;
};

BreathImprovement compare_takes(const TakeMetrics& before, const TakeMetrics& after);

}  // namespace breathtutor
