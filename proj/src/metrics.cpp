/**
 * @file metrics.cpp
 * @brief Take scoring rules.
 */

#include "breathtutor/metrics.h"

#include <algorithm>

namespace breathtutor {

NoteResult score_note(const Note& note, std::span<const PitchFrame> frames,
                      std::size_t note_index) {
  NoteResult r;
  r.note_index = note_index;
  r.required_ms = 0.10 * static_cast<double>(note.duration);
  const Millis note_end = note.end();
  for (const auto& f : frames) {
    if (!f.voiced || !within_quarter_tone(f.freq_hz, note.midi)) continue;
    // A frame straddling a boundary contributes only its overlap.
    const Millis overlap =
        std::min(f.t + kPitchFrameMs, note_end) - std::max(f.t, note.start);
    if (overlap > 0) r.correct_ms += overlap;
  }
  // correct_ms > 10 % of duration, in integers to keep the boundary exact.
  r.correct = r.correct_ms * 10 > note.duration;
  return r;
}

AccuracyResult score_take(const PipeScore& score, std::span<const PitchFrame> frames) {
  AccuracyResult out;
  out.total_notes = score.notes.size();

  std::vector<PitchFrame> sorted(frames.begin(), frames.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const PitchFrame& a, const PitchFrame& b) { return a.t < b.t; });

  for (std::size_t i = 0; i < score.notes.size(); ++i) {
    const Note& note = score.notes[i];
    // Only frames that can overlap [start, end).
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), note.start - kPitchFrameMs + 1,
                               [](const PitchFrame& f, Millis t) { return f.t < t; });
    auto hi = std::lower_bound(lo, sorted.end(), note.end(),
                               [](const PitchFrame& f, Millis t) { return f.t < t; });
    const auto window = std::span<const PitchFrame>(sorted).subspan(
        static_cast<std::size_t>(lo - sorted.begin()), static_cast<std::size_t>(hi - lo));
    NoteResult r = score_note(note, window, i);
    if (r.correct) ++out.correct_notes;
    out.notes.push_back(r);
  }
  out.percent = out.total_notes == 0
                    ? 0.0
                    : 100.0 * static_cast<double>(out.correct_notes) /
                          static_cast<double>(out.total_notes);
  return out;
}

double pitch_accuracy(const PipeScore& score, std::span<const PitchFrame> frames) {
  return score_take(score, frames).percent;
}

double bdr(std::span<const BreathSample> samples, Channel channel) {
  if (samples.size() < 2) throw BreathError("breathing dynamic range needs at least 2 samples");
  double lo = samples.front().value(channel);
  double hi = lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.value(channel));
    hi = std::max(hi, s.value(channel));
  }
  return hi - lo;
}

std::vector<BreathSample> samples_in_window(const BreathHint& hint,
                                            std::span<const BreathSample> samples) {
  std::vector<BreathSample> out;
  for (const auto& s : samples) {
    if (s.t >= hint.window_start && s.t <= hint.window_end) out.push_back(s);
  }
  return out;
}

std::vector<HintCompliance> hint_compliance(const PipeScore& score,
                                            std::span<const BreathSample> samples) {
  std::vector<HintCompliance> out;
  for (std::size_t i = 0; i < score.hints.size(); ++i) {
    const BreathHint& h = score.hints[i];
    HintCompliance c;
    c.hint = i;
    c.target = h.target_fraction;
    for (const auto& s : samples) {
      if (s.t >= h.window_start && s.t <= h.window_end) c.achieved = std::max(c.achieved, s.volume);
    }
    out.push_back(c);
  }
  return out;
}

std::vector<BreathPattern> patterns_by_hint(const PipeScore& score,
                                            std::span<const BreathSample> samples,
                                            const PatternThresholds& th) {
  std::vector<BreathPattern> out;
  for (const auto& h : score.hints) {
    const auto window = samples_in_window(h, samples);
    try {
      out.push_back(classify_breath(window, th));
    } catch (const BreathError&) {
      out.push_back(BreathPattern{});
    }
  }
  return out;
}

TakeMetrics compute_take_metrics(const PipeScore& score, std::span<const PitchFrame> frames,
                                 std::span<const BreathSample> samples,
                                 const std::optional<Calibration>& cal) {
  TakeMetrics m;
  AccuracyResult acc = score_take(score, frames);
  m.accuracy_pct = acc.percent;
  m.correct_notes = acc.correct_notes;
  m.total_notes = acc.total_notes;
  m.notes = std::move(acc.notes);

  if (!cal) return m;
  if (samples.size() >= 2) {
    m.bdr.la = bdr(samples, Channel::la);
    m.bdr.bw = bdr(samples, Channel::bw);
    m.bdr.rb = bdr(samples, Channel::rb);
  }
  m.pattern_by_hint = patterns_by_hint(score, samples, PatternThresholds::from_calibration(*cal));
  m.hint_compliance = hint_compliance(score, samples);
  return m;
}

BreathImprovement compare_takes(const TakeMetrics& before, const TakeMetrics& after) {
  BreathImprovement r;
  r.delta_bdr_la = after.bdr.la - before.bdr.la;
  r.delta_bdr_rb = after.bdr.rb - before.bdr.rb;
  r.abdomen_support_improved = r.delta_bdr_la > 0.0;
  r.ribs_portion_reduced = r.delta_bdr_rb < 0.0;
  r.both = r.abdomen_support_improved && r.ribs_portion_reduced;
  return r;
}

}  // namespace breathtutor
