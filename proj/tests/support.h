// Shared fixtures and independent oracles for the test binaries.
//
// Oracles here deliberately avoid the library's own helpers: they recompute
// quantities by brute force (naive DFT, direct window sums, linear scans).

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "breathtutor/breath.h"
#include "breathtutor/pitch.h"
#include "breathtutor/score.h"
#include "breathtutor/sources.h"

namespace testing {

using namespace breathtutor;

inline std::string song_path(const std::string& name) {
  return std::string(BREATHTUTOR_SONG_DIR) + "/" + name;
}

inline std::vector<float> sine(double hz, std::size_t n, double amplitude = 1.0, int rate = 44100,
                               double phase = 0.0) {
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate + phase));
  }
  return out;
}

/// Frequency with the largest Hann-windowed DFT magnitude, scanned on a fine grid.
inline double dft_peak_hz(const std::vector<float>& x, int rate, double lo, double hi, double step) {
  const std::size_t n = x.size();
  double best_f = lo;
  double best_mag = -1.0;
  for (double f = lo; f <= hi; f += step) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
      const double a = 2.0 * std::numbers::pi * f * static_cast<double>(i) / rate;
      re += w * x[i] * std::cos(a);
      im -= w * x[i] * std::sin(a);
    }
    const double mag = re * re + im * im;
    if (mag > best_mag) {
      best_mag = mag;
      best_f = f;
    }
  }
  return best_f;
}

/// Mean of values whose time lies in (t - window, t], by direct summation.
inline double trailing_mean(const std::vector<Millis>& ts, const std::vector<double>& vs, std::size_t upto,
                            Millis window) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t j = 0; j <= upto; ++j) {
    if (ts[j] > ts[upto] - window) {
      sum += vs[j];
      ++count;
    }
  }
  return sum / count;
}

/// Calibration with the given baseline and range on every reduced channel.
inline Calibration flat_calibration(double baseline, double range) {
  Calibration c;
  for (Channel ch : kChannels) {
    c.baseline[ch] = baseline;
    c.deep_max[ch] = baseline + range;
  }
  return c;
}

/// Belt frame with the abdomen at `la` and both pairs at `bw` / `rb`.
inline SensorFrame belt(Millis t, double la, double bw, double rb) { return {t, la, bw, bw, rb, rb}; }

/**
 * A valid score: one sentence per group, each preceded by a 600 ms hint window
 * and holding notes of `note_ms` each, back to back. Measures are sized to fit.
 */
inline PipeScore make_score(const std::vector<std::vector<int>>& sentences, Millis note_ms = 500,
                            double tempo_bpm = 120.0) {
  PipeScore s;
  s.title = "test";
  s.tempo_bpm = tempo_bpm;
  s.beats_per_measure = 4;
  Millis t = 0;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    BreathHint h;
    h.before_sentence = k;
    h.window_start = t;
    h.window_end = t + 600;
    h.target_fraction = 0.5;
    s.hints.push_back(h);
    t += 600;
    Sentence sen;
    sen.first_note = s.notes.size();
    for (int midi : sentences[k]) {
      s.notes.push_back(Note{midi, t, note_ms, "la"});
      t += note_ms;
    }
    sen.last_note = s.notes.size() - 1;
    s.sentences.push_back(sen);
  }
  s.measures = std::max<int>(1, static_cast<int>(std::ceil(static_cast<double>(t) / s.measure_ms())));
  return s;
}

inline std::map<int, int> brute_histogram(const std::vector<Note>& notes) {
  std::map<int, int> h;
  for (std::size_t i = 1; i < notes.size(); ++i) ++h[std::abs(notes[i].midi - notes[i - 1].midi)];
  return h;
}

/// Runs a synthetic take through the offline driver with the standard autoplay schedule.
inline SessionRecord run_script(const SingerScript& script, SessionMode mode = SessionMode::pitch_breath,
                                RunStats* stats = nullptr) {
  VectorAudioSource audio(synth_voice(script, 44100), 44100);
  VectorLineSource sensor(synth_breath(script));
  SessionOptions opts;
  opts.mode = mode;
  return run_session(script.score, script.song_id, mode == SessionMode::pitch_breath ? &sensor : nullptr, &audio,
                     {}, {}, opts, autoplay_schedule(mode), stats);
}

/// Cents between f and the equal-tempered pitch of `midi`, straight from the definition.
inline double cents_off(double hz, int midi) {
  return 1200.0 * std::log2(hz / (440.0 * std::pow(2.0, (midi - 69) / 12.0)));
}

/// In-tune voiced milliseconds overlapping a note, scanning every millisecond.
inline Millis brute_correct_ms(const Note& note, const std::vector<PitchFrame>& frames) {
  Millis total = 0;
  for (const auto& f : frames) {
    if (!f.voiced || f.freq_hz <= 0 || std::abs(cents_off(f.freq_hz, note.midi)) >= 50.0) continue;
    for (Millis t = f.t; t < f.t + 50; ++t) {
      if (t >= note.start && t < note.start + note.duration) ++total;
    }
  }
  return total;
}

}  // namespace testing
