/**
 * @file synth.h
 * @brief Deterministic singer simulator: paired audio and belt streams from a script.
 *
 * The simulator stands in for a learner wearing the belt. Session time runs
 * from the start of the calibration preamble; the song starts at
 * SimLayout::lead_in_ms.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "breathtutor/breath.h"
#include "breathtutor/score.h"

namespace breathtutor {

enum class BreathStyleKind { abdominal, chest, mixed };

struct BreathStyle {
  BreathStyleKind kind = BreathStyleKind::abdominal;
  double abdomen_weight = 1.0;  ///< share routed to LA when kind == mixed

  static BreathStyle abdominal() { return {BreathStyleKind::abdominal, 1.0}; }
  static BreathStyle chest() { return {BreathStyleKind::chest, 0.0}; }
  static BreathStyle mixed(double w) { return {BreathStyleKind::mixed, w}; }

  double la_gain() const;
  double rb_gain() const;
  std::string to_string() const;
  /// "abdominal", "chest" or "mixed:<w>".
  static BreathStyle parse(const std::string& text);
};

struct NoiseSpec {
  double sensor_rms_n = 0.0;
  std::optional<double> audio_dbfs;  ///< white-noise level, none = silent floor
};

struct SingerScript {
  PipeScore score;
  std::string song_id;
  std::vector<double> pitch_error_cents;  ///< one per note
  Millis timing_jitter_ms = 0;
  BreathStyle style;
  std::vector<double> breath_depth;  ///< one per hint, in [0, 1]
  NoiseSpec noise;
  std::uint64_t seed = 1;

  /// In-tune, on-time, abdominal singer inhaling each hint's target fraction.
  static SingerScript perfect(const PipeScore& score, std::string song_id = "song");
  /// Throws std::invalid_argument when vector lengths or ranges are off.
  void validate() const;
};

/// Session-time layout of a simulated take.
struct SimLayout {
  Millis exhale_end_ms = 1000;  ///< [0, exhale_end): fully exhaled
  Millis deep_end_ms = 2000;    ///< [exhale_end, deep_end): deep breath held
  Millis lead_in_ms = 3000;     ///< song position 0
  Millis tail_ms = 500;         ///< after the last measure
};

struct SynthParams {
  double baseline_n = 8.0;
  double inhale_n = 12.0;       ///< force rise at depth 1.0
  double calibration_n = 12.0;  ///< rise during the calibration deep breath
  double voice_amplitude = 0.5;
  double harmonic2_db = -12.0;
  double harmonic3_db = -18.0;
  Millis ramp_ms = 20;
  Millis decay_guard_ms = 200;  ///< decay finishes this long before the next hint
  SimLayout layout;
};

Millis sim_duration_ms(const SingerScript& script, const SynthParams& p = {});

/// Mono PCM in [-1, 1] covering the whole simulated session.
std::vector<float> synth_voice(const SingerScript& script, int sample_rate,
                               const SynthParams& p = {});

/// Belt frames (device time starting at 0) covering the whole simulated session.
std::vector<SensorFrame> synth_breath_frames(const SingerScript& script, int rate_hz = 100,
                                             const SynthParams& p = {});

/// Same as synth_breath_frames, encoded as wire lines.
std::vector<std::string> synth_breath(const SingerScript& script, int rate_hz = 100,
                                      const SynthParams& p = {});

/// Closed-form outcome of a noiseless, jitter-free script.
struct ScriptPrediction {
  std::vector<bool> note_correct;
  double accuracy_pct = 0.0;
  std::vector<PatternLabel> labels;
  std::vector<double> compliance;
};

ScriptPrediction predict_outcome(const SingerScript& script, const SynthParams& p = {});

/// Script JSON; the "song" path resolves relative to the script file.
SingerScript load_script_file(const std::string& path);
SingerScript parse_script(const std::string& text, const std::string& base_dir = ".");

}  // namespace breathtutor
