/**
 * @file pitch.h
 * @brief Frame-based monophonic pitch estimation from the strongest FFT bin.
 */

#pragma once

#include <memory>
#include <span>
#include <stdexcept>

#include "breathtutor/score.h"

namespace breathtutor {

struct PitchConfig {
  int sample_rate_hz = 44100;
  int frame_ms = 50;
  int fft_size = 8192;
  double voicing_threshold_db = -40.0;
  double band_low_hz = 80.0;
  double band_high_hz = 1200.0;
  /// Harmonic-product refinement against octave errors. Off by default.
  bool harmonic_product = false;

  std::size_t frame_samples() const;
  /// Throws std::invalid_argument when the configuration is unusable.
  void validate() const;
};

/// Floor for energy_db so silent frames stay finite.
inline constexpr double kSilenceDb = -200.0;

struct PitchFrame {
  Millis t = 0;  ///< frame start
  bool voiced = false;
  double freq_hz = 0.0;
  double midi_float = 0.0;
  double energy_db = kSilenceDb;

  bool operator==(const PitchFrame&) const = default;
};

class PitchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 69 + 12 log2(f / 440). Throws PitchError for f <= 0.
double hz_to_midi(double hz);
double midi_to_hz(double midi);

/// True when `hz` lies strictly within half a semitone of `note_midi`.
bool within_quarter_tone(double hz, int note_midi);

/**
 * Reusable detector holding an FFT plan and scratch buffers.
 *
 * Not thread-safe; use one instance per thread. Results are a pure function
 * of (samples, config).
 */
class PitchDetector {
 public:
  explicit PitchDetector(PitchConfig cfg = {});
  ~PitchDetector();
  PitchDetector(PitchDetector&&) noexcept;
  PitchDetector& operator=(PitchDetector&&) noexcept;

  const PitchConfig& config() const { return cfg_; }

  /// Analyze exactly cfg.frame_samples() samples. `t` is stamped on the result.
  PitchFrame detect(std::span<const float> samples, Millis t = 0);

 private:
  struct Impl;
  PitchConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

/// Stateless convenience wrapper; uses a per-thread cached detector.
PitchFrame detect_pitch(std::span<const float> samples, const PitchConfig& cfg, Millis t = 0);

}  // namespace breathtutor
