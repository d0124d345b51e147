/**
 * @file breath.h
 * @brief Breath-belt signal chain: calibration, filtering, classification.
 *
 * Five raw force channels (lower abdomen, left/right back waist, left/right
 * ribs) are reduced to three (LA, BW, RB) by pair averaging, referenced to a
 * full-exhalation baseline, and smoothed with a causal 150 ms mean filter.
 */

#pragma once

#include <array>
#include <deque>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "breathtutor/score.h"

namespace breathtutor {

/// Upper bound accepted from the belt, above the normal breathing range.
inline constexpr double kSensorCeilingN = 80.0;

struct SensorFrame {
  Millis t = 0;
  double f_la = 0.0;
  double f_bw_l = 0.0;
  double f_bw_r = 0.0;
  double f_rb_l = 0.0;
  double f_rb_r = 0.0;

  bool operator==(const SensorFrame&) const = default;
};

enum class Channel { la = 0, bw = 1, rb = 2 };
inline constexpr std::array<Channel, 3> kChannels = {Channel::la, Channel::bw, Channel::rb};

std::string_view channel_name(Channel ch);

/// Three reduced channel values indexed by Channel.
struct Triple {
  std::array<double, 3> v{};
  double& operator[](Channel ch) { return v[static_cast<std::size_t>(ch)]; }
  double operator[](Channel ch) const { return v[static_cast<std::size_t>(ch)]; }
  bool operator==(const Triple&) const = default;
};

/// LA as-is; BW and RB as the mean of their left/right pair.
Triple reduce_channels(const SensorFrame& frame);

struct Calibration {
  Triple baseline;  ///< full-exhalation force per reduced channel (N)
  Triple deep_max;  ///< deep-breath force per reduced channel (N)
  Millis captured_at = 0;

  double range(Channel ch) const { return deep_max[ch] - baseline[ch]; }
  bool operator==(const Calibration&) const = default;
};

class BreathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public BreathError {
 public:
  using BreathError::BreathError;
};

/// Minimum span of each calibration capture.
inline constexpr Millis kMinCalibrationMs = 500;

/**
 * Baseline = per-channel median of the exhale capture, deep_max = per-channel
 * 95th percentile of the deep capture, both after pair averaging. Throws
 * CalibrationError when a capture is shorter than 500 ms or the belt shows no
 * abdominal (or no BW/RB) expansion.
 */
Calibration calibrate(std::span<const SensorFrame> exhale_frames,
                      std::span<const SensorFrame> deep_frames);

/// Linear-interpolated percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

struct BreathSample {
  Millis t = 0;
  double la = 0.0, bw = 0.0, rb = 0.0;        ///< filtered, baseline-referenced (N)
  double la_n = 0.0, bw_n = 0.0, rb_n = 0.0;  ///< normalized to [0, 1]
  double volume = 0.0;

  double value(Channel ch) const;
  double normalized(Channel ch) const;
  bool operator==(const BreathSample&) const = default;
};

struct VolumeWeights {
  double la = 0.5;
  double bw = 0.25;
  double rb = 0.25;
};

struct BreathConfig {
  Millis window_ms = 150;
  VolumeWeights weights;
};

/// Causal moving average over the trailing window (t - window, t].
class MovingAverage {
 public:
  explicit MovingAverage(Millis window_ms = 150) : window_ms_(window_ms) {}
  double push(Millis t, double value);
  std::size_t size() const { return samples_.size(); }
  Millis window_ms() const { return window_ms_; }

 private:
  Millis window_ms_;
  std::deque<std::pair<Millis, double>> samples_;
};

/// Per-stream filter state; single owner, advanced in timestamp order.
struct FilterState {
  explicit FilterState(const BreathConfig& cfg = {})
      : config(cfg), filters{MovingAverage(cfg.window_ms), MovingAverage(cfg.window_ms),
                             MovingAverage(cfg.window_ms)} {}
  BreathConfig config;
  std::array<MovingAverage, 3> filters;
  bool started = false;
  Millis last_t = 0;
};

/// Throws BreathError on non-increasing timestamps or non-finite forces.
BreathSample process_frame(const SensorFrame& frame, const Calibration& cal, FilterState& state);

enum class PatternLabel { good, bad, indeterminate };
std::string_view label_name(PatternLabel label);
PatternLabel parse_label(std::string_view name);

struct BreathPattern {
  PatternLabel label = PatternLabel::indeterminate;
  double delta_la = 0.0;
  double delta_rb = 0.0;
  double delta_bw = 0.0;
  bool operator==(const BreathPattern&) const = default;
};

/// Thresholds in newtons. `rise` marks an expanding channel, `still` an unchanged one.
struct PatternThresholds {
  double rise = 0.0;
  double still = 0.0;

  static PatternThresholds from_calibration(const Calibration& cal, double rise_fraction = 0.15,
                                            double still_ratio = 0.5);
};

inline constexpr Millis kMinClassifyWindowMs = 300;

/**
 * Good: abdomen rises while ribs stay put. Bad: ribs rise while abdomen stays
 * put. Deltas are max(channel) minus the value at the window start. Back
 * waist is reported but does not vote. Throws BreathError when the window
 * spans < 300 ms or holds < 3 samples.
 */
BreathPattern classify_breath(std::span<const BreathSample> window, const PatternThresholds& th);

/// Breath triangle drawn around a fixed centre: RB at 90, LA at 210, BW at 330 degrees.
struct TriangleGeometry {
  double base_radius = 1.0;
  double gain = 1.0;
};

struct Bisectors {
  double abdomen = 0.0;
  double rib = 0.0;
  double waist = 0.0;
};

/// Internal angle-bisector length from each vertex to its opposite side.
Bisectors bisector_lengths(const BreathSample& sample, const TriangleGeometry& geom = {});

}  // namespace breathtutor
