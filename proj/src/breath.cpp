/**
 * @file breath.cpp
 * @brief Breath-belt calibration, filtering, pattern classification, triangle geometry.
 */

#include "breathtutor/breath.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace breathtutor {

std::string_view channel_name(Channel ch) {
  switch (ch) {
    case Channel::la: return "la";
    case Channel::bw: return "bw";
    case Channel::rb: return "rb";
  }
  return "?";
}

Triple reduce_channels(const SensorFrame& f) {
  Triple r;
  r[Channel::la] = f.f_la;
  r[Channel::bw] = (f.f_bw_l + f.f_bw_r) / 2.0;
  r[Channel::rb] = (f.f_rb_l + f.f_rb_r) / 2.0;
  return r;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw BreathError("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

namespace {

Millis covered_ms(std::span<const SensorFrame> frames) {
  if (frames.size() < 2) return 0;
  const Millis span = frames.back().t - frames.front().t;
  // n samples cover n sample periods.
  return span + span / static_cast<Millis>(frames.size() - 1);
}

Triple reduced_statistic(std::span<const SensorFrame> frames, double p) {
  std::array<std::vector<double>, 3> columns;
  for (const auto& f : frames) {
    const Triple r = reduce_channels(f);
    for (Channel ch : kChannels) columns[static_cast<std::size_t>(ch)].push_back(r[ch]);
  }
  Triple out;
  for (Channel ch : kChannels) out[ch] = percentile(columns[static_cast<std::size_t>(ch)], p);
  return out;
}

}  // namespace

Calibration calibrate(std::span<const SensorFrame> exhale_frames,
                      std::span<const SensorFrame> deep_frames) {
  if (covered_ms(exhale_frames) < kMinCalibrationMs) {
    throw CalibrationError("exhale capture shorter than 500 ms");
  }
  if (covered_ms(deep_frames) < kMinCalibrationMs) {
    throw CalibrationError("deep-breath capture shorter than 500 ms");
  }
  Calibration cal;
  cal.baseline = reduced_statistic(exhale_frames, 50.0);
  cal.deep_max = reduced_statistic(deep_frames, 95.0);
  cal.captured_at = deep_frames.back().t;
  if (!(cal.range(Channel::la) > 0.0)) {
    throw CalibrationError("no lower-abdomen expansion between exhale and deep breath; check belt fit");
  }
  if (!(cal.range(Channel::bw) > 0.0) && !(cal.range(Channel::rb) > 0.0)) {
    throw CalibrationError("no back-waist or rib expansion between exhale and deep breath");
  }
  return cal;
}

double BreathSample::value(Channel ch) const {
  switch (ch) {
    case Channel::la: return la;
    case Channel::bw: return bw;
    case Channel::rb: return rb;
  }
  return 0.0;
}

double BreathSample::normalized(Channel ch) const {
  switch (ch) {
    case Channel::la: return la_n;
    case Channel::bw: return bw_n;
    case Channel::rb: return rb_n;
  }
  return 0.0;
}

double MovingAverage::push(Millis t, double value) {
  samples_.emplace_back(t, value);
  while (!samples_.empty() && samples_.front().first <= t - window_ms_) samples_.pop_front();
  // Direct sum keeps the output exact for constant input.
  double sum = 0.0;
  for (const auto& s : samples_) sum += s.second;
  return sum / static_cast<double>(samples_.size());
}

BreathSample process_frame(const SensorFrame& frame, const Calibration& cal, FilterState& state) {
  if (state.started && frame.t <= state.last_t) {
    throw BreathError("sensor timestamp " + std::to_string(frame.t) + " not after " +
                      std::to_string(state.last_t));
  }
  for (double f : {frame.f_la, frame.f_bw_l, frame.f_bw_r, frame.f_rb_l, frame.f_rb_r}) {
    if (!std::isfinite(f)) throw BreathError("non-finite force at t=" + std::to_string(frame.t));
  }
  state.started = true;
  state.last_t = frame.t;

  const Triple raw = reduce_channels(frame);
  Triple filtered;
  Triple norm;
  for (Channel ch : kChannels) {
    const double referenced = std::max(0.0, raw[ch] - cal.baseline[ch]);
    filtered[ch] = state.filters[static_cast<std::size_t>(ch)].push(frame.t, referenced);
    const double range = cal.range(ch);
    norm[ch] = range > 0.0 ? std::clamp(filtered[ch] / range, 0.0, 1.0) : 0.0;
  }

  BreathSample s;
  s.t = frame.t;
  s.la = filtered[Channel::la];
  s.bw = filtered[Channel::bw];
  s.rb = filtered[Channel::rb];
  s.la_n = norm[Channel::la];
  s.bw_n = norm[Channel::bw];
  s.rb_n = norm[Channel::rb];
  const auto& w = state.config.weights;
  s.volume = w.la * s.la_n + w.bw * s.bw_n + w.rb * s.rb_n;
  return s;
}

std::string_view label_name(PatternLabel label) {
  switch (label) {
    case PatternLabel::good: return "good";
    case PatternLabel::bad: return "bad";
    case PatternLabel::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

PatternLabel parse_label(std::string_view name) {
  if (name == "good") return PatternLabel::good;
  if (name == "bad") return PatternLabel::bad;
  if (name == "indeterminate") return PatternLabel::indeterminate;
  throw BreathError("unknown pattern label '" + std::string(name) + "'");
}

PatternThresholds PatternThresholds::from_calibration(const Calibration& cal, double rise_fraction,
                                                      double still_ratio) {
  PatternThresholds th;
  th.rise = rise_fraction * cal.range(Channel::la);
  th.still = still_ratio * th.rise;
  return th;
}

BreathPattern classify_breath(std::span<const BreathSample> window, const PatternThresholds& th) {
  if (window.size() < 3) throw BreathError("classification window needs at least 3 samples");
  if (window.back().t - window.front().t < kMinClassifyWindowMs) {
    throw BreathError("classification window shorter than 300 ms");
  }
  const BreathSample& first = window.front();
  double max_la = first.la, max_bw = first.bw, max_rb = first.rb;
  for (const auto& s : window) {
    max_la = std::max(max_la, s.la);
    max_bw = std::max(max_bw, s.bw);
    max_rb = std::max(max_rb, s.rb);
  }
  BreathPattern p;
  p.delta_la = max_la - first.la;
  p.delta_bw = max_bw - first.bw;
  p.delta_rb = max_rb - first.rb;
  if (p.delta_la >= th.rise && p.delta_rb <= th.still) {
    p.label = PatternLabel::good;
  } else if (p.delta_rb >= th.rise && p.delta_la <= th.still) {
    p.label = PatternLabel::bad;
  }
  return p;
}

namespace {

struct Point {
  double x, y;
};

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Bisector from the vertex between sides b and c onto the opposite side a.
double bisector(double a, double b, double c) {
  return std::sqrt(b * c * ((b + c) * (b + c) - a * a)) / (b + c);
}

}  // namespace

Bisectors bisector_lengths(const BreathSample& sample, const TriangleGeometry& geom) {
  if (!(geom.base_radius > 0.0) || !(geom.gain > 0.0)) {
    throw BreathError("triangle geometry needs base_radius > 0 and gain > 0");
  }
  const auto vertex = [&](double degrees, double n) {
    const double r = geom.base_radius * (1.0 + geom.gain * n);
    const double rad = degrees * std::numbers::pi / 180.0;
    return Point{r * std::cos(rad), r * std::sin(rad)};
  };
  const Point rb = vertex(90.0, sample.rb_n);
  const Point la = vertex(210.0, sample.la_n);
  const Point bw = vertex(330.0, sample.bw_n);

  const double cross = (la.x - rb.x) * (bw.y - rb.y) - (la.y - rb.y) * (bw.x - rb.x);
  if (std::abs(cross) < 1e-12 * geom.base_radius * geom.base_radius) {
    throw BreathError("breath triangle is degenerate");
  }

  const double side_rb_la = distance(rb, la);
  const double side_la_bw = distance(la, bw);
  const double side_bw_rb = distance(bw, rb);
  Bisectors out;
  out.abdomen = bisector(side_bw_rb, side_rb_la, side_la_bw);
  out.rib = bisector(side_la_bw, side_rb_la, side_bw_rb);
  out.waist = bisector(side_rb_la, side_la_bw, side_bw_rb);
  return out;
}

}  // namespace breathtutor
