/**
 * @file pitch.cpp
 * @brief Hann-windowed, zero-padded FFT peak picking with parabolic refinement.
 */

#include "breathtutor/pitch.h"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include <fftw3.h>

namespace breathtutor {

namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

std::size_t PitchConfig::frame_samples() const {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(frame_ms) * sample_rate_hz / 1000.0));
}

void PitchConfig::validate() const {
  if (sample_rate_hz <= 0) throw std::invalid_argument("sample_rate_hz must be > 0");
  if (frame_ms <= 0) throw std::invalid_argument("frame_ms must be > 0");
  if (!is_power_of_two(fft_size)) throw std::invalid_argument("fft_size must be a power of two");
  if (frame_samples() > static_cast<std::size_t>(fft_size)) {
    throw std::invalid_argument("fft_size must hold a whole frame");
  }
  if (!(band_low_hz > 0.0 && band_low_hz < band_high_hz &&
        band_high_hz < sample_rate_hz / 2.0)) {
    throw std::invalid_argument("band must satisfy 0 < low < high < nyquist");
  }
}

double hz_to_midi(double hz) {
  if (!(hz > 0.0)) throw PitchError("frequency must be > 0, got " + std::to_string(hz));
  return 69.0 + 12.0 * std::log2(hz / 440.0);
}

double midi_to_hz(double midi) { return 440.0 * std::exp2((midi - 69.0) / 12.0); }

bool within_quarter_tone(double hz, int note_midi) {
  if (!(hz > 0.0)) return false;
  return std::abs(hz_to_midi(hz) - note_midi) < 0.5;
}

struct PitchDetector::Impl {
  int n = 0;
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;
  std::vector<double> window;
  std::vector<double> magnitude;

  Impl(int fft_size, std::size_t frame_len) : n(fft_size) {
    in = fftw_alloc_real(static_cast<std::size_t>(n));
    out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    {
      std::lock_guard lock(planner_mutex());
      plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    }
    window.resize(frame_len);
    const double denom = frame_len > 1 ? static_cast<double>(frame_len - 1) : 1.0;
    for (std::size_t i = 0; i < frame_len; ++i) {
      window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
    }
    magnitude.resize(static_cast<std::size_t>(n / 2 + 1));
  }

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  Impl(const Impl&) = delete;
  Impl& operator=(const Impl&) = delete;
};

PitchDetector::PitchDetector(PitchConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  impl_ = std::make_unique<Impl>(cfg_.fft_size, cfg_.frame_samples());
}

PitchDetector::~PitchDetector() = default;
PitchDetector::PitchDetector(PitchDetector&&) noexcept = default;
PitchDetector& PitchDetector::operator=(PitchDetector&&) noexcept = default;

PitchFrame PitchDetector::detect(std::span<const float> samples, Millis t) {
  const std::size_t expected = cfg_.frame_samples();
  if (samples.size() != expected) {
    throw PitchError("expected " + std::to_string(expected) + " samples, got " +
                     std::to_string(samples.size()));
  }

  PitchFrame frame;
  frame.t = t;

  double sum_sq = 0.0;
  for (float s : samples) {
    if (!std::isfinite(s)) throw PitchError("non-finite sample in audio frame");
    sum_sq += static_cast<double>(s) * s;
  }
  const double rms = expected ? std::sqrt(sum_sq / static_cast<double>(expected)) : 0.0;
  frame.energy_db = rms > 0.0 ? std::max(20.0 * std::log10(rms), kSilenceDb) : kSilenceDb;
  if (frame.energy_db < cfg_.voicing_threshold_db) return frame;

  Impl& im = *impl_;
  std::fill(im.in, im.in + im.n, 0.0);
  for (std::size_t i = 0; i < expected; ++i) im.in[i] = samples[i] * im.window[i];
  fftw_execute(im.plan);

  const int half = im.n / 2;
  for (int k = 0; k <= half; ++k) {
    im.magnitude[static_cast<std::size_t>(k)] = std::hypot(im.out[k][0], im.out[k][1]);
  }

  const double bin_hz = static_cast<double>(cfg_.sample_rate_hz) / im.n;
  const int lo = std::max(1, static_cast<int>(std::ceil(cfg_.band_low_hz / bin_hz)));
  const int hi = std::min(half - 1, static_cast<int>(std::floor(cfg_.band_high_hz / bin_hz)));
  const auto& mag = im.magnitude;

  const auto score = [&](int k) {
    double p = mag[static_cast<std::size_t>(k)];
    if (cfg_.harmonic_product) {
      if (2 * k <= half) p *= mag[static_cast<std::size_t>(2 * k)];
      if (3 * k <= half) p *= mag[static_cast<std::size_t>(3 * k)];
    }
    return p;
  };
  // Only local maxima qualify, so the skirt of a strong out-of-band component
  // cannot win at the band edge. Plain argmax is the fallback.
  int peak = -1;
  int argmax = lo;
  for (int k = lo; k <= hi; ++k) {
    const double v = score(k);
    if (v > score(argmax)) argmax = k;
    if (v >= score(k - 1) && v > score(k + 1) && (peak < 0 || v > score(peak))) peak = k;
  }
  if (peak < 0) peak = argmax;

  // Parabola through the log-magnitudes of the peak and its neighbours.
  constexpr double kTiny = 1e-300;
  const double a = std::log(mag[static_cast<std::size_t>(peak - 1)] + kTiny);
  const double b = std::log(mag[static_cast<std::size_t>(peak)] + kTiny);
  const double c = std::log(mag[static_cast<std::size_t>(peak + 1)] + kTiny);
  const double curvature = a - 2.0 * b + c;
  double offset = 0.0;
  if (curvature < 0.0) offset = std::clamp(0.5 * (a - c) / curvature, -0.5, 0.5);

  frame.freq_hz = std::clamp((peak + offset) * bin_hz, cfg_.band_low_hz, cfg_.band_high_hz);
  frame.midi_float = hz_to_midi(frame.freq_hz);
  frame.voiced = true;
  return frame;
}

PitchFrame detect_pitch(std::span<const float> samples, const PitchConfig& cfg, Millis t) {
  thread_local std::unique_ptr<PitchDetector> cached;
  const auto same = [&](const PitchConfig& c) {
    return c.sample_rate_hz == cfg.sample_rate_hz && c.frame_ms == cfg.frame_ms &&
           c.fft_size == cfg.fft_size && c.voicing_threshold_db == cfg.voicing_threshold_db &&
           c.band_low_hz == cfg.band_low_hz && c.band_high_hz == cfg.band_high_hz &&
           c.harmonic_product == cfg.harmonic_product;
  };
  if (!cached || !same(cached->config())) cached = std::make_unique<PitchDetector>(cfg);
  return cached->detect(samples, t);
}

}  // namespace breathtutor
