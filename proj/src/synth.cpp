/**
 * @file synth.cpp
 * @brief Singer simulator: vowel-like voice and scripted belt forces.
 */

#include "breathtutor/synth.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "breathtutor/pitch.h"
#include "breathtutor/sensor_wire.h"

namespace breathtutor {

using nlohmann::json;

double BreathStyle::la_gain() const {
  switch (kind) {
    case BreathStyleKind::abdominal: return 1.0;
    case BreathStyleKind::chest: return 0.0;
    case BreathStyleKind::mixed: return abdomen_weight;
  }
  return 0.0;
}

double BreathStyle::rb_gain() const { return 1.0 - la_gain(); }

std::string BreathStyle::to_string() const {
  switch (kind) {
    case BreathStyleKind::abdominal: return "abdominal";
    case BreathStyleKind::chest: return "chest";
    case BreathStyleKind::mixed: {
      std::ostringstream os;
      os << "mixed:" << abdomen_weight;
      return os.str();
    }
  }
  return "abdominal";
}

BreathStyle BreathStyle::parse(const std::string& text) {
  if (text == "abdominal") return abdominal();
  if (text == "chest") return chest();
  if (text.rfind("mixed:", 0) == 0) {
    const double w = std::stod(text.substr(6));
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("mixed weight must be in [0, 1]");
    return mixed(w);
  }
  throw std::invalid_argument("unknown breath style '" + text + "'");
}

SingerScript SingerScript::perfect(const PipeScore& score, std::string song_id) {
  SingerScript s;
  s.score = score;
  s.song_id = std::move(song_id);
  s.pitch_error_cents.assign(score.notes.size(), 0.0);
  for (const auto& h : score.hints) s.breath_depth.push_back(h.target_fraction);
  return s;
}

void SingerScript::validate() const {
  if (pitch_error_cents.size() != score.notes.size()) {
    throw std::invalid_argument("pitch_error_cents needs one entry per note");
  }
  if (breath_depth.size() != score.hints.size()) {
    throw std::invalid_argument("breath_depth needs one entry per hint");
  }
  for (double d : breath_depth) {
    if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("breath_depth entries must be in [0, 1]");
  }
  if (timing_jitter_ms < 0) throw std::invalid_argument("timing_jitter_ms must be >= 0");
  if (noise.sensor_rms_n < 0.0) throw std::invalid_argument("sensor noise rms must be >= 0");
}

Millis sim_duration_ms(const SingerScript& script, const SynthParams& p) {
  return p.layout.lead_in_ms + script.score.length_ms() + p.layout.tail_ms;
}

namespace {

struct Span {
  Millis start;
  Millis end;
  double hz;
};

// Note spans in song time after timing jitter.
std::vector<Span> rendered_notes(const SingerScript& script) {
  std::mt19937_64 rng(script.seed);
  std::uniform_int_distribution<Millis> jitter(-script.timing_jitter_ms, script.timing_jitter_ms);
  std::vector<Span> spans;
  const Millis song_end = script.score.length_ms();
  for (std::size_t i = 0; i < script.score.notes.size(); ++i) {
    const Note& n = script.score.notes[i];
    const Millis shift = script.timing_jitter_ms > 0 ? jitter(rng) : 0;
    Millis start = std::max<Millis>(0, n.start + shift);
    Millis end = std::min(song_end, n.end() + shift);
    if (!spans.empty()) start = std::max(start, spans.back().end);
    if (end <= start) continue;
    spans.push_back({start, end, midi_to_hz(n.midi + script.pitch_error_cents[i] / 100.0)});
  }
  return spans;
}

double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace

std::vector<float> synth_voice(const SingerScript& script, int sample_rate, const SynthParams& p) {
  script.validate();
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be > 0");
  const auto total = static_cast<std::size_t>(sim_duration_ms(script, p) * sample_rate / 1000);
  std::vector<double> out(total, 0.0);

  const double h2 = db_to_gain(p.harmonic2_db);
  const double h3 = db_to_gain(p.harmonic3_db);
  const double norm = p.voice_amplitude / (1.0 + h2 + h3);
  const auto to_sample = [&](Millis ms) {
    return static_cast<std::size_t>((p.layout.lead_in_ms + ms) * sample_rate / 1000);
  };
  const auto ramp_samples = static_cast<double>(p.ramp_ms) * sample_rate / 1000.0;

  for (const Span& span : rendered_notes(script)) {
    const std::size_t a = to_sample(span.start);
    const std::size_t b = std::min(to_sample(span.end), total);
    const double length = static_cast<double>(b - a);
    const double w = 2.0 * std::numbers::pi * span.hz / sample_rate;
    for (std::size_t i = a; i < b; ++i) {
      const double k = static_cast<double>(i - a);
      double env = 1.0;
      if (ramp_samples > 0.0) {
        const double edge = std::min(k, length - 1.0 - k);
        if (edge < ramp_samples) env = 0.5 - 0.5 * std::cos(std::numbers::pi * edge / ramp_samples);
      }
      const double phase = w * k;
      out[i] = env * norm * (std::sin(phase) + h2 * std::sin(2.0 * phase) + h3 * std::sin(3.0 * phase));
    }
  }

  if (script.noise.audio_dbfs) {
    std::mt19937_64 rng(script.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss(0.0, db_to_gain(*script.noise.audio_dbfs));
    for (double& s : out) s += gauss(rng);
  }

  std::vector<float> pcm(total);
  std::transform(out.begin(), out.end(), pcm.begin(),
                 [](double s) { return static_cast<float>(std::clamp(s, -1.0, 1.0)); });
  return pcm;
}

namespace {

// Breath envelope in [0, 1] at song time t for hint h: rise over the first half
// of the window, hold to its end, then decay until shortly before the next hint.
double hint_envelope(const PipeScore& score, std::size_t h, double t, Millis guard) {
  const BreathHint& hint = score.hints[h];
  const double ws = static_cast<double>(hint.window_start);
  const double we = static_cast<double>(hint.window_end);
  if (t < ws) return 0.0;
  const double rise = (we - ws) / 2.0;
  if (t < ws + rise) return 0.5 - 0.5 * std::cos(std::numbers::pi * (t - ws) / rise);
  if (t <= we) return 1.0;

  Millis next = score.length_ms();
  for (const auto& other : score.hints) {
    if (other.window_start > hint.window_start) next = std::min(next, other.window_start);
  }
  const double decay_end = std::max(we, static_cast<double>(next - guard));
  if (t >= decay_end) return 0.0;
  return 0.5 + 0.5 * std::cos(std::numbers::pi * (t - we) / (decay_end - we));
}

}  // namespace

std::vector<SensorFrame> synth_breath_frames(const SingerScript& script, int rate_hz,
                                             const SynthParams& p) {
  script.validate();
  if (rate_hz <= 0) throw std::invalid_argument("rate_hz must be > 0");
  const Millis duration = sim_duration_ms(script, p);
  std::mt19937_64 rng(script.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double la_gain = script.style.la_gain();
  const double rb_gain = script.style.rb_gain();

  std::vector<SensorFrame> frames;
  for (std::int64_t i = 0;; ++i) {
    const Millis t = i * 1000 / rate_hz;
    if (t >= duration) break;
    double la = 0.0, bw = 0.0, rb = 0.0;
    if (t >= p.layout.exhale_end_ms && t < p.layout.deep_end_ms) {
      la = bw = rb = p.calibration_n;
    } else if (t >= p.layout.lead_in_ms) {
      const double song_t = static_cast<double>(t - p.layout.lead_in_ms);
      for (std::size_t h = 0; h < script.score.hints.size(); ++h) {
        const double env = hint_envelope(script.score, h, song_t, p.decay_guard_ms);
        if (env <= 0.0) continue;
        const double amp = env * script.breath_depth[h] * p.inhale_n;
        la = std::max(la, la_gain * amp);
        rb = std::max(rb, rb_gain * amp);
      }
    }
    auto noisy = [&](double rise) {
      double v = p.baseline_n + rise;
      if (script.noise.sensor_rms_n > 0.0) v += script.noise.sensor_rms_n * gauss(rng);
      return std::clamp(v, 5.0, 60.0);
    };
    SensorFrame f;
    f.t = t;
    f.f_la = noisy(la);
    f.f_bw_l = noisy(bw);
    f.f_bw_r = noisy(bw);
    f.f_rb_l = noisy(rb);
    f.f_rb_r = noisy(rb);
    frames.push_back(f);
  }
  return frames;
}

std::vector<std::string> synth_breath(const SingerScript& script, int rate_hz, const SynthParams& p) {
  std::vector<std::string> lines;
  for (const auto& f : synth_breath_frames(script, rate_hz, p)) lines.push_back(format_sensor_line(f));
  return lines;
}

ScriptPrediction predict_outcome(const SingerScript& script, const SynthParams& p) {
  script.validate();
  ScriptPrediction out;
  std::size_t correct = 0;
  for (double cents : script.pitch_error_cents) {
    const bool ok = std::abs(cents) < 50.0;
    out.note_correct.push_back(ok);
    if (ok) ++correct;
  }
  out.accuracy_pct = script.score.notes.empty()
                         ? 0.0
                         : 100.0 * static_cast<double>(correct) /
                               static_cast<double>(script.score.notes.size());

  // Calibration sees a uniform rise on every channel.
  Calibration cal;
  for (Channel ch : kChannels) {
    cal.baseline[ch] = p.baseline_n;
    cal.deep_max[ch] = p.baseline_n + p.calibration_n;
  }
  const PatternThresholds th = PatternThresholds::from_calibration(cal);
  const VolumeWeights w;
  for (double depth : script.breath_depth) {
    const double d_la = script.style.la_gain() * depth * p.inhale_n;
    const double d_rb = script.style.rb_gain() * depth * p.inhale_n;
    PatternLabel label = PatternLabel::indeterminate;
    if (d_la >= th.rise && d_rb <= th.still) {
      label = PatternLabel::good;
    } else if (d_rb >= th.rise && d_la <= th.still) {
      label = PatternLabel::bad;
    }
    out.labels.push_back(label);
    out.compliance.push_back(w.la * std::min(1.0, d_la / p.calibration_n) +
                             w.rb * std::min(1.0, d_rb / p.calibration_n));
  }
  return out;
}

SingerScript parse_script(const std::string& text, const std::string& base_dir) {
  const json doc = json::parse(text);
  const std::filesystem::path song_path =
      std::filesystem::path(base_dir) / doc.at("song").get<std::string>();
  SingerScript s = SingerScript::perfect(load_score_file(song_path.string()),
                                         song_path.stem().string());
  // A scalar applies the same detuning to every note.
  if (doc.contains("pitch_error_cents")) {
    const json& e = doc["pitch_error_cents"];
    if (e.is_number()) {
      s.pitch_error_cents.assign(s.score.notes.size(), e.get<double>());
    } else {
      s.pitch_error_cents = e.get<std::vector<double>>();
    }
  }
  s.timing_jitter_ms = doc.value("timing_jitter_ms", Millis{0});
  if (doc.contains("breath_style")) s.style = BreathStyle::parse(doc["breath_style"].get<std::string>());
  if (doc.contains("breath_depth")) s.breath_depth = doc["breath_depth"].get<std::vector<double>>();
  if (doc.contains("noise")) {
    const json& n = doc["noise"];
    s.noise.sensor_rms_n = n.value("sensor_rms_n", 0.0);
    if (n.contains("audio_dbfs") && !n["audio_dbfs"].is_null()) {
      s.noise.audio_dbfs = n["audio_dbfs"].get<double>();
    }
  }
  s.seed = doc.value("seed", std::uint64_t{1});
  s.validate();
  return s;
}

SingerScript load_script_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open script file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_script(buf.str(), std::filesystem::path(path).parent_path().string());
}

}  // namespace breathtutor
