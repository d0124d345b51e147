// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "breathtutor/events.h"
#include "breathtutor/metrics.h"
#include "breathtutor/session.h"
#include "support.h"

using namespace breathtutor;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

const PipeScore& song(const std::string& name) {
  static std::map<std::string, PipeScore> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, load_score_file(testing::song_path(name + ".json"))).first;
  return it->second;
}

// 1. Quarter-tone sine sweep A3..C5, 20 consecutive frames per pitch.
Outcome pitch_sweep() {
  const auto start = Clock::now();
  PitchDetector det;
  const std::size_t n = det.config().frame_samples();
  const int rate = det.config().sample_rate_hz;
  int total = 0, hits = 0;
  double worst = 0.0;
  for (int q = 0; q <= 30; ++q) {
    const double midi = 57.0 + 0.5 * q;
    const double hz = 440.0 * std::pow(2.0, (midi - 69.0) / 12.0);
    const auto x = testing::sine(hz, 20 * n, 0.5, rate, 0.3 * q);
    for (int k = 0; k < 20; ++k) {
      const PitchFrame f = det.detect(std::span<const float>(x).subspan(k * n, n));
      ++total;
      const double err = f.voiced ? std::abs(12.0 * std::log2(f.freq_hz / hz)) : 99.0;
      worst = std::max(worst, err);
      if (err <= 0.25) ++hits;
    }
  }
  const double secs = seconds_since(start);
  const double share = 100.0 * hits / total;
  return {share >= 99.0 && secs < 10.0, std::to_string(hits) + "/" + std::to_string(total) + " frames (" +
                                            fmt(share, 2) + " %) within 0.25 st, worst " + fmt(worst, 4) +
                                            " st, " + fmt(secs, 2) + " s"};
}

// 2. Exact 10 % boundary and the strict quarter-tone edge.
Outcome scoring_boundary() {
  std::vector<std::string> failures;
  const auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  const auto frame = [](Millis t, double hz) {
    PitchFrame f;
    f.t = t;
    f.voiced = true;
    f.freq_hz = hz;
    f.midi_float = 69.0 + 12.0 * std::log2(hz / 440.0);
    f.energy_db = -10.0;
    return f;
  };
  // Durations whose 10 % falls exactly on whole frames, plus one where it does not.
  for (Millis duration : {500, 1000, 2000, 3000}) {
    const Note note{69, 1000, duration, "la"};
    const Millis tenth = duration / 10;
    for (bool plus_one : {false, true}) {
      std::vector<PitchFrame> frames;
      const Millis in_tune = tenth + (plus_one ? kPitchFrameMs : 0);
      for (Millis t = note.start - 200; t < note.end() + 200; t += kPitchFrameMs) {
        const bool sung = t >= note.start && t < note.start + in_tune;
        frames.push_back(frame(t, sung ? 440.0 : 470.0));
      }
      const NoteResult r = score_note(note, frames);
      const Millis oracle = testing::brute_correct_ms(note, frames);
      expect(r.correct_ms == oracle, "correct_ms vs scan at " + std::to_string(duration));
      expect(oracle == in_tune, "oracle time at " + std::to_string(duration));
      expect(r.correct == plus_one, std::string(plus_one ? "10 % + frame" : "exact 10 %") + " at " +
                                        std::to_string(duration));
    }
  }
  // A frame straddling the note start counts only its overlap.
  {
    const Note note{69, 1000, 500, "la"};
    const std::vector<PitchFrame> half = {frame(975, 440.0), frame(1025, 440.0)};
    expect(score_note(note, half).correct_ms == 75, "straddling overlap");
    expect(score_note(note, half).correct, "75 ms of 500");
    const std::vector<PitchFrame> exactly = {frame(975, 440.0), frame(1025, 470.0), frame(1075, 470.0)};
    expect(score_note(note, exactly).correct_ms == 25 && !score_note(note, exactly).correct, "25 ms of 500");
  }
  // Quarter-tone edges around A4.
  const double upper = 440.0 * std::pow(2.0, 1.0 / 24.0);
  const double lower = 440.0 * std::pow(2.0, -1.0 / 24.0);
  expect(!within_quarter_tone(upper, 69), "upper edge excluded");
  expect(!within_quarter_tone(lower, 69), "lower edge excluded");
  expect(within_quarter_tone(upper * (1.0 - 1e-12), 69), "just below upper edge");
  expect(within_quarter_tone(lower * (1.0 + 1e-12), 69), "just above lower edge");
  {
    const Note note{69, 0, 500, "la"};
    std::vector<PitchFrame> at_edge;
    for (Millis t = 0; t < 500; t += kPitchFrameMs) at_edge.push_back(frame(t, upper));
    const NoteResult r = score_note(note, at_edge);
    expect(r.correct_ms == 0 && !r.correct, "whole note at the upper edge scores nothing");
  }
  std::string detail = failures.empty() ? "10 % incorrect, 10 % + frame correct, edges strict" : "failed:";
  for (const auto& f : failures) detail += " [" + f + "]";
  return {failures.empty(), detail};
}

// 3. Random noiseless scripts against the closed-form prediction.
Outcome oracle_closure() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20261015);
  std::uniform_real_distribution<double> in_tune(-40.0, 40.0);
  std::uniform_real_distribution<double> off(60.0, 300.0);
  std::uniform_real_distribution<double> depth(0.4, 1.0);
  std::bernoulli_distribution coin(0.5);
  int mismatched_accuracy = 0, mismatched_labels = 0, style_labels = 0;
  double min_acc = 100.0, max_acc = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const PipeScore& score = song(trial % 2 == 0 ? "song_a" : "song_b");
    SingerScript s = SingerScript::perfect(score, trial % 2 == 0 ? "song_a" : "song_b");
    // Errors keep 10 cents clear of the quarter-tone edge, where detector resolution decides.
    const double p_sharp = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (double& c : s.pitch_error_cents) {
      c = std::bernoulli_distribution(p_sharp)(rng) ? off(rng) * (coin(rng) ? 1 : -1) : in_tune(rng);
    }
    s.style = trial % 3 == 0 ? BreathStyle::chest() : BreathStyle::abdominal();
    for (double& d : s.breath_depth) d = depth(rng);
    s.seed = rng();

    const ScriptPrediction p = predict_outcome(s);
    const SessionRecord rec = testing::run_script(s);
    if (!rec.metrics || rec.metrics->accuracy_pct != p.accuracy_pct) ++mismatched_accuracy;
    min_acc = std::min(min_acc, p.accuracy_pct);
    max_acc = std::max(max_acc, p.accuracy_pct);
    const PatternLabel expected =
        s.style.kind == BreathStyleKind::chest ? PatternLabel::bad : PatternLabel::good;
    for (std::size_t h = 0; h < p.labels.size(); ++h) {
      const PatternLabel got = rec.metrics->pattern_by_hint.at(h).label;
      if (got != p.labels[h]) ++mismatched_labels;
      if (got != expected) ++style_labels;
    }
  }
  const double secs = seconds_since(start);
  return {mismatched_accuracy == 0 && mismatched_labels == 0 && style_labels == 0 && secs < 60.0,
          "50 scripts (predicted accuracy " + fmt(min_acc, 1) + ".." + fmt(max_acc, 1) + " %), accuracy mismatches " +
              std::to_string(mismatched_accuracy) + ", label mismatches " + std::to_string(mismatched_labels) +
              "/" + std::to_string(style_labels) + ", " + fmt(secs, 2) + " s"};
}

// 4. Filter against direct summation; BDR against a brute max - min.
Outcome filter_oracle() {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> gap(1, 40);
  std::uniform_int_distribution<int> length(2, 400);
  std::uniform_real_distribution<double> force(0.0, 60.0);
  double worst = 0.0;
  int bdr_mismatch = 0;
  for (int stream = 0; stream < 1000; ++stream) {
    const Calibration cal = testing::flat_calibration(force(rng) * 0.3, 5.0 + force(rng));
    FilterState st;
    const int n = length(rng);
    std::vector<Millis> ts;
    std::array<std::vector<double>, 3> referenced;
    std::vector<BreathSample> out;
    Millis t = gap(rng);
    for (int i = 0; i < n; ++i, t += gap(rng)) {
      const SensorFrame f{t, force(rng), force(rng), force(rng), force(rng), force(rng)};
      out.push_back(process_frame(f, cal, st));
      ts.push_back(t);
      const double pairs[3] = {f.f_la, 0.5 * (f.f_bw_l + f.f_bw_r), 0.5 * (f.f_rb_l + f.f_rb_r)};
      for (int c = 0; c < 3; ++c) referenced[c].push_back(std::max(0.0, pairs[c] - cal.baseline.v[c]));
    }
    std::array<double, 3> lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double got[3] = {out[i].la, out[i].bw, out[i].rb};
      for (int c = 0; c < 3; ++c) {
        worst = std::max(worst, std::abs(got[c] - testing::trailing_mean(ts, referenced[c], i, 150)));
        lo[c] = std::min(lo[c], got[c]);
        hi[c] = std::max(hi[c], got[c]);
      }
    }
    for (Channel ch : kChannels) {
      const auto c = static_cast<std::size_t>(ch);
      if (bdr(out, ch) != hi[c] - lo[c]) ++bdr_mismatch;
    }
  }
  return {worst <= 1e-9 && bdr_mismatch == 0,
          "1000 streams, worst filter error " + sci(worst) + " N, BDR mismatches " +
              std::to_string(bdr_mismatch)};
}

// 5. Breathing style classification end to end.
Outcome classification() {
  int good = 0, bad = 0, flat = 0, total = 0, flat_total = 0;
  for (const char* name : {"song_a", "song_b"}) {
    for (double d : {0.5, 0.75, 1.0}) {
      SingerScript s = SingerScript::perfect(song(name), name);
      std::fill(s.breath_depth.begin(), s.breath_depth.end(), d);
      const SessionRecord belly = testing::run_script(s);
      for (const auto& p : belly.metrics->pattern_by_hint) good += p.label == PatternLabel::good;
      s.style = BreathStyle::chest();
      const SessionRecord chest = testing::run_script(s);
      for (const auto& p : chest.metrics->pattern_by_hint) bad += p.label == PatternLabel::bad;
      total += static_cast<int>(s.breath_depth.size());
    }
    SingerScript s = SingerScript::perfect(song(name), name);
    std::fill(s.breath_depth.begin(), s.breath_depth.end(), 0.0);
    const SessionRecord still = testing::run_script(s);
    for (const auto& p : still.metrics->pattern_by_hint) {
      flat += p.label == PatternLabel::indeterminate;
      ++flat_total;
    }
  }
  return {good == total && bad == total && flat == flat_total,
          "abdominal good " + std::to_string(good) + "/" + std::to_string(total) + ", chest bad " +
              std::to_string(bad) + "/" + std::to_string(total) + ", flat indeterminate " + std::to_string(flat) +
              "/" + std::to_string(flat_total)};
}

// 6. Bundled songs against the reference difficulty.
Outcome song_constraints() {
  const std::map<int, int> table = {{1, 1}, {2, 21}, {3, 5}, {4, 4}, {5, 2}};
  bool ok = true;
  std::string detail;
  std::vector<std::size_t> hint_counts;
  for (const char* name : {"song_a", "song_b"}) {
    const PipeScore& s = song(name);
    const ValidationReport r = validate_difficulty(s, reference_histogram());
    std::set<int> pitches;
    for (const auto& n : s.notes) pitches.insert(n.midi);
    bool chromatic = true;
    for (int m = 57; m <= 72; ++m) chromatic = chromatic && pitches.count(m);
    const bool this_ok = r.passed() && r.lowest_midi == 57 && r.highest_midi == 72 && chromatic &&
                         *pitches.begin() == 57 && *pitches.rbegin() == 72 &&
                         testing::brute_histogram(s.notes) == table && r.histogram == table;
    ok = ok && this_ok;
    hint_counts.push_back(s.hints.size());
    detail += std::string(name) + (this_ok ? " ok" : " FAILED") + " (" + std::to_string(s.notes.size()) + " notes, " +
              std::to_string(s.hints.size()) + " hints); ";
  }
  ok = ok && reference_histogram() == table && hint_counts[0] == hint_counts[1];
  detail += hint_counts[0] == hint_counts[1] ? "hint counts equal" : "hint counts differ";
  return {ok, detail};
}

struct Invocation {
  int code = -1;
  std::string out;
};

Invocation run_tutor(const std::string& args) {
  Invocation c;
  FILE* pipe = popen((std::string(TUTOR_EXE) + " " + args + " 2>&1").c_str(), "r");
  if (!pipe) return c;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) c.out.append(buf, n);
  const int status = pclose(pipe);
  c.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 7. Streamed session file round trip and the offline analyzer.
Outcome persistence() {
  const fs::path dir = fs::temp_directory_path() / "breathtutor_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> failures;
  int sessions = 0;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> cents(-120.0, 120.0);
  for (SessionMode mode : {SessionMode::pitch_breath, SessionMode::pitch_only}) {
    for (int k = 0; k < 3; ++k) {
      SingerScript s = SingerScript::perfect(song("song_a"), "song_a");
      for (double& c : s.pitch_error_cents) c = cents(rng);
      s.style = k == 1 ? BreathStyle::chest() : BreathStyle::mixed(0.6);
      s.noise.sensor_rms_n = 0.2 * k;
      s.noise.audio_dbfs = -55.0;
      s.timing_jitter_ms = 5 * k;
      s.seed = rng();
      const fs::path file = dir / ("take" + std::to_string(sessions++) + ".json");

      VectorAudioSource audio(synth_voice(s, 44100), 44100);
      VectorLineSource sensor(synth_breath(s));
      SessionOptions opts;
      opts.mode = mode;
      SessionRecord live;
      {
        StreamingSessionWriter writer(file.string());
        live = run_session(s.score, s.song_id, mode == SessionMode::pitch_breath ? &sensor : nullptr, &audio, {},
                           {&writer}, opts, autoplay_schedule(mode));
      }
      const std::string tag = " (take " + std::to_string(sessions) + ")";
      const SessionRecord back = load_record(file.string());
      if (!(back == live)) failures.push_back("loaded record differs" + tag);
      const fs::path again = dir / "again.json";
      persist(back, again.string());
      if (!(load_record(again.string()) == live)) failures.push_back("re-persisted record differs" + tag);
      persist(live, (dir / "direct.json").string());
      if (slurp(again) != slurp(dir / "direct.json")) failures.push_back("file bytes differ" + tag);

      const Invocation analyzed = run_tutor("analyze --json '" + file.string() + "'");
      if (analyzed.code != 0) failures.push_back("analyze exit " + std::to_string(analyzed.code) + tag);
      json offline;
      try {
        offline = json::parse(analyzed.out);
      } catch (const std::exception&) {
        failures.push_back("analyze output is not JSON" + tag);
      }
      if (offline != json::parse(encode_metrics(*live.metrics))) failures.push_back("offline metrics differ" + tag);
    }
  }
  fs::remove_all(dir);
  std::string detail = std::to_string(sessions) + " sessions";
  for (const auto& f : failures) detail += " [" + f + "]";
  if (failures.empty()) detail += ": records bit-exact, tutor analyze matches live metrics";
  return {failures.empty(), detail};
}

// 8. One minute of combined input through the engine.
Outcome throughput() {
  // Song A three times over: 57.6 s of music plus lead-in and tail.
  PipeScore score = song("song_a");
  const PipeScore once = score;
  const Millis span = once.length_ms();
  for (int rep = 1; rep < 3; ++rep) {
    const std::size_t note_base = score.notes.size();
    const std::size_t sentence_base = score.sentences.size();
    for (Note n : once.notes) {
      n.start += rep * span;
      score.notes.push_back(n);
    }
    for (Sentence s : once.sentences) {
      s.first_note += note_base;
      s.last_note += note_base;
      score.sentences.push_back(s);
    }
    for (BreathHint h : once.hints) {
      h.before_sentence += sentence_base;
      h.window_start += rep * span;
      h.window_end += rep * span;
      score.hints.push_back(h);
    }
  }
  score.measures = once.measures * 3;
  check_invariants(score);

  SingerScript s = SingerScript::perfect(score, "song_a_x3");
  s.noise.sensor_rms_n = 0.3;
  s.noise.audio_dbfs = -50.0;
  VectorAudioSource audio(synth_voice(s, 44100), 44100);
  VectorLineSource sensor(synth_breath(s));

  const auto start = Clock::now();
  RunStats stats;
  const SessionRecord rec = run_session(score, s.song_id, &sensor, &audio, {}, {}, {},
                                        autoplay_schedule(SessionMode::pitch_breath), &stats);
  const double secs = seconds_since(start);
  const bool enough = stats.audio_frames >= 1200 && stats.sensor_lines >= 6000;
  return {enough && secs < 15.0 && rec.metrics.has_value(),
          std::to_string(stats.audio_frames) + " pitch frames + " + std::to_string(stats.sensor_lines) +
              " sensor frames in " + fmt(secs, 2) + " s (" + fmt(60.0 / std::max(secs, 1e-9), 0) + "x real time)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"pitch sweep", pitch_sweep},
      {"scoring boundary", scoring_boundary},
      {"oracle closure", oracle_closure},
      {"filter oracle", filter_oracle},
      {"breathing classification", classification},
      {"song constraints", song_constraints},
      {"persistence", persistence},
      {"throughput", throughput},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
