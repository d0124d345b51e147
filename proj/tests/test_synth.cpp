#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "breathtutor/sensor_wire.h"
#include "breathtutor/synth.h"
#include "breathtutor/wav.h"
#include "support.h"

using namespace breathtutor;

namespace {

const PipeScore& song_a() {
  static const PipeScore s = load_score_file(testing::song_path("song_a.json"));
  return s;
}

SingerScript detuned(double cents) {
  SingerScript s = SingerScript::perfect(song_a(), "song_a");
  std::fill(s.pitch_error_cents.begin(), s.pitch_error_cents.end(), cents);
  return s;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("breathtutor_synth_" + name);
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("zero-error script scores 100 % end to end") {
  const SingerScript s = detuned(0.0);
  const SessionRecord rec = testing::run_script(s, SessionMode::pitch_only);
  REQUIRE(rec.metrics);
  CHECK(rec.metrics->accuracy_pct == 100.0);
  // Closed form: each note's frequency is within a quarter tone of its own pitch.
  for (const auto& n : s.score.notes) CHECK(within_quarter_tone(midi_to_hz(n.midi), n.midi));
  CHECK(predict_outcome(s).accuracy_pct == 100.0);
}

TEST_CASE("every note a semitone sharp scores 0 %") {
  const SessionRecord rec = testing::run_script(detuned(100.0), SessionMode::pitch_only);
  CHECK(rec.metrics->accuracy_pct == 0.0);
  CHECK(predict_outcome(detuned(100.0)).accuracy_pct == 0.0);
}

TEST_CASE("+40 cents stays inside the quarter tone") {
  for (const auto& n : song_a().notes) {
    CHECK(within_quarter_tone(midi_to_hz(n.midi + 0.40), n.midi));
  }
  const SessionRecord rec = testing::run_script(detuned(40.0), SessionMode::pitch_only);
  CHECK(rec.metrics->accuracy_pct == 100.0);
}

TEST_CASE("breath styles classify as scripted") {
  SingerScript abdominal = SingerScript::perfect(song_a(), "song_a");
  std::fill(abdominal.breath_depth.begin(), abdominal.breath_depth.end(), 1.0);
  SingerScript chest = abdominal;
  chest.style = BreathStyle::chest();

  const SessionRecord a = testing::run_script(abdominal);
  const SessionRecord c = testing::run_script(chest);
  REQUIRE(a.metrics);
  REQUIRE(c.metrics);
  REQUIRE(a.metrics->pattern_by_hint.size() == song_a().hints.size());
  for (const auto& p : a.metrics->pattern_by_hint) CHECK(p.label == PatternLabel::good);
  for (const auto& p : c.metrics->pattern_by_hint) CHECK(p.label == PatternLabel::bad);

  // Independent delta scan over the raw generated frames inside each hint window.
  const auto frames = synth_breath_frames(abdominal);
  const SimLayout layout;
  for (const auto& h : song_a().hints) {
    double first_la = -1, max_la = 0, first_rb = -1, max_rb = 0;
    for (const auto& f : frames) {
      const Millis pos = f.t - layout.lead_in_ms;
      if (pos < h.window_start || pos > h.window_end) continue;
      const Triple r = reduce_channels(f);
      if (first_la < 0) {
        first_la = r[Channel::la];
        first_rb = r[Channel::rb];
      }
      max_la = std::max(max_la, r[Channel::la]);
      max_rb = std::max(max_rb, r[Channel::rb]);
    }
    CHECK(max_la - first_la > 5.0);
    CHECK(max_rb - first_rb == 0.0);
  }
}

TEST_CASE("depth 0 is indeterminate with near-zero compliance") {
  SingerScript s = SingerScript::perfect(song_a(), "song_a");
  std::fill(s.breath_depth.begin(), s.breath_depth.end(), 0.0);
  const SessionRecord rec = testing::run_script(s);
  for (const auto& p : rec.metrics->pattern_by_hint) CHECK(p.label == PatternLabel::indeterminate);
  for (const auto& c : rec.metrics->hint_compliance) CHECK(c.achieved < 0.01);
}

TEST_CASE("perfect singer: compliance is half the target through the abdomen weight") {
  const SingerScript s = SingerScript::perfect(song_a(), "song_a");
  const SessionRecord rec = testing::run_script(s);
  const ScriptPrediction p = predict_outcome(s);
  REQUIRE(rec.metrics->hint_compliance.size() == p.compliance.size());
  for (std::size_t i = 0; i < p.compliance.size(); ++i) {
    CHECK(rec.metrics->hint_compliance[i].achieved == doctest::Approx(p.compliance[i]).epsilon(1e-9));
    CHECK(p.compliance[i] == doctest::Approx(0.5 * song_a().hints[i].target_fraction));
  }
}

TEST_CASE("generated forces stay within 5..60 N, also with noise and jitter") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    SingerScript s = SingerScript::perfect(song_a(), "song_a");
    s.style = trial % 3 == 0 ? BreathStyle::chest() : trial % 3 == 1 ? BreathStyle::abdominal() : BreathStyle::mixed(0.3);
    std::fill(s.breath_depth.begin(), s.breath_depth.end(), 1.0);
    s.noise.sensor_rms_n = 0.5 * trial;
    s.timing_jitter_ms = 10 * trial;
    s.seed = rng();
    for (const auto& f : synth_breath_frames(s)) {
      for (double v : {f.f_la, f.f_bw_l, f.f_bw_r, f.f_rb_l, f.f_rb_r}) {
        REQUIRE(v >= 5.0);
        REQUIRE(v <= 60.0);
      }
    }
  }
}

TEST_CASE("baseline is 8 N and belt lines parse back") {
  const SingerScript s = SingerScript::perfect(song_a(), "song_a");
  const auto frames = synth_breath_frames(s);
  REQUIRE(!frames.empty());
  CHECK(frames.front().f_la == 8.0);
  CHECK(frames.front().f_rb_l == 8.0);
  CHECK(frames[1].t - frames[0].t == 10);
  CHECK(frames.back().t < sim_duration_ms(s));
  const auto lines = synth_breath(s);
  REQUIRE(lines.size() == frames.size());
  for (std::size_t i = 0; i < lines.size(); i += 97) {
    const SensorFrame back = parse_sensor_line(lines[i]);
    CHECK(back.t == frames[i].t);
    CHECK(std::abs(back.f_la - frames[i].f_la) < 1e-3);
  }
}

TEST_CASE("determinism under a fixed seed; seeds matter once noise is on") {
  SingerScript s = SingerScript::perfect(song_a(), "song_a");
  s.noise.sensor_rms_n = 0.3;
  s.noise.audio_dbfs = -50.0;
  s.timing_jitter_ms = 15;
  s.seed = 99;
  CHECK(synth_breath(s) == synth_breath(s));
  CHECK(synth_voice(s, 16000) == synth_voice(s, 16000));
  SingerScript t = s;
  t.seed = 100;
  CHECK(synth_breath(s) != synth_breath(t));
  CHECK(synth_voice(s, 16000) != synth_voice(t, 16000));
}

TEST_CASE("voice is silent outside notes and bounded inside") {
  const SingerScript s = SingerScript::perfect(song_a(), "song_a");
  const int rate = 8000;
  const auto pcm = synth_voice(s, rate);
  CHECK(pcm.size() == static_cast<std::size_t>(sim_duration_ms(s) * rate / 1000));
  const SimLayout layout;
  for (std::size_t i = 0; i < static_cast<std::size_t>(layout.lead_in_ms * rate / 1000); ++i) REQUIRE(pcm[i] == 0.0f);
  for (float v : pcm) REQUIRE(std::abs(v) <= 1.0f);
}

TEST_CASE("script parsing") {
  const auto dir = std::filesystem::temp_directory_path() / "breathtutor_script_test";
  std::filesystem::create_directories(dir);
  std::filesystem::copy_file(testing::song_path("song_a.json"), dir / "song_a.json",
                             std::filesystem::copy_options::overwrite_existing);
  const auto write = [&](const std::string& body) {
    std::ofstream(dir / "script.json") << body;
    return (dir / "script.json").string();
  };
  const SingerScript s = load_script_file(write(
      R"({"song": "song_a.json", "pitch_error_cents": 30, "breath_style": "mixed:0.25",
          "breath_depth": [1, 0.5, 0.75, 0.5], "noise": {"sensor_rms_n": 0.2, "audio_dbfs": -60}, "seed": 7})"));
  CHECK(s.song_id == "song_a");
  CHECK(s.pitch_error_cents == std::vector<double>(song_a().notes.size(), 30.0));
  CHECK(s.style.kind == BreathStyleKind::mixed);
  CHECK(s.style.abdomen_weight == 0.25);
  CHECK(s.noise.audio_dbfs == -60.0);
  CHECK(s.seed == 7);

  CHECK_THROWS_AS(load_script_file(write(R"({"song": "song_a.json", "pitch_error_cents": [1, 2]})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(load_script_file(write(R"({"song": "song_a.json", "breath_depth": [1, 1, 1, 1.5]})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(load_script_file(write(R"({"song": "song_a.json", "breath_style": "belly"})")),
                  std::invalid_argument);
  CHECK_THROWS(load_script_file(write(R"({"song": "missing.json"})")));
  std::filesystem::remove_all(dir);
}

TEST_CASE("breath style names round-trip") {
  for (const auto& st : {BreathStyle::abdominal(), BreathStyle::chest(), BreathStyle::mixed(0.5)}) {
    const BreathStyle back = BreathStyle::parse(st.to_string());
    CHECK(back.kind == st.kind);
    CHECK(back.abdomen_weight == st.abdomen_weight);
  }
  CHECK(BreathStyle::abdominal().la_gain() == 1.0);
  CHECK(BreathStyle::abdominal().rb_gain() == 0.0);
  CHECK(BreathStyle::chest().rb_gain() == 1.0);
  CHECK_THROWS(BreathStyle::parse("mixed:1.5"));
}

TEST_CASE("wav round trip") {
  const auto x = testing::sine(440.0, 4410, 0.7);
  const auto f32 = temp_path("f32.wav");
  write_wav(f32.string(), x, 44100, WavFormat::float32);
  const WavData a = read_wav(f32.string());
  CHECK(a.sample_rate == 44100);
  CHECK(a.channels == 1);
  CHECK(a.samples == x);

  const auto p16 = temp_path("p16.wav");
  write_wav(p16.string(), x, 22050, WavFormat::pcm16);
  const WavData b = read_wav(p16.string());
  CHECK(b.sample_rate == 22050);
  REQUIRE(b.samples.size() == x.size());
  // Half an LSB of rounding plus the 32767 vs 32768 scale step stays under two LSBs.
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(b.samples[i] - x[i]) <= 2.0f / 32768.0f);

  std::ofstream(temp_path("junk.wav")) << "RIFF....WAVEjunk";
  CHECK_THROWS(read_wav(temp_path("junk.wav").string()));
  CHECK_THROWS(read_wav(temp_path("absent.wav").string()));
  std::filesystem::remove(f32);
  std::filesystem::remove(p16);
  std::filesystem::remove(temp_path("junk.wav"));
}

}  // TEST_SUITE
