// tutor: command-line front end for the singing tutor engine.

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <regex>
#include <thread>

#include "breathtutor/live.h"
#include "breathtutor/server.h"
#include "breathtutor/sources.h"
#include "breathtutor/wav.h"

using namespace breathtutor;

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) { g_interrupted = 1; }

void print_metrics(std::ostream& os, const SessionRecord& rec, const TakeMetrics& m) {
  os << std::fixed;
  os << "song: " << rec.song_id << "  mode: " << mode_name(rec.mode) << "  frames: " << rec.frames.size() << "\n";
  os << "accuracy: " << std::setprecision(2) << m.accuracy_pct << " % (" << m.correct_notes << "/"
     << m.total_notes << " notes correct)\n";
  if (!m.notes.empty()) {
    os << "missed notes:";
    bool any = false;
    for (const auto& n : m.notes) {
      if (n.correct) continue;
      os << " " << n.note_index + 1;
      any = true;
    }
    os << (any ? "" : " none") << "\n";
  }
  if (rec.mode == SessionMode::pitch_only) return;
  os << std::setprecision(3) << "bdr: la " << m.bdr.la << " N  bw " << m.bdr.bw << " N  rb " << m.bdr.rb
     << " N\n";
  for (std::size_t i = 0; i < m.pattern_by_hint.size(); ++i) {
    const auto& p = m.pattern_by_hint[i];
    os << "hint " << i + 1 << ": " << label_name(p.label) << " (dLA " << p.delta_la << " N, dRB " << p.delta_rb
       << " N)";
    if (i < m.hint_compliance.size()) {
      os << "  volume " << m.hint_compliance[i].achieved << " / target " << m.hint_compliance[i].target;
    }
    os << "\n";
  }
}

int cmd_validate(const std::string& path) {
  const PipeScore score = load_score_file(path);
  const ValidationReport r = validate_difficulty(score, reference_histogram());
  std::cout << score.title << ": " << score.notes.size() << " notes, " << score.measures << " measures, "
            << score.tempo_bpm << " bpm\n";
  std::cout << "range: " << r.lowest_midi << ".." << r.highest_midi << (r.range_ok ? " ok" : " FAIL") << "\n";
  std::cout << "chromatic coverage:" << (r.coverage_ok ? " ok" : " FAIL, missing");
  for (int p : r.missing_pitches) std::cout << " " << p;
  std::cout << "\ninterval histogram:";
  for (const auto& [k, v] : r.histogram) std::cout << " " << k << ":" << v;
  std::cout << (r.histogram_ok ? " ok" : " FAIL") << "\n";
  std::cout << "breath hints: " << r.hint_count << " (fractions";
  for (double f : r.hint_fractions) std::cout << " " << f;
  std::cout << ")\n" << (r.passed() ? "valid" : "invalid") << "\n";
  return r.passed() ? 0 : 1;
}

int cmd_analyze(const std::string& path, bool json) {
  const SessionRecord rec = load_record(path);
  const TakeMetrics m = analyze_record(rec);
  if (json) {
    std::cout << encode_metrics(m) << "\n";
  } else {
    print_metrics(std::cout, rec, m);
  }
  if (rec.metrics && !(*rec.metrics == m)) {
    std::cerr << "warning: stored metrics differ from the offline analysis\n";
    return 3;
  }
  return 0;
}

int cmd_compare(const std::string& before_path, const std::string& after_path) {
  const SessionRecord before = load_record(before_path);
  const SessionRecord after = load_record(after_path);
  const BreathImprovement b = compare_takes(analyze_record(before), analyze_record(after));
  std::cout << std::fixed << std::setprecision(3);
  std::cout << "delta bdr la: " << b.delta_bdr_la << " N\n";
  std::cout << "delta bdr rb: " << b.delta_bdr_rb << " N\n";
  std::cout << "abdomen support improved: " << (b.abdomen_support_improved ? "yes" : "no") << "\n";
  std::cout << "ribs portion reduced: " << (b.ribs_portion_reduced ? "yes" : "no") << "\n";
  std::cout << "both: " << (b.both ? "yes" : "no") << "\n";
  return 0;
}

int cmd_sim(const std::string& script_path, const std::string& out_wav, const std::string& out_sensor,
            int sample_rate, bool predict) {
  const SingerScript script = load_script_file(script_path);
  if (!out_wav.empty()) write_wav(out_wav, synth_voice(script, sample_rate), sample_rate, WavFormat::float32);
  if (!out_sensor.empty()) {
    std::ofstream out(out_sensor, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_sensor);
    for (const auto& line : synth_breath(script)) out << line << "\n";
  }
  if (predict) {
    const ScriptPrediction p = predict_outcome(script);
    std::cout << std::fixed << std::setprecision(2) << "predicted accuracy: " << p.accuracy_pct << " %\n";
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
      std::cout << "hint " << i + 1 << ": " << label_name(p.labels[i]) << "  volume " << std::setprecision(3)
                << p.compliance[i] << "\n";
    }
  }
  return 0;
}

struct ServeArgs {
  std::string song;
  std::string sensor = "sim";
  std::string audio = "sim";
  std::string mode = "pitch+breath";
  std::string listen = "127.0.0.1:8080";
  std::string script;
  std::string record;
  std::string static_dir;
  std::string songs_dir;
  bool autoplay = false;
  bool fast = false;
  bool quiet = false;
};

int cmd_serve(const ServeArgs& a) {
  const PipeScore score = load_score_file(a.song);
  const std::string song_id = std::filesystem::path(a.song).stem().string();
  const SessionMode mode = parse_mode(a.mode);
  SingerScript script = a.script.empty() ? SingerScript::perfect(score, song_id) : load_script_file(a.script);

  std::unique_ptr<LineSource> sensor;
  if (mode == SessionMode::pitch_breath || a.sensor != "sim") sensor = make_sensor_source(a.sensor, script);
  if (mode == SessionMode::pitch_only) sensor.reset();
  auto audio = make_audio_source(a.audio, script);

  LiveOptions opts;
  opts.session.mode = mode;
  opts.realtime = !a.fast;
  if (a.autoplay) opts.schedule = autoplay_schedule(mode);
  LiveSession live(score, song_id, std::move(sensor), std::move(audio), opts);

  const std::string songs_dir =
      a.songs_dir.empty() ? std::filesystem::path(a.song).parent_path().string() : a.songs_dir;
  live.set_song_resolver([songs_dir](const std::string& id) {
    static const std::regex safe("[A-Za-z0-9_-]+");
    if (!std::regex_match(id, safe)) throw std::invalid_argument("song ids are [A-Za-z0-9_-]+");
    return load_score_file((std::filesystem::path(songs_dir.empty() ? "." : songs_dir) / (id + ".json")).string());
  });

  std::unique_ptr<StreamingSessionWriter> writer;
  if (!a.record.empty()) {
    writer = std::make_unique<StreamingSessionWriter>(a.record);
    live.add_record_sink(writer.get());
  }

  ServerOptions sopts = parse_listen(a.listen);
  sopts.static_dir = a.static_dir;
  Server server(live.hub(), [&live](const Command& c) { live.submit(c); }, sopts);
  server.start();
  if (!a.quiet) {
    std::cerr << "listening on http://" << sopts.address << ":" << server.port() << "  (events at /ws)\n";
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  live.start();
  while (!live.finished() && !g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  live.stop();
  // Let clients drain the final take event before the socket closes.
  std::this_thread::sleep_for(std::chrono::milliseconds(a.fast ? 50 : 300));
  server.stop();

  const RunStats st = live.stats();
  if (!a.quiet) {
    std::cerr << "audio frames " << st.audio_frames << ", sensor lines " << st.sensor_lines << " (malformed "
              << st.malformed_lines << ", clamped " << st.clamped_lines << "), rejected commands "
              << st.rejected_commands << ", dropped frames " << st.dropped_frames << "\n";
  }
  const auto takes = live.takes();
  for (std::size_t i = 0; i < takes.size(); ++i) {
    std::cout << "take " << i + 1 << "\n";
    print_metrics(std::cout, takes[i], *takes[i].metrics);
  }
  if (takes.empty()) std::cout << "no take recorded\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time singing tutor: pitch and breathing feedback"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "run a live session and stream events over WebSocket");
  s->add_option("--song", serve.song, "song file (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--sensor", serve.sensor, "serial:PATH | tcp:HOST:PORT | file:PATH | sim")->capture_default_str();
  s->add_option("--audio", serve.audio, "device | device:PATH | wav:PATH | sim")->capture_default_str();
  s->add_option("--mode", serve.mode, "pitch | pitch+breath")->capture_default_str();
  s->add_option("--listen", serve.listen, "HOST:PORT for HTTP and /ws (port 0 = any)")->capture_default_str();
  s->add_option("--script", serve.script, "singer script for sim sources (default: perfect singer)");
  s->add_option("--record", serve.record, "write each take to this session file (-2, -3... for later takes)");
  s->add_option("--static", serve.static_dir, "directory of UI assets to serve");
  s->add_option("--songs", serve.songs_dir, "directory searched by the load command (default: the song's)");
  s->add_flag("--autoplay", serve.autoplay, "calibrate at 0/1/2 s and play at 3 s of session time");
  s->add_flag("--fast", serve.fast, "process recorded sources as fast as possible");
  s->add_flag("--quiet", serve.quiet, "no status lines on stderr");

  std::string analyze_path;
  bool analyze_json = false;
  auto* an = app.add_subcommand("analyze", "score a persisted session offline");
  an->add_option("session", analyze_path, "session file")->required()->check(CLI::ExistingFile);
  an->add_flag("--json", analyze_json, "print metrics as JSON");

  std::string before, after;
  auto* cmp = app.add_subcommand("compare", "breathing improvement between two sessions");
  cmp->add_option("before", before, "earlier session file")->required()->check(CLI::ExistingFile);
  cmp->add_option("after", after, "later session file")->required()->check(CLI::ExistingFile);

  std::string song_path;
  auto* val = app.add_subcommand("validate", "check a song against the difficulty constraints");
  val->add_option("song", song_path, "song file")->required()->check(CLI::ExistingFile);

  std::string script_path, out_wav, out_sensor;
  int sample_rate = 44100;
  bool predict = false;
  auto* sim = app.add_subcommand("sim", "synthesize a singer: voice WAV and belt lines");
  sim->add_option("--script", script_path, "singer script (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out-wav", out_wav, "voice output (float WAV)");
  sim->add_option("--out-sensor", out_sensor, "belt lines output");
  sim->add_option("--sample-rate", sample_rate, "voice sample rate")->capture_default_str()->check(CLI::Range(8000, 192000));
  sim->add_flag("--predict", predict, "print the closed-form expected metrics");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) return cmd_serve(serve);
    if (*an) return cmd_analyze(analyze_path, analyze_json);
    if (*cmp) return cmd_compare(before, after);
    if (*val) return cmd_validate(song_path);
    if (*sim) return cmd_sim(script_path, out_wav, out_sensor, sample_rate, predict);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
