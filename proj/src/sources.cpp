/**
 * @file sources.cpp
 * @brief POSIX-backed line and audio sources, spec parsing, offline driver.
 */

#include "breathtutor/sources.h"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <termios.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "breathtutor/sensor_wire.h"
#include "breathtutor/wav.h"

namespace breathtutor {

namespace {

std::string errno_text() { return std::strerror(errno); }

// Waits for input in short slices so that interrupt() is honoured on pipes and ttys.
// Returns false once interrupted.
bool wait_readable(int fd, const std::atomic<bool>& interrupted) {
  pollfd p{fd, POLLIN, 0};
  while (!interrupted) {
    const int rc = ::poll(&p, 1, 100);
    if (rc > 0) return true;
    if (rc < 0 && errno != EINTR) return true;  // let read() report the error
  }
  return false;
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

std::optional<std::string> VectorLineSource::next_line() {
  if (next_ >= lines_.size()) return std::nullopt;
  return lines_[next_++];
}

FdLineSource::FdLineSource(int fd, bool recorded) : fd_(fd), recorded_(recorded) {}

FdLineSource::~FdLineSource() {
  if (fd_ >= 0) ::close(fd_);
}

void FdLineSource::interrupt() { interrupted_ = true; }

std::optional<std::string> FdLineSource::next_line() {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (eof_) {
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    if (!wait_readable(fd_, interrupted_)) return std::nullopt;
    char chunk[4096];
    const ssize_t n = ::read(fd_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      eof_ = true;
      continue;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<LineSource> open_file_lines(const std::string& path) {
  const int fd = path == "-" ? ::dup(STDIN_FILENO) : ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw SourceError("cannot open sensor file " + path + ": " + errno_text());
  return std::make_unique<FdLineSource>(fd, true);
}

std::unique_ptr<LineSource> open_serial_lines(const std::string& path) {
  const int fd = ::open(path.c_str(), O_RDONLY | O_NOCTTY | O_CLOEXEC);
  if (fd < 0) throw SourceError("cannot open serial port " + path + ": " + errno_text());
  termios tio{};
  if (::tcgetattr(fd, &tio) == 0) {
    ::cfmakeraw(&tio);
    ::cfsetispeed(&tio, B115200);
    ::cfsetospeed(&tio, B115200);
    tio.c_cflag |= CLOCAL | CREAD;
    tio.c_cc[VMIN] = 1;
    tio.c_cc[VTIME] = 0;
    ::tcsetattr(fd, TCSANOW, &tio);
  }
  return std::make_unique<FdLineSource>(fd, false);
}

std::unique_ptr<LineSource> open_tcp_lines(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw SourceError("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw SourceError("cannot connect to " + host + ":" + port + ": " + errno_text());
  return std::make_unique<FdLineSource>(fd, false);
}

bool VectorAudioSource::next_frame(std::vector<float>& out, std::size_t count) {
  if (next_ + count > samples_.size()) return false;
  out.assign(samples_.begin() + static_cast<std::ptrdiff_t>(next_),
             samples_.begin() + static_cast<std::ptrdiff_t>(next_ + count));
  next_ += count;
  return true;
}

std::unique_ptr<AudioSource> open_wav_audio(const std::string& path) {
  WavData wav = read_wav(path);
  return std::make_unique<VectorAudioSource>(std::move(wav.samples), wav.sample_rate);
}

RawPcmAudioSource::RawPcmAudioSource(int fd, int sample_rate, bool owns_fd)
    : fd_(fd), rate_(sample_rate), owns_(owns_fd) {}

RawPcmAudioSource::~RawPcmAudioSource() {
  if (owns_ && fd_ >= 0) ::close(fd_);
}

void RawPcmAudioSource::interrupt() { interrupted_ = true; }

bool RawPcmAudioSource::next_frame(std::vector<float>& out, std::size_t count) {
  out.resize(count);
  auto* bytes = reinterpret_cast<char*>(out.data());
  const std::size_t want = count * sizeof(float);
  std::size_t got = 0;
  while (got < want) {
    if (!wait_readable(fd_, interrupted_)) return false;
    const ssize_t n = ::read(fd_, bytes + got, want - got);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    got += static_cast<std::size_t>(n);
  }
  return true;
}

std::unique_ptr<AudioSource> open_raw_pcm(const std::string& path, int sample_rate) {
  if (path == "-") return std::make_unique<RawPcmAudioSource>(STDIN_FILENO, sample_rate, false);
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw SourceError("cannot open audio device " + path + ": " + errno_text());
  return std::make_unique<RawPcmAudioSource>(fd, sample_rate, true);
}

std::unique_ptr<LineSource> make_sensor_source(const std::string& spec, const SingerScript& script) {
  if (spec == "sim") return std::make_unique<VectorLineSource>(synth_breath(script));
  if (starts_with(spec, "file:")) return open_file_lines(spec.substr(5));
  if (starts_with(spec, "serial:")) return open_serial_lines(spec.substr(7));
  if (starts_with(spec, "tcp:")) {
    const std::string rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
      throw SourceError("sensor spec must be tcp:HOST:PORT, got '" + spec + "'");
    }
    return open_tcp_lines(rest.substr(0, colon), rest.substr(colon + 1));
  }
  throw SourceError("unknown sensor source '" + spec + "' (serial:PATH, tcp:HOST:PORT, file:PATH, sim)");
}

std::unique_ptr<AudioSource> make_audio_source(const std::string& spec, const SingerScript& script,
                                               int sample_rate) {
  if (spec == "sim") return std::make_unique<VectorAudioSource>(synth_voice(script, sample_rate), sample_rate);
  if (starts_with(spec, "wav:")) return open_wav_audio(spec.substr(4));
  if (spec == "device") return open_raw_pcm("-", sample_rate);
  if (starts_with(spec, "device:")) return open_raw_pcm(spec.substr(7), sample_rate);
  throw SourceError("unknown audio source '" + spec + "' (device, device:PATH, wav:PATH, sim)");
}

std::vector<ScheduledCommand> autoplay_schedule(SessionMode mode, const SimLayout& layout) {
  std::vector<ScheduledCommand> out;
  if (mode == SessionMode::pitch_breath) {
    out.push_back({0, Command::of(CommandKind::calibrate_begin)});
    out.push_back({layout.exhale_end_ms, Command::of(CommandKind::calibrate_mark_exhaled)});
    out.push_back({layout.deep_end_ms, Command::of(CommandKind::calibrate_mark_deep)});
  }
  out.push_back({layout.lead_in_ms, Command::of(CommandKind::play)});
  return out;
}

SessionRecord run_session(const PipeScore& score, const std::string& song_id, LineSource* sensor,
                          AudioSource* audio, const std::vector<EventSink*>& event_sinks,
                          const std::vector<RecordSink*>& record_sinks, SessionOptions options,
                          const std::vector<ScheduledCommand>& schedule, RunStats* stats) {
  if (audio) options.pitch.sample_rate_hz = audio->sample_rate();
  SessionEngine engine(score, song_id, options);
  for (EventSink* s : event_sinks) engine.add_event_sink(s);
  for (RecordSink* s : record_sinks) engine.add_record_sink(s);

  RunStats local;
  RunStats& st = stats ? *stats : local;
  SensorIngest ingest;
  const std::size_t frame_len = options.pitch.frame_samples();

  std::vector<float> audio_buf;
  bool has_audio = false;
  Millis audio_t = 0;
  std::int64_t audio_index = 0;
  auto pull_audio = [&] {
    has_audio = audio && audio->next_frame(audio_buf, frame_len);
    if (has_audio) audio_t = audio_index++ * options.pitch.frame_ms;
  };

  std::optional<SensorFrame> sensor_frame;
  auto pull_sensor = [&] {
    sensor_frame.reset();
    while (sensor) {
      auto line = sensor->next_line();
      if (!line) return;
      if (line->empty()) continue;
      try {
        const IngestResult r = ingest.ingest(*line, 0);
        ++st.sensor_lines;
        if (r.clamped) ++st.clamped_lines;
        sensor_frame = r.frame;
        return;
      } catch (const WireError&) {
        ++st.malformed_lines;
      }
    }
  };

  std::size_t next_cmd = 0;
  auto apply_due = [&](std::optional<Millis> until) {
    while (next_cmd < schedule.size() && (!until || schedule[next_cmd].at <= *until)) {
      engine.advance_clock(schedule[next_cmd].at);
      if (!engine.try_command(schedule[next_cmd].command)) ++st.rejected_commands;
      ++next_cmd;
    }
  };

  pull_audio();
  pull_sensor();
  while (has_audio || sensor_frame) {
    const bool take_audio = has_audio && (!sensor_frame || audio_t <= sensor_frame->t);
    const Millis t = take_audio ? audio_t : sensor_frame->t;
    apply_due(t);
    if (take_audio) {
      engine.on_audio_frame(t, audio_buf);
      ++st.audio_frames;
      pull_audio();
    } else {
      engine.on_sensor_frame(*sensor_frame);
      pull_sensor();
    }
  }
  // Commands scheduled past the end of input would act on a silent session; drop them.
  engine.finish();
  st.dropped_frames = engine.dropped_frames();

  if (!engine.takes().empty()) return engine.takes().back();
  SessionRecord empty;
  empty.song_id = song_id;
  empty.mode = options.mode;
  empty.score = score;
  if (options.mode == SessionMode::pitch_breath) empty.calibration = engine.calibration();
  empty.metrics = analyze_record(empty);
  return empty;
}

}  // namespace breathtutor
