/**
 * @file sources.h
 * @brief Input sources (belt lines, audio frames) and the offline session driver.
 *
 * Belt specs: `serial:PATH`, `tcp:HOST:PORT`, `file:PATH`, `sim`.
 * Audio specs: `device` (raw float32 mono PCM on stdin), `device:PATH`
 * (same, from a file or FIFO), `wav:PATH`, `sim`.
 */

#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "breathtutor/events.h"
#include "breathtutor/session.h"
#include "breathtutor/synth.h"

namespace breathtutor {

class SourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Line-oriented byte stream. next_line() blocks; nullopt means end of stream.
class LineSource {
 public:
  virtual ~LineSource() = default;
  virtual std::optional<std::string> next_line() = 0;
  /// True when the stream carries recorded device time that should be replayed at its own pace.
  virtual bool recorded() const { return false; }
  /// Unblocks a pending next_line() from another thread, where the transport allows it.
  virtual void interrupt() {}
};

class VectorLineSource : public LineSource {
 public:
  explicit VectorLineSource(std::vector<std::string> lines) : lines_(std::move(lines)) {}
  std::optional<std::string> next_line() override;
  bool recorded() const override { return true; }

 private:
  std::vector<std::string> lines_;
  std::size_t next_ = 0;
};

/// Reads from a file descriptor (file, FIFO, serial tty, socket). Owns the fd.
class FdLineSource : public LineSource {
 public:
  FdLineSource(int fd, bool recorded);
  ~FdLineSource() override;
  std::optional<std::string> next_line() override;
  bool recorded() const override { return recorded_; }
  void interrupt() override;

 private:
  int fd_;
  bool recorded_;
  std::string buffer_;
  bool eof_ = false;
  std::atomic<bool> interrupted_{false};
};

std::unique_ptr<LineSource> open_file_lines(const std::string& path);
/// Opens a tty in raw mode at 115200 baud. Non-tty paths (pipes, pty pairs) are read as-is.
std::unique_ptr<LineSource> open_serial_lines(const std::string& path);
std::unique_ptr<LineSource> open_tcp_lines(const std::string& host, const std::string& port);

/// Fixed-size mono frames.
class AudioSource {
 public:
  virtual ~AudioSource() = default;
  virtual int sample_rate() const = 0;
  /// Fills exactly `count` samples; false at end of stream (a trailing partial frame is discarded).
  virtual bool next_frame(std::vector<float>& out, std::size_t count) = 0;
  virtual bool recorded() const { return true; }
  virtual void interrupt() {}
};

class VectorAudioSource : public AudioSource {
 public:
  VectorAudioSource(std::vector<float> samples, int sample_rate)
      : samples_(std::move(samples)), rate_(sample_rate) {}
  int sample_rate() const override { return rate_; }
  bool next_frame(std::vector<float>& out, std::size_t count) override;

 private:
  std::vector<float> samples_;
  int rate_;
  std::size_t next_ = 0;
};

std::unique_ptr<AudioSource> open_wav_audio(const std::string& path);

/// Raw native-endian float32 mono PCM from a descriptor; "-" is stdin.
class RawPcmAudioSource : public AudioSource {
 public:
  RawPcmAudioSource(int fd, int sample_rate, bool owns_fd);
  ~RawPcmAudioSource() override;
  int sample_rate() const override { return rate_; }
  bool next_frame(std::vector<float>& out, std::size_t count) override;
  bool recorded() const override { return false; }
  void interrupt() override;

 private:
  int fd_;
  int rate_;
  bool owns_;
  std::atomic<bool> interrupted_{false};
};

std::unique_ptr<AudioSource> open_raw_pcm(const std::string& path, int sample_rate);

/// Parsed source specs. `script` feeds the `sim` sources.
std::unique_ptr<LineSource> make_sensor_source(const std::string& spec, const SingerScript& script);
std::unique_ptr<AudioSource> make_audio_source(const std::string& spec, const SingerScript& script,
                                               int sample_rate = 44100);

struct ScheduledCommand {
  Millis at = 0;
  Command command;
};

/// Calibration at the synthetic layout, then play at lead-in. Pitch mode only plays.
std::vector<ScheduledCommand> autoplay_schedule(SessionMode mode, const SimLayout& layout = {});

struct RunStats {
  std::uint64_t audio_frames = 0;
  std::uint64_t sensor_lines = 0;
  std::uint64_t malformed_lines = 0;
  std::uint64_t clamped_lines = 0;
  std::uint64_t rejected_commands = 0;
  std::uint64_t dropped_frames = 0;
};

/**
 * Offline driver: merges both sources by session time, applies scheduled
 * commands at their times and finishes the session at end of input.
 *
 * Audio frame k sits at t = 50k; the first belt line maps to t = 0. Returns the
 * last completed take, or an empty analyzed record when nothing was played.
 * Either source may be null.
 */
SessionRecord run_session(const PipeScore& score, const std::string& song_id, LineSource* sensor,
                          AudioSource* audio, const std::vector<EventSink*>& event_sinks,
                          const std::vector<RecordSink*>& record_sinks, SessionOptions options,
                          const std::vector<ScheduledCommand>& schedule, RunStats* stats = nullptr);

}  // namespace breathtutor
