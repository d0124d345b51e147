/**
 * @file session.h
 * @brief Session engine: transport, calibration, analysis fan-in, take records.
 *
 * SessionEngine is the single consumer of audio frames, belt frames and
 * commands, fed in timestamp order. It owns the transport, the breath filter
 * state and the record of the current take. It is not thread-safe; the live
 * server serializes all input onto one analysis thread.
 */

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "breathtutor/breath.h"
#include "breathtutor/events.h"
#include "breathtutor/metrics.h"
#include "breathtutor/pitch.h"
#include "breathtutor/score.h"
#include "breathtutor/transport.h"

namespace breathtutor {

enum class SessionMode { pitch_only, pitch_breath };
std::string_view mode_name(SessionMode mode);
/// Accepts "pitch" and "pitch+breath".
SessionMode parse_mode(std::string_view text);

/// One merged analysis instant. `t` is session time, `position` song time.
struct RecordFrame {
  Millis t = 0;
  Millis position = 0;
  std::optional<BreathSample> breath;
  std::optional<PitchFrame> pitch;

  bool operator==(const RecordFrame&) const = default;
};

inline constexpr int kSessionFileVersion = 1;

struct SessionRecord {
  int version = kSessionFileVersion;
  std::string song_id;
  SessionMode mode = SessionMode::pitch_breath;
  PipeScore score;
  std::optional<Calibration> calibration;
  std::vector<RecordFrame> frames;
  std::optional<TakeMetrics> metrics;

  /// Pitch frames re-stamped with song position, in record order.
  std::vector<PitchFrame> pitch_by_position() const;
  /// Breath samples re-stamped with song position, in record order.
  std::vector<BreathSample> breath_by_position() const;

  bool operator==(const SessionRecord&) const = default;
};

/// Offline scoring of a recorded take; matches what the engine computes live.
TakeMetrics analyze_record(const SessionRecord& record);

/// Lossless consumer of take records (e.g. the session file writer).
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  /// Header fields are final; frames and metrics are empty.
  virtual void on_take_begin(const SessionRecord& header) = 0;
  virtual void on_frame(const RecordFrame& frame) = 0;
  virtual void on_take_end(const SessionRecord& record) = 0;
};

struct SessionOptions {
  SessionMode mode = SessionMode::pitch_breath;
  PitchConfig pitch;
  BreathConfig breath;
};

class SessionEngine {
 public:
  SessionEngine(PipeScore score, std::string song_id, SessionOptions options = {});

  void add_event_sink(EventSink* sink) { event_sinks_.push_back(sink); }
  void add_record_sink(RecordSink* sink) { record_sinks_.push_back(sink); }
  /// Resolves song ids for `load`; without one, load is rejected.
  void set_song_resolver(std::function<PipeScore(const std::string&)> resolver) {
    resolver_ = std::move(resolver);
  }

  /// Applies a command at the current clock. Throws CommandRejected with a reason.
  TransportSnapshot command(const Command& cmd);
  /// Like command(), but reports rejection as an event instead of throwing.
  bool try_command(const Command& cmd);

  /// Moves the session clock forward; never backwards.
  void advance_clock(Millis t);
  void on_audio_frame(Millis t, std::span<const float> samples);
  void on_sensor_frame(const SensorFrame& frame);
  /// A producer stopped delivering: pause the take and tell subscribers.
  void on_source_lost(const std::string& source);
  /// End of session: closes the open take, if any.
  void finish();

  Millis clock() const { return clock_; }
  SessionMode mode() const { return options_.mode; }
  const PipeScore& score() const { return score_; }
  const std::string& song_id() const { return song_id_; }
  TransportSnapshot transport() const { return transport_.snapshot(clock_); }
  const std::optional<Calibration>& calibration() const { return calibration_; }
  bool take_open() const { return take_open_; }
  /// Completed takes, oldest first.
  const std::vector<SessionRecord>& takes() const { return takes_; }
  /// Frames dropped for arriving behind the merge point or failing the breath filter.
  std::uint64_t dropped_frames() const { return dropped_; }

 private:
  enum class CalPhase { idle, exhale, deep };

  void emit(const Event& e);
  void begin_take();
  void end_take();
  void check_song_end();
  void append(RecordFrame frame);
  void flush_pending();
  void after_progress(Millis position);
  void emit_transport_if_moved();

  PipeScore score_;
  std::string song_id_;
  SessionOptions options_;
  Transport transport_;
  PitchDetector detector_;
  FilterState filter_;
  std::optional<Calibration> calibration_;
  CalPhase cal_phase_ = CalPhase::idle;
  std::vector<SensorFrame> exhale_frames_;
  std::vector<SensorFrame> deep_frames_;

  Millis clock_ = 0;
  bool take_open_ = false;
  SessionRecord current_;
  std::optional<RecordFrame> pending_;
  std::vector<SessionRecord> takes_;
  std::vector<bool> note_reported_;
  std::vector<bool> hint_reported_;
  std::pair<int, int> last_beat_{0, 0};
  std::uint64_t dropped_ = 0;

  std::vector<EventSink*> event_sinks_;
  std::vector<RecordSink*> record_sinks_;
  std::function<PipeScore(const std::string&)> resolver_;
};

class PersistenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes a take to disk incrementally: header, then frames as they arrive, then metrics.
class StreamingSessionWriter : public RecordSink {
 public:
  explicit StreamingSessionWriter(std::string path);
  ~StreamingSessionWriter() override;

  void on_take_begin(const SessionRecord& header) override;
  void on_frame(const RecordFrame& frame) override;
  void on_take_end(const SessionRecord& record) override;

  std::uint64_t frames_written() const { return frames_written_; }
  const std::string& path() const { return path_; }

 private:
  struct Impl;
  std::string path_;
  std::unique_ptr<Impl> impl_;
  std::uint64_t frames_written_ = 0;
};

void persist(const SessionRecord& record, const std::string& path);
/// Throws PersistenceError on I/O failure, malformed content or unknown version.
SessionRecord load_record(const std::string& path);
SessionRecord parse_record(const std::string& text);

}  // namespace breathtutor
