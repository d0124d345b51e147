/**
 * @file live.h
 * @brief Threaded live session: two producers, one analysis consumer.
 *
 * The audio and belt producers each push time-stamped items into their own
 * ordered queue. The analysis thread merges the two queue heads by session
 * time, applies queued commands between items and owns the SessionEngine.
 * Events fan out through the EventHub; take records go to the record sinks
 * synchronously, so persistence never loses a frame.
 */

#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <variant>

#include "breathtutor/sources.h"

namespace breathtutor {

struct LiveOptions {
  SessionOptions session;
  /// Replay recorded sources at their own timestamps; false runs as fast as possible.
  bool realtime = true;
  /// Commands injected at fixed session times (e.g. autoplay_schedule()).
  std::vector<ScheduledCommand> schedule;
  /// How long the merger waits for a silent producer before moving on.
  Millis merge_slack_ms = 100;
};

class LiveSession {
 public:
  LiveSession(PipeScore score, std::string song_id, std::unique_ptr<LineSource> sensor,
              std::unique_ptr<AudioSource> audio, LiveOptions options);
  ~LiveSession();

  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  EventHub& hub() { return hub_; }
  void add_record_sink(RecordSink* sink);
  void set_song_resolver(std::function<PipeScore(const std::string&)> resolver);

  /// Thread-safe. The command runs on the analysis thread; rejections become events.
  void submit(const Command& cmd);

  void start();
  /// Stops producers, closes the open take and joins all threads.
  void stop();
  /// Blocks until both sources are exhausted and all input is processed.
  void wait();
  bool finished() const { return finished_; }

  /// Completed takes; valid after stop() or wait().
  std::vector<SessionRecord> takes() const;
  RunStats stats() const;

 private:
  struct AudioItem {
    Millis t;
    std::vector<float> samples;
  };
  struct Lane {
    std::deque<std::variant<AudioItem, SensorFrame>> items;
    bool done = false;
  };

  void audio_loop();
  void sensor_loop();
  void analysis_loop();
  Millis now_ms() const;
  void pace_until(Millis t);

  PipeScore score_;
  std::string song_id_;
  std::unique_ptr<LineSource> sensor_;
  std::unique_ptr<AudioSource> audio_;
  LiveOptions options_;
  EventHub hub_;
  SessionEngine engine_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  Lane audio_lane_;
  Lane sensor_lane_;
  std::deque<Command> commands_;
  RunStats stats_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> finished_{false};
  std::chrono::steady_clock::time_point epoch_;

  std::thread audio_thread_;
  std::thread sensor_thread_;
  std::thread analysis_thread_;
};

}  // namespace breathtutor
