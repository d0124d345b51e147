/**
 * @file events.h
 * @brief Live feedback events, their JSON wire form, and lossy fan-out to subscribers.
 *
 * Each event encodes to one line of UTF-8 JSON with a "type" field. UI
 * subscribers get independent bounded buffers that drop their oldest entry
 * when full, so a slow client never stalls analysis.
 */

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "breathtutor/breath.h"
#include "breathtutor/metrics.h"
#include "breathtutor/pitch.h"
#include "breathtutor/transport.h"

namespace breathtutor {

struct PitchEvent {
  PitchFrame frame;
};

struct BreathEvent {
  BreathSample sample;
};

struct TransportEvent {
  TransportSnapshot snapshot;
};

struct NoteResultEvent {
  NoteResult result;
};

struct HintResultEvent {
  HintCompliance result;
};

struct PatternEvent {
  std::size_t hint = 0;
  BreathPattern pattern;
};

/// A command the service refused, with the reason shown to the learner.
struct RejectedEvent {
  std::string command;
  std::string reason;
};

struct SourceEvent {
  std::string source;  ///< "audio" or "sensor"
  std::string state;   ///< "disconnected"
};

struct CalibrationEvent {
  std::string phase;  ///< "exhale", "deep", "done", "failed"
  std::optional<Calibration> calibration;
};

struct TakeEvent {
  std::string song_id;
  TakeMetrics metrics;
};

using Event = std::variant<PitchEvent, BreathEvent, TransportEvent, NoteResultEvent,
                           HintResultEvent, PatternEvent, RejectedEvent, SourceEvent,
                           CalibrationEvent, TakeEvent>;

std::string encode_event(const Event& event);
/// TakeMetrics as the JSON object used in `take` events and session files.
std::string encode_metrics(const TakeMetrics& metrics);

/// Parsed `{"type":"cmd","cmd":...}` message. Throws std::invalid_argument.
Command decode_command(const std::string& json_text);
std::string encode_command(const Command& cmd);

class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_event(const Event& event) = 0;
};

/// Bounded drop-oldest queue of encoded events for one consumer.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  void push(std::string message);
  /// Waits up to `timeout_ms` for a message; nullopt on timeout or close.
  std::optional<std::string> pop(int timeout_ms);
  std::vector<std::string> drain();
  void close();
  bool closed() const;

  std::uint64_t dropped() const;
  std::uint64_t delivered() const;
  /// Called (outside the lock) after every push.
  void set_notify(std::function<void()> fn);

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  std::size_t capacity_;
  std::uint64_t dropped_ = 0;
  std::uint64_t delivered_ = 0;
  bool closed_ = false;
  std::function<void()> notify_;
};

class EventHub : public EventSink {
 public:
  std::shared_ptr<Subscription> subscribe(std::size_t capacity = 256);
  void unsubscribe(const std::shared_ptr<Subscription>& sub);
  void on_event(const Event& event) override { publish(encode_event(event)); }
  void publish(const std::string& message);
  std::size_t subscriber_count() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;
};

}  // namespace breathtutor
