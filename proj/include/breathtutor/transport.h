/**
 * @file transport.h
 * @brief Play/pause/seek clock over a loaded score, plus the command vocabulary.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "breathtutor/score.h"

namespace breathtutor {

enum class TransportState { stopped, playing, paused };
std::string_view state_name(TransportState s);

enum class CommandKind {
  play,
  pause,
  stop,
  seek,
  load,
  calibrate_begin,
  calibrate_mark_exhaled,
  calibrate_mark_deep,
};

struct Command {
  CommandKind kind = CommandKind::play;
  int measure = 0;      ///< seek target, 1-based
  std::string song_id;  ///< load target

  static Command of(CommandKind kind) { return {kind, 0, {}}; }
  static Command seek_to(int measure) { return {CommandKind::seek, measure, {}}; }
  static Command load_song(std::string id) { return {CommandKind::load, 0, std::move(id)}; }
};

std::string_view command_name(CommandKind kind);
/// Throws std::invalid_argument for an unknown name.
CommandKind parse_command_kind(std::string_view name);

/// A command the current state does not allow.
class CommandRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TransportSnapshot {
  TransportState state = TransportState::stopped;
  Millis position = 0;
  double tempo_bpm = 0.0;
  int beats_per_measure = 0;
  int measure = 1;  ///< 1-based
  int beat = 1;     ///< 1-based within the measure

  bool operator==(const TransportSnapshot&) const = default;
};

class Transport {
 public:
  Transport() = default;
  explicit Transport(const PipeScore& score) { load(score); }

  /// Stops and rewinds. Rejected while playing.
  void load(const PipeScore& score);
  void play(Millis now);
  void pause(Millis now);
  void stop();
  /// Jump to the start of a 1-based measure; keeps the play state.
  void seek(int measure, Millis now);

  TransportState state() const { return state_; }
  bool loaded() const { return tempo_bpm_ > 0.0; }
  Millis position(Millis now) const;
  Millis song_length() const { return song_length_; }
  TransportSnapshot snapshot(Millis now) const;

 private:
  TransportState state_ = TransportState::stopped;
  double tempo_bpm_ = 0.0;
  int beats_per_measure_ = 0;
  int measures_ = 0;
  Millis song_length_ = 0;
  Millis anchor_position_ = 0;
  Millis anchor_time_ = 0;
};

}  // namespace breathtutor
