#include "breathtutor/transport.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace breathtutor {

namespace {

constexpr std::array<std::pair<CommandKind, std::string_view>, 8> kCommandNames = {{
    {CommandKind::play, "play"},
    {CommandKind::pause, "pause"},
    {CommandKind::stop, "stop"},
    {CommandKind::seek, "seek"},
    {CommandKind::load, "load"},
    {CommandKind::calibrate_begin, "calibrate_begin"},
    {CommandKind::calibrate_mark_exhaled, "calibrate_mark_exhaled"},
    {CommandKind::calibrate_mark_deep, "calibrate_mark_deep"},
}};

}  // namespace

std::string_view state_name(TransportState s) {
  switch (s) {
    case TransportState::stopped: return "stopped";
    case TransportState::playing: return "playing";
    case TransportState::paused: return "paused";
  }
  return "stopped";
}

std::string_view command_name(CommandKind kind) {
  for (const auto& [k, name] : kCommandNames) {
    if (k == kind) return name;
  }
  return "?";
}

CommandKind parse_command_kind(std::string_view name) {
  for (const auto& [k, n] : kCommandNames) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown command '" + std::string(name) + "'");
}

void Transport::load(const PipeScore& score) {
  if (state_ == TransportState::playing) throw CommandRejected("cannot load while playing");
  tempo_bpm_ = score.tempo_bpm;
  beats_per_measure_ = score.beats_per_measure;
  measures_ = score.measures;
  song_length_ = score.length_ms();
  state_ = TransportState::stopped;
  anchor_position_ = 0;
  anchor_time_ = 0;
}

void Transport::play(Millis now) {
  if (!loaded()) throw CommandRejected("no song loaded");
  if (state_ == TransportState::playing) throw CommandRejected("already playing");
  state_ = TransportState::playing;
  anchor_time_ = now;
}

void Transport::pause(Millis now) {
  if (state_ != TransportState::playing) throw CommandRejected("not playing");
  anchor_position_ = position(now);
  anchor_time_ = now;
  state_ = TransportState::paused;
}

void Transport::stop() {
  state_ = TransportState::stopped;
  anchor_position_ = 0;
}

void Transport::seek(int measure, Millis now) {
  if (!loaded()) throw CommandRejected("no song loaded");
  if (measure < 1 || measure > measures_) {
    throw CommandRejected("measure " + std::to_string(measure) + " outside 1.." +
                          std::to_string(measures_));
  }
  const double measure_ms = 60000.0 / tempo_bpm_ * beats_per_measure_;
  anchor_position_ = static_cast<Millis>(std::llround(measure_ms * (measure - 1)));
  anchor_time_ = now;
}

Millis Transport::position(Millis now) const {
  if (state_ != TransportState::playing) return anchor_position_;
  return anchor_position_ + std::max<Millis>(0, now - anchor_time_);
}

TransportSnapshot Transport::snapshot(Millis now) const {
  TransportSnapshot s;
  s.state = state_;
  s.position = position(now);
  s.tempo_bpm = tempo_bpm_;
  s.beats_per_measure = beats_per_measure_;
  if (loaded()) {
    const double beat_ms = 60000.0 / tempo_bpm_;
    const auto beats = static_cast<long long>(std::floor(static_cast<double>(s.position) / beat_ms));
    s.measure = static_cast<int>(beats / beats_per_measure_) + 1;
    s.beat = static_cast<int>(beats % beats_per_measure_) + 1;
  }
  return s;
}

}  // namespace breathtutor
