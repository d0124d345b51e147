/**
 * @file session.cpp
 * @brief Session engine state machine and take bookkeeping.
 */

#include "breathtutor/session.h"

#include <algorithm>

namespace breathtutor {

std::string_view mode_name(SessionMode mode) {
  return mode == SessionMode::pitch_only ? "pitch" : "pitch+breath";
}

SessionMode parse_mode(std::string_view text) {
  if (text == "pitch") return SessionMode::pitch_only;
  if (text == "pitch+breath") return SessionMode::pitch_breath;
  throw std::invalid_argument("mode must be 'pitch' or 'pitch+breath', got '" + std::string(text) + "'");
}

std::vector<PitchFrame> SessionRecord::pitch_by_position() const {
  std::vector<PitchFrame> out;
  for (const auto& f : frames) {
    if (!f.pitch) continue;
    PitchFrame p = *f.pitch;
    p.t = f.position;
    out.push_back(p);
  }
  return out;
}

std::vector<BreathSample> SessionRecord::breath_by_position() const {
  std::vector<BreathSample> out;
  for (const auto& f : frames) {
    if (!f.breath) continue;
    BreathSample s = *f.breath;
    s.t = f.position;
    out.push_back(s);
  }
  return out;
}

TakeMetrics analyze_record(const SessionRecord& record) {
  const auto pitch = record.pitch_by_position();
  const auto breath = record.breath_by_position();
  const std::optional<Calibration> cal =
      record.mode == SessionMode::pitch_breath ? record.calibration : std::nullopt;
  return compute_take_metrics(record.score, pitch, breath, cal);
}

SessionEngine::SessionEngine(PipeScore score, std::string song_id, SessionOptions options)
    : score_(std::move(score)),
      song_id_(std::move(song_id)),
      options_(options),
      transport_(score_),
      detector_(options.pitch),
      filter_(options.breath) {}

void SessionEngine::emit(const Event& e) {
  for (EventSink* sink : event_sinks_) sink->on_event(e);
}

TransportSnapshot SessionEngine::command(const Command& cmd) {
  const bool breath_mode = options_.mode == SessionMode::pitch_breath;
  switch (cmd.kind) {
    case CommandKind::play:
      if (breath_mode && !calibration_) {
        throw CommandRejected("calibrate (exhale, then deep breath) before playing in pitch+breath mode");
      }
      if (cal_phase_ != CalPhase::idle) throw CommandRejected("calibration in progress");
      transport_.play(clock_);
      if (!take_open_) begin_take();
      break;
    case CommandKind::pause:
      transport_.pause(clock_);
      flush_pending();
      break;
    case CommandKind::stop:
      if (take_open_) {
        transport_.stop();
        end_take();
      } else {
        transport_.stop();
      }
      break;
    case CommandKind::seek: {
      transport_.seek(cmd.measure, clock_);
      const Millis pos = transport_.position(clock_);
      for (std::size_t i = 0; i < note_reported_.size(); ++i) {
        if (score_.notes[i].end() > pos) note_reported_[i] = false;
      }
      for (std::size_t i = 0; i < hint_reported_.size(); ++i) {
        if (score_.hints[i].window_end >= pos) hint_reported_[i] = false;
      }
      break;
    }
    case CommandKind::load: {
      if (!resolver_) throw CommandRejected("no song library configured");
      if (transport_.state() == TransportState::playing) throw CommandRejected("cannot load while playing");
      PipeScore next;
      try {
        next = resolver_(cmd.song_id);
      } catch (const std::exception& e) {
        throw CommandRejected("cannot load '" + cmd.song_id + "': " + e.what());
      }
      if (take_open_) end_take();
      score_ = std::move(next);
      song_id_ = cmd.song_id;
      transport_.load(score_);
      break;
    }
    case CommandKind::calibrate_begin:
      if (!breath_mode) throw CommandRejected("breath sensing is disabled in pitch mode");
      if (transport_.state() == TransportState::playing) throw CommandRejected("cannot calibrate while playing");
      cal_phase_ = CalPhase::exhale;
      exhale_frames_.clear();
      deep_frames_.clear();
      emit(CalibrationEvent{"exhale", std::nullopt});
      break;
    case CommandKind::calibrate_mark_exhaled:
      if (cal_phase_ != CalPhase::exhale) throw CommandRejected("send calibrate_begin first");
      cal_phase_ = CalPhase::deep;
      emit(CalibrationEvent{"deep", std::nullopt});
      break;
    case CommandKind::calibrate_mark_deep: {
      if (cal_phase_ != CalPhase::deep) throw CommandRejected("mark the exhaled state first");
      cal_phase_ = CalPhase::idle;
      try {
        calibration_ = calibrate(exhale_frames_, deep_frames_);
      } catch (const CalibrationError& e) {
        emit(CalibrationEvent{"failed", std::nullopt});
        throw CommandRejected(std::string("calibration failed: ") + e.what());
      }
      filter_ = FilterState(options_.breath);
      emit(CalibrationEvent{"done", calibration_});
      break;
    }
  }
  const TransportSnapshot snap = transport_.snapshot(clock_);
  last_beat_ = {snap.measure, snap.beat};
  emit(TransportEvent{snap});
  return snap;
}

bool SessionEngine::try_command(const Command& cmd) {
  try {
    command(cmd);
    return true;
  } catch (const CommandRejected& e) {
    emit(RejectedEvent{std::string(command_name(cmd.kind)), e.what()});
    return false;
  }
}

void SessionEngine::advance_clock(Millis t) {
  clock_ = std::max(clock_, t);
  check_song_end();
}

void SessionEngine::check_song_end() {
  if (transport_.state() != TransportState::playing) return;
  if (transport_.position(clock_) < transport_.song_length()) return;
  transport_.stop();
  if (take_open_) end_take();
  const TransportSnapshot snap = transport_.snapshot(clock_);
  last_beat_ = {snap.measure, snap.beat};
  emit(TransportEvent{snap});
}

void SessionEngine::on_audio_frame(Millis t, std::span<const float> samples) {
  advance_clock(t);
  const PitchFrame pitch = detector_.detect(samples, t);
  emit(PitchEvent{pitch});
  if (transport_.state() != TransportState::playing) return;
  const Millis pos = transport_.position(t);
  append(RecordFrame{t, pos, std::nullopt, pitch});
  after_progress(pos + options_.pitch.frame_ms);
}

void SessionEngine::on_sensor_frame(const SensorFrame& frame) {
  if (options_.mode != SessionMode::pitch_breath) return;
  advance_clock(frame.t);
  if (cal_phase_ == CalPhase::exhale) exhale_frames_.push_back(frame);
  if (cal_phase_ == CalPhase::deep) deep_frames_.push_back(frame);
  if (!calibration_) return;

  BreathSample sample;
  try {
    sample = process_frame(frame, *calibration_, filter_);
  } catch (const BreathError&) {
    ++dropped_;
    return;
  }
  emit(BreathEvent{sample});
  if (transport_.state() != TransportState::playing) return;
  const Millis pos = transport_.position(frame.t);
  append(RecordFrame{frame.t, pos, sample, std::nullopt});
  after_progress(pos);
}

void SessionEngine::on_source_lost(const std::string& source) {
  emit(SourceEvent{source, "disconnected"});
  // A belt dropping out is irrelevant when breath sensing is off.
  if (source == "sensor" && options_.mode == SessionMode::pitch_only) return;
  if (transport_.state() == TransportState::playing) {
    transport_.pause(clock_);
    flush_pending();
    const TransportSnapshot snap = transport_.snapshot(clock_);
    last_beat_ = {snap.measure, snap.beat};
    emit(TransportEvent{snap});
  }
}

void SessionEngine::finish() {
  if (!take_open_) return;
  transport_.stop();
  end_take();
  emit(TransportEvent{transport_.snapshot(clock_)});
}

void SessionEngine::begin_take() {
  current_ = SessionRecord{};
  current_.song_id = song_id_;
  current_.mode = options_.mode;
  current_.score = score_;
  if (options_.mode == SessionMode::pitch_breath) current_.calibration = calibration_;
  pending_.reset();
  note_reported_.assign(score_.notes.size(), false);
  hint_reported_.assign(score_.hints.size(), false);
  take_open_ = true;
  for (RecordSink* sink : record_sinks_) sink->on_take_begin(current_);
}

void SessionEngine::end_take() {
  flush_pending();
  current_.metrics = analyze_record(current_);
  take_open_ = false;
  for (RecordSink* sink : record_sinks_) sink->on_take_end(current_);
  emit(TakeEvent{current_.song_id, *current_.metrics});
  takes_.push_back(std::move(current_));
  current_ = SessionRecord{};
}

void SessionEngine::append(RecordFrame frame) {
  if (pending_) {
    if (frame.t == pending_->t) {
      if (frame.pitch && !pending_->pitch) {
        pending_->pitch = frame.pitch;
        return;
      }
      if (frame.breath && !pending_->breath) {
        pending_->breath = frame.breath;
        return;
      }
      ++dropped_;
      return;
    }
    if (frame.t < pending_->t) {
      ++dropped_;
      return;
    }
  } else if (!current_.frames.empty() && frame.t <= current_.frames.back().t) {
    ++dropped_;
    return;
  }
  flush_pending();
  pending_ = std::move(frame);
}

void SessionEngine::flush_pending() {
  if (!pending_) return;
  current_.frames.push_back(*pending_);
  for (RecordSink* sink : record_sinks_) sink->on_frame(*pending_);
  pending_.reset();
}

void SessionEngine::after_progress(Millis position) {
  emit_transport_if_moved();

  bool notes_due = false;
  for (std::size_t i = 0; i < note_reported_.size(); ++i) {
    if (!note_reported_[i] && score_.notes[i].end() <= position) notes_due = true;
  }
  bool hints_due = false;
  if (options_.mode == SessionMode::pitch_breath && calibration_) {
    for (std::size_t i = 0; i < hint_reported_.size(); ++i) {
      if (!hint_reported_[i] && score_.hints[i].window_end < position) hints_due = true;
    }
  }
  if (!notes_due && !hints_due) return;

  SessionRecord view;
  view.frames = current_.frames;
  if (pending_) view.frames.push_back(*pending_);

  if (notes_due) {
    const auto pitch = view.pitch_by_position();
    for (std::size_t i = 0; i < note_reported_.size(); ++i) {
      if (note_reported_[i] || score_.notes[i].end() > position) continue;
      note_reported_[i] = true;
      emit(NoteResultEvent{score_note(score_.notes[i], pitch, i)});
    }
  }
  if (hints_due) {
    const auto breath = view.breath_by_position();
    const auto th = PatternThresholds::from_calibration(*calibration_);
    for (std::size_t i = 0; i < hint_reported_.size(); ++i) {
      if (hint_reported_[i] || score_.hints[i].window_end >= position) continue;
      hint_reported_[i] = true;
      const auto window = samples_in_window(score_.hints[i], breath);
      BreathPattern pattern;
      try {
        pattern = classify_breath(window, th);
      } catch (const BreathError&) {
      }
      emit(PatternEvent{i, pattern});
      HintCompliance c{i, score_.hints[i].target_fraction, 0.0};
      for (const auto& s : window) c.achieved = std::max(c.achieved, s.volume);
      emit(HintResultEvent{c});
    }
  }
}

void SessionEngine::emit_transport_if_moved() {
  const TransportSnapshot snap = transport_.snapshot(clock_);
  const std::pair<int, int> beat{snap.measure, snap.beat};
  if (beat == last_beat_) return;
  last_beat_ = beat;
  emit(TransportEvent{snap});
}

}  // namespace breathtutor
