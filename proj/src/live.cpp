/**
 * @file live.cpp
 * @brief Producer threads, watermark merge and the analysis consumer.
 */

#include "breathtutor/live.h"

#include "breathtutor/sensor_wire.h"

namespace breathtutor {

namespace {

// Producers block when a lane holds this many unconsumed items (fast mode only).
constexpr std::size_t kLaneCapacity = 512;

}  // namespace

LiveSession::LiveSession(PipeScore score, std::string song_id, std::unique_ptr<LineSource> sensor,
                         std::unique_ptr<AudioSource> audio, LiveOptions options)
    : score_(score),
      song_id_(song_id),
      sensor_(std::move(sensor)),
      audio_(std::move(audio)),
      options_([&] {
        LiveOptions o = std::move(options);
        if (audio_) o.session.pitch.sample_rate_hz = audio_->sample_rate();
        return o;
      }()),
      engine_(std::move(score), std::move(song_id), options_.session) {
  engine_.add_event_sink(&hub_);
  audio_lane_.done = !audio_;
  sensor_lane_.done = !sensor_;
}

LiveSession::~LiveSession() { stop(); }

void LiveSession::add_record_sink(RecordSink* sink) { engine_.add_record_sink(sink); }

void LiveSession::set_song_resolver(std::function<PipeScore(const std::string&)> resolver) {
  engine_.set_song_resolver(std::move(resolver));
}

void LiveSession::submit(const Command& cmd) {
  {
    std::lock_guard lock(mu_);
    commands_.push_back(cmd);
  }
  cv_.notify_all();
}

Millis LiveSession::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - epoch_)
      .count();
}

void LiveSession::pace_until(Millis t) {
  std::unique_lock lock(mu_);
  cv_.wait_until(lock, epoch_ + std::chrono::milliseconds(t), [&] { return stopping_.load(); });
}

void LiveSession::start() {
  epoch_ = std::chrono::steady_clock::now();
  if (audio_) audio_thread_ = std::thread([this] { audio_loop(); });
  if (sensor_) sensor_thread_ = std::thread([this] { sensor_loop(); });
  analysis_thread_ = std::thread([this] { analysis_loop(); });
}

void LiveSession::audio_loop() {
  const std::size_t n = options_.session.pitch.frame_samples();
  const bool paced = options_.realtime && audio_->recorded();
  std::vector<float> buf;
  for (std::int64_t k = 0; !stopping_; ++k) {
    if (!audio_->next_frame(buf, n)) break;
    const Millis t = k * options_.session.pitch.frame_ms;
    // A frame is complete once its last sample has been captured.
    if (paced) pace_until(t + options_.session.pitch.frame_ms);
    std::unique_lock lock(mu_);
    if (!options_.realtime) {
      cv_.wait(lock, [&] { return stopping_ || audio_lane_.items.size() < kLaneCapacity; });
    }
    audio_lane_.items.emplace_back(AudioItem{t, buf});
    ++stats_.audio_frames;
    lock.unlock();
    cv_.notify_all();
  }
  {
    std::lock_guard lock(mu_);
    audio_lane_.done = true;
  }
  cv_.notify_all();
}

void LiveSession::sensor_loop() {
  SensorIngest ingest;
  const bool recorded = sensor_->recorded();
  const bool paced = options_.realtime && recorded;
  while (!stopping_) {
    auto line = sensor_->next_line();
    if (!line) break;
    if (line->empty()) continue;
    IngestResult r;
    try {
      r = ingest.ingest(*line, recorded ? 0 : now_ms());
    } catch (const WireError&) {
      std::lock_guard lock(mu_);
      ++stats_.malformed_lines;
      continue;
    }
    if (paced) pace_until(r.frame.t);
    std::unique_lock lock(mu_);
    if (!options_.realtime) {
      cv_.wait(lock, [&] { return stopping_ || sensor_lane_.items.size() < kLaneCapacity; });
    }
    sensor_lane_.items.emplace_back(r.frame);
    ++stats_.sensor_lines;
    if (r.clamped) ++stats_.clamped_lines;
    lock.unlock();
    cv_.notify_all();
  }
  {
    std::lock_guard lock(mu_);
    sensor_lane_.done = true;
  }
  cv_.notify_all();
}

void LiveSession::analysis_loop() {
  auto head_t = [](const Lane& lane) -> Millis {
    const auto& item = lane.items.front();
    if (const auto* a = std::get_if<AudioItem>(&item)) return a->t;
    return std::get<SensorFrame>(item).t;
  };
  std::size_t next_scheduled = 0;
  bool audio_lost = !audio_;
  bool sensor_lost = !sensor_;
  std::unique_lock lock(mu_);

  for (;;) {
    // Commands from clients run at the current engine clock, ahead of queued data.
    while (!commands_.empty()) {
      const Command cmd = commands_.front();
      commands_.pop_front();
      lock.unlock();
      const bool ok = engine_.try_command(cmd);
      lock.lock();
      if (!ok) ++stats_.rejected_commands;
    }
    if (stopping_) break;

    Lane* pick = nullptr;
    const bool a = !audio_lane_.items.empty();
    const bool s = !sensor_lane_.items.empty();
    if (a && s) {
      pick = head_t(audio_lane_) <= head_t(sensor_lane_) ? &audio_lane_ : &sensor_lane_;
    } else if (a && sensor_lane_.done) {
      pick = &audio_lane_;
    } else if (s && audio_lane_.done) {
      pick = &sensor_lane_;
    } else if ((a || s) && options_.realtime) {
      // One lane is silent: give it merge_slack_ms to catch up, then move on without it.
      Lane& lane = a ? audio_lane_ : sensor_lane_;
      if (now_ms() >= head_t(lane) + options_.merge_slack_ms) pick = &lane;
    }

    if (!pick) {
      if (audio_lane_.done && audio_lane_.items.empty() && !audio_lost) {
        audio_lost = true;
        lock.unlock();
        engine_.on_source_lost("audio");
        lock.lock();
        continue;
      }
      if (sensor_lane_.done && sensor_lane_.items.empty() && !sensor_lost) {
        sensor_lost = true;
        lock.unlock();
        engine_.on_source_lost("sensor");
        lock.lock();
        continue;
      }
      if (audio_lane_.done && sensor_lane_.done && commands_.empty()) break;
      cv_.wait_for(lock, std::chrono::milliseconds(10));
      continue;
    }

    auto item = std::move(pick->items.front());
    pick->items.pop_front();
    lock.unlock();
    cv_.notify_all();

    const Millis t = std::holds_alternative<AudioItem>(item) ? std::get<AudioItem>(item).t
                                                             : std::get<SensorFrame>(item).t;
    const auto& schedule = options_.schedule;
    std::uint64_t rejected = 0;
    while (next_scheduled < schedule.size() && schedule[next_scheduled].at <= t) {
      engine_.advance_clock(schedule[next_scheduled].at);
      if (!engine_.try_command(schedule[next_scheduled].command)) ++rejected;
      ++next_scheduled;
    }
    if (auto* audio = std::get_if<AudioItem>(&item)) {
      engine_.on_audio_frame(audio->t, audio->samples);
    } else {
      engine_.on_sensor_frame(std::get<SensorFrame>(item));
    }
    lock.lock();
    stats_.rejected_commands += rejected;
  }

  lock.unlock();
  engine_.finish();
  lock.lock();
  stats_.dropped_frames = engine_.dropped_frames();
  finished_ = true;
  lock.unlock();
  cv_.notify_all();
}

void LiveSession::wait() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return finished_.load(); });
  lock.unlock();
  stop();
}

void LiveSession::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (sensor_) sensor_->interrupt();
  if (audio_) audio_->interrupt();
  for (std::thread* t : {&audio_thread_, &sensor_thread_, &analysis_thread_}) {
    if (t->joinable()) t->join();
  }
}

std::vector<SessionRecord> LiveSession::takes() const { return engine_.takes(); }

RunStats LiveSession::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

}  // namespace breathtutor
