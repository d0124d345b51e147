#include "breathtutor/events.h"

#include <algorithm>

#include "json_codec.h"

namespace breathtutor {

namespace codec {

json pitch_to_json(const PitchFrame& f) {
  return {{"t", f.t}, {"voiced", f.voiced}, {"hz", f.freq_hz}, {"midi", f.midi_float}, {"db", f.energy_db}};
}

PitchFrame pitch_from_json(const json& j) {
  PitchFrame f;
  f.t = j.at("t").get<Millis>();
  f.voiced = j.at("voiced").get<bool>();
  f.freq_hz = j.at("hz").get<double>();
  f.midi_float = j.at("midi").get<double>();
  f.energy_db = j.at("db").get<double>();
  return f;
}

json breath_to_json(const BreathSample& s) {
  return {{"t", s.t},       {"la", s.la},     {"bw", s.bw},     {"rb", s.rb},
          {"la_n", s.la_n}, {"bw_n", s.bw_n}, {"rb_n", s.rb_n}, {"volume", s.volume}};
}

BreathSample breath_from_json(const json& j) {
  BreathSample s;
  s.t = j.at("t").get<Millis>();
  s.la = j.at("la").get<double>();
  s.bw = j.at("bw").get<double>();
  s.rb = j.at("rb").get<double>();
  s.la_n = j.at("la_n").get<double>();
  s.bw_n = j.at("bw_n").get<double>();
  s.rb_n = j.at("rb_n").get<double>();
  s.volume = j.at("volume").get<double>();
  return s;
}

json triple_to_json(const Triple& t) {
  return {{"la", t[Channel::la]}, {"bw", t[Channel::bw]}, {"rb", t[Channel::rb]}};
}

Triple triple_from_json(const json& j) {
  Triple t;
  for (Channel ch : kChannels) t[ch] = j.at(std::string(channel_name(ch))).get<double>();
  return t;
}

json calibration_to_json(const Calibration& c) {
  return {{"baseline", triple_to_json(c.baseline)},
          {"deep_max", triple_to_json(c.deep_max)},
          {"captured_at", c.captured_at}};
}

Calibration calibration_from_json(const json& j) {
  Calibration c;
  c.baseline = triple_from_json(j.at("baseline"));
  c.deep_max = triple_from_json(j.at("deep_max"));
  c.captured_at = j.at("captured_at").get<Millis>();
  return c;
}

json pattern_to_json(const BreathPattern& p) {
  return {{"label", std::string(label_name(p.label))},
          {"delta_la", p.delta_la},
          {"delta_rb", p.delta_rb},
          {"delta_bw", p.delta_bw}};
}

BreathPattern pattern_from_json(const json& j) {
  BreathPattern p;
  p.label = parse_label(j.at("label").get<std::string>());
  p.delta_la = j.at("delta_la").get<double>();
  p.delta_rb = j.at("delta_rb").get<double>();
  p.delta_bw = j.at("delta_bw").get<double>();
  return p;
}

json note_result_to_json(const NoteResult& r) {
  return {{"note", r.note_index},
          {"correct", r.correct},
          {"correct_ms", r.correct_ms},
          {"required_ms", r.required_ms}};
}

NoteResult note_result_from_json(const json& j) {
  NoteResult r;
  r.note_index = j.at("note").get<std::size_t>();
  r.correct = j.at("correct").get<bool>();
  r.correct_ms = j.at("correct_ms").get<Millis>();
  r.required_ms = j.at("required_ms").get<double>();
  return r;
}

json compliance_to_json(const HintCompliance& c) {
  return {{"hint", c.hint}, {"target", c.target}, {"achieved", c.achieved}};
}

HintCompliance compliance_from_json(const json& j) {
  HintCompliance c;
  c.hint = j.at("hint").get<std::size_t>();
  c.target = j.at("target").get<double>();
  c.achieved = j.at("achieved").get<double>();
  return c;
}

json metrics_to_json(const TakeMetrics& m) {
  json j;
  j["accuracy_pct"] = m.accuracy_pct;
  j["correct_notes"] = m.correct_notes;
  j["total_notes"] = m.total_notes;
  j["notes"] = json::array();
  for (const auto& n : m.notes) j["notes"].push_back(note_result_to_json(n));
  j["bdr"] = {{"la", m.bdr.la}, {"bw", m.bdr.bw}, {"rb", m.bdr.rb}};
  j["patterns"] = json::array();
  for (const auto& p : m.pattern_by_hint) j["patterns"].push_back(pattern_to_json(p));
  j["hint_compliance"] = json::array();
  for (const auto& c : m.hint_compliance) j["hint_compliance"].push_back(compliance_to_json(c));
  return j;
}

TakeMetrics metrics_from_json(const json& j) {
  TakeMetrics m;
  m.accuracy_pct = j.at("accuracy_pct").get<double>();
  m.correct_notes = j.at("correct_notes").get<std::size_t>();
  m.total_notes = j.at("total_notes").get<std::size_t>();
  for (const auto& n : j.at("notes")) m.notes.push_back(note_result_from_json(n));
  const json& b = j.at("bdr");
  m.bdr = {b.at("la").get<double>(), b.at("bw").get<double>(), b.at("rb").get<double>()};
  for (const auto& p : j.at("patterns")) m.pattern_by_hint.push_back(pattern_from_json(p));
  for (const auto& c : j.at("hint_compliance")) m.hint_compliance.push_back(compliance_from_json(c));
  return m;
}

}  // namespace codec

namespace {

using codec::json;

struct Encoder {
  json operator()(const PitchEvent& e) const {
    return {{"type", "pitch"},         {"t", e.frame.t},        {"voiced", e.frame.voiced},
            {"hz", e.frame.freq_hz},   {"midi", e.frame.midi_float}, {"db", e.frame.energy_db}};
  }
  json operator()(const BreathEvent& e) const {
    const auto& s = e.sample;
    return {{"type", "breath"}, {"t", s.t},   {"la_n", s.la_n}, {"bw_n", s.bw_n}, {"rb_n", s.rb_n},
            {"volume", s.volume}, {"la", s.la}, {"bw", s.bw},     {"rb", s.rb}};
  }
  json operator()(const TransportEvent& e) const {
    const auto& s = e.snapshot;
    return {{"type", "transport"}, {"state", std::string(state_name(s.state))},
            {"pos", s.position},   {"measure", s.measure},
            {"beat", s.beat},      {"tempo_bpm", s.tempo_bpm},
            {"beats_per_measure", s.beats_per_measure}};
  }
  json operator()(const NoteResultEvent& e) const {
    json j = codec::note_result_to_json(e.result);
    j["type"] = "note_result";
    return j;
  }
  json operator()(const HintResultEvent& e) const {
    json j = codec::compliance_to_json(e.result);
    j["type"] = "hint_result";
    return j;
  }
  json operator()(const PatternEvent& e) const {
    json j = codec::pattern_to_json(e.pattern);
    j["type"] = "pattern";
    j["hint"] = e.hint;
    return j;
  }
  json operator()(const RejectedEvent& e) const {
    return {{"type", "rejected"}, {"cmd", e.command}, {"reason", e.reason}};
  }
  json operator()(const SourceEvent& e) const {
    return {{"type", "source"}, {"source", e.source}, {"state", e.state}};
  }
  json operator()(const CalibrationEvent& e) const {
    json j = {{"type", "calibration"}, {"phase", e.phase}};
    if (e.calibration) j["calibration"] = codec::calibration_to_json(*e.calibration);
    return j;
  }
  json operator()(const TakeEvent& e) const {
    return {{"type", "take"}, {"song_id", e.song_id}, {"metrics", codec::metrics_to_json(e.metrics)}};
  }
};

}  // namespace

std::string encode_event(const Event& event) { return std::visit(Encoder{}, event).dump(); }

std::string encode_metrics(const TakeMetrics& metrics) { return codec::metrics_to_json(metrics).dump(); }

Command decode_command(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed command: ") + e.what());
  }
  if (!j.is_object() || j.value("type", "") != "cmd" || !j.contains("cmd") || !j["cmd"].is_string()) {
    throw std::invalid_argument("expected {\"type\":\"cmd\",\"cmd\":...}");
  }
  Command c;
  c.kind = parse_command_kind(j["cmd"].get<std::string>());
  if (c.kind == CommandKind::seek) {
    if (!j.contains("measure") || !j["measure"].is_number_integer()) {
      throw std::invalid_argument("seek needs an integer measure");
    }
    c.measure = j["measure"].get<int>();
  }
  if (c.kind == CommandKind::load) {
    if (!j.contains("song") || !j["song"].is_string()) throw std::invalid_argument("load needs a song id");
    c.song_id = j["song"].get<std::string>();
  }
  return c;
}

std::string encode_command(const Command& cmd) {
  json j = {{"type", "cmd"}, {"cmd", std::string(command_name(cmd.kind))}};
  if (cmd.kind == CommandKind::seek) j["measure"] = cmd.measure;
  if (cmd.kind == CommandKind::load) j["song"] = cmd.song_id;
  return j.dump();
}

void Subscription::push(std::string message) {
  std::function<void()> notify;
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    if (queue_.size() >= capacity_) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(std::move(message));
    notify = notify_;
  }
  cv_.notify_one();
  if (notify) notify();
}

std::optional<std::string> Subscription::pop(int timeout_ms) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
               [&] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  std::string out = std::move(queue_.front());
  queue_.pop_front();
  ++delivered_;
  return out;
}

std::vector<std::string> Subscription::drain() {
  std::lock_guard lock(mu_);
  std::vector<std::string> out(std::make_move_iterator(queue_.begin()),
                               std::make_move_iterator(queue_.end()));
  delivered_ += out.size();
  queue_.clear();
  return out;
}

void Subscription::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::uint64_t Subscription::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::uint64_t Subscription::delivered() const {
  std::lock_guard lock(mu_);
  return delivered_;
}

void Subscription::set_notify(std::function<void()> fn) {
  std::lock_guard lock(mu_);
  notify_ = std::move(fn);
}

std::shared_ptr<Subscription> EventHub::subscribe(std::size_t capacity) {
  auto sub = std::make_shared<Subscription>(capacity);
  std::lock_guard lock(mu_);
  subs_.push_back(sub);
  return sub;
}

void EventHub::unsubscribe(const std::shared_ptr<Subscription>& sub) {
  std::lock_guard lock(mu_);
  std::erase(subs_, sub);
}

void EventHub::publish(const std::string& message) {
  std::vector<std::shared_ptr<Subscription>> targets;
  {
    std::lock_guard lock(mu_);
    targets = subs_;
  }
  for (const auto& s : targets) s->push(message);
}

std::size_t EventHub::subscriber_count() const {
  std::lock_guard lock(mu_);
  return subs_.size();
}

}  // namespace breathtutor
