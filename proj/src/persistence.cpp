/**
 * @file persistence.cpp
 * @brief Versioned session file: streamed writer and loader.
 *
 * Layout: {"version":1,"song_id":...,"mode":...,"song":{score},
 *          "calibration":{...}|null,"frames":[...],"metrics":{...}|null}
 * Doubles are written in shortest round-trip form, so a reload is bit-exact.
 */

#include <filesystem>
#include <fstream>
#include <sstream>

#include "breathtutor/session.h"
#include "json_codec.h"

namespace breathtutor {

using codec::json;

namespace {

json frame_to_json(const RecordFrame& f) {
  json j = {{"t", f.t}, {"pos", f.position}};
  if (f.pitch) j["pitch"] = codec::pitch_to_json(*f.pitch);
  if (f.breath) j["breath"] = codec::breath_to_json(*f.breath);
  return j;
}

RecordFrame frame_from_json(const json& j) {
  RecordFrame f;
  f.t = j.at("t").get<Millis>();
  f.position = j.at("pos").get<Millis>();
  if (j.contains("pitch")) f.pitch = codec::pitch_from_json(j["pitch"]);
  if (j.contains("breath")) f.breath = codec::breath_from_json(j["breath"]);
  return f;
}

std::string take_path(const std::string& base, int take) {
  if (take <= 1) return base;
  std::filesystem::path p(base);
  const std::string stem = p.stem().string() + "-" + std::to_string(take);
  return (p.parent_path() / (stem + p.extension().string())).string();
}

}  // namespace

struct StreamingSessionWriter::Impl {
  std::ofstream out;
  bool first_frame = true;
  int take = 0;
};

StreamingSessionWriter::StreamingSessionWriter(std::string path)
    : path_(std::move(path)), impl_(std::make_unique<Impl>()) {}

StreamingSessionWriter::~StreamingSessionWriter() = default;

void StreamingSessionWriter::on_take_begin(const SessionRecord& header) {
  ++impl_->take;
  const std::string target = take_path(path_, impl_->take);
  impl_->out = std::ofstream(target, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw PersistenceError("cannot create session file " + target);
  impl_->first_frame = true;
  auto& out = impl_->out;
  out << "{\"version\":" << header.version << ",\"song_id\":" << json(header.song_id).dump()
      << ",\"mode\":" << json(std::string(mode_name(header.mode))).dump()
      << ",\"song\":" << json::parse(serialize_score(header.score)).dump()
      << ",\"calibration\":"
      << (header.calibration ? codec::calibration_to_json(*header.calibration).dump() : "null")
      << ",\"frames\":[";
  out.flush();
}

void StreamingSessionWriter::on_frame(const RecordFrame& frame) {
  auto& out = impl_->out;
  if (!out.is_open()) return;
  out << (impl_->first_frame ? "\n" : ",\n") << frame_to_json(frame).dump();
  impl_->first_frame = false;
  ++frames_written_;
  if (!out) throw PersistenceError("write failed for session file " + path_);
}

void StreamingSessionWriter::on_take_end(const SessionRecord& record) {
  auto& out = impl_->out;
  if (!out.is_open()) return;
  out << "\n],\"metrics\":"
      << (record.metrics ? codec::metrics_to_json(*record.metrics).dump() : "null") << "}\n";
  out.close();
  if (out.fail()) throw PersistenceError("write failed for session file " + path_);
}

void persist(const SessionRecord& record, const std::string& path) {
  StreamingSessionWriter writer(path);
  writer.on_take_begin(record);
  for (const auto& f : record.frames) writer.on_frame(f);
  writer.on_take_end(record);
}

SessionRecord parse_record(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw PersistenceError(std::string("malformed session file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_number_integer()) {
    throw PersistenceError("session file has no version tag");
  }
  const int version = doc["version"].get<int>();
  if (version != kSessionFileVersion) {
    throw PersistenceError("unsupported session file version " + std::to_string(version) +
                           " (expected " + std::to_string(kSessionFileVersion) + ")");
  }
  try {
    SessionRecord r;
    r.version = version;
    r.song_id = doc.at("song_id").get<std::string>();
    r.mode = parse_mode(doc.at("mode").get<std::string>());
    r.score = parse_score(doc.at("song").dump());
    if (!doc.at("calibration").is_null()) r.calibration = codec::calibration_from_json(doc["calibration"]);
    for (const auto& f : doc.at("frames")) r.frames.push_back(frame_from_json(f));
    if (doc.contains("metrics") && !doc["metrics"].is_null()) {
      r.metrics = codec::metrics_from_json(doc["metrics"]);
    }
    return r;
  } catch (const json::exception& e) {
    throw PersistenceError(std::string("malformed session file: ") + e.what());
  } catch (const ScoreError& e) {
    throw PersistenceError(std::string("session file has an invalid song: ") + e.what());
  }
}

SessionRecord load_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open session file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_record(buf.str());
}

}  // namespace breathtutor
