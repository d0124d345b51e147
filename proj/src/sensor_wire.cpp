#include "breathtutor/sensor_wire.h"

#include <array>
#include <charconv>
#include <cmath>
#include <vector>

namespace breathtutor {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
T parse_field(std::string_view text, std::size_t index) {
  text = trim(text);
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw WireError("field " + std::to_string(index) + " is not a number: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

SensorFrame parse_sensor_line(std::string_view line) {
  line = trim(line);
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    fields.push_back(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (fields.size() != 6) {
    throw WireError("expected 6 comma-separated fields, got " + std::to_string(fields.size()));
  }
  SensorFrame f;
  f.t = parse_field<Millis>(fields[0], 0);
  std::array<double*, 5> targets = {&f.f_la, &f.f_bw_l, &f.f_bw_r, &f.f_rb_l, &f.f_rb_r};
  for (std::size_t i = 0; i < targets.size(); ++i) {
    *targets[i] = parse_field<double>(fields[i + 1], i + 1);
    if (!std::isfinite(*targets[i])) throw WireError("field " + std::to_string(i + 1) + " is not finite");
  }
  return f;
}

std::string format_sensor_line(const SensorFrame& frame) {
  std::string out;
  char buf[64];
  auto append = [&](auto value) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    out.append(buf, ptr);
  };
  append(frame.t);
  for (double v : {frame.f_la, frame.f_bw_l, frame.f_bw_r, frame.f_rb_l, frame.f_rb_r}) {
    out.push_back(',');
    append(v);
  }
  return out;
}

IngestResult SensorIngest::ingest(std::string_view line, Millis session_now) {
  SensorFrame f;
  try {
    f = parse_sensor_line(line);
  } catch (const WireError&) {
    ++malformed_;
    throw;
  }
  if (!offset_) offset_ = session_now - f.t;
  f.t += *offset_;

  IngestResult r;
  for (double* v : {&f.f_la, &f.f_bw_l, &f.f_bw_r, &f.f_rb_l, &f.f_rb_r}) {
    if (*v > kSensorCeilingN) {
      *v = kSensorCeilingN;
      r.clamped = true;
    } else if (*v < 0.0) {
      *v = 0.0;
      r.clamped = true;
    }
  }
  if (r.clamped) ++clamped_;
  ++accepted_;
  r.frame = f;
  return r;
}

IngestResult ingest_sensor_line(std::string_view line) {
  SensorIngest ingest;
  const SensorFrame raw = parse_sensor_line(line);
  return ingest.ingest(line, raw.t);
}

}  // namespace breathtutor
