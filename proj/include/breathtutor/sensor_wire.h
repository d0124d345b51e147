/**
 * @file sensor_wire.h
 * @brief Belt wire protocol: newline-delimited ASCII `t_ms,f_la,f_bw_l,f_bw_r,f_rb_l,f_rb_r`.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "breathtutor/breath.h"

namespace breathtutor {

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strict grammar check; values keep device time and are not clamped.
SensorFrame parse_sensor_line(std::string_view line);

/// Shortest round-trip text for each value.
std::string format_sensor_line(const SensorFrame& frame);

struct IngestResult {
  SensorFrame frame;
  bool clamped = false;
};

/**
 * Line ingestion with device-to-session clock mapping and counters.
 *
 * The offset is fixed by the first accepted line: its device timestamp maps to
 * the session time passed alongside it. Malformed lines throw WireError and
 * bump `malformed()`; forces outside [0, 80] N are clamped and flagged.
 */
class SensorIngest {
 public:
  IngestResult ingest(std::string_view line, Millis session_now);

  std::uint64_t accepted() const { return accepted_; }
  std::uint64_t malformed() const { return malformed_; }
  std::uint64_t clamped() const { return clamped_; }
  std::optional<Millis> offset() const { return offset_; }

 private:
  std::optional<Millis> offset_;
  std::uint64_t accepted_ = 0;
  std::uint64_t malformed_ = 0;
  std::uint64_t clamped_ = 0;
};

/// One-shot ingest with an identity clock mapping.
IngestResult ingest_sensor_line(std::string_view line);

}  // namespace breathtutor
