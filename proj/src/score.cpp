/**
 * @file score.cpp
 * @brief Pipe-score JSON format, invariants, and lookups.
 */

#include "breathtutor/score.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace breathtutor {

using nlohmann::json;

Millis PipeScore::length_ms() const {
  return static_cast<Millis>(std::llround(measure_ms() * measures));
}

Millis PipeScore::measure_start(int measure) const {
  return static_cast<Millis>(std::llround(measure_ms() * (measure - 1)));
}

namespace {

int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ScoreError(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ScoreError(where + "." + key, "missing field");
  return *it;
}

template <typename T>
T get_integer(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer()) throw ScoreError(where + "." + key, "expected an integer");
  return v.get<T>();
}

double get_number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) throw ScoreError(where + "." + key, "expected a number");
  return v.get<double>();
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_string()) throw ScoreError(where + "." + key, "expected a string");
  return v.get<std::string>();
}

const json& get_array(const json& obj, const char* key) {
  const json& v = field(obj, key, "");
  if (!v.is_array()) throw ScoreError(key, "expected an array");
  return v;
}

std::size_t get_index(const json& obj, const char* key, const std::string& where) {
  auto v = get_integer<long long>(obj, key, where);
  if (v < 0) throw ScoreError(where + "." + key, "must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

PipeScore parse_score(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ScoreError("line " + std::to_string(line_of_offset(text, e.byte)),
                     std::string("syntax error: ") + e.what());
  }
  if (!doc.is_object()) throw ScoreError("document", "expected a JSON object");

  PipeScore score;
  score.title = get_string(doc, "title", "score");
  score.tempo_bpm = get_number(doc, "tempo_bpm", "score");
  score.beats_per_measure = get_integer<int>(doc, "beats_per_measure", "score");
  score.measures = get_integer<int>(doc, "measures", "score");

  const json& notes = get_array(doc, "notes");
  for (std::size_t i = 0; i < notes.size(); ++i) {
    const std::string where = "notes[" + std::to_string(i) + "]";
    Note n;
    n.midi = get_integer<int>(notes[i], "midi", where);
    n.start = get_integer<Millis>(notes[i], "start_ms", where);
    n.duration = get_integer<Millis>(notes[i], "duration_ms", where);
    n.syllable = get_string(notes[i], "syllable", where);
    score.notes.push_back(std::move(n));
  }

  const json& sentences = get_array(doc, "sentences");
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const std::string where = "sentences[" + std::to_string(i) + "]";
    score.sentences.push_back(
        {get_index(sentences[i], "first_note", where), get_index(sentences[i], "last_note", where)});
  }

  const json& hints = get_array(doc, "hints");
  for (std::size_t i = 0; i < hints.size(); ++i) {
    const std::string where = "hints[" + std::to_string(i) + "]";
    BreathHint h;
    h.before_sentence = get_index(hints[i], "sentence", where);
    h.window_start = get_integer<Millis>(hints[i], "window_start_ms", where);
    h.window_end = get_integer<Millis>(hints[i], "window_end_ms", where);
    h.target_fraction = get_number(hints[i], "target_fraction", where);
    score.hints.push_back(h);
  }

  check_invariants(score);
  return score;
}

std::string serialize_score(const PipeScore& score) {
  json doc;
  doc["title"] = score.title;
  doc["tempo_bpm"] = score.tempo_bpm;
  doc["beats_per_measure"] = score.beats_per_measure;
  doc["measures"] = score.measures;
  doc["notes"] = json::array();
  for (const auto& n : score.notes) {
    doc["notes"].push_back(
        {{"midi", n.midi}, {"start_ms", n.start}, {"duration_ms", n.duration}, {"syllable", n.syllable}});
  }
  doc["sentences"] = json::array();
  for (const auto& s : score.sentences) {
    doc["sentences"].push_back({{"first_note", s.first_note}, {"last_note", s.last_note}});
  }
  doc["hints"] = json::array();
  for (const auto& h : score.hints) {
    doc["hints"].push_back({{"sentence", h.before_sentence},
                            {"window_start_ms", h.window_start},
                            {"window_end_ms", h.window_end},
                            {"target_fraction", h.target_fraction}});
  }
  return doc.dump(2) + "\n";
}

PipeScore load_score_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScoreError(path, "cannot open score file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_score(buf.str());
}

void check_invariants(const PipeScore& score) {
  if (!(score.tempo_bpm > 0.0) || !std::isfinite(score.tempo_bpm)) {
    throw ScoreError("tempo_bpm", "must be a positive number");
  }
  if (score.beats_per_measure < 1) throw ScoreError("beats_per_measure", "must be >= 1");
  if (score.measures < 1) throw ScoreError("measures", "must be >= 1");

  const auto& notes = score.notes;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    const std::string where = "notes[" + std::to_string(i) + "]";
    if (notes[i].midi < 0 || notes[i].midi > 127) throw ScoreError(where, "midi out of 0..127");
    if (notes[i].duration <= 0) throw ScoreError(where, "duration must be > 0");
    if (notes[i].start < 0) throw ScoreError(where, "start must be >= 0");
    if (i > 0 && notes[i].start < notes[i - 1].end()) {
      throw ScoreError(where, "overlaps or precedes notes[" + std::to_string(i - 1) + "]");
    }
  }
  if (!notes.empty() && static_cast<double>(notes.back().end()) >
                            score.measure_ms() * score.measures + 1e-6) {
    throw ScoreError("notes[" + std::to_string(notes.size() - 1) + "]",
                     "ends after the last measure");
  }

  // Sentences partition the note list in order.
  std::size_t expected_first = 0;
  for (std::size_t i = 0; i < score.sentences.size(); ++i) {
    const std::string where = "sentences[" + std::to_string(i) + "]";
    const auto& s = score.sentences[i];
    if (s.first_note != expected_first) {
      throw ScoreError(where, "must start at note " + std::to_string(expected_first));
    }
    if (s.last_note < s.first_note) throw ScoreError(where, "last_note before first_note");
    if (s.last_note >= notes.size()) throw ScoreError(where, "last_note out of range");
    expected_first = s.last_note + 1;
  }
  if (expected_first != notes.size()) {
    throw ScoreError("sentences", "do not cover all notes");
  }

  std::vector<int> seen(score.sentences.size(), 0);
  for (std::size_t i = 0; i < score.hints.size(); ++i) {
    const std::string where = "hints[" + std::to_string(i) + "]";
    const auto& h = score.hints[i];
    if (h.before_sentence >= score.sentences.size()) {
      throw ScoreError(where, "sentence index out of range");
    }
    if (++seen[h.before_sentence] > 1) {
      throw ScoreError(where, "second hint for sentence " + std::to_string(h.before_sentence));
    }
    if (!(h.target_fraction > 0.0 && h.target_fraction <= 1.0)) {
      throw ScoreError(where, "target_fraction must be in (0, 1]");
    }
    if (h.window_start < 0 || h.window_end < h.window_start) {
      throw ScoreError(where, "window must satisfy 0 <= start <= end");
    }
    const auto& sentence = score.sentences[h.before_sentence];
    if (h.window_end > notes[sentence.first_note].start) {
      throw ScoreError(where, "window ends after the first note of sentence " +
                                  std::to_string(h.before_sentence));
    }
    if (h.before_sentence > 0) {
      const auto& prev = score.sentences[h.before_sentence - 1];
      if (h.window_start < notes[prev.last_note].end()) {
        throw ScoreError(where, "window overlaps sentence " + std::to_string(h.before_sentence - 1));
      }
    }
  }
  for (std::size_t s = 0; s < seen.size(); ++s) {
    if (seen[s] == 0) throw ScoreError("sentences[" + std::to_string(s) + "]", "has no breath hint");
  }
}

IntervalHistogram interval_histogram(const PipeScore& score) {
  IntervalHistogram hist;
  for (std::size_t i = 1; i < score.notes.size(); ++i) {
    ++hist[std::abs(score.notes[i].midi - score.notes[i - 1].midi)];
  }
  return hist;
}

IntervalHistogram reference_histogram() { return {{1, 1}, {2, 21}, {3, 5}, {4, 4}, {5, 2}}; }

ValidationReport validate_difficulty(const PipeScore& score, const IntervalHistogram& reference,
                                     int lowest, int highest) {
  ValidationReport r;
  std::set<int> pitches;
  for (const auto& n : score.notes) pitches.insert(n.midi);
  if (!pitches.empty()) {
    r.lowest_midi = *pitches.begin();
    r.highest_midi = *pitches.rbegin();
  }
  r.range_ok = !pitches.empty() && r.lowest_midi == lowest && r.highest_midi == highest;
  for (int p = lowest; p <= highest; ++p) {
    if (!pitches.contains(p)) r.missing_pitches.push_back(p);
  }
  r.coverage_ok = r.range_ok && r.missing_pitches.empty();
  r.histogram = interval_histogram(score);
  r.histogram_ok = r.histogram == reference;
  r.hint_count = score.hints.size();
  for (const auto& h : score.hints) r.hint_fractions.push_back(h.target_fraction);
  return r;
}

bool same_difficulty(const ValidationReport& a, const ValidationReport& b) {
  return a.passed() && b.passed() && a.histogram == b.histogram && a.hint_count == b.hint_count &&
         a.lowest_midi == b.lowest_midi && a.highest_midi == b.highest_midi;
}

std::optional<std::pair<std::size_t, Note>> note_at(const PipeScore& score, Millis t) {
  const auto& notes = score.notes;
  // First note starting after t; the candidate is the one before it.
  auto it = std::upper_bound(notes.begin(), notes.end(), t,
                             [](Millis value, const Note& n) { return value < n.start; });
  if (it == notes.begin()) return std::nullopt;
  --it;
  if (t < it->end()) {
    return std::make_pair(static_cast<std::size_t>(it - notes.begin()), *it);
  }
  return std::nullopt;
}

std::string solfa_for(int midi) {
  static constexpr std::array<const char*, 12> kNames = {"do", "di", "re", "ri", "mi", "fa",
                                                         "fi", "sol", "si", "la", "li", "ti"};
  return kNames[static_cast<std::size_t>(((midi % 12) + 12) % 12)];
}

}  // namespace breathtutor
