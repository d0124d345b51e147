#include <doctest.h>

#include "breathtutor/score.h"
#include "support.h"

using namespace breathtutor;
using testing::make_score;

namespace {

const char* kOneNote = R"({
  "title": "one",
  "tempo_bpm": 120,
  "beats_per_measure": 4,
  "measures": 1,
  "notes": [{"midi": 69, "start_ms": 500, "duration_ms": 1000, "syllable": "la"}],
  "sentences": [{"first_note": 0, "last_note": 0}],
  "hints": [{"sentence": 0, "window_start_ms": 0, "window_end_ms": 500, "target_fraction": 1.0}]
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_SUITE("score") {

TEST_CASE("one-note document parses") {
  const PipeScore s = parse_score(kOneNote);
  CHECK(s.notes.size() == 1);
  CHECK(s.sentences.size() == 1);
  CHECK(s.hints.size() == 1);
  CHECK(s.notes[0].midi == 69);
  CHECK(s.notes[0].duration == 1000);
  CHECK(s.hints[0].target_fraction == 1.0);
  CHECK(s.length_ms() == 2000);
}

TEST_CASE("bundled song A: eight measures, reference interval counts") {
  const PipeScore s = load_score_file(testing::song_path("song_a.json"));
  CHECK(s.measures == 8);
  const IntervalHistogram table1{{1, 1}, {2, 21}, {3, 5}, {4, 4}, {5, 2}};
  CHECK(interval_histogram(s) == table1);
  CHECK(reference_histogram() == table1);
}

TEST_CASE("hint window overlapping its sentence's first note is rejected") {
  const std::string bad = replace(kOneNote, R"("window_end_ms": 500)", R"("window_end_ms": 600)");
  try {
    parse_score(bad);
    FAIL("expected ScoreError");
  } catch (const ScoreError& e) {
    CHECK(e.element() == "hints[0]");
  }
}

TEST_CASE("syntax errors carry the line number") {
  const std::string bad = replace(kOneNote, R"("measures": 1,)", R"("measures": 1,,)");
  try {
    parse_score(bad);
    FAIL("expected ScoreError");
  } catch (const ScoreError& e) {
    CHECK(e.element() == "line 5");
  }
}

TEST_CASE("field errors name the offending path") {
  try {
    parse_score(replace(kOneNote, R"("midi": 69)", R"("midi": "A4")"));
    FAIL("expected ScoreError");
  } catch (const ScoreError& e) {
    CHECK(e.element() == "notes[0].midi");
  }
  try {
    parse_score(replace(kOneNote, R"("duration_ms": 1000, )", ""));
    FAIL("expected ScoreError");
  } catch (const ScoreError& e) {
    CHECK(e.element() == "notes[0].duration_ms");
  }
}

TEST_CASE("overlapping notes, uncovered notes and missing hints are rejected") {
  PipeScore s = make_score({{60, 62, 64}});
  s.notes[1].start -= 1;
  CHECK_THROWS_AS(check_invariants(s), ScoreError);

  s = make_score({{60, 62, 64}});
  s.sentences[0].last_note = 1;
  CHECK_THROWS_AS(check_invariants(s), ScoreError);

  s = make_score({{60, 62}, {64}});
  s.hints.pop_back();
  CHECK_THROWS_AS(check_invariants(s), ScoreError);

  s = make_score({{60}});
  s.measures = 0;
  CHECK_THROWS_AS(check_invariants(s), ScoreError);

  s = make_score({{60}});
  s.notes[0].duration = 100000;
  CHECK_THROWS_AS(check_invariants(s), ScoreError);
}

TEST_CASE("hint may not reach back into the previous sentence") {
  PipeScore s = make_score({{60, 62}, {64, 65}});
  s.hints[1].window_start = s.notes[1].start + 10;
  CHECK_THROWS_AS(check_invariants(s), ScoreError);
}

TEST_CASE("validate_difficulty: bundled songs pass") {
  for (const char* name : {"song_a.json", "song_b.json"}) {
    const PipeScore s = load_score_file(testing::song_path(name));
    const ValidationReport r = validate_difficulty(s, reference_histogram());
    CHECK(r.range_ok);
    CHECK(r.coverage_ok);
    CHECK(r.missing_pitches.empty());
    CHECK(r.histogram_ok);
    CHECK(r.lowest_midi == 57);
    CHECK(r.highest_midi == 72);
    CHECK(r.passed());
  }
}

TEST_CASE("bundled songs match each other") {
  const auto a = validate_difficulty(load_score_file(testing::song_path("song_a.json")), reference_histogram());
  const auto b = validate_difficulty(load_score_file(testing::song_path("song_b.json")), reference_histogram());
  CHECK(same_difficulty(a, b));
  CHECK(a.hint_count == b.hint_count);
  CHECK(a.hint_fractions == b.hint_fractions);
  const auto sa = load_score_file(testing::song_path("song_a.json"));
  const auto sb = load_score_file(testing::song_path("song_b.json"));
  CHECK(validate_difficulty(sa, interval_histogram(sb)).passed());
  CHECK_FALSE(sa.notes == sb.notes);
}

TEST_CASE("validate_difficulty: single note fails the range check") {
  const auto r = validate_difficulty(make_score({{69}}), reference_histogram());
  CHECK_FALSE(r.range_ok);
  CHECK_FALSE(r.coverage_ok);
  CHECK_FALSE(r.passed());
}

TEST_CASE("validate_difficulty: one note transposed an octave up") {
  PipeScore s = load_score_file(testing::song_path("song_a.json"));
  const std::size_t k = 5;
  s.notes[k].midi += 12;

  // Brute-force scan of the modified list.
  int lo = 1000, hi = -1000;
  for (const auto& n : s.notes) {
    lo = std::min(lo, n.midi);
    hi = std::max(hi, n.midi);
  }
  const auto oracle_hist = testing::brute_histogram(s.notes);

  const auto r = validate_difficulty(s, reference_histogram());
  CHECK(r.highest_midi == hi);
  CHECK(r.lowest_midi == lo);
  CHECK(hi > 72);
  CHECK_FALSE(r.range_ok);
  CHECK(r.histogram == oracle_hist);
  CHECK(r.histogram_ok == (oracle_hist == reference_histogram()));
  CHECK_FALSE(r.passed());
}

TEST_CASE("note_at: half-open intervals") {
  const PipeScore s = make_score({{60, 62, 64}});
  // First note of this score starts after the 600 ms hint.
  CHECK_FALSE(note_at(s, 0).has_value());
  CHECK_FALSE(note_at(s, 599).has_value());
  REQUIRE(note_at(s, 600).has_value());
  CHECK(note_at(s, 600)->first == 0);
  CHECK(note_at(s, 1099)->first == 0);
  CHECK(note_at(s, 1100)->first == 1);
  CHECK_FALSE(note_at(s, s.notes.back().end()).has_value());

  PipeScore zero = parse_score(kOneNote);
  zero.notes[0].start = 0;
  zero.hints[0].window_end = 0;
  REQUIRE(note_at(zero, 0).has_value());
  CHECK(note_at(zero, 0)->first == 0);
}

TEST_CASE("note_at agrees with a linear scan over every millisecond of a bundled song") {
  const PipeScore s = load_score_file(testing::song_path("song_b.json"));
  for (Millis t = 0; t < s.length_ms(); ++t) {
    std::optional<std::size_t> expect;
    int hits = 0;
    for (std::size_t i = 0; i < s.notes.size(); ++i) {
      if (s.notes[i].start <= t && t < s.notes[i].end()) {
        expect = i;
        ++hits;
      }
    }
    REQUIRE(hits <= 1);
    const auto got = note_at(s, t);
    REQUIRE(got.has_value() == expect.has_value());
    if (got) REQUIRE(got->first == *expect);
  }
  for (const auto& h : s.hints) CHECK_FALSE(note_at(s, h.window_start).has_value());
}

TEST_CASE("interval_histogram examples") {
  CHECK(interval_histogram(make_score({{60, 62, 64}})) == IntervalHistogram{{2, 2}});
  CHECK(interval_histogram(make_score({{60, 60}})) == IntervalHistogram{{0, 1}});
  CHECK(interval_histogram(make_score({{60}})).empty());
  // Intervals across sentence boundaries count too.
  CHECK(interval_histogram(make_score({{60}, {65}})) == IntervalHistogram{{5, 1}});
}

TEST_CASE("interval_histogram counts sum to n - 1 on random scores") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pitch(40, 90), len(1, 12), groups(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<int>> sentences(static_cast<std::size_t>(groups(rng)));
    for (auto& sen : sentences) {
      sen.resize(static_cast<std::size_t>(len(rng)));
      for (int& m : sen) m = pitch(rng);
    }
    const PipeScore s = make_score(sentences);
    int total = 0;
    for (const auto& [k, v] : interval_histogram(s)) total += v;
    CHECK(total == static_cast<int>(s.notes.size()) - 1);
    CHECK(interval_histogram(s) == testing::brute_histogram(s.notes));
  }
}

TEST_CASE("serialize/parse round-trip") {
  for (const char* name : {"song_a.json", "song_b.json"}) {
    const PipeScore s = load_score_file(testing::song_path(name));
    CHECK(parse_score(serialize_score(s)) == s);
  }
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pitch(48, 84), len(1, 9);
  std::uniform_real_distribution<double> frac(0.01, 1.0), tempo(40.0, 200.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<int>> sentences(3);
    for (auto& sen : sentences) {
      sen.resize(static_cast<std::size_t>(len(rng)));
      for (int& m : sen) m = pitch(rng);
    }
    PipeScore s = make_score(sentences, 250 + 50 * (trial % 7));
    s.tempo_bpm = std::min(tempo(rng), 120.0);
    s.measures = std::max<int>(1, static_cast<int>(std::ceil(static_cast<double>(s.notes.back().end()) / s.measure_ms())));
    for (auto& h : s.hints) h.target_fraction = frac(rng);
    s.title = "take \"" + std::to_string(trial) + "\" é";
    REQUIRE_NOTHROW(check_invariants(s));
    CHECK(parse_score(serialize_score(s)) == s);
  }
}

TEST_CASE("measure arithmetic") {
  const PipeScore s = load_score_file(testing::song_path("song_a.json"));
  CHECK(s.beat_ms() == doctest::Approx(600.0));
  CHECK(s.length_ms() == 19200);
  CHECK(s.measure_start(1) == 0);
  CHECK(s.measure_start(3) == 4800);
  CHECK(s.measure_start(8) == 16800);
}

TEST_CASE("solfa labels follow movable do on C") {
  CHECK(solfa_for(60) == "do");
  CHECK(solfa_for(62) == "re");
  CHECK(solfa_for(57) == "la");
  CHECK(solfa_for(72) == "do");
  const PipeScore s = load_score_file(testing::song_path("song_a.json"));
  for (const auto& n : s.notes) CHECK(n.syllable == solfa_for(n.midi));
}

}  // TEST_SUITE
