// JSON mappings shared by the event stream and the session file.

#pragma once

#include <json.hpp>

#include "breathtutor/breath.h"
#include "breathtutor/metrics.h"
#include "breathtutor/pitch.h"

namespace breathtutor::codec {

using nlohmann::json;

json pitch_to_json(const PitchFrame& f);
PitchFrame pitch_from_json(const json& j);

json breath_to_json(const BreathSample& s);
BreathSample breath_from_json(const json& j);

json triple_to_json(const Triple& t);
Triple triple_from_json(const json& j);

json calibration_to_json(const Calibration& c);
Calibration calibration_from_json(const json& j);

json pattern_to_json(const BreathPattern& p);
BreathPattern pattern_from_json(const json& j);

json note_result_to_json(const NoteResult& r);
NoteResult note_result_from_json(const json& j);

json compliance_to_json(const HintCompliance& c);
HintCompliance compliance_from_json(const json& j);

json metrics_to_json(const TakeMetrics& m);
TakeMetrics metrics_from_json(const json& j);

}  // namespace breathtutor::codec
