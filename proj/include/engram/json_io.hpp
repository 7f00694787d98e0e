#pragma once

#include "engram/control.hpp"
#include "engram/memorization.hpp"
#include "engram/retrieval.hpp"

#include <json.hpp>

#include <istream>
#include <string>
#include <vector>

namespace engram {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

// Decoders throw Error{parse} whose message starts with the JSON pointer of the bad field.

json to_json(const ClipInput& input);
ClipInput clip_input_from_json(const json& j);

json to_json(const IngestReport& report);
IngestReport ingest_report_from_json(const json& j);

json to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const json& j);

json to_json(const ClipSearchResult& result);
ClipSearchResult clip_search_result_from_json(const json& j);

json to_json(const ScriptedPlan& plan);
ScriptedPlan scripted_plan_from_json(const json& j);

json to_json(const CharacterMap& characters);
CharacterMap character_map_from_json(const json& j);

json to_json(const ShortClip& clip);
ShortClip short_clip_from_json(const json& j);

// Reads non-empty lines as JSON documents; parse errors carry the 1-based line number.
std::vector<json> read_json_lines(std::istream& in);

NodeId node_id_from_json(const json& j);

} // namespace engram
