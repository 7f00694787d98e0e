#include "engram/json_io.hpp"

#include "engram/error.hpp"

#include <cmath>
#include <limits>

namespace engram {

namespace {

// Cursor into a JSON document that remembers its pointer for error messages.
class View {
public:
    View(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const json& raw() const { return j_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void error(const std::string& what) const {
        fail(ErrorKind::parse, (path_.empty() ? std::string("/") : path_) + ": " + what);
    }

    View at(std::string_view key) const {
        if (!j_.is_object()) error("expected an object");
        auto it = j_.find(std::string(key));
        const std::string p = path_ + "/" + std::string(key);
        if (it == j_.end()) fail(ErrorKind::parse, p + ": missing field");
        return View(*it, p);
    }

    std::optional<View> maybe(std::string_view key) const {
        if (!j_.is_object()) error("expected an object");
        auto it = j_.find(std::string(key));
        if (it == j_.end() || it->is_null()) return std::nullopt;
        return View(*it, path_ + "/" + std::string(key));
    }

    View at(std::size_t i) const { return View(j_[i], path_ + "/" + std::to_string(i)); }

    std::size_t size() const {
        if (!j_.is_array()) error("expected an array");
        return j_.size();
    }

    std::string str() const {
        if (!j_.is_string()) error("expected a string");
        return j_.get<std::string>();
    }

    std::int64_t integer() const {
        if (!j_.is_number_integer()) error("expected an integer");
        return j_.get<std::int64_t>();
    }

    std::size_t count() const {
        const std::int64_t v = integer();
        if (v < 0) error("expected a non-negative integer");
        return static_cast<std::size_t>(v);
    }

    double number() const {
        if (!j_.is_number()) error("expected a number");
        return j_.get<double>();
    }

    bool boolean() const {
        if (!j_.is_boolean()) error("expected a boolean");
        return j_.get<bool>();
    }

    NodeId node_id() const {
        const auto id = NodeId::parse(str());
        if (!id) error("not a node id: " + j_.get<std::string>());
        return *id;
    }

    template <class F>
    auto list(F&& item) const {
        using T = decltype(item(std::declval<View>()));
        std::vector<T> out;
        const std::size_t n = size();
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(item(at(i)));
        return out;
    }

private:
    const json& j_;
    std::string path_;
};

void check_version(const View& v) {
    if (auto version = v.maybe("schema_version")) {
        if (version->integer() != schema_version) version->error("unsupported schema version");
    }
}

json ids_json(const auto& ids) {
    json out = json::array();
    for (NodeId id : ids) out.push_back(id.str());
    return out;
}

json segment_json(const SpeechSegment& s) {
    return {{"start_s", s.start_s}, {"end_s", s.end_s}, {"transcript", s.transcript}};
}

SpeechSegment segment_from(const View& v) {
    SpeechSegment s;
    s.start_s = v.at("start_s").number();
    s.end_s = v.at("end_s").number();
    if (auto t = v.maybe("transcript")) s.transcript = t->str();
    if (s.end_s < s.start_s) v.error("segment ends before it starts");
    return s;
}

ShortClip short_clip_from(const View& v) {
    ShortClip c;
    c.index = v.at("index").integer();
    for (NodeId id : v.at("faces").list([](const View& x) { return x.node_id(); })) c.faces.insert(id);
    for (NodeId id : v.at("voices").list([](const View& x) { return x.node_id(); })) c.voices.insert(id);
    return c;
}

ClipSearchResult clip_search_from(const View& v) {
    ClipSearchResult r;
    r.clips = v.at("clips").list([](const View& c) {
        ClipHit hit;
        hit.clip_index = c.at("clip_index").integer();
        hit.score = c.at("score").number();
        hit.episodic = c.at("episodic").list([](const View& x) { return x.str(); });
        hit.semantic = c.at("semantic").list([](const View& x) { return x.str(); });
        return hit;
    });
    r.empty_marker = r.clips.empty();
    return r;
}

} // namespace

NodeId node_id_from_json(const json& j) {
    return View(j, "").node_id();
}

json to_json(const ClipInput& input) {
    json obs = json::array();
    for (const auto& o : input.observations) {
        json item = {{"tag", o.tag},
                     {"modality", std::string(to_string(o.observation.modality))},
                     {"embedding", o.observation.embedding}};
        if (o.observation.modality == NodeKind::voice) {
            json segs = json::array();
            for (const auto& s : o.observation.segments) segs.push_back(segment_json(s));
            item["segments"] = std::move(segs);
        }
        obs.push_back(std::move(item));
    }
    json shorts = json::array();
    for (const auto& s : input.short_clips) {
        shorts.push_back({{"index", s.index}, {"faces", s.faces}, {"voices", s.voices}});
    }
    json out = {{"schema_version", schema_version},
                {"clip_index", input.clip_index},
                {"observations", std::move(obs)},
                {"short_clips", std::move(shorts)}};
    if (input.generated) {
        json entries = json::array();
        for (const auto& e : *input.generated) {
            entries.push_back({{"kind", std::string(to_string(e.kind))}, {"text", e.text}});
        }
        out["generated"] = std::move(entries);
    }
    return out;
}

ClipInput clip_input_from_json(const json& j) {
    const View v(j, "");
    check_version(v);
    ClipInput input;
    input.clip_index = v.at("clip_index").integer();
    if (input.clip_index < 0) v.at("clip_index").error("clip index must be non-negative");
    input.observations = v.at("observations").list([&](const View& o) {
        TaggedObservation t;
        t.tag = o.at("tag").str();
        if (t.tag.empty()) o.at("tag").error("empty tag");
        const View modality = o.at("modality");
        const auto kind = parse_node_kind(modality.str());
        if (!kind || *kind == NodeKind::text) modality.error("expected \"face\" or \"voice\"");
        t.observation.modality = *kind;
        t.observation.clip_index = input.clip_index;
        t.observation.embedding = o.at("embedding").list([](const View& x) {
            const double d = x.number();
            if (!std::isfinite(d)) x.error("non-finite value");
            return static_cast<float>(d);
        });
        if (auto segs = o.maybe("segments")) t.observation.segments = segs->list(segment_from);
        return t;
    });
    if (auto shorts = v.maybe("short_clips")) {
        input.short_clips = shorts->list([](const View& s) {
            ShortClipSpec spec;
            spec.index = s.at("index").integer();
            spec.faces = s.at("faces").list([](const View& x) { return x.str(); });
            spec.voices = s.at("voices").list([](const View& x) { return x.str(); });
            return spec;
        });
    }
    if (auto generated = v.maybe("generated")) {
        input.generated = generated->list([](const View& e) {
            MemoryEntry entry;
            const View kind = e.at("kind");
            const auto k = parse_entry_kind(kind.str());
            if (!k) kind.error("expected \"episodic\" or \"semantic\"");
            entry.kind = *k;
            entry.text = e.at("text").str();
            return entry;
        });
    }
    return input;
}

json to_json(const ShortClip& clip) {
    return {{"index", clip.index}, {"faces", ids_json(clip.faces)}, {"voices", ids_json(clip.voices)}};
}

ShortClip short_clip_from_json(const json& j) {
    return short_clip_from(View(j, ""));
}

json to_json(const IngestReport& report) {
    json matched = json::object();
    for (const auto& [tag, id] : report.matched) matched[tag] = id.str();
    json edges = json::array();
    for (const auto& e : report.reinforced_edges) {
        edges.push_back({{"face", e.face.str()}, {"voice", e.voice.str()}, {"weight", e.weight}});
    }
    json rejected = json::array();
    for (const auto& r : report.rejected_entries) rejected.push_back({{"text", r.text}, {"reason", r.reason}});
    json shorts = json::array();
    for (const auto& s : report.short_clips) shorts.push_back(to_json(s));
    return {{"schema_version", schema_version},
            {"clip_index", report.clip_index},
            {"matched", std::move(matched)},
            {"created_nodes", ids_json(report.created_nodes)},
            {"stored_entries", ids_json(report.stored_entries)},
            {"reinforced_edges", std::move(edges)},
            {"rejected_entries", std::move(rejected)},
            {"dropped_observations", report.dropped_observations},
            {"short_clips", std::move(shorts)},
            {"rejected", report.rejected},
            {"reason", report.reason}};
}

IngestReport ingest_report_from_json(const json& j) {
    const View v(j, "");
    check_version(v);
    IngestReport r;
    r.clip_index = v.at("clip_index").integer();
    const View matched = v.at("matched");
    if (!matched.raw().is_object()) matched.error("expected an object");
    for (const auto& [tag, id] : matched.raw().items()) r.matched.emplace(tag, View(id, matched.path() + "/" + tag).node_id());
    auto ids = [](const View& x) { return x.node_id(); };
    r.created_nodes = v.at("created_nodes").list(ids);
    r.stored_entries = v.at("stored_entries").list(ids);
    r.reinforced_edges = v.at("reinforced_edges").list([](const View& e) {
        return ReinforcedEdge{e.at("face").node_id(), e.at("voice").node_id(), e.at("weight").integer()};
    });
    r.rejected_entries = v.at("rejected_entries").list([](const View& e) {
        return RejectedEntry{e.at("text").str(), e.at("reason").str()};
    });
    r.dropped_observations = v.at("dropped_observations").list([](const View& x) { return x.str(); });
    r.short_clips = v.at("short_clips").list(short_clip_from);
    r.rejected = v.at("rejected").boolean();
    r.reason = v.at("reason").str();
    return r;
}

json to_json(const Trajectory& trajectory) {
    json messages = json::array();
    for (const auto& m : trajectory.messages) {
        messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    return {{"schema_version", schema_version},
            {"messages", std::move(messages)},
            {"final_answer", trajectory.final_answer ? json(*trajectory.final_answer) : json(nullptr)},
            {"rounds_used", trajectory.rounds_used},
            {"terminated_by", std::string(to_string(trajectory.terminated_by))}};
}

Trajectory trajectory_from_json(const json& j) {
    const View v(j, "");
    check_version(v);
    Trajectory t;
    t.messages = v.at("messages").list([](const View& m) {
        const View role = m.at("role");
        const auto r = parse_role(role.str());
        if (!r) role.error("unknown role");
        return Message{*r, m.at("content").str()};
    });
    if (auto a = v.maybe("final_answer")) t.final_answer = a->str();
    t.rounds_used = static_cast<int>(v.at("rounds_used").count());
    const View term = v.at("terminated_by");
    const auto tb = parse_termination(term.str());
    if (!tb) term.error("unknown termination");
    t.terminated_by = *tb;
    return t;
}

json to_json(const ClipSearchResult& result) {
    json clips = json::array();
    for (const auto& hit : result.clips) {
        clips.push_back({{"clip_index", hit.clip_index},
                         {"score", hit.score},
                         {"episodic", hit.episodic},
                         {"semantic", hit.semantic}});
    }
    return {{"schema_version", schema_version}, {"clips", std::move(clips)}, {"empty", result.clips.empty()}};
}

ClipSearchResult clip_search_result_from_json(const json& j) {
    const View v(j, "");
    check_version(v);
    return clip_search_from(v);
}

json to_json(const ScriptedPlan& plan) {
    json steps = json::array();
    for (const auto& s : plan.searches) {
        steps.push_back({{"query", s.query}, {"capture_pattern", s.capture_pattern}, {"capture_var", s.capture_var}});
    }
    return {{"searches", std::move(steps)},
            {"answer_pattern", plan.answer_pattern},
            {"fallback_answer", plan.fallback_answer}};
}

ScriptedPlan scripted_plan_from_json(const json& j) {
    const View v(j, "");
    ScriptedPlan plan;
    plan.searches = v.at("searches").list([](const View& s) {
        SearchStep step;
        step.query = s.at("query").str();
        if (auto c = s.maybe("capture_pattern")) step.capture_pattern = c->str();
        if (auto c = s.maybe("capture_var")) step.capture_var = c->str();
        return step;
    });
    if (auto a = v.maybe("answer_pattern")) plan.answer_pattern = a->str();
    if (auto f = v.maybe("fallback_answer")) plan.fallback_answer = f->str();
    return plan;
}

json to_json(const CharacterMap& characters) {
    json groups = json::array();
    const auto g = characters.groups();
    for (std::size_t c = 0; c < g.size(); ++c) {
        groups.push_back({{"character", character_token(c)}, {"members", ids_json(g[c])}});
    }
    return {{"schema_version", schema_version}, {"characters", std::move(groups)}};
}

CharacterMap character_map_from_json(const json& j) {
    const View v(j, "");
    check_version(v);
    CharacterMap map;
    const View groups = v.at("characters");
    for (std::size_t c = 0; c < groups.size(); ++c) {
        const View g = groups.at(c);
        const View token = g.at("character");
        if (token.str() != character_token(c)) token.error("expected " + character_token(c));
        for (NodeId id : g.at("members").list([](const View& x) { return x.node_id(); })) {
            if (!id.is_entity()) g.at("members").error("members must be face or voice ids");
            map.assign(id, c);
        }
    }
    return map;
}

std::vector<json> read_json_lines(std::istream& in) {
    std::vector<json> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            fail(ErrorKind::parse, "line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

} // namespace engram
