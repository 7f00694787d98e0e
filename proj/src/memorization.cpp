#include "engram/memorization.hpp"

#include "engram/error.hpp"

#include <algorithm>
#include <chrono>
#include <regex>
#include <set>

namespace engram {

std::int64_t wall_clock_ms(std::int64_t) {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

ParsedEntry parse_semantic_entry(const std::string& text) {
    static const std::regex pattern(
        R"(^\s*Equivalence\s*:\s*(<(?:face|voice)_\d+>)\s*,\s*(<(?:face|voice)_\d+>)\s*\.?\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) return PlainEntry{text};

    const auto a = NodeId::parse(m[1].str());
    const auto b = NodeId::parse(m[2].str());
    if (!a || !b) return PlainEntry{text};
    if (a->kind == b->kind) {
        fail(ErrorKind::format, "equivalence needs one face and one voice: \"" + text + "\"");
    }
    return a->kind == NodeKind::face ? Equivalence{*a, *b} : Equivalence{*b, *a};
}

std::vector<MemoryEntry> FixtureGenerator::generate(const GenerationContext& context) {
    return context.input.generated.value_or(std::vector<MemoryEntry>{});
}

LocalTagRewrite rewrite_local_tags(const std::string& text, const std::map<std::string, NodeId>& matched,
                                   const std::set<std::string>* declared) {
    LocalTagRewrite out;
    std::size_t cursor = 0;
    while (cursor < text.size()) {
        const std::size_t open = text.find('{', cursor);
        if (open == std::string::npos) break;
        const std::size_t close = text.find('}', open + 1);
        if (close == std::string::npos) break;
        const std::string tag = text.substr(open + 1, close - open - 1);
        out.text.append(text, cursor, open - cursor);
        if (auto it = matched.find(tag); it != matched.end()) {
            out.text += it->second.str();
        } else if (declared != nullptr && declared->count(tag) == 0) {
            out.text.append(text, open, close - open + 1);
        } else {
            out.text.append(text, open, close - open + 1);
            out.unknown_tags.push_back(tag);
        }
        cursor = close + 1;
    }
    out.text.append(text, std::min(cursor, text.size()), std::string::npos);
    return out;
}

namespace {

std::vector<NodeId> entity_references(const std::string& text) {
    static const std::regex token(R"(<(?:face|voice)_\d+>)");
    std::vector<NodeId> ids;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), token); it != std::sregex_iterator(); ++it) {
        if (auto id = NodeId::parse(it->str())) ids.push_back(*id);
    }
    return ids;
}

} // namespace

IngestReport ingest_clip(MemoryGraph& graph, const ClipInput& input, MemoryGenerator& generator,
                         const Embedder& embedder, const IngestConfig& config) {
    if (input.clip_index < 0) fail(ErrorKind::invalid_argument, "clip index must be non-negative");
    if (graph.has_clip(input.clip_index)) {
        fail(ErrorKind::conflict, clip_token(input.clip_index) + " was already ingested");
    }
    if (embedder.dimension() != graph.config().text_dim) {
        fail(ErrorKind::configuration, "embedder dimension " + std::to_string(embedder.dimension()) +
                                           " does not match graph text dimension " +
                                           std::to_string(graph.config().text_dim));
    }
    std::set<std::string> declared_tags;
    for (const auto& o : input.observations) {
        if (!declared_tags.insert(o.tag).second) fail(ErrorKind::invalid_argument, "duplicate local tag " + o.tag);
    }

    const std::int64_t now = config.clock ? config.clock(input.clip_index) : wall_clock_ms(input.clip_index);
    MemoryGraph work = graph;
    IngestReport report;
    report.clip_index = input.clip_index;

    // 1. Resolve observations to entity nodes.
    for (const auto& tagged : input.observations) {
        FeatureObservation obs = tagged.observation;
        obs.clip_index = input.clip_index;
        if (obs.modality == NodeKind::voice) {
            obs.segments = filter_voice_segments(obs.segments, config.identity.min_segment_s);
            if (obs.segments.empty()) {
                report.dropped_observations.push_back(tagged.tag);
                continue;
            }
        }
        const MatchResult m = match_or_create(work, obs, config.identity, now);
        report.matched.emplace(tagged.tag, m.id);
        if (m.created) report.created_nodes.push_back(m.id);
    }

    // 2. Generate entries over the ids available in this clip.
    GenerationContext context{input, report.matched, {}};
    for (const auto& [tag, id] : report.matched) context.available.push_back(id);
    std::sort(context.available.begin(), context.available.end());
    context.available.erase(std::unique(context.available.begin(), context.available.end()), context.available.end());
    const std::vector<MemoryEntry> entries = generator.generate(context);

    // 3. Store: equivalences become edge weight, everything else a text node.
    work.ensure_clip(input.clip_index);
    const std::set<NodeId> available(context.available.begin(), context.available.end());
    for (const auto& entry : entries) {
        const LocalTagRewrite rewritten = rewrite_local_tags(entry.text, report.matched, &declared_tags);
        if (!rewritten.unknown_tags.empty()) {
            report.rejected_entries.push_back({entry.text, "unknown local tag {" + rewritten.unknown_tags.front() + "}"});
            continue;
        }
        const auto refs = entity_references(rewritten.text);
        auto missing = std::find_if(refs.begin(), refs.end(), [&](NodeId id) { return available.count(id) == 0; });
        if (missing != refs.end()) {
            report.rejected_entries.push_back({rewritten.text, "references unavailable id " + missing->str()});
            continue;
        }
        if (rewritten.text.find_first_not_of(" \t\r\n") == std::string::npos) {
            report.rejected_entries.push_back({entry.text, "empty entry"});
            continue;
        }

        ParsedEntry parsed;
        try {
            parsed = parse_semantic_entry(rewritten.text);
        } catch (const Error& e) {
            report.rejected_entries.push_back({rewritten.text, e.what()});
            continue;
        }
        if (const auto* eq = std::get_if<Equivalence>(&parsed)) {
            const std::int64_t w = work.reinforce_edge(eq->face, eq->voice, EdgeKind::equivalence);
            report.reinforced_edges.push_back({eq->face, eq->voice, w});
        } else {
            Vector embedding = embedder.embed(rewritten.text);
            report.stored_entries.push_back(
                work.add_text_entry(input.clip_index, entry.kind, rewritten.text, std::move(embedding), now));
        }
    }

    // Short clips resolved to global ids for meta-clip mining downstream.
    for (const auto& spec : input.short_clips) {
        ShortClip sc;
        sc.index = spec.index;
        for (const auto& tag : spec.faces) {
            if (auto it = report.matched.find(tag); it != report.matched.end()) sc.faces.insert(it->second);
        }
        for (const auto& tag : spec.voices) {
            if (auto it = report.matched.find(tag); it != report.matched.end()) sc.voices.insert(it->second);
        }
        report.short_clips.push_back(std::move(sc));
    }

    // 4. Publish.
    graph = std::move(work);
    return report;
}

std::vector<IngestReport> ingest_stream(MemoryGraph& graph, std::span<const ClipInput> inputs,
                                        MemoryGenerator& generator, const Embedder& embedder,
                                        const IngestConfig& config) {
    std::vector<IngestReport> reports;
    reports.reserve(inputs.size());
    for (const auto& input : inputs) {
        try {
            reports.push_back(ingest_clip(graph, input, generator, embedder, config));
        } catch (const std::exception& e) {
            IngestReport failed;
            failed.clip_index = input.clip_index;
            failed.rejected = true;
            failed.reason = e.what();
            reports.push_back(std::move(failed));
        }
    }
    return reports;
}

} // namespace engram
