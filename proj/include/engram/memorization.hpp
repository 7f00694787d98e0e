#pragma once

#include "engram/embedding.hpp"
#include "engram/identity.hpp"
#include "engram/memory_graph.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace engram {

struct TaggedObservation {
    std::string tag;  // local to the clip, referenced as {tag} in fixture entries
    FeatureObservation observation;

    friend bool operator==(const TaggedObservation&, const TaggedObservation&) = default;
};

struct ShortClipSpec {
    std::int64_t index = 0;
    std::vector<std::string> faces;
    std::vector<std::string> voices;

    friend bool operator==(const ShortClipSpec&, const ShortClipSpec&) = default;
};

struct MemoryEntry {
    EntryKind kind = EntryKind::episodic;
    std::string text;

    friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

struct ClipInput {
    std::int64_t clip_index = 0;
    std::vector<TaggedObservation> observations;
    std::vector<ShortClipSpec> short_clips;
    std::optional<std::vector<MemoryEntry>> generated;

    friend bool operator==(const ClipInput&, const ClipInput&) = default;
};

struct Equivalence {
    NodeId face;
    NodeId voice;

    friend bool operator==(const Equivalence&, const Equivalence&) = default;
};

struct PlainEntry {
    std::string text;

    friend bool operator==(const PlainEntry&, const PlainEntry&) = default;
};

using ParsedEntry = std::variant<Equivalence, PlainEntry>;

// Recognizes "Equivalence: <face_x>, <voice_y>" in either id order, tolerating whitespace.
// Throws Error{format} when both ids have the same modality.
ParsedEntry parse_semantic_entry(const std::string& text);

struct GenerationContext {
    const ClipInput& input;
    std::map<std::string, NodeId> matched;  // local tag -> global id
    std::vector<NodeId> available;          // distinct ids matched in this clip, sorted
};

class MemoryGenerator {
public:
    virtual ~MemoryGenerator() = default;
    virtual std::vector<MemoryEntry> generate(const GenerationContext& context) = 0;
};

// Replays the entries shipped inside the ClipInput.
class FixtureGenerator final : public MemoryGenerator {
public:
    std::vector<MemoryEntry> generate(const GenerationContext& context) override;
};

struct LocalTagRewrite {
    std::string text;
    std::vector<std::string> unknown_tags;
};

// {tag} -> rendered global id. With `declared`, braces around anything that is not a
// declared tag are left alone; a declared tag without a match is reported as unknown.
LocalTagRewrite rewrite_local_tags(const std::string& text, const std::map<std::string, NodeId>& matched,
                                   const std::set<std::string>* declared = nullptr);

struct ReinforcedEdge {
    NodeId face;
    NodeId voice;
    std::int64_t weight = 0;

    friend bool operator==(const ReinforcedEdge&, const ReinforcedEdge&) = default;
};

struct RejectedEntry {
    std::string text;
    std::string reason;

    friend bool operator==(const RejectedEntry&, const RejectedEntry&) = default;
};

struct IngestReport {
    std::int64_t clip_index = 0;
    std::map<std::string, NodeId> matched;
    std::vector<NodeId> created_nodes;
    std::vector<NodeId> stored_entries;
    std::vector<ReinforcedEdge> reinforced_edges;
    std::vector<RejectedEntry> rejected_entries;
    std::vector<std::string> dropped_observations;
    std::vector<ShortClip> short_clips;  // resolved to global ids
    bool rejected = false;
    std::string reason;

    friend bool operator==(const IngestReport&, const IngestReport&) = default;
};

// Timestamp source for stored nodes, given the clip being ingested.
using Clock = std::function<std::int64_t(std::int64_t clip_index)>;

std::int64_t wall_clock_ms(std::int64_t clip_index);

struct IngestConfig {
    IdentityConfig identity;
    Clock clock = wall_clock_ms;
};

// All-or-nothing: on any exception the graph is left untouched.
// Throws Error{conflict} when the clip index was already ingested.
IngestReport ingest_clip(MemoryGraph& graph, const ClipInput& input, MemoryGenerator& generator,
                         const Embedder& embedder, const IngestConfig& config);

// Sequential ingest_clip; a failing clip yields a rejected report and the stream continues.
std::vector<IngestReport> ingest_stream(MemoryGraph& graph, std::span<const ClipInput> inputs,
                                        MemoryGenerator& generator, const Embedder& embedder,
                                        const IngestConfig& config);

} // namespace engram
