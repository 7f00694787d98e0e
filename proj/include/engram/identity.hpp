#pragma once

#include "engram/embedding.hpp"
#include "engram/memory_graph.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace engram {

struct SpeechSegment {
    double start_s = 0.0;
    double end_s = 0.0;
    std::string transcript;

    double duration() const { return end_s - start_s; }

    friend bool operator==(const SpeechSegment&, const SpeechSegment&) = default;
};

struct FeatureObservation {
    NodeKind modality = NodeKind::face;
    Vector embedding;
    std::int64_t clip_index = 0;
    std::vector<SpeechSegment> segments;  // voices only

    friend bool operator==(const FeatureObservation&, const FeatureObservation&) = default;
};

struct IdentityConfig {
    double face_threshold = 0.3;
    double voice_threshold = 0.6;
    double vote_ratio = 0.6;
    double min_segment_s = 2.0;
    std::size_t snapshot_cap = 10;

    // Throws configuration error on out-of-range values.
    void validate() const;
    double threshold_for(NodeKind kind) const;
};

// Keeps segments lasting at least min_segment_s.
std::vector<SpeechSegment> filter_voice_segments(const std::vector<SpeechSegment>& segments,
                                                 double min_segment_s = 2.0);

struct MatchResult {
    NodeId id;
    bool created = false;
    double similarity = 0.0;  // best average similarity found, or 0 for an empty candidate set
};

// Matches against same-modality nodes. The best average similarity must strictly exceed
// the modality threshold; a match appends the observation as a snapshot and bumps the weight.
MatchResult match_or_create(MemoryGraph& graph, const FeatureObservation& obs, const IdentityConfig& config,
                            std::optional<std::int64_t> timestamp_ms = std::nullopt);

struct ShortClip {
    std::int64_t index = 0;
    std::set<NodeId> faces;
    std::set<NodeId> voices;

    friend bool operator==(const ShortClip&, const ShortClip&) = default;
};

struct MetaClip {
    std::int64_t clip = 0;
    NodeId face;
    NodeId voice;

    friend bool operator==(const MetaClip&, const MetaClip&) = default;
};

// Short clips with exactly one face and one voice, in input order.
std::vector<MetaClip> extract_meta_clips(const std::vector<ShortClip>& clips);

using MetaDictionary = std::map<NodeId, NodeId>;  // voice -> face

// Bipartite co-occurrence voting: drop weight-1 pairs, keep each face's dominant voice
// when its share reaches vote_ratio, then keep each voice's heaviest remaining face.
MetaDictionary build_meta_dictionary(const std::vector<MetaClip>& meta_clips, double vote_ratio = 0.6);

struct EquivalenceAnnotation {
    bool rejected = false;
    std::string reason;
    std::vector<std::string> entries;
};

std::string equivalence_entry(NodeId face, NodeId voice);

// Rejects the clip when any voice is missing from the dictionary; otherwise emits
// "Equivalence: <face>, <voice>" for every voice whose mapped face appears in the clip.
EquivalenceAnnotation annotate_equivalence(const std::set<NodeId>& clip_faces, const std::set<NodeId>& clip_voices,
                                           const MetaDictionary& dictionary);

} // namespace engram
