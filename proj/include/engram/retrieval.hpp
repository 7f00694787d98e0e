#pragma once

#include "engram/embedding.hpp"
#include "engram/memory_graph.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace engram {

struct RetrievalConfig {
    double face_threshold = 0.3;
    double voice_threshold = 0.6;
    std::size_t clip_k = 2;
    double clip_threshold = 0.5;
    std::size_t node_k = 2;
    double node_threshold = 0.5;
    // Upper bound on query rewrites when <character_k> expands to several members.
    std::size_t max_query_variants = 16;

    double threshold_for(NodeKind kind) const;
};

struct SearchQuery {
    NodeKind modality = NodeKind::text;
    std::string text;
    Vector feature;
    std::size_t k = 2;
    double threshold = 0.5;

    static SearchQuery for_text(std::string text, std::size_t k, double threshold);
    static SearchQuery for_feature(NodeKind modality, Vector feature, std::size_t k, double threshold);
};

struct ScoredNode {
    NodeId id;
    double score = 0.0;

    friend bool operator==(const ScoredNode&, const ScoredNode&) = default;
};

struct ClipHit {
    std::int64_t clip_index = 0;
    double score = 0.0;
    std::vector<std::string> episodic;
    std::vector<std::string> semantic;

    friend bool operator==(const ClipHit&, const ClipHit&) = default;
};

struct ClipSearchResult {
    std::vector<ClipHit> clips;
    bool empty_marker = true;

    friend bool operator==(const ClipSearchResult&, const ClipSearchResult&) = default;
};

inline constexpr std::string_view empty_marker_text = "[EMPTY]";
inline constexpr double no_entries_score = -std::numeric_limits<double>::infinity();

// Same-modality candidates only. Text candidates score by cosine to the embedded
// query; entity candidates by average similarity to their snapshots.
// Returns at most k nodes with score >= threshold, descending, ties by lower ordinal.
std::vector<ScoredNode> search_node(const MemoryGraph& graph, const SearchQuery& query,
                                    const Embedder& embedder);

// Max cosine over the clip's entries; -inf for a clip without entries.
double score_clip(const MemoryGraph& graph, std::int64_t clip_index, std::span<const float> query);

// Replaces <character_k> tokens by each member id, yielding one query per combination.
std::vector<std::string> expand_character_query(std::string_view query, const CharacterMap& characters,
                                                std::size_t max_variants);

ClipSearchResult search_clip(const MemoryGraph& graph, std::string_view query, const Embedder& embedder,
                             std::size_t k = 2, double threshold = 0.5,
                             std::size_t max_query_variants = 16);

std::string rewrite_entities(std::string_view text, const CharacterMap& characters);

// "CLIP_n": ["entry", ...] per clip in rank order; an empty result is exactly [EMPTY].
std::string format_results(const ClipSearchResult& result);

// "TEXT_n": "entry" per node, rewritten; [EMPTY] when none.
std::string format_node_results(const MemoryGraph& graph, const std::vector<ScoredNode>& nodes,
                                const CharacterMap& characters);

} // namespace engram
