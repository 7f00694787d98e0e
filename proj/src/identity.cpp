#include "engram/identity.hpp"

#include "engram/error.hpp"

#include <algorithm>

namespace engram {

void IdentityConfig::validate() const {
    auto in_unit = [](double t) { return t > 0.0 && t <= 1.0; };
    if (!in_unit(face_threshold) || !in_unit(voice_threshold)) {
        fail(ErrorKind::configuration, "identity thresholds must lie in (0, 1]");
    }
    if (!(vote_ratio > 0.5 && vote_ratio <= 1.0)) fail(ErrorKind::configuration, "vote_ratio must lie in (0.5, 1]");
    if (!(min_segment_s >= 0.0)) fail(ErrorKind::configuration, "min_segment_s must be non-negative");
    if (snapshot_cap == 0) fail(ErrorKind::configuration, "snapshot_cap must be positive");
}

double IdentityConfig::threshold_for(NodeKind kind) const {
    return kind == NodeKind::voice ? voice_threshold : face_threshold;
}

std::vector<SpeechSegment> filter_voice_segments(const std::vector<SpeechSegment>& segments, double min_segment_s) {
    std::vector<SpeechSegment> kept;
    for (const auto& s : segments) {
        if (s.duration() >= min_segment_s) kept.push_back(s);
    }
    return kept;
}

MatchResult match_or_create(MemoryGraph& graph, const FeatureObservation& obs, const IdentityConfig& config,
                            std::optional<std::int64_t> timestamp_ms) {
    if (obs.modality == NodeKind::text) fail(ErrorKind::invalid_argument, "observations are face or voice");
    if (!is_unit(obs.embedding)) fail(ErrorKind::invalid_argument, "observation embedding must be unit-norm");

    const NodeId* best_id = nullptr;
    double best = 0.0;
    for (const MemoryNode* node : graph.nodes_of(obs.modality)) {
        const double s = average_similarity(obs.embedding, node->embeddings);
        // Candidates come in ordinal order, so strict > keeps the lowest ordinal on ties.
        if (best_id == nullptr || s > best) {
            best = s;
            best_id = &node->id;
        }
    }

    if (best_id != nullptr && best > config.threshold_for(obs.modality)) {
        const NodeId id = *best_id;
        graph.append_snapshot(id, obs.embedding, config.snapshot_cap);
        graph.update_node(id, std::nullopt, 1);
        return MatchResult{id, false, best};
    }
    const NodeId id = graph.add_entity_node(obs.modality, {obs.embedding}, obs.clip_index, timestamp_ms);
    return MatchResult{id, true, best_id == nullptr ? 0.0 : best};
}

std::vector<MetaClip> extract_meta_clips(const std::vector<ShortClip>& clips) {
    std::vector<MetaClip> out;
    for (const auto& c : clips) {
        if (c.faces.size() == 1 && c.voices.size() == 1) out.push_back({c.index, *c.faces.begin(), *c.voices.begin()});
    }
    return out;
}

MetaDictionary build_meta_dictionary(const std::vector<MetaClip>& meta_clips, double vote_ratio) {
    if (!(vote_ratio > 0.5 && vote_ratio <= 1.0)) fail(ErrorKind::invalid_argument, "vote_ratio must lie in (0.5, 1]");

    // Co-occurrence weights, then drop single sightings.
    std::map<NodeId, std::map<NodeId, std::int64_t>> by_face;
    for (const auto& m : meta_clips) ++by_face[m.face][m.voice];
    for (auto& [face, voices] : by_face) std::erase_if(voices, [](const auto& e) { return e.second == 1; });

    // Face side: the dominant voice survives only with a large enough share of the votes.
    std::map<NodeId, std::map<NodeId, std::int64_t>> by_voice;
    for (const auto& [face, voices] : by_face) {
        if (voices.empty()) continue;
        std::int64_t total = 0;
        auto top = voices.begin();
        for (auto it = voices.begin(); it != voices.end(); ++it) {
            total += it->second;
            if (it->second > top->second) top = it;  // map order keeps the lowest voice on ties
        }
        if (static_cast<double>(top->second) / static_cast<double>(total) >= vote_ratio) {
            by_voice[top->first][face] = top->second;
        }
    }

    // Voice side: one face per voice.
    MetaDictionary dictionary;
    for (const auto& [voice, faces] : by_voice) {
        auto top = faces.begin();
        for (auto it = faces.begin(); it != faces.end(); ++it) {
            if (it->second > top->second) top = it;
        }
        dictionary.emplace(voice, top->first);
    }
    return dictionary;
}

std::string equivalence_entry(NodeId face, NodeId voice) {
    return "Equivalence: " + face.str() + ", " + voice.str();
}

EquivalenceAnnotation annotate_equivalence(const std::set<NodeId>& clip_faces, const std::set<NodeId>& clip_voices,
                                           const MetaDictionary& dictionary) {
    EquivalenceAnnotation result;
    for (NodeId v : clip_voices) {
        if (dictionary.count(v) == 0) {
            result.rejected = true;
            result.reason = "voice " + v.str() + " is not in the meta-dictionary";
            return result;
        }
    }
    for (NodeId v : clip_voices) {
        const NodeId f = dictionary.at(v);
        if (clip_faces.count(f) != 0) result.entries.push_back(equivalence_entry(f, v));
    }
    return result;
}

} // namespace engram
