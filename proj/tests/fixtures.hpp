// Random inputs shared by the unit tests and the acceptance run.
#pragma once

#include "engram/memory_graph.hpp"
#include "oracles.hpp"

#include <random>
#include <string>
#include <vector>

namespace fixtures {

using namespace engram;

// Mixed mutations over every node kind, edge kind and clip.
inline MemoryGraph random_graph(std::mt19937_64& rng, int mutations) {
    MemoryGraph g(GraphConfig{8, 4, 6, 3});
    auto vec = [&](std::size_t dim) { return oracle::random_unit(dim, rng); };
    for (int i = 0; i < mutations; ++i) {
        const auto faces = g.nodes_of(NodeKind::face), voices = g.nodes_of(NodeKind::voice);
        switch (rng() % 6) {
        case 0:
            g.add_text_entry(static_cast<std::int64_t>(rng() % 5), rng() % 2 ? EntryKind::episodic : EntryKind::semantic,
                             "entry \"" + std::to_string(rng()) + "\" \xe2\x9c\x93", vec(8),
                             static_cast<std::int64_t>(rng() % 100000));
            break;
        case 1: g.add_entity_node(NodeKind::face, {vec(4)}, static_cast<std::int64_t>(rng() % 5)); break;
        case 2: g.add_entity_node(NodeKind::voice, {vec(6), vec(6)}); break;
        case 3:
            if (!faces.empty() && !voices.empty()) {
                g.reinforce_edge(faces[rng() % faces.size()]->id, voices[rng() % voices.size()]->id,
                                 rng() % 2 ? EdgeKind::equivalence : EdgeKind::generic);
            }
            break;
        case 4:
            if (!faces.empty()) g.append_snapshot(faces[rng() % faces.size()]->id, vec(4));
            break;
        case 5: g.ensure_clip(static_cast<std::int64_t>(rng() % 9)); break;
        }
    }
    return g;
}

inline const std::vector<std::string>& words() {
    static const std::vector<std::string> w{"tea", "red", "folder", "plant", "bread", "coat", "runs", "sings"};
    return w;
}

// Up to 30 clips of short entity-tagged entries over a small vocabulary, plus equivalence edges.
inline MemoryGraph random_clip_graph(std::mt19937_64& rng, const Embedder& embedder) {
    MemoryGraph g(GraphConfig{embedder.dimension(), 8, 8, 10});
    const std::size_t faces = 1 + rng() % 4, voices = 1 + rng() % 4;
    for (std::size_t i = 0; i < faces; ++i) g.add_entity_node(NodeKind::face, {normalized(Vector(8, 1.0f))});
    for (std::size_t i = 0; i < voices; ++i) g.add_entity_node(NodeKind::voice, {normalized(Vector(8, 1.0f))});
    for (int e = 0; e < 4; ++e) {
        g.reinforce_edge(NodeId::face(rng() % faces), NodeId::voice(rng() % voices), EdgeKind::equivalence);
    }
    const std::size_t clips = 1 + rng() % 30;
    for (std::size_t c = 0; c < clips; ++c) {
        const std::size_t n = rng() % 4;
        if (n == 0) g.ensure_clip(static_cast<std::int64_t>(c));
        for (std::size_t i = 0; i < n; ++i) {
            std::string text = rng() % 2 ? NodeId::face(rng() % faces).str() : NodeId::voice(rng() % voices).str();
            text += " " + words()[rng() % words().size()] + " " + words()[rng() % words().size()];
            g.add_text_entry(static_cast<std::int64_t>(c), rng() % 2 ? EntryKind::episodic : EntryKind::semantic, text,
                             embedder.embed(text));
        }
    }
    return g;
}

inline std::string random_query(std::mt19937_64& rng) {
    std::string q = words()[rng() % words().size()];
    if (rng() % 2) q = character_token(rng() % 3) + " " + q;
    return q;
}

} // namespace fixtures
