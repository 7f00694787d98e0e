#include "engram/error.hpp"
#include "engram/memory_graph.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace engram;

namespace {

Vector unit(std::size_t dim, std::size_t axis) {
    Vector v(dim, 0.0f);
    v[axis] = 1.0f;
    return v;
}

MemoryGraph small_graph() {
    return MemoryGraph(GraphConfig{8, 8, 8, 10});
}

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an engram::Error");
    return ErrorKind::parse;
}

} // namespace

TEST_CASE("node ids render and parse") {
    CHECK(NodeId::text(4).str() == "TEXT_4");
    CHECK(NodeId::face(0).str() == "<face_0>");
    CHECK(NodeId::voice(12).str() == "<voice_12>");
    CHECK(character_token(3) == "<character_3>");
    for (NodeId id : {NodeId::text(0), NodeId::face(17), NodeId::voice(123456789)}) {
        CHECK(NodeId::parse(id.str()) == id);
    }
    CHECK_FALSE(NodeId::parse("<face_01>"));
    CHECK_FALSE(NodeId::parse("<face_>"));
    CHECK_FALSE(NodeId::parse("face_1"));
    CHECK_FALSE(NodeId::parse("TEXT_-1"));
}

TEST_CASE("first text entry creates TEXT_0 and its clip") {
    auto g = small_graph();
    const NodeId id = g.add_text_entry(0, EntryKind::episodic, "hello", unit(8, 0));
    CHECK(id == NodeId::text(0));
    REQUIRE(g.find_clip(0) != nullptr);
    CHECK(g.find_clip(0)->episodic == std::vector<NodeId>{id});
    CHECK(g.node(id).weight == 1);
    CHECK(g.node(id).embeddings.size() == 1);
    CHECK(g.node(id).extra.at("clip_index") == "0");
}

TEST_CASE("entries keep insertion order and are never deduplicated") {
    auto g = small_graph();
    const NodeId a = g.add_text_entry(5, EntryKind::semantic, "same", unit(8, 1));
    const NodeId b = g.add_text_entry(5, EntryKind::semantic, "same", unit(8, 1));
    CHECK(a != b);
    CHECK(g.find_clip(5)->semantic == std::vector<NodeId>{a, b});

    // Replay into a plain list and compare.
    std::mt19937_64 rng(7);
    std::vector<std::pair<std::int64_t, std::string>> list;
    for (int i = 0; i < 40; ++i) {
        const std::int64_t clip = static_cast<std::int64_t>(rng() % 4);
        const std::string text = "t" + std::to_string(rng() % 3);
        g.add_text_entry(clip, EntryKind::episodic, text, unit(8, rng() % 8));
        list.emplace_back(clip, text);
    }
    std::map<std::int64_t, std::vector<std::string>> expected;
    for (auto& [c, t] : list) expected[c].push_back(t);
    for (auto& [c, texts] : expected) {
        std::vector<std::string> got;
        for (NodeId id : g.find_clip(c)->episodic) got.push_back(g.node(id).text);
        CHECK(got == texts);
    }
}

TEST_CASE("dimension mismatch is a configuration error") {
    auto g = small_graph();
    CHECK(kind_of([&] { g.add_text_entry(0, EntryKind::episodic, "x", unit(4, 0)); }) == ErrorKind::configuration);
    CHECK(kind_of([&] { g.add_entity_node(NodeKind::face, {unit(5, 0)}); }) == ErrorKind::configuration);
}

TEST_CASE("entity ordinals are monotone per modality") {
    auto g = small_graph();
    CHECK(g.add_entity_node(NodeKind::face, {unit(8, 0)}) == NodeId::face(0));
    CHECK(g.add_entity_node(NodeKind::voice, {unit(8, 0)}) == NodeId::voice(0));
    CHECK(g.add_entity_node(NodeKind::voice, {unit(8, 1)}) == NodeId::voice(1));
    CHECK(g.add_entity_node(NodeKind::face, {unit(8, 2)}) == NodeId::face(1));
    CHECK(kind_of([&] { g.add_entity_node(NodeKind::face, {}); }) == ErrorKind::invalid_argument);
    std::vector<Vector> too_many(11, unit(8, 0));
    CHECK(kind_of([&] { g.add_entity_node(NodeKind::face, too_many); }) == ErrorKind::invalid_argument);
}

TEST_CASE("reinforce_edge is symmetric and counts calls") {
    auto g = small_graph();
    for (int i = 0; i < 8; ++i) g.add_entity_node(NodeKind::face, {unit(8, 0)});
    for (int i = 0; i < 4; ++i) g.add_entity_node(NodeKind::voice, {unit(8, 0)});
    const NodeId v3 = NodeId::voice(3), f0 = NodeId::face(0);
    g.reinforce_edge(v3, f0, EdgeKind::equivalence);
    g.reinforce_edge(v3, f0, EdgeKind::equivalence);
    CHECK(g.reinforce_edge(v3, f0, EdgeKind::equivalence) == 3);

    CHECK(g.reinforce_edge(NodeId::face(1), NodeId::voice(1), EdgeKind::equivalence) == 1);
    CHECK(g.reinforce_edge(NodeId::voice(1), NodeId::face(1), EdgeKind::equivalence) == 2);
    CHECK(g.edges().size() == 2);

    CHECK(kind_of([&] { g.reinforce_edge(NodeId::face(1), NodeId::face(2), EdgeKind::equivalence); }) ==
          ErrorKind::invalid_argument);
    CHECK(kind_of([&] { g.reinforce_edge(NodeId::face(1), NodeId::voice(40), EdgeKind::equivalence); }) ==
          ErrorKind::not_found);
}

TEST_CASE("edge lookup is symmetric on random graphs") {
    std::mt19937_64 rng(11);
    auto g = small_graph();
    for (int i = 0; i < 6; ++i) g.add_entity_node(NodeKind::face, {unit(8, 0)});
    for (int i = 0; i < 6; ++i) g.add_entity_node(NodeKind::voice, {unit(8, 0)});
    for (int i = 0; i < 200; ++i) {
        const NodeId f = NodeId::face(rng() % 6), v = NodeId::voice(rng() % 6);
        if (rng() % 2) g.reinforce_edge(f, v, EdgeKind::equivalence);
        else g.reinforce_edge(v, f, EdgeKind::equivalence);
    }
    for (std::uint64_t a = 0; a < 6; ++a) {
        for (std::uint64_t b = 0; b < 6; ++b) {
            CHECK(g.edge_weight(NodeId::face(a), NodeId::voice(b), EdgeKind::equivalence) ==
                  g.edge_weight(NodeId::voice(b), NodeId::face(a), EdgeKind::equivalence));
        }
    }
}

TEST_CASE("update_node") {
    auto g = small_graph();
    const NodeId t = g.add_text_entry(0, EntryKind::episodic, "old", unit(8, 0));
    g.update_node(t, std::nullopt, 1);
    CHECK(g.node(t).weight == 2);
    g.update_node(t, std::nullopt, -1);
    CHECK(kind_of([&] { g.update_node(t, std::nullopt, -1); }) == ErrorKind::invalid_argument);
    CHECK(g.node(t).weight == 1);
    g.update_node(t, std::string("new"), std::nullopt);
    CHECK(g.node(t).text == "new");
    CHECK(kind_of([&] { g.update_node(NodeId::text(9), std::nullopt, 1); }) == ErrorKind::not_found);
}

TEST_CASE("snapshots are capped oldest first") {
    auto g = MemoryGraph(GraphConfig{8, 8, 8, 3});
    const NodeId f = g.add_entity_node(NodeKind::face, {unit(8, 0)});
    for (std::size_t i = 1; i < 6; ++i) g.append_snapshot(f, unit(8, i));
    const auto& snaps = g.node(f).embeddings;
    REQUIRE(snaps.size() == 3);
    CHECK(snaps[0] == unit(8, 3));
    CHECK(snaps[2] == unit(8, 5));
}

TEST_CASE("resolve_characters: heavier edge wins the voice") {
    auto g = small_graph();
    for (int i = 0; i < 8; ++i) g.add_entity_node(NodeKind::face, {unit(8, 0)});
    for (int i = 0; i < 4; ++i) g.add_entity_node(NodeKind::voice, {unit(8, 0)});
    for (int i = 0; i < 3; ++i) g.reinforce_edge(NodeId::voice(3), NodeId::face(0), EdgeKind::equivalence);
    g.reinforce_edge(NodeId::voice(3), NodeId::face(7), EdgeKind::equivalence);

    const CharacterMap m = resolve_characters(g);
    CHECK(m.character_of(NodeId::voice(3)) == m.character_of(NodeId::face(0)));
    CHECK(m.character_of(NodeId::face(7)) != m.character_of(NodeId::face(0)));
    CHECK(m.character_of(NodeId::face(0)) == 0u);
    CHECK(m.assignments().size() == 12);
}

TEST_CASE("resolve_characters small cases") {
    CHECK(resolve_characters(small_graph()).empty());

    auto g = small_graph();
    g.add_entity_node(NodeKind::face, {unit(8, 0)});
    g.add_entity_node(NodeKind::face, {unit(8, 1)});
    const CharacterMap m = resolve_characters(g);
    CHECK(m.character_of(NodeId::face(0)) == 0u);
    CHECK(m.character_of(NodeId::face(1)) == 1u);

    // Equal weights: the lower face ordinal wins.
    auto h = small_graph();
    h.add_entity_node(NodeKind::face, {unit(8, 0)});
    h.add_entity_node(NodeKind::face, {unit(8, 0)});
    h.add_entity_node(NodeKind::voice, {unit(8, 0)});
    h.reinforce_edge(NodeId::face(1), NodeId::voice(0), EdgeKind::equivalence);
    h.reinforce_edge(NodeId::face(0), NodeId::voice(0), EdgeKind::equivalence);
    const CharacterMap n = resolve_characters(h);
    CHECK(n.character_of(NodeId::voice(0)) == n.character_of(NodeId::face(0)));
    CHECK(n.character_of(NodeId::face(1)) != n.character_of(NodeId::face(0)));
}

TEST_CASE("resolve_characters agrees with the component oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        auto g = small_graph();
        const std::size_t faces = 1 + rng() % 20, voices = 1 + rng() % 20;
        for (std::size_t i = 0; i < faces; ++i) g.add_entity_node(NodeKind::face, {unit(8, 0)});
        for (std::size_t i = 0; i < voices; ++i) g.add_entity_node(NodeKind::voice, {unit(8, 0)});
        const std::size_t edges = rng() % 40;
        for (std::size_t e = 0; e < edges; ++e) {
            g.reinforce_edge(NodeId::face(rng() % faces), NodeId::voice(rng() % voices), EdgeKind::equivalence);
        }
        const CharacterMap got = resolve_characters(g);
        CHECK(got.assignments() == oracle::characters(g));
        CHECK(resolve_characters(g) == got);

        // Soundness: each ordinal is one group, every entity assigned once.
        std::size_t members = 0;
        for (const auto& group : got.groups()) members += group.size();
        CHECK(members == faces + voices);
        CHECK(got.character_count() == got.groups().size());
    }
}
