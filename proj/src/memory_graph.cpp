#include "engram/memory_graph.hpp"

#include "engram/error.hpp"

#include <algorithm>
#include <numeric>

namespace engram {

std::size_t GraphConfig::dimension_of(NodeKind kind) const {
    switch (kind) {
    case NodeKind::text: return text_dim;
    case NodeKind::face: return face_dim;
    case NodeKind::voice: return voice_dim;
    }
    return text_dim;
}

std::string_view to_string(EntryKind kind) {
    return kind == EntryKind::episodic ? "episodic" : "semantic";
}

std::string_view to_string(EdgeKind kind) {
    return kind == EdgeKind::equivalence ? "equivalence" : "generic";
}

std::optional<EntryKind> parse_entry_kind(std::string_view s) {
    if (s == "episodic") return EntryKind::episodic;
    if (s == "semantic") return EntryKind::semantic;
    return std::nullopt;
}

EdgeKey EdgeKey::make(NodeId a, NodeId b, EdgeKind kind) {
    if (b < a) std::swap(a, b);
    return EdgeKey{a, b, kind};
}

std::string clip_token(std::int64_t clip_index) {
    return "CLIP_" + std::to_string(clip_index);
}

MemoryGraph::MemoryGraph(GraphConfig config) : config_(config) {
    if (config_.text_dim == 0 || config_.face_dim == 0 || config_.voice_dim == 0) {
        fail(ErrorKind::configuration, "embedding dimensions must be positive");
    }
    if (config_.snapshot_cap == 0) fail(ErrorKind::configuration, "snapshot_cap must be positive");
}

void MemoryGraph::check_vector(NodeKind kind, const Vector& v) const {
    const std::size_t want = config_.dimension_of(kind);
    if (v.size() != want) {
        fail(ErrorKind::configuration, std::string(to_string(kind)) + " vector has dimension " +
                                           std::to_string(v.size()) + ", graph expects " + std::to_string(want));
    }
}

NodeId MemoryGraph::add_text_entry(std::int64_t clip_index, EntryKind kind, std::string text, Vector embedding,
                                   std::optional<std::int64_t> timestamp_ms) {
    if (clip_index < 0) fail(ErrorKind::invalid_argument, "clip index must be non-negative");
    check_vector(NodeKind::text, embedding);

    MemoryNode node;
    node.id = NodeId::text(next_text_++);
    node.text = std::move(text);
    node.embeddings.push_back(std::move(embedding));
    node.extra[std::string(extra_clip_index)] = std::to_string(clip_index);
    if (timestamp_ms) node.extra[std::string(extra_timestamp)] = std::to_string(*timestamp_ms);

    const NodeId id = node.id;
    nodes_.emplace(id, std::move(node));
    ClipRecord& clip = ensure_clip(clip_index);
    (kind == EntryKind::episodic ? clip.episodic : clip.semantic).push_back(id);
    return id;
}

NodeId MemoryGraph::add_entity_node(NodeKind kind, std::vector<Vector> snapshots,
                                    std::optional<std::int64_t> clip_index,
                                    std::optional<std::int64_t> timestamp_ms) {
    if (kind == NodeKind::text) fail(ErrorKind::invalid_argument, "entity nodes are face or voice");
    if (snapshots.empty()) fail(ErrorKind::invalid_argument, "entity node needs at least one snapshot");
    if (snapshots.size() > config_.snapshot_cap) {
        fail(ErrorKind::invalid_argument, "entity node exceeds snapshot_cap of " + std::to_string(config_.snapshot_cap));
    }
    for (const auto& s : snapshots) check_vector(kind, s);

    MemoryNode node;
    node.id = NodeId{kind, kind == NodeKind::face ? next_face_++ : next_voice_++};
    node.embeddings = std::move(snapshots);
    if (clip_index) node.extra[std::string(extra_clip_index)] = std::to_string(*clip_index);
    if (timestamp_ms) node.extra[std::string(extra_timestamp)] = std::to_string(*timestamp_ms);
    const NodeId id = node.id;
    nodes_.emplace(id, std::move(node));
    return id;
}

std::int64_t MemoryGraph::reinforce_edge(NodeId a, NodeId b, EdgeKind kind) {
    if (!contains(a)) fail(ErrorKind::not_found, "no node " + a.str());
    if (!contains(b)) fail(ErrorKind::not_found, "no node " + b.str());
    if (kind == EdgeKind::equivalence) {
        const bool face_voice = (a.kind == NodeKind::face && b.kind == NodeKind::voice) ||
                                (a.kind == NodeKind::voice && b.kind == NodeKind::face);
        if (!face_voice) {
            fail(ErrorKind::invalid_argument,
                 "equivalence must join one face and one voice, got " + a.str() + ", " + b.str());
        }
    } else if (a == b) {
        fail(ErrorKind::invalid_argument, "self edge on " + a.str());
    }
    return ++edges_[EdgeKey::make(a, b, kind)];
}

MemoryNode& MemoryGraph::mutable_node(NodeId id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) fail(ErrorKind::not_found, "no node " + id.str());
    return it->second;
}

void MemoryGraph::update_node(NodeId id, std::optional<std::string> new_content,
                              std::optional<std::int64_t> weight_delta, std::optional<Vector> new_embedding) {
    MemoryNode& node = mutable_node(id);
    if ((new_content || new_embedding) && id.is_entity()) {
        fail(ErrorKind::invalid_argument, "content replacement applies to text nodes, got " + id.str());
    }
    if (new_embedding) check_vector(NodeKind::text, *new_embedding);
    std::int64_t weight = node.weight;
    if (weight_delta) {
        weight += *weight_delta;
        if (weight < 1) fail(ErrorKind::invalid_argument, "weight of " + id.str() + " would drop below 1");
    }
    node.weight = weight;
    if (new_content) node.text = std::move(*new_content);
    if (new_embedding) node.embeddings = {std::move(*new_embedding)};
}

void MemoryGraph::append_snapshot(NodeId id, Vector snapshot, std::optional<std::size_t> cap) {
    if (!id.is_entity()) fail(ErrorKind::invalid_argument, "snapshots belong to entity nodes, got " + id.str());
    check_vector(id.kind, snapshot);
    MemoryNode& node = mutable_node(id);
    const std::size_t limit = std::max<std::size_t>(1, std::min(config_.snapshot_cap, cap.value_or(config_.snapshot_cap)));
    node.embeddings.push_back(std::move(snapshot));
    if (node.embeddings.size() > limit) {
        const auto excess = static_cast<std::ptrdiff_t>(node.embeddings.size() - limit);
        node.embeddings.erase(node.embeddings.begin(), node.embeddings.begin() + excess);
    }
}

ClipRecord& MemoryGraph::ensure_clip(std::int64_t clip_index) {
    if (clip_index < 0) fail(ErrorKind::invalid_argument, "clip index must be non-negative");
    auto [it, inserted] = clips_.try_emplace(clip_index);
    if (inserted) it->second.clip_index = clip_index;
    return it->second;
}

const MemoryNode* MemoryGraph::find(NodeId id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

const MemoryNode& MemoryGraph::node(NodeId id) const {
    const MemoryNode* n = find(id);
    if (n == nullptr) fail(ErrorKind::not_found, "no node " + id.str());
    return *n;
}

std::int64_t MemoryGraph::edge_weight(NodeId a, NodeId b, EdgeKind kind) const {
    auto it = edges_.find(EdgeKey::make(a, b, kind));
    return it == edges_.end() ? 0 : it->second;
}

std::vector<const MemoryNode*> MemoryGraph::nodes_of(NodeKind kind) const {
    std::vector<const MemoryNode*> out;
    for (auto it = nodes_.lower_bound(NodeId{kind, 0}); it != nodes_.end() && it->first.kind == kind; ++it) {
        out.push_back(&it->second);
    }
    return out;
}

const ClipRecord* MemoryGraph::find_clip(std::int64_t clip_index) const {
    auto it = clips_.find(clip_index);
    return it == clips_.end() ? nullptr : &it->second;
}

std::uint64_t MemoryGraph::next_ordinal(NodeKind kind) const {
    switch (kind) {
    case NodeKind::text: return next_text_;
    case NodeKind::face: return next_face_;
    case NodeKind::voice: return next_voice_;
    }
    return 0;
}

std::optional<std::uint64_t> CharacterMap::character_of(NodeId id) const {
    auto it = assignments_.find(id);
    if (it == assignments_.end()) return std::nullopt;
    return it->second;
}

std::size_t CharacterMap::character_count() const {
    std::size_t count = 0;
    for (const auto& [id, c] : assignments_) count = std::max<std::size_t>(count, c + 1);
    return count;
}

std::vector<std::vector<NodeId>> CharacterMap::groups() const {
    std::vector<std::vector<NodeId>> out(character_count());
    for (const auto& [id, c] : assignments_) out[c].push_back(id);  // map order keeps groups sorted
    return out;
}

namespace {

struct DisjointSet {
    std::vector<std::size_t> parent;

    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    // Root is always the smaller index, which is the smaller NodeId.
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent[b] = a;
    }
};

} // namespace

CharacterMap resolve_characters(const MemoryGraph& graph) {
    // Entity nodes in NodeId order: all faces, then all voices.
    std::vector<NodeId> entities;
    std::map<NodeId, std::size_t> index;
    for (const auto& [id, node] : graph.nodes()) {
        if (!id.is_entity()) continue;
        index.emplace(id, entities.size());
        entities.push_back(id);
    }

    // Heaviest equivalence edge per voice; on equal weight the first (lowest) face wins.
    std::map<NodeId, std::pair<NodeId, std::int64_t>> best;
    for (const auto& [key, weight] : graph.edges()) {
        if (key.kind != EdgeKind::equivalence) continue;
        const NodeId face = key.lo;
        const NodeId voice = key.hi;
        auto it = best.find(voice);
        if (it == best.end() || weight > it->second.second ||
            (weight == it->second.second && face < it->second.first)) {
            best[voice] = {face, weight};
        }
    }

    DisjointSet sets(entities.size());
    for (const auto& [voice, choice] : best) sets.unite(index.at(voice), index.at(choice.first));

    CharacterMap characters;
    std::map<std::size_t, std::uint64_t> root_to_character;
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const std::size_t root = sets.find(i);
        auto [it, inserted] = root_to_character.try_emplace(root, root_to_character.size());
        characters.assign(entities[i], it->second);
    }
    return characters;
}

} // namespace engram
