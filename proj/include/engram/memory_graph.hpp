#pragma once

#include "engram/embedding.hpp"
#include "engram/node_id.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace engram {

struct GraphConfig {
    std::size_t text_dim = default_mock_dimension;
    std::size_t face_dim = default_mock_dimension;
    std::size_t voice_dim = default_mock_dimension;
    std::size_t snapshot_cap = 10;

    std::size_t dimension_of(NodeKind kind) const;

    friend bool operator==(const GraphConfig&, const GraphConfig&) = default;
};

enum class EntryKind : std::uint8_t { episodic, semantic };
enum class EdgeKind : std::uint8_t { equivalence = 0, generic = 1 };

std::string_view to_string(EntryKind kind);
std::string_view to_string(EdgeKind kind);
std::optional<EntryKind> parse_entry_kind(std::string_view s);

inline constexpr std::string_view extra_clip_index = "clip_index";
inline constexpr std::string_view extra_timestamp = "timestamp_ms";

struct MemoryNode {
    NodeId id;
    // UTF-8 text for text nodes; empty for entity nodes.
    std::string text;
    // Text nodes hold exactly one embedding; entity nodes hold 1..snapshot_cap snapshots.
    std::vector<Vector> embeddings;
    std::int64_t weight = 1;
    std::map<std::string, std::string> extra;

    Modality modality() const { return modality_of(id.kind); }

    friend bool operator==(const MemoryNode&, const MemoryNode&) = default;
};

// Endpoints are stored ordered (lo <= hi); lookups normalize, so edges are undirected.
struct EdgeKey {
    NodeId lo;
    NodeId hi;
    EdgeKind kind = EdgeKind::equivalence;

    static EdgeKey make(NodeId a, NodeId b, EdgeKind kind);

    friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

struct ClipRecord {
    std::int64_t clip_index = 0;
    std::vector<NodeId> episodic;
    std::vector<NodeId> semantic;

    std::size_t entry_count() const { return episodic.size() + semantic.size(); }

    friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

std::string clip_token(std::int64_t clip_index);

class MemoryGraph {
public:
    explicit MemoryGraph(GraphConfig config = {});

    const GraphConfig& config() const { return config_; }

    NodeId add_text_entry(std::int64_t clip_index, EntryKind kind, std::string text, Vector embedding,
                          std::optional<std::int64_t> timestamp_ms = std::nullopt);

    NodeId add_entity_node(NodeKind kind, std::vector<Vector> snapshots,
                           std::optional<std::int64_t> clip_index = std::nullopt,
                           std::optional<std::int64_t> timestamp_ms = std::nullopt);

    // Creates the edge at weight 1 when absent; returns the new weight.
    std::int64_t reinforce_edge(NodeId a, NodeId b, EdgeKind kind);

    // The embedding of a text node is kept unless a replacement is supplied.
    void update_node(NodeId id, std::optional<std::string> new_content,
                     std::optional<std::int64_t> weight_delta,
                     std::optional<Vector> new_embedding = std::nullopt);

    // Appends a snapshot to an entity node, dropping the oldest beyond
    // min(snapshot_cap, cap).
    void append_snapshot(NodeId id, Vector snapshot, std::optional<std::size_t> cap = std::nullopt);

    // Registers a clip with no entries yet; no-op when it exists.
    ClipRecord& ensure_clip(std::int64_t clip_index);

    bool contains(NodeId id) const { return nodes_.count(id) != 0; }
    const MemoryNode* find(NodeId id) const;
    const MemoryNode& node(NodeId id) const;

    std::int64_t edge_weight(NodeId a, NodeId b, EdgeKind kind) const;

    const std::map<NodeId, MemoryNode>& nodes() const { return nodes_; }
    std::vector<const MemoryNode*> nodes_of(NodeKind kind) const;
    const std::map<EdgeKey, std::int64_t>& edges() const { return edges_; }
    const std::map<std::int64_t, ClipRecord>& clips() const { return clips_; }
    const ClipRecord* find_clip(std::int64_t clip_index) const;
    bool has_clip(std::int64_t clip_index) const { return clips_.count(clip_index) != 0; }

    std::uint64_t next_ordinal(NodeKind kind) const;

    friend bool operator==(const MemoryGraph&, const MemoryGraph&) = default;

private:
    friend class GraphReader;

    MemoryNode& mutable_node(NodeId id);
    void check_vector(NodeKind kind, const Vector& v) const;

    GraphConfig config_;
    std::map<NodeId, MemoryNode> nodes_;
    std::map<EdgeKey, std::int64_t> edges_;
    std::map<std::int64_t, ClipRecord> clips_;
    std::uint64_t next_text_ = 0;
    std::uint64_t next_face_ = 0;
    std::uint64_t next_voice_ = 0;
};

// Entity node -> character ordinal. Built from equivalence edges only.
class CharacterMap {
public:
    std::optional<std::uint64_t> character_of(NodeId id) const;
    const std::map<NodeId, std::uint64_t>& assignments() const { return assignments_; }
    // Members grouped by character ordinal, each group sorted.
    std::vector<std::vector<NodeId>> groups() const;
    std::size_t character_count() const;
    bool empty() const { return assignments_.empty(); }

    void assign(NodeId id, std::uint64_t character) { assignments_[id] = character; }

    friend bool operator==(const CharacterMap&, const CharacterMap&) = default;

private:
    std::map<NodeId, std::uint64_t> assignments_;
};

// Each voice keeps only its heaviest equivalence edge (ties: lowest face ordinal).
// Components over the kept edges become characters, numbered by their smallest member.
CharacterMap resolve_characters(const MemoryGraph& graph);

} // namespace engram
