#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace engram {

enum class NodeKind : std::uint8_t { text = 0, face = 1, voice = 2 };

// Modality of the node payload as exposed in dumps.
enum class Modality : std::uint8_t { text, image, audio };

Modality modality_of(NodeKind kind);
std::string_view to_string(NodeKind kind);
std::string_view to_string(Modality modality);
std::optional<NodeKind> parse_node_kind(std::string_view s);

struct NodeId {
    NodeKind kind = NodeKind::text;
    std::uint64_t ordinal = 0;

    bool is_entity() const { return kind != NodeKind::text; }

    // TEXT_n, <face_n>, <voice_n>
    std::string str() const;

    static NodeId text(std::uint64_t n) { return {NodeKind::text, n}; }
    static NodeId face(std::uint64_t n) { return {NodeKind::face, n}; }
    static NodeId voice(std::uint64_t n) { return {NodeKind::voice, n}; }

    // Accepts exactly the forms produced by str().
    static std::optional<NodeId> parse(std::string_view s);

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

// Renders <character_k>.
std::string character_token(std::uint64_t ordinal);

} // namespace engram

template <>
struct std::hash<engram::NodeId> {
    std::size_t operator()(const engram::NodeId& id) const noexcept {
        return std::hash<std::uint64_t>{}(id.ordinal * 4 + static_cast<std::uint64_t>(id.kind));
    }
};
