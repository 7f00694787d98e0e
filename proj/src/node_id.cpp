#include "engram/node_id.hpp"

#include <charconv>

namespace engram {

Modality modality_of(NodeKind kind) {
    switch (kind) {
    case NodeKind::text: return Modality::text;
    case NodeKind::face: return Modality::image;
    case NodeKind::voice: return Modality::audio;
    }
    return Modality::text;
}

std::string_view to_string(NodeKind kind) {
    switch (kind) {
    case NodeKind::text: return "text";
    case NodeKind::face: return "face";
    case NodeKind::voice: return "voice";
    }
    return "text";
}

std::string_view to_string(Modality modality) {
    switch (modality) {
    case Modality::text: return "text";
    case Modality::image: return "image";
    case Modality::audio: return "audio";
    }
    return "text";
}

std::optional<NodeKind> parse_node_kind(std::string_view s) {
    if (s == "text") return NodeKind::text;
    if (s == "face") return NodeKind::face;
    if (s == "voice") return NodeKind::voice;
    return std::nullopt;
}

std::string NodeId::str() const {
    switch (kind) {
    case NodeKind::text: return "TEXT_" + std::to_string(ordinal);
    case NodeKind::face: return "<face_" + std::to_string(ordinal) + ">";
    case NodeKind::voice: return "<voice_" + std::to_string(ordinal) + ">";
    }
    return {};
}

namespace {

std::optional<std::uint64_t> parse_ordinal(std::string_view digits) {
    if (digits.empty() || digits.size() > 19) return std::nullopt;
    // No leading zeros, so rendering round-trips.
    if (digits.size() > 1 && digits.front() == '0') return std::nullopt;
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    return value;
}

} // namespace

std::optional<NodeId> NodeId::parse(std::string_view s) {
    if (s.starts_with("TEXT_")) {
        if (auto n = parse_ordinal(s.substr(5))) return NodeId::text(*n);
        return std::nullopt;
    }
    if (s.size() < 3 || s.front() != '<' || s.back() != '>') return std::nullopt;
    std::string_view inner = s.substr(1, s.size() - 2);
    if (inner.starts_with("face_")) {
        if (auto n = parse_ordinal(inner.substr(5))) return NodeId::face(*n);
    } else if (inner.starts_with("voice_")) {
        if (auto n = parse_ordinal(inner.substr(6))) return NodeId::voice(*n);
    }
    return std::nullopt;
}

std::string character_token(std::uint64_t ordinal) {
    return "<character_" + std::to_string(ordinal) + ">";
}

} // namespace engram
