#include "engram/retrieval.hpp"

#include "engram/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>

namespace engram {

double RetrievalConfig::threshold_for(NodeKind kind) const {
    switch (kind) {
    case NodeKind::face: return face_threshold;
    case NodeKind::voice: return voice_threshold;
    case NodeKind::text: return node_threshold;
    }
    return node_threshold;
}

SearchQuery SearchQuery::for_text(std::string text, std::size_t k, double threshold) {
    SearchQuery q;
    q.modality = NodeKind::text;
    q.text = std::move(text);
    q.k = k;
    q.threshold = threshold;
    return q;
}

SearchQuery SearchQuery::for_feature(NodeKind modality, Vector feature, std::size_t k, double threshold) {
    if (modality == NodeKind::text) fail(ErrorKind::invalid_argument, "feature queries target face or voice nodes");
    SearchQuery q;
    q.modality = modality;
    q.feature = std::move(feature);
    q.k = k;
    q.threshold = threshold;
    return q;
}

namespace {

struct TokenMatch {
    std::size_t pos = 0;
    std::size_t len = 0;
    std::string_view prefix;  // "face", "voice", "character"
    std::uint64_t ordinal = 0;
};

// Finds <prefix_N> tokens for the given prefixes, left to right.
std::vector<TokenMatch> find_tokens(std::string_view text, std::initializer_list<std::string_view> prefixes) {
    std::vector<TokenMatch> out;
    std::size_t i = 0;
    while ((i = text.find('<', i)) != std::string_view::npos) {
        bool matched = false;
        for (std::string_view prefix : prefixes) {
            const std::size_t start = i + 1;
            if (text.substr(start, prefix.size()) != prefix) continue;
            std::size_t j = start + prefix.size();
            if (j >= text.size() || text[j] != '_') continue;
            ++j;
            const std::size_t digits = j;
            while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
            if (j == digits || j >= text.size() || text[j] != '>') continue;
            if (j - digits > 1 && text[digits] == '0') continue;
            std::uint64_t n = 0;
            auto [p, ec] = std::from_chars(text.data() + digits, text.data() + j, n);
            if (ec != std::errc{}) continue;
            out.push_back(TokenMatch{i, j + 1 - i, prefix, n});
            i = j + 1;
            matched = true;
            break;
        }
        if (!matched) ++i;
    }
    return out;
}

bool has_character_token(std::string_view text) {
    return !find_tokens(text, {"character"}).empty();
}

const Vector& text_embedding(const MemoryGraph& graph, NodeId id) {
    return graph.node(id).embeddings.front();
}

std::vector<Vector> embed_variants(const std::vector<std::string>& variants, const Embedder& embedder,
                                   std::size_t expected_dim) {
    if (embedder.dimension() != expected_dim) {
        fail(ErrorKind::invalid_argument, "embedder dimension " + std::to_string(embedder.dimension()) +
                                              " does not match graph text dimension " + std::to_string(expected_dim));
    }
    std::vector<Vector> out;
    out.reserve(variants.size());
    for (const auto& v : variants) out.push_back(embedder.embed(v));
    return out;
}

} // namespace

std::vector<std::string> expand_character_query(std::string_view query, const CharacterMap& characters,
                                                std::size_t max_variants) {
    const auto tokens = find_tokens(query, {"character"});
    const auto groups = characters.groups();

    struct Slot {
        TokenMatch token;
        const std::vector<NodeId>* members;
    };
    std::vector<Slot> slots;
    for (const auto& t : tokens) {
        if (t.ordinal < groups.size() && !groups[t.ordinal].empty()) slots.push_back({t, &groups[t.ordinal]});
    }
    if (slots.empty() || max_variants == 0) return {std::string(query)};

    // Odometer over member choices, first slot varying slowest.
    std::vector<std::string> variants;
    std::vector<std::size_t> choice(slots.size(), 0);
    while (variants.size() < max_variants) {
        std::string out;
        std::size_t cursor = 0;
        for (std::size_t s = 0; s < slots.size(); ++s) {
            out.append(query.substr(cursor, slots[s].token.pos - cursor));
            out.append((*slots[s].members)[choice[s]].str());
            cursor = slots[s].token.pos + slots[s].token.len;
        }
        out.append(query.substr(cursor));
        variants.push_back(std::move(out));

        std::size_t s = slots.size();
        while (s > 0) {
            --s;
            if (++choice[s] < slots[s].members->size()) break;
            choice[s] = 0;
            if (s == 0) return variants;
        }
    }
    return variants;
}

std::vector<ScoredNode> search_node(const MemoryGraph& graph, const SearchQuery& query, const Embedder& embedder) {
    std::vector<ScoredNode> scored;
    if (query.modality == NodeKind::text) {
        std::vector<std::string> variants{query.text};
        if (has_character_token(query.text)) {
            variants = expand_character_query(query.text, resolve_characters(graph), 16);
        }
        const auto embeddings = embed_variants(variants, embedder, graph.config().text_dim);
        for (const MemoryNode* node : graph.nodes_of(NodeKind::text)) {
            double best = no_entries_score;
            for (const auto& e : embeddings) best = std::max(best, cosine(e, node->embeddings.front()));
            scored.push_back({node->id, best});
        }
    } else {
        const std::size_t dim = graph.config().dimension_of(query.modality);
        if (query.feature.size() != dim) {
            fail(ErrorKind::invalid_argument, "query dimension " + std::to_string(query.feature.size()) +
                                                  " does not match " + std::string(to_string(query.modality)) +
                                                  " dimension " + std::to_string(dim));
        }
        for (const MemoryNode* node : graph.nodes_of(query.modality)) {
            scored.push_back({node->id, average_similarity(query.feature, node->embeddings)});
        }
    }

    std::erase_if(scored, [&](const ScoredNode& s) { return !(s.score >= query.threshold); });
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredNode& a, const ScoredNode& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (scored.size() > query.k) scored.resize(query.k);
    return scored;
}

double score_clip(const MemoryGraph& graph, std::int64_t clip_index, std::span<const float> query) {
    const ClipRecord* clip = graph.find_clip(clip_index);
    if (clip == nullptr) fail(ErrorKind::not_found, "no clip " + clip_token(clip_index));
    double best = no_entries_score;
    for (const auto* list : {&clip->episodic, &clip->semantic}) {
        for (NodeId id : *list) best = std::max(best, cosine(query, text_embedding(graph, id)));
    }
    return best;
}

ClipSearchResult search_clip(const MemoryGraph& graph, std::string_view query, const Embedder& embedder,
                             std::size_t k, double threshold, std::size_t max_query_variants) {
    const CharacterMap characters = resolve_characters(graph);
    const auto variants = expand_character_query(query, characters, max_query_variants);
    const auto embeddings = embed_variants(variants, embedder, graph.config().text_dim);

    struct Scored {
        std::int64_t clip;
        double score;
    };
    std::vector<Scored> scored;
    for (const auto& [index, clip] : graph.clips()) {
        double best = no_entries_score;
        for (const auto& e : embeddings) best = std::max(best, score_clip(graph, index, e));
        if (best >= threshold) scored.push_back({index, best});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.clip < b.clip;
    });
    if (scored.size() > k) scored.resize(k);

    ClipSearchResult result;
    for (const auto& s : scored) {
        const ClipRecord& clip = *graph.find_clip(s.clip);
        ClipHit hit;
        hit.clip_index = s.clip;
        hit.score = s.score;
        for (NodeId id : clip.episodic) hit.episodic.push_back(rewrite_entities(graph.node(id).text, characters));
        for (NodeId id : clip.semantic) hit.semantic.push_back(rewrite_entities(graph.node(id).text, characters));
        result.clips.push_back(std::move(hit));
    }
    result.empty_marker = result.clips.empty();
    return result;
}

std::string rewrite_entities(std::string_view text, const CharacterMap& characters) {
    const auto tokens = find_tokens(text, {"face", "voice"});
    if (tokens.empty()) return std::string(text);
    std::string out;
    std::size_t cursor = 0;
    for (const auto& t : tokens) {
        const NodeId id{t.prefix == "face" ? NodeKind::face : NodeKind::voice, t.ordinal};
        const auto character = characters.character_of(id);
        if (!character) continue;
        out.append(text.substr(cursor, t.pos - cursor));
        out.append(character_token(*character));
        cursor = t.pos + t.len;
    }
    out.append(text.substr(cursor));
    return out;
}

std::string format_results(const ClipSearchResult& result) {
    if (result.clips.empty()) return std::string(empty_marker_text);
    std::string out;
    for (const auto& hit : result.clips) {
        if (!out.empty()) out += '\n';
        out += '"' + clip_token(hit.clip_index) + "\": [";
        bool first = true;
        for (const auto* list : {&hit.episodic, &hit.semantic}) {
            for (const auto& entry : *list) {
                if (!first) out += ", ";
                out += nlohmann::json(entry).dump();
                first = false;
            }
        }
        out += ']';
    }
    return out;
}

std::string format_node_results(const MemoryGraph& graph, const std::vector<ScoredNode>& nodes,
                                const CharacterMap& characters) {
    if (nodes.empty()) return std::string(empty_marker_text);
    std::string out;
    for (const auto& n : nodes) {
        if (!out.empty()) out += '\n';
        const MemoryNode& node = graph.node(n.id);
        const std::string body = n.id.is_entity() ? rewrite_entities(n.id.str(), characters)
                                                  : rewrite_entities(node.text, characters);
        out += '"' + n.id.str() + "\": " + nlohmann::json(body).dump();
    }
    return out;
}

} // namespace engram
