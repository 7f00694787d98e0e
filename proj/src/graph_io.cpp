#include "engram/graph_io.hpp"

#include "engram/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace engram {

namespace {

constexpr char magic[8] = {'E', 'N', 'G', 'R', 'A', 'M', 'G', 'R'};

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }

    template <class T>
    void integer(T value) {
        using U = std::make_unsigned_t<T>;
        auto u = static_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<char>(u & 0xFFU));
            u = static_cast<U>(u >> 8U);
        }
    }

    void f32(float value) { integer(std::bit_cast<std::uint32_t>(value)); }

    void str(std::string_view s) {
        integer(static_cast<std::uint32_t>(s.size()));
        out_.append(s);
    }

    void id(NodeId id) {
        integer(static_cast<std::uint8_t>(id.kind));
        integer(id.ordinal);
    }

    std::string& buffer() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    [[noreturn]] void error(const std::string& field, const std::string& what) const {
        fail(ErrorKind::parse, "snapshot parse error at offset " + std::to_string(pos_) + " (field " + field +
                                   "): " + what);
    }

    void need(std::size_t n, const std::string& field) const {
        if (data_.size() - pos_ < n) error(field, "truncated input");
    }

    template <class T>
    T integer(const std::string& field) {
        need(sizeof(T), field);
        using U = std::make_unsigned_t<T>;
        U u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8U * i));
        }
        pos_ += sizeof(T);
        return static_cast<T>(u);
    }

    float f32(const std::string& field) { return std::bit_cast<float>(integer<std::uint32_t>(field)); }

    std::string str(const std::string& field) {
        const auto n = integer<std::uint32_t>(field + ".length");
        need(n, field);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }

    NodeKind kind(const std::string& field) {
        const auto k = integer<std::uint8_t>(field);
        if (k > 2) error(field, "unknown node kind " + std::to_string(k));
        return static_cast<NodeKind>(k);
    }

    NodeId id(const std::string& field) {
        const NodeKind k = kind(field + ".kind");
        return NodeId{k, integer<std::uint64_t>(field + ".ordinal")};
    }

    // Guards count-prefixed sections against absurd sizes before allocating.
    std::uint64_t count(const std::string& field, std::size_t min_item_bytes) {
        const auto n = integer<std::uint64_t>(field);
        if (min_item_bytes > 0 && n > (data_.size() - pos_) / min_item_bytes) error(field, "count exceeds input size");
        return n;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

} // namespace

// Befriended by MemoryGraph to restore private counters.
class GraphReader {
public:
    static MemoryGraph read(std::string_view bytes);
};

MemoryGraph GraphReader::read(std::string_view bytes) {
    Reader r(bytes);
    r.need(sizeof(magic), "magic");
    if (std::memcmp(bytes.data(), magic, sizeof(magic)) != 0) r.error("magic", "not an engram graph snapshot");
    for (std::size_t i = 0; i < sizeof(magic); ++i) r.integer<std::uint8_t>("magic");

    const auto version = r.integer<std::uint32_t>("version");
    if (version != snapshot_version) {
        r.error("version", "unsupported version " + std::to_string(version) + ", expected " +
                               std::to_string(snapshot_version));
    }
    if (bytes.size() < sizeof(magic) + 8) r.error("checksum", "truncated input");
    {
        const std::string_view body = bytes.substr(0, bytes.size() - 8);
        Reader tail(bytes.substr(bytes.size() - 8));
        if (tail.integer<std::uint64_t>("checksum") != fnv1a(body)) {
            fail(ErrorKind::parse, "snapshot parse error at offset " + std::to_string(bytes.size() - 8) +
                                       " (field checksum): checksum mismatch, input truncated or corrupt");
        }
    }

    GraphConfig config;
    config.text_dim = r.integer<std::uint32_t>("text_dim");
    config.face_dim = r.integer<std::uint32_t>("face_dim");
    config.voice_dim = r.integer<std::uint32_t>("voice_dim");
    config.snapshot_cap = r.integer<std::uint32_t>("snapshot_cap");
    if (config.text_dim == 0 || config.face_dim == 0 || config.voice_dim == 0 || config.snapshot_cap == 0) {
        r.error("config", "dimensions and snapshot_cap must be positive");
    }

    MemoryGraph g(config);
    g.next_text_ = r.integer<std::uint64_t>("next_text");
    g.next_face_ = r.integer<std::uint64_t>("next_face");
    g.next_voice_ = r.integer<std::uint64_t>("next_voice");

    const std::uint64_t node_count = r.count("node_count", 1 + 8 + 8 + 4 + 4 + 4);
    for (std::uint64_t i = 0; i < node_count; ++i) {
        const std::string f = "nodes[" + std::to_string(i) + "]";
        MemoryNode node;
        node.id.kind = r.kind(f + ".kind");
        node.id.ordinal = r.integer<std::uint64_t>(f + ".ordinal");
        if (node.id.ordinal >= g.next_ordinal(node.id.kind)) r.error(f + ".ordinal", "ordinal beyond next counter");
        node.weight = r.integer<std::int64_t>(f + ".weight");
        if (node.weight < 1) r.error(f + ".weight", "weight must be at least 1");
        node.text = r.str(f + ".text");
        const std::size_t dim = config.dimension_of(node.id.kind);
        const auto vec_count = r.integer<std::uint32_t>(f + ".vector_count");
        if (vec_count == 0) r.error(f + ".vector_count", "node without embedding");
        if (node.id.kind == NodeKind::text && vec_count != 1) r.error(f + ".vector_count", "text node needs exactly one embedding");
        if (vec_count > config.snapshot_cap && node.id.is_entity()) r.error(f + ".vector_count", "exceeds snapshot_cap");
        const std::string vf = f + ".vectors";
        r.need(static_cast<std::size_t>(vec_count) * dim * 4, vf);
        node.embeddings.resize(vec_count);
        for (auto& v : node.embeddings) {
            v.resize(dim);
            for (auto& x : v) x = r.f32(vf);
        }
        const auto extra_count = r.integer<std::uint32_t>(f + ".extra_count");
        for (std::uint32_t e = 0; e < extra_count; ++e) {
            std::string key = r.str(f + ".extra.key");
            std::string value = r.str(f + ".extra.value");
            node.extra.emplace(std::move(key), std::move(value));
        }
        const NodeId id = node.id;
        if (!g.nodes_.emplace(id, std::move(node)).second) r.error(f, "duplicate node " + id.str());
    }

    const std::uint64_t edge_count = r.count("edge_count", 1 + 9 + 9 + 8);
    for (std::uint64_t i = 0; i < edge_count; ++i) {
        const std::string f = "edges[" + std::to_string(i) + "]";
        const auto kind = r.integer<std::uint8_t>(f + ".kind");
        if (kind > 1) r.error(f + ".kind", "unknown edge kind " + std::to_string(kind));
        const NodeId lo = r.id(f + ".lo");
        const NodeId hi = r.id(f + ".hi");
        const auto weight = r.integer<std::int64_t>(f + ".weight");
        if (!g.contains(lo) || !g.contains(hi)) r.error(f, "edge references a missing node");
        if (!(lo < hi)) r.error(f, "edge endpoints out of order");
        if (weight < 1) r.error(f + ".weight", "weight must be at least 1");
        const auto ek = static_cast<EdgeKind>(kind);
        if (ek == EdgeKind::equivalence && !(lo.kind == NodeKind::face && hi.kind == NodeKind::voice)) {
            r.error(f, "equivalence edge must join a face and a voice");
        }
        if (!g.edges_.emplace(EdgeKey{lo, hi, ek}, weight).second) r.error(f, "duplicate edge");
    }

    const std::uint64_t clip_count = r.count("clip_count", 8 + 4 + 4);
    for (std::uint64_t i = 0; i < clip_count; ++i) {
        const std::string f = "clips[" + std::to_string(i) + "]";
        ClipRecord clip;
        clip.clip_index = r.integer<std::int64_t>(f + ".clip_index");
        if (clip.clip_index < 0) r.error(f + ".clip_index", "negative clip index");
        for (auto* list : {&clip.episodic, &clip.semantic}) {
            const std::string lf = f + (list == &clip.episodic ? ".episodic" : ".semantic");
            const auto n = r.integer<std::uint32_t>(lf + ".count");
            r.need(static_cast<std::size_t>(n) * 8, lf);
            for (std::uint32_t k = 0; k < n; ++k) {
                const NodeId id = NodeId::text(r.integer<std::uint64_t>(lf));
                if (!g.contains(id)) r.error(lf, "entry references missing node " + id.str());
                list->push_back(id);
            }
        }
        const auto index = clip.clip_index;
        if (!g.clips_.emplace(index, std::move(clip)).second) r.error(f, "duplicate clip " + clip_token(index));
    }

    r.integer<std::uint64_t>("checksum");
    if (r.remaining() != 0) r.error("trailer", "unexpected trailing bytes");
    return g;
}

std::string save_snapshot(const MemoryGraph& graph) {
    Writer w;
    w.bytes(magic, sizeof(magic));
    w.integer(snapshot_version);
    const GraphConfig& c = graph.config();
    w.integer(static_cast<std::uint32_t>(c.text_dim));
    w.integer(static_cast<std::uint32_t>(c.face_dim));
    w.integer(static_cast<std::uint32_t>(c.voice_dim));
    w.integer(static_cast<std::uint32_t>(c.snapshot_cap));
    w.integer(graph.next_ordinal(NodeKind::text));
    w.integer(graph.next_ordinal(NodeKind::face));
    w.integer(graph.next_ordinal(NodeKind::voice));

    w.integer(static_cast<std::uint64_t>(graph.nodes().size()));
    for (const auto& [id, node] : graph.nodes()) {
        w.integer(static_cast<std::uint8_t>(id.kind));
        w.integer(id.ordinal);
        w.integer(node.weight);
        w.str(node.text);
        w.integer(static_cast<std::uint32_t>(node.embeddings.size()));
        for (const auto& v : node.embeddings) {
            for (float x : v) w.f32(x);
        }
        w.integer(static_cast<std::uint32_t>(node.extra.size()));
        for (const auto& [k, v] : node.extra) {
            w.str(k);
            w.str(v);
        }
    }

    w.integer(static_cast<std::uint64_t>(graph.edges().size()));
    for (const auto& [key, weight] : graph.edges()) {
        w.integer(static_cast<std::uint8_t>(key.kind));
        w.id(key.lo);
        w.id(key.hi);
        w.integer(weight);
    }

    w.integer(static_cast<std::uint64_t>(graph.clips().size()));
    for (const auto& [index, clip] : graph.clips()) {
        w.integer(index);
        for (const auto* list : {&clip.episodic, &clip.semantic}) {
            w.integer(static_cast<std::uint32_t>(list->size()));
            for (NodeId id : *list) w.integer(id.ordinal);
        }
    }

    const std::uint64_t checksum = fnv1a(w.buffer());
    w.integer(checksum);
    return std::move(w.buffer());
}

MemoryGraph load_snapshot(std::string_view bytes) {
    return GraphReader::read(bytes);
}

void save_snapshot_file(const MemoryGraph& graph, const std::filesystem::path& path) {
    const std::string bytes = save_snapshot(graph);
    // Write-then-rename so a crash never leaves a half-written snapshot in place.
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::transport, "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorKind::transport, "failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

MemoryGraph load_snapshot_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::not_found, "cannot open graph file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_snapshot(ss.str());
}

std::string dump_nodes(const MemoryGraph& graph) {
    std::string out;
    for (const auto& [id, node] : graph.nodes()) {
        nlohmann::json j;
        j["type"] = "node";
        j["id"] = id.str();
        j["modality"] = to_string(node.modality());
        j["weight"] = node.weight;
        if (id.is_entity()) {
            j["snapshots"] = node.embeddings.size();
        } else {
            j["text"] = node.text;
        }
        j["extra"] = node.extra;
        out += j.dump() + "\n";
    }
    return out;
}

std::string dump_edges(const MemoryGraph& graph) {
    std::string out;
    for (const auto& [key, weight] : graph.edges()) {
        nlohmann::json j;
        j["type"] = "edge";
        j["kind"] = to_string(key.kind);
        j["a"] = key.lo.str();
        j["b"] = key.hi.str();
        j["weight"] = weight;
        out += j.dump() + "\n";
    }
    return out;
}

std::string dump_clips(const MemoryGraph& graph) {
    std::string out;
    for (const auto& [index, clip] : graph.clips()) {
        nlohmann::json j;
        j["type"] = "clip";
        j["clip"] = clip_token(index);
        auto ids = [](const std::vector<NodeId>& list) {
            std::vector<std::string> s;
            for (NodeId id : list) s.push_back(id.str());
            return s;
        };
        j["episodic"] = ids(clip.episodic);
        j["semantic"] = ids(clip.semantic);
        out += j.dump() + "\n";
    }
    return out;
}

std::string dump_characters(const MemoryGraph& graph) {
    std::string out;
    const CharacterMap characters = resolve_characters(graph);
    const auto groups = characters.groups();
    for (std::size_t c = 0; c < groups.size(); ++c) {
        nlohmann::json j;
        j["type"] = "character";
        j["character"] = character_token(c);
        std::vector<std::string> members;
        for (NodeId id : groups[c]) members.push_back(id.str());
        j["members"] = members;
        out += j.dump() + "\n";
    }
    return out;
}

} // namespace engram
