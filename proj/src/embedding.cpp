#include "engram/embedding.hpp"

#include "engram/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace engram {

double l2_norm(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(sum);
}

bool is_unit(std::span<const float> v, double tolerance) {
    return std::abs(l2_norm(v) - 1.0) <= tolerance;
}

Vector normalized(std::span<const float> v) {
    const double norm = l2_norm(v);
    if (!(norm > 0.0) || !std::isfinite(norm)) fail(ErrorKind::invalid_argument, "cannot normalize a zero or non-finite vector");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
    return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::invalid_argument,
             "dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) fail(ErrorKind::invalid_argument, "cosine of a zero vector");
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

double average_similarity(std::span<const float> query, const std::vector<Vector>& snapshots) {
    if (snapshots.empty()) fail(ErrorKind::invalid_argument, "average similarity over an empty snapshot list");
    double sum = 0.0;
    for (const auto& s : snapshots) sum += cosine(query, s);
    return sum / static_cast<double>(snapshots.size());
}

std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    // Final avalanche so nearby strings spread over buckets.
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return h;
}

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

// Length of an entity token such as <face_12> starting at pos, or 0.
std::size_t entity_token_length(std::string_view s, std::size_t pos) {
    if (s[pos] != '<') return 0;
    std::size_t i = pos + 1;
    const std::size_t letters = i;
    while (i < s.size() && std::islower(static_cast<unsigned char>(s[i]))) ++i;
    if (i == letters || i >= s.size() || s[i] != '_') return 0;
    ++i;
    const std::size_t digits = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == digits || i >= s.size() || s[i] != '>') return 0;
    return i + 1 - pos;
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::string lower(text);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < lower.size()) {
        if (std::size_t n = entity_token_length(lower, i)) {
            tokens.emplace_back(lower.substr(i, n));
            i += n;
            continue;
        }
        if (is_word_byte(static_cast<unsigned char>(lower[i]))) {
            std::size_t j = i;
            while (j < lower.size() && is_word_byte(static_cast<unsigned char>(lower[j]))) ++j;
            tokens.emplace_back(lower.substr(i, j - i));
            i = j;
            continue;
        }
        ++i;
    }
    return tokens;
}

Vector mock_embed(std::string_view text, std::size_t dimension, std::uint64_t seed) {
    if (dimension < 8) fail(ErrorKind::invalid_argument, "mock embedding dimension must be at least 8");
    std::vector<double> acc(dimension, 0.0);
    const double w = 1.0 / std::sqrt(2.0);
    for (const auto& token : tokenize(text)) {
        for (std::uint64_t probe = 0; probe < 2; ++probe) {
            const std::uint64_t h = stable_hash(token, seed + probe * 0x9e3779b97f4a7c15ULL);
            const std::size_t bucket = static_cast<std::size_t>(h % dimension);
            acc[bucket] += ((h >> 63) != 0U) ? -w : w;
        }
    }
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    if (norm == 0.0) {
        // No tokens (or exact cancellation): a fixed direction derived from the raw bytes.
        acc[stable_hash(text, seed) % dimension] = 1.0;
        norm = 1.0;
    }
    norm = std::sqrt(norm);
    Vector out(dimension);
    for (std::size_t i = 0; i < dimension; ++i) out[i] = static_cast<float>(acc[i] / norm);
    return out;
}

MockEmbedder::MockEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
    if (dimension < 8) fail(ErrorKind::configuration, "mock embedding dimension must be at least 8");
}

Vector MockEmbedder::embed(std::string_view text) const {
    return mock_embed(text, dimension_, seed_);
}

} // namespace engram
