#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace engram {

// Stored vectors are 32-bit floats; similarity math accumulates in double.
using Vector = std::vector<float>;

inline constexpr double unit_norm_tolerance = 1e-6;

double l2_norm(std::span<const float> v);
bool is_unit(std::span<const float> v, double tolerance = unit_norm_tolerance);

// Throws invalid_argument on a zero vector.
Vector normalized(std::span<const float> v);

// Standard cosine; equals the inner product for unit vectors.
double cosine(std::span<const float> a, std::span<const float> b);

// Mean cosine between the query and every snapshot.
double average_similarity(std::span<const float> query, const std::vector<Vector>& snapshots);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    // Always returns a unit-norm vector of dimension().
    virtual Vector embed(std::string_view text) const = 0;
};

inline constexpr std::size_t default_mock_dimension = 64;
inline constexpr std::uint64_t default_mock_seed = 0x6d656d6f72795f31ULL;

// Lowercased word tokens; entity tokens like <face_3> stay whole.
std::vector<std::string> tokenize(std::string_view text);

// Feature-hashed bag of tokens. Each token lands on two signed buckets.
Vector mock_embed(std::string_view text, std::size_t dimension = default_mock_dimension,
                  std::uint64_t seed = default_mock_seed);

class MockEmbedder final : public Embedder {
public:
    explicit MockEmbedder(std::size_t dimension = default_mock_dimension,
                          std::uint64_t seed = default_mock_seed);

    std::size_t dimension() const override { return dimension_; }
    Vector embed(std::string_view text) const override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

// FNV-1a with a final mix; stable across processes and platforms.
std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed = 0);

} // namespace engram
