#pragma once

#include "engram/control.hpp"
#include "engram/memorization.hpp"
#include "engram/retrieval.hpp"
#include "engram/store.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace engram {

struct WorldConfig {
    std::size_t num_identities = 5;
    std::size_t num_clips = 30;
    // Observations are normalize(latent + noise) with noise ~ N(0, sigma^2 / dim) per component,
    // so sigma is roughly the norm of the perturbation.
    double noise_sigma = 0.0;
    std::size_t facts_per_identity = 2;
    std::size_t question_count = 10;
    std::uint64_t seed = 1;
    std::size_t feature_dim = 64;
    std::size_t embedding_dim = 64;
    std::size_t short_clips_per_clip = 4;
    // Share of short clips where the visible face is not the speaker.
    double offscreen_rate = 0.1;
    // Share of generated equivalence entries that name the wrong face.
    double mislink_rate = 0.05;

    void validate() const;

    friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

struct Fact {
    std::string verb;       // third person, as stored ("drinks")
    std::string verb_base;  // as asked ("drink")
    std::string object;

    friend bool operator==(const Fact&, const Fact&) = default;
};

struct Identity {
    std::string name;
    Vector face;
    Vector voice;
    std::vector<Fact> facts;

    friend bool operator==(const Identity&, const Identity&) = default;
};

struct QaPair {
    std::string question;
    std::string reference;
    std::size_t identity = 0;
    ScriptedPlan plan;
    std::vector<std::int64_t> gold_clips;  // clips stating the answer

    friend bool operator==(const QaPair&, const QaPair&) = default;
};

struct SyntheticWorld {
    WorldConfig config;
    std::vector<Identity> identities;
    std::vector<ClipInput> clips;
    // clip index -> local tag -> identity index
    std::map<std::int64_t, std::map<std::string, std::size_t>> truth;
    std::vector<QaPair> questions;

    friend bool operator==(const SyntheticWorld&, const SyntheticWorld&) = default;
};

SyntheticWorld generate_world(const WorldConfig& config);

nlohmann::json to_json(const WorldConfig& config);
WorldConfig world_config_from_json(const nlohmann::json& j);

// Layout: world.json (config, identities, truth, questions) + clips.jsonl.
void save_world(const SyntheticWorld& world, const std::filesystem::path& dir);
SyntheticWorld load_world(const std::filesystem::path& dir);

struct QuestionRecord {
    std::string question;
    std::string reference;
    std::optional<std::string> answer;
    bool correct = false;
    int rounds_used = 0;
    Termination terminated_by = Termination::round_limit;
    bool top1_hit = false;
    std::string error;

    friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

struct EvalReport {
    std::size_t question_count = 0;
    std::size_t correct = 0;
    double qa_accuracy = 0.0;
    double identity_precision = 0.0;
    double identity_recall = 0.0;
    double identity_f1 = 0.0;
    std::size_t meta_dictionary_size = 0;
    double meta_dictionary_accuracy = 0.0;
    std::size_t annotated_clips = 0;
    std::size_t rejected_clips = 0;
    double retrieval_top1_rate = 0.0;
    double mean_rounds = 0.0;
    std::size_t ingest_failures = 0;
    std::vector<QuestionRecord> records;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

nlohmann::json to_json(const EvalReport& report);

// What run_eval needs from a memory engine, in-process or remote.
class EvalBackend {
public:
    virtual ~EvalBackend() = default;
    virtual IngestReport ingest(const ClipInput& input) = 0;
    virtual CharacterMap characters() = 0;
    virtual Trajectory ask(const std::string& question, const std::optional<ScriptedPlan>& plan,
                           int max_rounds) = 0;
    virtual ClipSearchResult search(const std::string& query, std::size_t k, double threshold) = 0;
};

// Fixture generator, scripted oracle policy.
class InProcessBackend final : public EvalBackend {
public:
    InProcessBackend(MemoryStore& store, const Embedder& embedder, IngestConfig ingest_config,
                     ControlConfig control_config);

    IngestReport ingest(const ClipInput& input) override;
    CharacterMap characters() override;
    Trajectory ask(const std::string& question, const std::optional<ScriptedPlan>& plan, int max_rounds) override;
    ClipSearchResult search(const std::string& query, std::size_t k, double threshold) override;

private:
    MemoryStore& store_;
    const Embedder& embedder_;
    IngestConfig ingest_config_;
    ControlConfig control_config_;
    FixtureGenerator generator_;
};

struct EvalOptions {
    int max_rounds = 5;
    double vote_ratio = 0.6;
    RetrievalConfig retrieval;
};

// Fixed clock used by the harness so repeated runs build identical graphs.
std::int64_t clip_clock_ms(std::int64_t clip_index);

EvalReport run_eval(const SyntheticWorld& world, EvalBackend& backend, const EvalOptions& options = {});

// Fresh in-process graph with the world's dimensions and a deterministic clock.
EvalReport run_eval(const SyntheticWorld& world, const EvalOptions& options = {});

} // namespace engram
