#include "engram/harness.hpp"

#include "engram/error.hpp"
#include "engram/json_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace engram {

namespace {

constexpr std::array<std::string_view, 16> first_names = {
    "Alice", "Bob",  "Carol", "David", "Emma", "Frank", "Grace", "Henry",
    "Irene", "Jack", "Kate",  "Liam",  "Mona", "Nate",  "Olive", "Peter"};

struct VerbSpec {
    std::string_view third;
    std::string_view base;
    std::array<std::string_view, 4> nouns;
};

constexpr std::array<VerbSpec, 10> verbs = {{
    {"drinks", "drink", {"tea", "coffee", "juice", "soda"}},
    {"wears", "wear", {"jacket", "hat", "scarf", "coat"}},
    {"carries", "carry", {"bag", "box", "umbrella", "case"}},
    {"reads", "read", {"novel", "magazine", "newspaper", "map"}},
    {"plays", "play", {"guitar", "piano", "violin", "drum"}},
    {"cooks", "cook", {"pasta", "soup", "curry", "rice"}},
    {"paints", "paint", {"portrait", "landscape", "fence", "mural"}},
    {"fixes", "fix", {"bicycle", "radio", "clock", "lamp"}},
    {"holds", "hold", {"cup", "phone", "book", "key"}},
    {"buys", "buy", {"bread", "flowers", "shoes", "apples"}},
}};

constexpr std::array<std::string_view, 10> adjectives = {"green", "red",    "blue",   "silver", "old",
                                                         "new",   "small",  "large",  "wooden", "striped"};

constexpr std::int64_t clock_origin_ms = 1'700'000'000'000;
constexpr std::int64_t clip_length_ms = 30'000;

std::string identity_name(std::size_t i) {
    std::string name(first_names[i % first_names.size()]);
    if (i >= first_names.size()) name += std::to_string(i / first_names.size() + 1);
    return name;
}

std::vector<Vector> orthonormal_latents(std::size_t count, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> basis;
    while (basis.size() < count) {
        std::vector<double> v(dim);
        for (double& x : v) x = gauss(rng);
        for (const auto& b : basis) {
            const double d = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
            for (std::size_t k = 0; k < dim; ++k) v[k] -= d * b[k];
        }
        const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (n < 1e-6) continue;  // numerically dependent draw
        for (double& x : v) x /= n;
        basis.push_back(std::move(v));
    }
    std::vector<Vector> out;
    for (const auto& b : basis) out.push_back(normalized(Vector(b.begin(), b.end())));
    return out;
}

Vector observe(const Vector& latent, double sigma, std::mt19937_64& rng) {
    if (sigma == 0.0) return latent;
    std::normal_distribution<double> gauss(0.0, sigma / std::sqrt(static_cast<double>(latent.size())));
    Vector v(latent.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<float>(latent[k] + gauss(rng));
    return normalized(v);
}

std::string tag_ref(char kind, std::size_t slot) {
    return "{" + std::string(1, kind) + std::to_string(slot) + "}";
}

std::string fact_text(const std::string& subject, const Fact& f) {
    return subject + " " + f.verb + " " + f.object;
}

} // namespace

void WorldConfig::validate() const {
    auto bad = [](const std::string& m) { fail(ErrorKind::invalid_argument, "world config: " + m); };
    if (num_identities == 0) bad("num_identities must be positive");
    if (num_identities > feature_dim) bad("num_identities must not exceed feature_dim");
    if (num_clips == 0) bad("num_clips must be positive");
    if (facts_per_identity == 0 || facts_per_identity > verbs.size()) {
        bad("facts_per_identity must lie in [1, " + std::to_string(verbs.size()) + "]");
    }
    if (question_count == 0) bad("question_count must be positive");
    const std::size_t askable = std::min(num_identities, num_clips) * facts_per_identity;
    if (question_count > askable) {
        bad("question_count " + std::to_string(question_count) + " exceeds the " + std::to_string(askable) +
            " answerable questions");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise_sigma must be finite and non-negative");
    if (feature_dim < 2) bad("feature_dim must be at least 2");
    if (embedding_dim < 8) bad("embedding_dim must be at least 8");
    if (short_clips_per_clip == 0) bad("short_clips_per_clip must be positive");
    if (!(offscreen_rate >= 0.0 && offscreen_rate <= 1.0)) bad("offscreen_rate must lie in [0, 1]");
    if (!(mislink_rate >= 0.0 && mislink_rate <= 1.0)) bad("mislink_rate must lie in [0, 1]");
}

SyntheticWorld generate_world(const WorldConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    // Noise draws come from a separate stream; structure depends on the seed alone.
    std::seed_seq noise_seed{config.seed, std::uint64_t{0x6e6f697365}};
    std::mt19937_64 noise_rng(noise_seed);
    auto uniform = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto chance = [&rng](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

    SyntheticWorld world;
    world.config = config;
    const std::size_t n = config.num_identities;

    const auto faces = orthonormal_latents(n, config.feature_dim, rng);
    const auto voices = orthonormal_latents(n, config.feature_dim, rng);
    for (std::size_t i = 0; i < n; ++i) {
        Identity id{identity_name(i), faces[i], voices[i], {}};
        std::vector<std::size_t> order(verbs.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t f = 0; f < config.facts_per_identity; ++f) {
            const VerbSpec& v = verbs[order[f]];
            const std::string object = std::string(adjectives[uniform(adjectives.size())]) + " " +
                                       std::string(v.nouns[uniform(v.nouns.size())]);
            id.facts.push_back(Fact{std::string(v.third), std::string(v.base), object});
        }
        world.identities.push_back(std::move(id));
    }

    // (voice identity, face identity) -> equivalence count so far, for bounded mislinks.
    std::map<std::pair<std::size_t, std::size_t>, int> link_counts;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::int64_t>> fact_clips;

    for (std::size_t c = 0; c < config.num_clips; ++c) {
        const auto clip_index = static_cast<std::int64_t>(c);
        std::vector<std::size_t> present{c % n};
        const std::size_t extras = std::min<std::size_t>(n - 1, uniform(3));
        while (present.size() < 1 + extras) {
            const std::size_t cand = uniform(n);
            if (std::find(present.begin(), present.end(), cand) == present.end()) present.push_back(cand);
        }

        ClipInput input;
        input.clip_index = clip_index;
        auto& truth = world.truth[clip_index];
        for (std::size_t s = 0; s < present.size(); ++s) {
            const Identity& who = world.identities[present[s]];
            const std::string f = "f" + std::to_string(s);
            const std::string v = "v" + std::to_string(s);
            FeatureObservation face{NodeKind::face, observe(who.face, config.noise_sigma, noise_rng), clip_index, {}};
            const double start = 1.0 + 6.0 * static_cast<double>(s);
            FeatureObservation voice{NodeKind::voice,
                                     observe(who.voice, config.noise_sigma, noise_rng),
                                     clip_index,
                                     {{start, start + 2.5 + static_cast<double>(uniform(3)), "..."},
                                      {start + 4.0, start + 5.0, "..."}}};
            input.observations.push_back({f, std::move(face)});
            input.observations.push_back({v, std::move(voice)});
            truth[f] = present[s];
            truth[v] = present[s];
        }

        std::vector<MemoryEntry> entries;
        const Identity& primary = world.identities[present[0]];
        for (std::size_t k = 0; k < primary.facts.size(); ++k) {
            entries.push_back({EntryKind::episodic, fact_text(tag_ref('f', 0), primary.facts[k])});
            fact_clips[{present[0], k}].push_back(clip_index);
        }
        for (std::size_t s = 1; s < present.size(); ++s) {
            const Identity& who = world.identities[present[s]];
            const std::size_t k = uniform(who.facts.size());
            entries.push_back({EntryKind::episodic, fact_text(tag_ref('f', s), who.facts[k])});
            fact_clips[{present[s], k}].push_back(clip_index);
        }
        entries.push_back({EntryKind::semantic, tag_ref('v', 0) + " is named " + primary.name});
        for (std::size_t s = 0; s < present.size(); ++s) {
            std::size_t face_slot = s;
            if (present.size() > 1 && chance(config.mislink_rate)) {
                const std::size_t other = (s + 1 + uniform(present.size() - 1)) % present.size();
                const int right = link_counts[{present[s], present[s]}];
                const int wrong = link_counts[{present[s], present[other]}];
                if (right - (wrong + 1) >= 2) face_slot = other;
            }
            ++link_counts[{present[s], present[face_slot]}];
            entries.push_back({EntryKind::semantic,
                               "Equivalence: " + tag_ref('f', face_slot) + ", " + tag_ref('v', s)});
        }
        input.generated = std::move(entries);

        for (std::size_t k = 0; k < config.short_clips_per_clip; ++k) {
            ShortClipSpec spec;
            spec.index = clip_index * static_cast<std::int64_t>(config.short_clips_per_clip) +
                         static_cast<std::int64_t>(k);
            const std::size_t s = k % present.size();
            const std::string f = "f" + std::to_string(s);
            const std::string v = "v" + std::to_string(s);
            if (k < present.size() || present.size() == 1) {
                spec.faces = {f};
                spec.voices = {v};
            } else if (chance(config.offscreen_rate)) {
                const std::size_t other = (s + 1 + uniform(present.size() - 1)) % present.size();
                spec.faces = {f};
                spec.voices = {"v" + std::to_string(other)};
            } else if (chance(0.5)) {
                const std::size_t other = (s + 1 + uniform(present.size() - 1)) % present.size();
                spec.faces = {f, "f" + std::to_string(other)};
                spec.voices = {v};
            } else {
                spec.faces = {f};
                spec.voices = {v};
            }
            input.short_clips.push_back(std::move(spec));
        }
        world.clips.push_back(std::move(input));
    }

    std::vector<std::pair<std::size_t, std::size_t>> askable;
    for (std::size_t i = 0; i < std::min(n, config.num_clips); ++i) {
        for (std::size_t k = 0; k < config.facts_per_identity; ++k) askable.emplace_back(i, k);
    }
    std::shuffle(askable.begin(), askable.end(), rng);
    askable.resize(config.question_count);
    for (const auto& [i, k] : askable) {
        const Identity& who = world.identities[i];
        const Fact& fact = who.facts[k];
        QaPair qa;
        qa.question = "What does " + who.name + " " + fact.verb_base + "?";
        qa.reference = fact.object;
        qa.identity = i;
        qa.plan.searches = {
            SearchStep{"who is named " + who.name, "(<character_\\d+>) is named " + who.name, "character"},
            SearchStep{"{character} " + fact.verb, "", "character"},
        };
        qa.plan.answer_pattern = "{character} " + fact.verb + " ([^\"]+)";
        qa.gold_clips = fact_clips[{i, k}];
        world.questions.push_back(std::move(qa));
    }
    return world;
}

nlohmann::json to_json(const WorldConfig& c) {
    return {{"num_identities", c.num_identities},
            {"num_clips", c.num_clips},
            {"noise_sigma", c.noise_sigma},
            {"facts_per_identity", c.facts_per_identity},
            {"question_count", c.question_count},
            {"seed", c.seed},
            {"feature_dim", c.feature_dim},
            {"embedding_dim", c.embedding_dim},
            {"short_clips_per_clip", c.short_clips_per_clip},
            {"offscreen_rate", c.offscreen_rate},
            {"mislink_rate", c.mislink_rate}};
}

WorldConfig world_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::parse, "/: expected an object");
    WorldConfig c;
    auto count = [](const json& v, const std::string& key) -> std::size_t {
        if (!v.is_number_unsigned()) fail(ErrorKind::parse, "/" + key + ": expected a non-negative integer");
        return v.get<std::size_t>();
    };
    auto real = [](const json& v, const std::string& key) -> double {
        if (!v.is_number()) fail(ErrorKind::parse, "/" + key + ": expected a number");
        return v.get<double>();
    };
    for (const auto& [key, v] : j.items()) {
        if (key == "num_identities") c.num_identities = count(v, key);
        else if (key == "num_clips") c.num_clips = count(v, key);
        else if (key == "noise_sigma") c.noise_sigma = real(v, key);
        else if (key == "facts_per_identity") c.facts_per_identity = count(v, key);
        else if (key == "question_count") c.question_count = count(v, key);
        else if (key == "seed") c.seed = count(v, key);
        else if (key == "feature_dim") c.feature_dim = count(v, key);
        else if (key == "embedding_dim") c.embedding_dim = count(v, key);
        else if (key == "short_clips_per_clip") c.short_clips_per_clip = count(v, key);
        else if (key == "offscreen_rate") c.offscreen_rate = real(v, key);
        else if (key == "mislink_rate") c.mislink_rate = real(v, key);
        else if (key == "schema_version") {
            if (v != schema_version) fail(ErrorKind::parse, "/schema_version: unsupported schema version");
        } else {
            fail(ErrorKind::parse, "/" + key + ": unknown field");
        }
    }
    return c;
}

void save_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json identities = json::array();
    for (const auto& id : world.identities) {
        json facts = json::array();
        for (const auto& f : id.facts) facts.push_back({{"verb", f.verb}, {"verb_base", f.verb_base}, {"object", f.object}});
        identities.push_back({{"name", id.name}, {"face", id.face}, {"voice", id.voice}, {"facts", std::move(facts)}});
    }
    json truth = json::object();
    for (const auto& [clip, tags] : world.truth) truth[std::to_string(clip)] = tags;
    json questions = json::array();
    for (const auto& q : world.questions) {
        questions.push_back({{"question", q.question},
                             {"reference", q.reference},
                             {"identity", q.identity},
                             {"plan", to_json(q.plan)},
                             {"gold_clips", q.gold_clips}});
    }
    const json doc = {{"schema_version", schema_version},
                      {"config", to_json(world.config)},
                      {"identities", std::move(identities)},
                      {"truth", std::move(truth)},
                      {"questions", std::move(questions)}};

    std::ofstream meta(dir / "world.json", std::ios::binary | std::ios::trunc);
    meta << doc.dump(2) << '\n';
    std::ofstream clips(dir / "clips.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& c : world.clips) clips << to_json(c).dump() << '\n';
    if (!meta || !clips) fail(ErrorKind::invalid_argument, "cannot write world to " + dir.string());
}

SyntheticWorld load_world(const std::filesystem::path& dir) {
    std::ifstream meta(dir / "world.json", std::ios::binary);
    if (!meta) fail(ErrorKind::not_found, "no world.json in " + dir.string());
    json doc;
    try {
        doc = json::parse(meta);
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, "world.json: " + std::string(e.what()));
    }

    SyntheticWorld world;
    try {
        if (doc.at("schema_version") != schema_version) fail(ErrorKind::parse, "world.json: unsupported schema version");
        world.config = world_config_from_json(doc.at("config"));
        for (const auto& id : doc.at("identities")) {
            Identity identity;
            identity.name = id.at("name").get<std::string>();
            identity.face = id.at("face").get<Vector>();
            identity.voice = id.at("voice").get<Vector>();
            for (const auto& f : id.at("facts")) {
                identity.facts.push_back(Fact{f.at("verb").get<std::string>(), f.at("verb_base").get<std::string>(),
                                              f.at("object").get<std::string>()});
            }
            world.identities.push_back(std::move(identity));
        }
        for (const auto& [clip, tags] : doc.at("truth").items()) {
            world.truth[std::stoll(clip)] = tags.get<std::map<std::string, std::size_t>>();
        }
        for (const auto& q : doc.at("questions")) {
            QaPair qa;
            qa.question = q.at("question").get<std::string>();
            qa.reference = q.at("reference").get<std::string>();
            qa.identity = q.at("identity").get<std::size_t>();
            qa.plan = scripted_plan_from_json(q.at("plan"));
            qa.gold_clips = q.at("gold_clips").get<std::vector<std::int64_t>>();
            world.questions.push_back(std::move(qa));
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, "world.json: " + std::string(e.what()));
    }

    std::ifstream clips(dir / "clips.jsonl", std::ios::binary);
    if (!clips) fail(ErrorKind::not_found, "no clips.jsonl in " + dir.string());
    for (const auto& line : read_json_lines(clips)) world.clips.push_back(clip_input_from_json(line));
    return world;
}

nlohmann::json to_json(const EvalReport& r) {
    json records = json::array();
    for (const auto& q : r.records) {
        records.push_back({{"question", q.question},
                           {"reference", q.reference},
                           {"answer", q.answer ? json(*q.answer) : json(nullptr)},
                           {"correct", q.correct},
                           {"rounds_used", q.rounds_used},
                           {"terminated_by", std::string(to_string(q.terminated_by))},
                           {"top1_hit", q.top1_hit},
                           {"error", q.error}});
    }
    return {{"schema_version", schema_version},
            {"question_count", r.question_count},
            {"correct", r.correct},
            {"qa_accuracy", r.qa_accuracy},
            {"identity_precision", r.identity_precision},
            {"identity_recall", r.identity_recall},
            {"identity_f1", r.identity_f1},
            {"meta_dictionary_size", r.meta_dictionary_size},
            {"meta_dictionary_accuracy", r.meta_dictionary_accuracy},
            {"annotated_clips", r.annotated_clips},
            {"rejected_clips", r.rejected_clips},
            {"retrieval_top1_rate", r.retrieval_top1_rate},
            {"mean_rounds", r.mean_rounds},
            {"ingest_failures", r.ingest_failures},
            {"records", std::move(records)}};
}

InProcessBackend::InProcessBackend(MemoryStore& store, const Embedder& embedder, IngestConfig ingest_config,
                                   ControlConfig control_config)
    : store_(store),
      embedder_(embedder),
      ingest_config_(std::move(ingest_config)),
      control_config_(std::move(control_config)) {}

IngestReport InProcessBackend::ingest(const ClipInput& input) {
    return store_.ingest(input, generator_, embedder_, ingest_config_);
}

CharacterMap InProcessBackend::characters() {
    return resolve_characters(*store_.snapshot());
}

Trajectory InProcessBackend::ask(const std::string& question, const std::optional<ScriptedPlan>& plan,
                                 int max_rounds) {
    std::map<std::string, ScriptedPlan> plans;
    if (plan) plans.emplace(question, *plan);
    ScriptedOraclePolicy policy(std::move(plans), control_config_.prompts);
    ControlConfig config = control_config_;
    config.max_rounds = max_rounds;
    const auto graph = store_.snapshot();
    return run_control(question, *graph, policy, embedder_, config);
}

ClipSearchResult InProcessBackend::search(const std::string& query, std::size_t k, double threshold) {
    return search_clip(*store_.snapshot(), query, embedder_, k, threshold, control_config_.retrieval.max_query_variants);
}

std::int64_t clip_clock_ms(std::int64_t clip_index) {
    return clock_origin_ms + clip_index * clip_length_ms;
}

namespace {

double pairs(std::size_t n) {
    return static_cast<double>(n) * static_cast<double>(n > 0 ? n - 1 : 0) / 2.0;
}

struct IdentityScores {
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 1.0;
};

// Pairwise clustering agreement between predicted characters and true identities.
IdentityScores pairwise_scores(const std::vector<std::pair<std::string, std::size_t>>& labels) {
    std::map<std::string, std::size_t> predicted;
    std::map<std::size_t, std::size_t> actual;
    std::map<std::pair<std::string, std::size_t>, std::size_t> both;
    for (const auto& [p, t] : labels) {
        ++predicted[p];
        ++actual[t];
        ++both[{p, t}];
    }
    double tp = 0.0, pred_pairs = 0.0, true_pairs = 0.0;
    for (const auto& [key, n] : both) tp += pairs(n);
    for (const auto& [key, n] : predicted) pred_pairs += pairs(n);
    for (const auto& [key, n] : actual) true_pairs += pairs(n);

    IdentityScores s;
    s.precision = pred_pairs == 0.0 ? 1.0 : tp / pred_pairs;
    s.recall = true_pairs == 0.0 ? 1.0 : tp / true_pairs;
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

std::optional<std::string> last_search_query(const Trajectory& t) {
    for (auto it = t.messages.rbegin(); it != t.messages.rend(); ++it) {
        if (it->role != Role::assistant) continue;
        const auto action = parse_action(it->content);
        if (action && action->type == Action::Type::search) return action->content;
    }
    return std::nullopt;
}

} // namespace

EvalReport run_eval(const SyntheticWorld& world, EvalBackend& backend, const EvalOptions& options) {
    EvalReport report;

    std::vector<IngestReport> ingested;
    for (const auto& clip : world.clips) {
        IngestReport r;
        try {
            r = backend.ingest(clip);
        } catch (const std::exception& e) {
            r.clip_index = clip.clip_index;
            r.rejected = true;
            r.reason = e.what();
        }
        if (r.rejected) ++report.ingest_failures;
        ingested.push_back(std::move(r));
    }
    const CharacterMap characters = backend.characters();

    // Identity resolution against ground truth, one label pair per observation.
    std::vector<std::pair<std::string, std::size_t>> labels;
    std::map<NodeId, std::map<std::size_t, std::size_t>> node_votes;
    for (const auto& r : ingested) {
        const auto truth_it = world.truth.find(r.clip_index);
        if (truth_it == world.truth.end()) continue;
        for (const auto& [tag, identity] : truth_it->second) {
            const auto m = r.matched.find(tag);
            std::string predicted = "unmatched:" + std::to_string(r.clip_index) + ":" + tag;
            if (m != r.matched.end()) {
                ++node_votes[m->second][identity];
                if (auto c = characters.character_of(m->second)) predicted = character_token(*c);
            }
            labels.emplace_back(std::move(predicted), identity);
        }
    }
    const IdentityScores scores = pairwise_scores(labels);
    report.identity_precision = scores.precision;
    report.identity_recall = scores.recall;
    report.identity_f1 = scores.f1;

    auto node_identity = [&](NodeId id) -> std::optional<std::size_t> {
        const auto it = node_votes.find(id);
        if (it == node_votes.end()) return std::nullopt;
        auto best = it->second.begin();
        for (auto v = it->second.begin(); v != it->second.end(); ++v) {
            if (v->second > best->second) best = v;
        }
        return best->first;
    };

    std::vector<ShortClip> shorts;
    for (const auto& r : ingested) shorts.insert(shorts.end(), r.short_clips.begin(), r.short_clips.end());
    const MetaDictionary dictionary = build_meta_dictionary(extract_meta_clips(shorts), options.vote_ratio);
    report.meta_dictionary_size = dictionary.size();
    std::size_t right = 0;
    for (const auto& [voice, face] : dictionary) {
        const auto a = node_identity(voice);
        if (a && a == node_identity(face)) ++right;
    }
    report.meta_dictionary_accuracy =
        dictionary.empty() ? 0.0 : static_cast<double>(right) / static_cast<double>(dictionary.size());

    for (const auto& r : ingested) {
        if (r.rejected) continue;
        std::set<NodeId> faces, voices;
        for (const auto& [tag, id] : r.matched) (id.kind == NodeKind::face ? faces : voices).insert(id);
        if (annotate_equivalence(faces, voices, dictionary).rejected) {
            ++report.rejected_clips;
        } else {
            ++report.annotated_clips;
        }
    }

    MockJudge judge;
    std::size_t top1 = 0;
    long total_rounds = 0;
    for (const auto& qa : world.questions) {
        QuestionRecord rec;
        rec.question = qa.question;
        rec.reference = qa.reference;
        try {
            const Trajectory t = backend.ask(qa.question, qa.plan, options.max_rounds);
            rec.answer = extract_answer(t);
            rec.rounds_used = t.rounds_used;
            rec.terminated_by = t.terminated_by;
            rec.correct = rec.answer && judge_answer(qa.question, qa.reference, *rec.answer, judge);
            if (auto query = last_search_query(t); query && !query->starts_with(node_query_prefix)) {
                const auto hits = backend.search(*query, options.retrieval.clip_k, options.retrieval.clip_threshold);
                rec.top1_hit = !hits.clips.empty() &&
                               std::find(qa.gold_clips.begin(), qa.gold_clips.end(), hits.clips.front().clip_index) !=
                                   qa.gold_clips.end();
            }
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        if (rec.correct) ++report.correct;
        if (rec.top1_hit) ++top1;
        total_rounds += rec.rounds_used;
        report.records.push_back(std::move(rec));
    }
    report.question_count = world.questions.size();
    if (report.question_count > 0) {
        const double n = static_cast<double>(report.question_count);
        report.qa_accuracy = static_cast<double>(report.correct) / n;
        report.retrieval_top1_rate = static_cast<double>(top1) / n;
        report.mean_rounds = static_cast<double>(total_rounds) / n;
    }
    return report;
}

EvalReport run_eval(const SyntheticWorld& world, const EvalOptions& options) {
    GraphConfig graph_config;
    graph_config.text_dim = world.config.embedding_dim;
    graph_config.face_dim = world.config.feature_dim;
    graph_config.voice_dim = world.config.feature_dim;
    MemoryStore store{MemoryGraph(graph_config)};
    const MockEmbedder embedder(world.config.embedding_dim);

    IngestConfig ingest;
    ingest.identity.vote_ratio = options.vote_ratio;
    ingest.clock = clip_clock_ms;
    ControlConfig control;
    control.max_rounds = options.max_rounds;
    control.retrieval = options.retrieval;
    InProcessBackend backend(store, embedder, ingest, control);
    return run_eval(world, backend, options);
}

} // namespace engram
