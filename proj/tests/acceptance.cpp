// Acceptance run: one PASS/FAIL line per criterion.
#include "engram/cli.hpp"
#include "engram/graph_io.hpp"
#include "engram/harness.hpp"
#include "engram/json_io.hpp"
#include "engram/rl_scoring.hpp"
#include "engram/service.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <iostream>
#include <regex>
#include <sstream>
#include <thread>

using namespace engram;

namespace {

constexpr double voting_time_limit_s = 10.0;
constexpr double meta_accuracy_floor = 0.95;
constexpr double clip_term_tolerance = 1e-12;
constexpr double suite_time_limit_s = 300.0;

using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point start) {
    return std::chrono::duration<double>(SteadyClock::now() - start).count();
}

int failures = 0;

void report(int n, bool pass, const std::string& what, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("criterion %d: %s  %s (%s)\n", n, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
    std::fflush(stdout);
}

void algorithm2_oracle() {
    std::mt19937_64 rng(1001);
    const auto start = SteadyClock::now();
    int agree = 0;
    const int cases = 1000;
    for (int t = 0; t < cases; ++t) {
        const std::size_t faces = 1 + rng() % 10, voices = 1 + rng() % 10, n = rng() % 201;
        std::vector<MetaClip> meta;
        for (std::size_t i = 0; i < n; ++i) {
            meta.push_back({static_cast<std::int64_t>(i), NodeId::face(rng() % faces), NodeId::voice(rng() % voices)});
        }
        if (build_meta_dictionary(meta, 0.6) == oracle::meta_dictionary(meta, 0.6)) ++agree;
    }
    const double elapsed = seconds_since(start);
    report(1, agree == cases && elapsed < voting_time_limit_s, "meta-dictionary equals step-by-step oracle",
           std::to_string(agree) + "/" + std::to_string(cases) + " agree, " + std::to_string(elapsed) + " s");
}

void identity_accuracy() {
    auto mean_accuracy = [](double sigma, bool& all_exact) {
        double total = 0.0;
        all_exact = true;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            WorldConfig c;
            c.num_identities = 10;
            c.num_clips = 100;
            c.noise_sigma = sigma;
            c.seed = seed;
            const double acc = run_eval(generate_world(c)).meta_dictionary_accuracy;
            total += acc;
            if (acc != 1.0) all_exact = false;
        }
        return total / 50.0;
    };
    bool exact_noisy = false, exact_clean = false;
    const double noisy = mean_accuracy(0.15, exact_noisy);
    const double clean = mean_accuracy(0.0, exact_clean);
    report(2, noisy >= meta_accuracy_floor && clean == 1.0 && exact_clean, "meta-dictionary accuracy on synthetic worlds",
           "sigma=0.15 mean " + std::to_string(noisy) + ", sigma=0 mean " + std::to_string(clean));
}

void voting_dominance() {
    std::mt19937_64 rng(3003);
    int correct = 0;
    const int cases = 500;
    for (int t = 0; t < cases; ++t) {
        MemoryGraph g(GraphConfig{8, 4, 4, 10});
        const std::size_t voices = 1 + rng() % 8, faces = voices + 1 + rng() % 8;
        for (std::size_t i = 0; i < faces; ++i) g.add_entity_node(NodeKind::face, {Vector{1, 0, 0, 0}});
        for (std::size_t i = 0; i < voices; ++i) g.add_entity_node(NodeKind::voice, {Vector{1, 0, 0, 0}});
        std::vector<std::uint64_t> order(faces);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::tuple<NodeId, NodeId, NodeId>> expected;
        bool ok = true;
        for (std::size_t v = 0; v < voices; ++v) {
            const NodeId voice = NodeId::voice(v), major = NodeId::face(order[v]);
            NodeId minor = NodeId::face(order[voices + rng() % (faces - voices)]);
            if (rng() % 2) minor = NodeId::face(order[(v + 1) % voices]);
            if (minor == major) minor = NodeId::face(order[voices]);
            const int k = 1 + static_cast<int>(rng() % 4);
            // Interleave so insertion order carries no signal.
            std::vector<NodeId> calls(3 * k, major);
            calls.insert(calls.end(), k, minor);
            std::shuffle(calls.begin(), calls.end(), rng);
            for (NodeId f : calls) g.reinforce_edge(voice, f, EdgeKind::equivalence);
            expected.emplace_back(voice, major, minor);
        }
        const CharacterMap m = resolve_characters(g);
        for (auto [voice, major, minor] : expected) {
            if (m.character_of(voice) != m.character_of(major)) ok = false;
            if (m.character_of(voice) == m.character_of(minor)) ok = false;
        }
        if (ok) ++correct;
    }
    report(3, correct == cases, "3:1 reinforcement picks the majority pairing",
           std::to_string(correct) + "/" + std::to_string(cases) + " graphs");
}

void retrieval_contract() {
    const MockEmbedder embedder;
    std::mt19937_64 rng(4004);
    int agree = 0, exact_hits = 0;
    const int cases = 1000;
    for (int t = 0; t < cases; ++t) {
        const MemoryGraph g = fixtures::random_clip_graph(rng, embedder);
        const std::string q = fixtures::random_query(rng);
        const auto got = search_clip(g, q, embedder, 2, 0.5);
        const auto want = oracle::search_clip(g, q, embedder, 2, 0.5);
        bool same = got.clips.size() == want.size() && got.empty_marker == want.empty();
        for (std::size_t i = 0; same && i < want.size(); ++i) {
            same = got.clips[i].clip_index == want[i].clip && got.clips[i].score == want[i].score &&
                   got.clips[i].episodic == want[i].episodic && got.clips[i].semantic == want[i].semantic;
        }
        if (same) ++agree;
    }
    for (int t = 0; t < cases; ++t) {
        MemoryGraph g(GraphConfig{64, 8, 8, 10});
        const std::size_t clips = 1 + rng() % 30;
        std::vector<std::pair<std::int64_t, std::string>> entries;
        for (std::size_t c = 0; c < clips; ++c) {
            for (std::size_t i = 0; i < 1 + rng() % 3; ++i) {
                const std::string text = "<face_" + std::to_string(rng() % 5) + "> w" + std::to_string(rng() % 1000000) +
                                         " w" + std::to_string(rng() % 1000000);
                g.add_text_entry(static_cast<std::int64_t>(c), EntryKind::episodic, text, embedder.embed(text));
                entries.emplace_back(static_cast<std::int64_t>(c), text);
            }
        }
        const auto& [clip, text] = entries[rng() % entries.size()];
        const auto r = search_clip(g, text, embedder, 2, 0.5);
        if (!r.clips.empty() && r.clips[0].clip_index == clip) ++exact_hits;
    }
    report(4, agree == cases && exact_hits == cases, "search_clip contract (k=2, t=0.5)",
           std::to_string(agree) + "/" + std::to_string(cases) + " match brute force, " + std::to_string(exact_hits) +
               "/" + std::to_string(cases) + " exact-text rank 1");
}

class ReplayPolicy final : public Policy {
public:
    explicit ReplayPolicy(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string respond(const Trajectory& t) override {
        const auto turn = static_cast<std::size_t>(std::count_if(
            t.messages.begin(), t.messages.end(), [](const Message& m) { return m.role == Role::assistant; }));
        return turn < replies_.size() ? replies_[turn] : "";
    }

private:
    std::vector<std::string> replies_;
};

void control_shape() {
    const MockEmbedder embedder;
    std::mt19937_64 rng(5005);
    const MemoryGraph g = fixtures::random_clip_graph(rng, embedder);
    const ControlConfig cfg;  // H = 5
    const std::vector<std::string> fragments{
        "[Search] tea", "Action: [Search]\nContent: red folder", "[Answer] Betty", "no action at all",
        "<think>[Answer] hidden</think>", "Action: [Search]\nContent: node: bread", "[Search]", "[Answer]   ",
        "Action: [Answer]\nContent: green tea", "<think>unclosed [Search] x"};
    static const std::regex shape("^SU+(AU+)*A?$");

    auto search = [&](const std::string& q) { return search_memory(g, q, embedder, cfg.retrieval); };
    auto role_string = [](const Trajectory& t) {
        std::string s;
        for (const auto& m : t.messages) s += m.role == Role::system ? 'S' : m.role == Role::user ? 'U' : 'A';
        return s;
    };

    int shape_ok = 0;
    const int policies = 200;
    for (int p = 0; p < policies; ++p) {
        std::vector<std::string> replies;
        if (p % 4 == 0) replies.assign(10, "[Search] tea " + std::to_string(p));
        else if (p % 4 == 1) replies.assign(10, fragments[3 + rng() % 2]);
        else for (int i = 0; i < 10; ++i) replies.push_back(fragments[rng() % fragments.size()]);
        ReplayPolicy policy(replies);
        const Trajectory t = run_control("q", g, policy, embedder, cfg);
        bool ok = t.rounds_used <= cfg.max_rounds && std::regex_match(role_string(t), shape);
        // Count searches; a session that searched through round H-1 must carry the last-round prompt.
        int searches = 0;
        for (const auto& m : t.messages) {
            if (m.role != Role::assistant) continue;
            const auto a = parse_action(m.content);
            if (a && a->type == Action::Type::search) ++searches;
        }
        if (searches >= cfg.max_rounds - 1) {
            bool found = false;
            for (const auto& m : t.messages) {
                if (m.role == Role::user && m.content.ends_with(cfg.prompts.last_round)) found = true;
            }
            ok = ok && found;
        }
        if (t.terminated_by == Termination::round_limit) {
            ok = ok && t.messages.back().content.ends_with(cfg.prompts.last_round);
        }
        if (ok) ++shape_ok;
    }

    int traces = 0;
    const int scripted = 50;
    for (int s = 0; s < scripted; ++s) {
        std::vector<std::string> replies;
        const int searches = static_cast<int>(rng() % 7);
        for (int i = 0; i < searches; ++i) replies.push_back("Action: [Search]\nContent: " + fixtures::random_query(rng));
        if (rng() % 3) replies.push_back("Action: [Answer]\nContent: answer " + std::to_string(s));
        else replies.push_back("unparseable");
        ReplayPolicy policy(replies);
        const std::string question = "question " + std::to_string(s);
        if (run_control(question, g, policy, embedder, cfg) ==
            oracle::control_loop(question, replies, search, cfg.max_rounds, cfg.prompts)) {
            ++traces;
        }
    }
    report(5, shape_ok == policies && traces == scripted, "control loop shape (H=5)",
           std::to_string(shape_ok) + "/" + std::to_string(policies) + " policies valid, " + std::to_string(traces) + "/" +
               std::to_string(scripted) + " traces equal the oracle");
}

void rl_math() {
    bool ok = group_advantages(std::vector<double>{1, 0, 0, 1}) == std::vector<double>{1, -1, -1, 1};
    int filter_ok = 0;
    for (int bits = 0; bits < 16; ++bits) {
        std::vector<double> r(4);
        for (int i = 0; i < 4; ++i) r[i] = (bits >> i) & 1;
        const bool expected = bits != 0 && bits != 15;
        if (dapo_group_filter(r) == expected) ++filter_ok;
    }
    const double hi = clipped_term(2.0, 1.0, 0.2, 0.28), lo = clipped_term(0.5, -1.0, 0.2, 0.28);
    ok = ok && filter_ok == 16 && std::abs(hi - 1.28) <= clip_term_tolerance && std::abs(lo + 0.8) <= clip_term_tolerance;

    std::mt19937_64 rng(6006);
    std::uniform_real_distribution<double> u(1e-9, 1.0);
    int kl_ok = 0;
    const int samples = 10000;
    for (int s = 0; s < samples; ++s) {
        const std::size_t n = 1 + rng() % 16;
        std::vector<double> p(n), q(n);
        std::vector<bool> mask(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = u(rng);
            q[i] = u(rng);
            mask[i] = rng() % 4 != 0;
        }
        if (kl_estimate(p, p, mask) == 0.0 && kl_estimate(p, q, mask) >= 0.0) ++kl_ok;
    }
    ok = ok && kl_ok == samples;
    char detail[200];
    std::snprintf(detail, sizeof detail, "filter %d/16, clip %.15g and %.15g, kl %d/%d", filter_ok, hi, lo, kl_ok, samples);
    report(6, ok, "advantages, filter, clipping and KL", detail);
}

void persistence() {
    std::mt19937_64 rng(7007);
    int equal = 0;
    const int cases = 1000;
    for (int t = 0; t < cases; ++t) {
        const MemoryGraph g = fixtures::random_graph(rng, 1 + static_cast<int>(rng() % 120));
        if (load_snapshot(save_snapshot(g)) == g) ++equal;
    }
    long prefixes = 0, rejected = 0;
    for (int t = 0; t < 20; ++t) {
        const std::string bytes = save_snapshot(fixtures::random_graph(rng, 30));
        for (std::size_t n = 0; n < bytes.size(); ++n) {
            ++prefixes;
            try {
                load_snapshot(std::string_view(bytes).substr(0, n));
            } catch (const Error&) {
                ++rejected;
            }
        }
    }
    report(7, equal == cases && rejected == prefixes, "snapshot round trips and truncation",
           std::to_string(equal) + "/" + std::to_string(cases) + " identical, " + std::to_string(rejected) + "/" +
               std::to_string(prefixes) + " truncated prefixes rejected");
}

std::string cli(const std::vector<std::string>& args, int& code) {
    std::ostringstream out, err;
    code = run_cli(args, out, err);
    return out.str();
}

void determinism(SteadyClock::time_point suite_start) {
    const auto dir = std::filesystem::temp_directory_path() / "engram_acceptance_world";
    std::filesystem::remove_all(dir);
    int c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    cli({"simulate", "--out", dir.string(), "--seed", "8"}, c1);
    const std::string first = cli({"eval", "--world", dir.string()}, c2);
    const std::string second = cli({"eval", "--world", dir.string()}, c3);
    const std::string http = cli({"eval", "--world", dir.string(), "--via-http"}, c4);
    std::filesystem::remove_all(dir);
    const double elapsed = seconds_since(suite_start);
    const bool ok = c1 == 0 && c2 == 0 && c3 == 0 && c4 == 0 && !first.empty() && first == second && first == http &&
                    elapsed < suite_time_limit_s;
    report(8, ok, "simulate + eval byte-identical across runs and over HTTP",
           std::string(first == second ? "runs equal" : "runs differ") + ", " +
               (first == http ? "HTTP equal" : "HTTP differs") + ", acceptance wall time " + std::to_string(elapsed) + " s");
}

} // namespace

int main() {
    const auto start = SteadyClock::now();
    const std::vector<std::function<void()>> criteria{algorithm2_oracle, identity_accuracy, voting_dominance,
                                                      retrieval_contract, control_shape,     rl_math,
                                                      persistence,        [&] { determinism(start); }};
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        try {
            criteria[i]();
        } catch (const std::exception& e) {
            report(static_cast<int>(i + 1), false, "threw", e.what());
        }
    }
    return failures == 0 ? 0 : 1;
}
