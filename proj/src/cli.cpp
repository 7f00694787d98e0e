#include "engram/cli.hpp"

#include "engram/graph_io.hpp"
#include "engram/harness.hpp"
#include "engram/http_adapters.hpp"
#include "engram/json_io.hpp"
#include "engram/rl_scoring.hpp"
#include "engram/service.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <thread>

namespace engram {

namespace {

struct GraphOptions {
    std::string graph;
    std::size_t text_dim = default_mock_dimension;
    std::size_t feature_dim = default_mock_dimension;
};

MemoryGraph open_graph(const GraphOptions& o, bool create) {
    if (std::filesystem::exists(o.graph)) return load_snapshot_file(o.graph);
    if (!create) fail(ErrorKind::not_found, "graph file not found: " + o.graph);
    GraphConfig config;
    config.text_dim = o.text_dim;
    config.face_dim = o.feature_dim;
    config.voice_dim = o.feature_dim;
    return MemoryGraph(config);
}

std::unique_ptr<Embedder> make_embedder(const MemoryGraph& graph, const std::string& url) {
    if (url.empty()) return std::make_unique<MockEmbedder>(graph.config().text_dim);
    return std::make_unique<HttpEmbedder>(HttpEndpoint{url, "", "", 60}, graph.config().text_dim);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::not_found, "cannot open " + path);
    return in;
}

json read_json_file(const std::string& path) {
    auto in = open_input(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::parse, path + ": " + e.what());
    }
}

ControlConfig control_config(int rounds, const std::string& prompts_dir) {
    ControlConfig c;
    c.max_rounds = rounds;
    if (!prompts_dir.empty()) c.prompts = PromptTemplates::load(prompts_dir);
    return c;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"engram: entity-centric multimodal memory with a search/answer control loop"};
    app.require_subcommand(1);

    GraphOptions graph_opts;
    auto add_graph = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--graph", graph_opts.graph, "Graph snapshot file");
        if (required) opt->required();
    };
    auto add_dims = [&](CLI::App* sub) {
        sub->add_option("--text-dim", graph_opts.text_dim, "Text embedding dimension for a new graph");
        sub->add_option("--feature-dim", graph_opts.feature_dim, "Face/voice feature dimension for a new graph");
    };

    // ingest
    std::string clips_path, embed_url, generator_url;
    auto* ingest = app.add_subcommand("ingest", "Ingest a JSON-lines clip stream into a graph file");
    ingest->add_option("clips", clips_path, "clips.jsonl")->required();
    add_graph(ingest, true);
    add_dims(ingest);
    ingest->add_option("--embed-url", embed_url, "HTTP embedding endpoint (mock embedder when absent)");
    ingest->add_option("--generator-url", generator_url, "HTTP memory generator (fixture entries when absent)");

    // ask
    std::string question, policy_kind = "scripted", policy_url, prompts_dir, plan_path;
    int rounds = 5;
    bool show_trajectory = false;
    auto* ask = app.add_subcommand("ask", "Answer one question against a graph");
    ask->add_option("question", question, "Question text")->required();
    add_graph(ask, true);
    ask->add_option("--policy", policy_kind, "scripted or http")->check(CLI::IsMember({"scripted", "http"}));
    ask->add_option("--policy-url", policy_url, "Chat endpoint for --policy http");
    ask->add_option("--rounds", rounds, "Maximum rounds H")->check(CLI::PositiveNumber);
    ask->add_option("--prompts", prompts_dir, "Directory with prompt template files");
    ask->add_option("--plan", plan_path, "Scripted plan JSON for the scripted policy");
    ask->add_option("--embed-url", embed_url, "HTTP embedding endpoint");
    ask->add_flag("--trajectory", show_trajectory, "Print the full trajectory");

    // inspect
    bool show_nodes = false, show_edges = false, show_clips = false, show_characters = false;
    auto* inspect = app.add_subcommand("inspect", "Print graph contents");
    add_graph(inspect, true);
    inspect->add_flag("--nodes", show_nodes);
    inspect->add_flag("--edges", show_edges);
    inspect->add_flag("--clips", show_clips);
    inspect->add_flag("--characters", show_characters);

    // simulate
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic world");
    simulate->add_option("--config", config_path, "WorldConfig JSON (defaults when absent)");
    simulate->add_option("--out", out_dir, "Output directory")->required();
    simulate->add_option("--seed", seed, "Override the config seed");

    // eval
    std::string world_dir, remote;
    bool via_http = false;
    auto* eval = app.add_subcommand("eval", "Evaluate a synthetic world and print the report");
    eval->add_option("--world", world_dir, "Directory written by simulate")->required();
    eval->add_option("--rounds", rounds, "Maximum rounds H")->check(CLI::PositiveNumber);
    auto* remote_opt = eval->add_option("--remote", remote, "Base URL of a running service with an empty graph");
    eval->add_flag("--via-http", via_http, "Evaluate through a private in-process HTTP service")->excludes(remote_opt);

    // score
    std::string groups_path, judge_url;
    auto* score = app.add_subcommand("score", "Rewards, DAPO keep flag and advantages per answer group");
    score->add_option("groups", groups_path, "JSON lines of {question, reference, answers}")->required();
    score->add_option("--judge-url", judge_url, "Chat endpoint for an LLM judge (mock judge when absent)");

    // serve
    int port = 8080;
    std::string host = "127.0.0.1";
    bool persist = false;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP JSON API over a graph");
    add_graph(serve, true);
    add_dims(serve);
    serve->add_option("--port", port, "Port, 0 for any free port");
    serve->add_option("--host", host, "Bind address");
    serve->add_flag("--persist", persist, "Write the graph back after each ingestion");
    serve->add_option("--embed-url", embed_url, "HTTP embedding endpoint");
    serve->add_option("--policy-url", policy_url, "Chat endpoint used for /ask without a plan");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return 2;
    }

    try {
        if (*ingest) {
            MemoryGraph graph = open_graph(graph_opts, true);
            const auto embedder = make_embedder(graph, embed_url);
            auto in = open_input(clips_path);
            std::vector<ClipInput> clips;
            for (const auto& j : read_json_lines(in)) clips.push_back(clip_input_from_json(j));
            FixtureGenerator fixture;
            std::unique_ptr<MemoryGenerator> remote_generator;
            if (!generator_url.empty()) {
                remote_generator = std::make_unique<HttpMemoryGenerator>(HttpEndpoint{generator_url, "", "", 60});
            }
            MemoryGenerator& generator = remote_generator ? *remote_generator : fixture;
            const auto reports = ingest_stream(graph, clips, generator, *embedder, IngestConfig{});
            for (const auto& r : reports) out << to_json(r).dump() << '\n';
            save_snapshot_file(graph, graph_opts.graph);
            const bool any_rejected = std::any_of(reports.begin(), reports.end(), [](const IngestReport& r) { return r.rejected; });
            return any_rejected ? 1 : 0;
        }

        if (*ask) {
            const MemoryGraph graph = open_graph(graph_opts, false);
            const auto embedder = make_embedder(graph, embed_url);
            const ControlConfig config = control_config(rounds, prompts_dir);
            std::unique_ptr<ChatClient> client;
            std::unique_ptr<Policy> policy;
            if (policy_kind == "http") {
                if (policy_url.empty()) fail(ErrorKind::configuration, "--policy http needs --policy-url");
                client = std::make_unique<HttpChatClient>(HttpEndpoint{policy_url, "", "", 120});
                policy = std::make_unique<ChatPolicy>(*client);
            } else {
                std::map<std::string, ScriptedPlan> plans;
                if (!plan_path.empty()) plans.emplace(question, scripted_plan_from_json(read_json_file(plan_path)));
                policy = std::make_unique<ScriptedOraclePolicy>(std::move(plans), config.prompts);
            }
            const Trajectory t = run_control(question, graph, *policy, *embedder, config);
            const auto answer = extract_answer(t);
            json result = {{"answer", answer ? json(*answer) : json(nullptr)},
                           {"rounds_used", t.rounds_used},
                           {"terminated_by", std::string(to_string(t.terminated_by))}};
            if (show_trajectory) result["trajectory"] = to_json(t);
            out << result.dump(2) << '\n';
            return 0;
        }

        if (*inspect) {
            const MemoryGraph graph = open_graph(graph_opts, false);
            const bool any = show_nodes || show_edges || show_clips || show_characters;
            if (!any) {
                const json summary = {{"text_nodes", graph.nodes_of(NodeKind::text).size()},
                                      {"face_nodes", graph.nodes_of(NodeKind::face).size()},
                                      {"voice_nodes", graph.nodes_of(NodeKind::voice).size()},
                                      {"edges", graph.edges().size()},
                                      {"clips", graph.clips().size()},
                                      {"characters", resolve_characters(graph).character_count()}};
                out << summary.dump(2) << '\n';
            }
            if (show_nodes) out << dump_nodes(graph);
            if (show_edges) out << dump_edges(graph);
            if (show_clips) out << dump_clips(graph);
            if (show_characters) out << dump_characters(graph);
            return 0;
        }

        if (*simulate) {
            WorldConfig config;
            if (!config_path.empty()) config = world_config_from_json(read_json_file(config_path));
            if (seed) config.seed = *seed;
            const SyntheticWorld world = generate_world(config);
            save_world(world, out_dir);
            out << json{{"out", out_dir}, {"clips", world.clips.size()}, {"questions", world.questions.size()}}.dump()
                << '\n';
            return 0;
        }

        if (*eval) {
            const SyntheticWorld world = load_world(world_dir);
            EvalOptions options;
            options.max_rounds = rounds;
            EvalReport report;
            if (!remote.empty()) {
                HttpBackend backend(remote);
                report = run_eval(world, backend, options);
            } else if (via_http) {
                GraphConfig gc;
                gc.text_dim = world.config.embedding_dim;
                gc.face_dim = world.config.feature_dim;
                gc.voice_dim = world.config.feature_dim;
                MemoryStore store{MemoryGraph(gc)};
                const MockEmbedder embedder(world.config.embedding_dim);
                ServiceConfig sc;
                sc.ingest.identity.vote_ratio = options.vote_ratio;
                sc.ingest.clock = clip_clock_ms;
                sc.control.max_rounds = options.max_rounds;
                sc.control.retrieval = options.retrieval;
                Service service(store, embedder, sc);
                const int bound = service.bind(0);
                std::thread server([&service] { service.listen(); });
                try {
                    HttpBackend backend("http://127.0.0.1:" + std::to_string(bound));
                    report = run_eval(world, backend, options);
                } catch (...) {
                    service.stop();
                    server.join();
                    throw;
                }
                service.stop();
                server.join();
            } else {
                report = run_eval(world, options);
            }
            out << to_json(report).dump(2) << '\n';
            return 0;
        }

        if (*score) {
            MockJudge mock;
            std::unique_ptr<ChatClient> client;
            std::unique_ptr<Judge> chat_judge;
            if (!judge_url.empty()) {
                client = std::make_unique<HttpChatClient>(HttpEndpoint{judge_url, "", "", 60});
                chat_judge = std::make_unique<ChatJudge>(*client);
            }
            Judge& judge = chat_judge ? *chat_judge : static_cast<Judge&>(mock);
            auto in = open_input(groups_path);
            std::size_t line = 0;
            for (const auto& g : read_json_lines(in)) {
                ++line;
                const std::string where = "group " + std::to_string(line);
                if (!g.is_object() || !g.contains("question") || !g.contains("reference") || !g.contains("answers") ||
                    !g["answers"].is_array()) {
                    fail(ErrorKind::parse, where + ": expected {question, reference, answers}");
                }
                const std::string q = g["question"].get<std::string>();
                const std::string ref = g["reference"].get<std::string>();
                std::vector<double> rewards;
                for (const auto& a : g["answers"]) {
                    const std::optional<std::string> answer =
                        a.is_null() ? std::nullopt : std::optional<std::string>(a.get<std::string>());
                    rewards.push_back(compute_reward(q, ref, answer, judge));
                }
                json result = {{"question", q},
                               {"rewards", rewards},
                               {"keep", dapo_group_filter(rewards)},
                               {"advantages", group_advantages(rewards)}};
                out << result.dump() << '\n';
            }
            return 0;
        }

        if (*serve) {
            MemoryStore store(open_graph(graph_opts, true));
            const auto embedder = make_embedder(*store.snapshot(), embed_url);
            ServiceConfig sc;
            if (persist) sc.persist_path = graph_opts.graph;
            std::shared_ptr<ChatClient> client;
            if (!policy_url.empty()) {
                client = std::make_shared<HttpChatClient>(HttpEndpoint{policy_url, "", "", 120});
                sc.policy = [client] { return std::make_unique<ChatPolicy>(*client); };
            }
            Service service(store, *embedder, sc);
            const int bound = service.bind(port, host);
            out << "listening on http://" << host << ":" << bound << std::endl;
            service.listen();
            return 0;
        }
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace engram
