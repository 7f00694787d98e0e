#include "engram/error.hpp"
#include "engram/graph_io.hpp"
#include "engram/http_adapters.hpp"
#include "engram/json_io.hpp"
#include "engram/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <thread>

using namespace engram;

namespace {

WorldConfig small_world() {
    WorldConfig c;
    c.seed = 21;
    c.num_identities = 4;
    c.num_clips = 12;
    c.question_count = 4;
    return c;
}

GraphConfig graph_config(const SyntheticWorld& w) {
    GraphConfig g;
    g.text_dim = w.config.embedding_dim;
    g.face_dim = g.voice_dim = w.config.feature_dim;
    return g;
}

IngestConfig ingest_config() {
    IngestConfig c;
    c.clock = clip_clock_ms;
    return c;
}

// Runs a Service on an ephemeral port for the lifetime of the object.
struct Running {
    MemoryStore store;
    MockEmbedder embedder;
    Service service;
    int port;
    std::thread thread;

    Running(MemoryGraph g, std::size_t dim, ServiceConfig cfg = {})
        : store(std::move(g)), embedder(dim), service(store, embedder, with_clock(std::move(cfg))), port(service.bind(0)),
          thread([this] { service.listen(); }) {
        while (!service.running()) std::this_thread::yield();
    }
    ~Running() {
        service.stop();
        thread.join();
    }

    static ServiceConfig with_clock(ServiceConfig c) {
        c.ingest = ingest_config();
        return c;
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

HttpEndpoint endpoint(std::string url, std::string auth = "", std::string model = "", int timeout_s = 10) {
    HttpEndpoint e;
    e.url = std::move(url);
    e.auth_header = std::move(auth);
    e.model = std::move(model);
    e.timeout_s = timeout_s;
    return e;
}

// Stand-in for remote model endpoints.
struct MockServer {
    httplib::Server server;
    int port;
    std::thread thread;

    explicit MockServer(const std::function<void(httplib::Server&)>& routes) {
        routes(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        while (!server.is_running()) std::this_thread::yield();
    }
    ~MockServer() {
        server.stop();
        thread.join();
    }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

} // namespace

TEST_CASE("ingest, inspect and search over HTTP") {
    const auto world = generate_world(small_world());
    Running svc(MemoryGraph(graph_config(world)), world.config.embedding_dim);
    auto cli = svc.client();

    MemoryGraph direct(graph_config(world));
    FixtureGenerator gen;
    for (const auto& clip : world.clips) {
        const auto res = cli.Post("/clips", to_json(clip).dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
        const auto want = ingest_clip(direct, clip, gen, svc.embedder, ingest_config());
        CHECK(ingest_report_from_json(json::parse(res->body)) == want);
    }
    CHECK(*svc.store.snapshot() == direct);

    const auto dup = cli.Post("/clips", to_json(world.clips[0]).dump(), "application/json");
    CHECK(dup->status == 409);

    const auto chars = cli.Get("/characters");
    CHECK(chars->status == 200);
    CHECK(json::parse(chars->body) == to_json(resolve_characters(direct)));

    const auto clip0 = cli.Get("/clips/0");
    CHECK(clip0->status == 200);
    CHECK(json::parse(clip0->body).at("episodic").size() == direct.find_clip(0)->episodic.size());
    CHECK(cli.Get("/clips/999")->status == 404);

    const std::string q = direct.node(direct.find_clip(3)->episodic[0]).text;
    const auto search = cli.Get("/search", httplib::Params{{"q", q}, {"k", "2"}}, httplib::Headers{});
    REQUIRE(search->status == 200);
    const json body = json::parse(search->body);
    CHECK(clip_search_result_from_json(body) == search_clip(direct, q, svc.embedder, 2, 0.5));
    CHECK(body.at("formatted") == format_results(search_clip(direct, q, svc.embedder, 2, 0.5)));
    CHECK(cli.Get("/search?q=x&k=two")->status == 400);
    CHECK(cli.Get("/search")->status == 400);
}

TEST_CASE("bad requests name the field") {
    const auto world = generate_world(small_world());
    Running svc(MemoryGraph(graph_config(world)), world.config.embedding_dim);
    auto cli = svc.client();

    const auto garbled = cli.Post("/clips", "{not json", "application/json");
    CHECK(garbled->status == 400);

    json clip = to_json(world.clips[0]);
    clip["observations"][0]["embedding"] = "oops";
    const auto typed = cli.Post("/clips", clip.dump(), "application/json");
    CHECK(typed->status == 400);
    CHECK(json::parse(typed->body).at("error").get<std::string>().rfind("/observations/0/embedding", 0) == 0);

    const auto ask = cli.Post("/ask", R"({"max_rounds": 3})", "application/json");
    CHECK(ask->status == 400);
    CHECK(json::parse(ask->body).at("error").get<std::string>().rfind("/question", 0) == 0);
    CHECK(cli.Post("/ask", R"({"question": "q", "max_rounds": 0})", "application/json")->status == 400);
}

TEST_CASE("ask on an empty graph walks through empty searches") {
    const auto world = generate_world(small_world());
    Running svc(MemoryGraph(graph_config(world)), world.config.embedding_dim);
    auto cli = svc.client();
    const auto res = cli.Post("/ask", R"({"question": "What does Ada drink?"})", "application/json");
    REQUIRE(res->status == 200);
    const json body = json::parse(res->body);
    const Trajectory t = trajectory_from_json(body.at("trajectory"));
    CHECK(t.messages.at(3).content.rfind("[EMPTY]", 0) == 0);
    CHECK(body.at("terminated_by") == "answer");
    CHECK(body.at("rounds_used") == t.rounds_used);
}

TEST_CASE("policy failures return the partial trajectory") {
    struct Broken final : Policy {
        std::string respond(const Trajectory&) override { throw Error(ErrorKind::transport, "upstream down"); }
    };
    ServiceConfig cfg;
    cfg.policy = [] { return std::make_unique<Broken>(); };
    Running svc(MemoryGraph(GraphConfig{}), 64, cfg);
    auto cli = svc.client();
    const auto res = cli.Post("/ask", R"({"question": "q"})", "application/json");
    CHECK(res->status == 502);
    const json body = json::parse(res->body);
    CHECK(trajectory_from_json(body.at("trajectory")).messages.size() == 2);
}

TEST_CASE("persisted graph matches the served one") {
    const auto world = generate_world(small_world());
    const auto path = std::filesystem::temp_directory_path() / "engram_service_persist.bin";
    std::filesystem::remove(path);
    ServiceConfig cfg;
    cfg.persist_path = path;
    Running svc(MemoryGraph(graph_config(world)), world.config.embedding_dim, cfg);
    auto cli = svc.client();
    for (std::size_t i = 0; i < 3; ++i) cli.Post("/clips", to_json(world.clips[i]).dump(), "application/json");
    CHECK(load_snapshot_file(path) == *svc.store.snapshot());
    std::filesystem::remove(path);
}

TEST_CASE("concurrent ingestion never exposes a partial clip") {
    auto cfg = small_world();
    cfg.num_clips = 40;
    const auto world = generate_world(cfg);
    MemoryGraph full(graph_config(world));
    FixtureGenerator gen;
    ingest_stream(full, world.clips, gen, MockEmbedder(world.config.embedding_dim), ingest_config());

    Running svc(MemoryGraph(graph_config(world)), world.config.embedding_dim);
    std::atomic<bool> done{false};
    std::atomic<int> partial{0}, reads{0};
    std::thread reader([&] {
        auto cli = svc.client();
        while (!done.load()) {
            const auto res = cli.Get("/search", httplib::Params{{"q", "drinks"}, {"k", "40"}, {"t", "-1"}}, httplib::Headers{});
            if (!res || res->status != 200) continue;
            for (const auto& hit : clip_search_result_from_json(json::parse(res->body)).clips) {
                const auto* rec = full.find_clip(hit.clip_index);
                if (hit.episodic.size() != rec->episodic.size() || hit.semantic.size() != rec->semantic.size()) ++partial;
            }
            ++reads;
        }
    });
    auto cli = svc.client();
    for (const auto& clip : world.clips) cli.Post("/clips", to_json(clip).dump(), "application/json");
    done = true;
    reader.join();
    CHECK(partial.load() == 0);
    CHECK(reads.load() > 0);
}

TEST_CASE("HTTP backend equals the in-process backend") {
    const auto world = generate_world(small_world());
    const auto local = run_eval(world);

    Running svc(MemoryGraph(graph_config(world)), world.config.embedding_dim);
    HttpBackend remote(svc.url());
    CHECK(run_eval(world, remote) == local);
}

TEST_CASE("url parsing") {
    const auto u = parse_url("http://example.org:8081/v1/chat");
    CHECK(u.host == "example.org");
    CHECK(u.port == 8081);
    CHECK(u.path == "/v1/chat");
    CHECK(parse_url("http://host").path == "/");
    CHECK_THROWS_AS(parse_url("https://host/"), Error);
    CHECK_THROWS_AS(parse_url("host:80"), Error);
    CHECK_THROWS_AS(parse_url("http://host:99999/"), Error);
}

TEST_CASE("model adapters against a mock server") {
    MockServer mock([](httplib::Server& s) {
        s.Post("/chat", [](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            const std::string last = body.at("messages").back().at("content");
            std::string reply = "Maybe";
            if (last.find("agent_answer: green tea") != std::string::npos) reply = "Yes";
            if (last.find("agent_answer: coffee") != std::string::npos) reply = "No";
            if (last == "ping") reply = "pong";
            res.set_content(json{{"content", reply}}.dump(), "application/json");
        });
        s.Post("/openai", [](const httplib::Request& req, httplib::Response& res) {
            CHECK(req.get_header_value("Authorization") == "Bearer k");
            CHECK(json::parse(req.body).at("model") == "m");
            res.set_content(R"({"choices":[{"message":{"content":"[Answer] ok"}}]})", "application/json");
        });
        s.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
            const std::string input = json::parse(req.body).at("input");
            if (input == "short") res.set_content(R"({"embedding":[1,2]})", "application/json");
            else res.set_content(R"({"embedding":[3,0,0,4]})", "application/json");
        });
        s.Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            const std::string id = body.at("ids").at(0);
            res.set_content(json{{"entries", {{{"kind", "episodic"}, {"text", id + " waves"}}}}}.dump(), "application/json");
        });
        s.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
            res.status = 500;
            res.set_content("no", "text/plain");
        });
    });

    HttpChatClient chat(endpoint(mock.url("/chat")));
    CHECK(chat.complete({{Role::user, "ping"}}) == "pong");
    ChatJudge judge(chat);
    CHECK(judge.judge("What does Ada drink?", "green tea", "green tea"));
    CHECK_FALSE(judge.judge("What does Ada drink?", "green tea", "coffee"));
    try {
        judge.judge("What does Ada drink?", "green tea", "unclear");
        FAIL("expected a judge protocol error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::judge_protocol);
    }

    HttpChatClient openai(endpoint(mock.url("/openai"), "Bearer k", "m"));
    ChatPolicy policy(openai);
    Trajectory t;
    t.messages = {{Role::system, "s"}, {Role::user, "u"}};
    CHECK(policy.respond(t) == "[Answer] ok");

    HttpEmbedder embedder(endpoint(mock.url("/embed")), 4);
    const Vector v = embedder.embed("anything");
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[3] == doctest::Approx(0.8));
    CHECK_THROWS_AS(embedder.embed("short"), Error);

    HttpMemoryGenerator generator(endpoint(mock.url("/generate")));
    MemoryGraph g(GraphConfig{4, 4, 4, 10});
    ClipInput in;
    in.observations = {{"a", {NodeKind::face, {1, 0, 0, 0}, 0, {}}}};
    const auto report = ingest_clip(g, in, generator, embedder, ingest_config());
    REQUIRE(report.stored_entries.size() == 1);
    CHECK(g.node(report.stored_entries[0]).text == "<face_0> waves");

    HttpChatClient broken(endpoint(mock.url("/broken")));
    try {
        broken.complete({{Role::user, "x"}});
        FAIL("expected transport error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::transport);
    }
    HttpChatClient nowhere(endpoint("http://127.0.0.1:1/chat", "", "", 2));
    CHECK_THROWS_AS(nowhere.complete({{Role::user, "x"}}), Error);
}
