#include "engram/service.hpp"

#include "engram/graph_io.hpp"
#include "engram/http_adapters.hpp"
#include "engram/json_io.hpp"

#include <httplib.h>

#include <charconv>
#include <mutex>

namespace engram {

namespace {

int status_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::parse:
    case ErrorKind::format:
    case ErrorKind::invalid_argument: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::transport:
    case ErrorKind::policy:
    case ErrorKind::judge_protocol: return 502;
    case ErrorKind::configuration: return 500;
    }
    return 500;
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, json{{"error", message}});
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::parse, std::string("/: malformed JSON: ") + e.what());
    }
}

template <class T>
std::optional<T> number_param(const httplib::Request& req, const std::string& name) {
    if (!req.has_param(name)) return std::nullopt;
    const std::string s = req.get_param_value(name);
    T value{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || p != s.data() + s.size()) fail(ErrorKind::parse, "?" + name + ": not a number: " + s);
    return value;
}

} // namespace

struct Service::Impl {
    MemoryStore& store;
    const Embedder& embedder;
    ServiceConfig config;
    FixtureGenerator generator;
    std::mutex ingest_mutex;
    httplib::Server server;
    int port = -1;

    Impl(MemoryStore& s, const Embedder& e, ServiceConfig c) : store(s), embedder(e), config(std::move(c)) {
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const Error& e) {
                reply_error(res, status_for(e.kind()), e.what());
            } catch (const std::exception& e) {
                reply_error(res, 500, e.what());
            }
        });

        server.Post("/clips", [this](const httplib::Request& req, httplib::Response& res) {
            const ClipInput input = clip_input_from_json(parse_body(req));
            std::lock_guard lock(ingest_mutex);
            const IngestReport report = store.ingest(input, generator, embedder, config.ingest);
            if (config.persist_path) save_snapshot_file(*store.snapshot(), *config.persist_path);
            reply(res, 200, to_json(report));
        });

        server.Post("/ask", [this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            if (!body.is_object()) fail(ErrorKind::parse, "/: expected an object");
            if (!body.contains("question") || !body["question"].is_string()) {
                fail(ErrorKind::parse, "/question: expected a string");
            }
            const std::string question = body["question"].get<std::string>();
            ControlConfig control = config.control;
            if (body.contains("max_rounds")) {
                if (!body["max_rounds"].is_number_integer() || body["max_rounds"].get<int>() < 1) {
                    fail(ErrorKind::parse, "/max_rounds: expected a positive integer");
                }
                control.max_rounds = body["max_rounds"].get<int>();
            }
            std::unique_ptr<Policy> policy;
            if (body.contains("plan") && !body["plan"].is_null()) {
                ScriptedPlan plan;
                try {
                    plan = scripted_plan_from_json(body["plan"]);
                } catch (const Error& e) {
                    fail(ErrorKind::parse, std::string("/plan") + e.what());
                }
                policy = std::make_unique<ScriptedOraclePolicy>(std::map<std::string, ScriptedPlan>{{question, plan}},
                                                                control.prompts);
            } else if (config.policy) {
                policy = config.policy();
            } else {
                policy = std::make_unique<ScriptedOraclePolicy>(std::map<std::string, ScriptedPlan>{}, control.prompts);
            }

            const auto graph = store.snapshot();
            try {
                const Trajectory t = run_control(question, *graph, *policy, embedder, control);
                const auto answer = extract_answer(t);
                reply(res, 200,
                      json{{"answer", answer ? json(*answer) : json(nullptr)},
                           {"rounds_used", t.rounds_used},
                           {"terminated_by", std::string(to_string(t.terminated_by))},
                           {"trajectory", to_json(t)}});
            } catch (const SessionError& e) {
                reply(res, 502, json{{"error", e.what()}, {"trajectory", to_json(e.partial())}});
            }
        });

        server.Get(R"(/clips/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            std::int64_t index = 0;
            const std::string s = req.matches[1].str();
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), index);
            if (ec != std::errc{}) fail(ErrorKind::parse, "clip index out of range: " + s);
            const auto graph = store.snapshot();
            const ClipRecord* clip = graph->find_clip(index);
            if (clip == nullptr) fail(ErrorKind::not_found, "no clip " + clip_token(index));
            const CharacterMap characters = resolve_characters(*graph);
            json episodic = json::array(), semantic = json::array();
            for (NodeId id : clip->episodic) episodic.push_back(rewrite_entities(graph->node(id).text, characters));
            for (NodeId id : clip->semantic) semantic.push_back(rewrite_entities(graph->node(id).text, characters));
            reply(res, 200,
                  json{{"schema_version", schema_version},
                       {"clip_index", index},
                       {"episodic", std::move(episodic)},
                       {"semantic", std::move(semantic)}});
        });

        server.Get("/characters", [this](const httplib::Request&, httplib::Response& res) {
            reply(res, 200, to_json(resolve_characters(*store.snapshot())));
        });

        server.Get("/search", [this](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("q")) fail(ErrorKind::parse, "?q: missing query");
            const auto k = number_param<std::size_t>(req, "k").value_or(config.control.retrieval.clip_k);
            const auto t = number_param<double>(req, "t").value_or(config.control.retrieval.clip_threshold);
            const auto graph = store.snapshot();
            const ClipSearchResult result = search_clip(*graph, req.get_param_value("q"), embedder, k, t,
                                                        config.control.retrieval.max_query_variants);
            json body = to_json(result);
            body["formatted"] = format_results(result);
            reply(res, 200, body);
        });
    }
};

Service::Service(MemoryStore& store, const Embedder& embedder, ServiceConfig config)
    : impl_(std::make_unique<Impl>(store, embedder, std::move(config))) {}

Service::~Service() {
    stop();
}

int Service::bind(int port, const std::string& host) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else if (impl_->server.bind_to_port(host, port)) {
        impl_->port = port;
    } else {
        impl_->port = -1;
    }
    if (impl_->port < 0) fail(ErrorKind::transport, "cannot bind " + host + ":" + std::to_string(port));
    return impl_->port;
}

void Service::listen() {
    if (impl_->port < 0) fail(ErrorKind::configuration, "bind() must succeed before listen()");
    impl_->server.listen_after_bind();
}

void Service::stop() {
    if (impl_) impl_->server.stop();
}

bool Service::running() const {
    return impl_->server.is_running();
}

struct HttpBackend::Impl {
    ParsedUrl url;
    httplib::Client client;

    explicit Impl(const std::string& base) : url(parse_url(base)), client(url.host, url.port) {
        client.set_read_timeout(120, 0);
        if (!url.path.empty() && url.path.back() == '/') url.path.pop_back();
    }

    json check(const httplib::Result& res, const std::string& what) {
        if (!res) fail(ErrorKind::transport, what + " failed: " + httplib::to_string(res.error()));
        json body;
        try {
            body = json::parse(res->body);
        } catch (const json::parse_error& e) {
            fail(ErrorKind::transport, what + " returned invalid JSON: " + e.what());
        }
        if (res->status != 200) {
            const std::string message = body.contains("error") ? body["error"].get<std::string>() : res->body;
            fail(ErrorKind::transport, what + " returned HTTP " + std::to_string(res->status) + ": " + message);
        }
        return body;
    }
};

HttpBackend::HttpBackend(const std::string& base_url) : impl_(std::make_unique<Impl>(base_url)) {}

HttpBackend::~HttpBackend() = default;

IngestReport HttpBackend::ingest(const ClipInput& input) {
    const auto res = impl_->client.Post(impl_->url.path + "/clips", to_json(input).dump(), "application/json");
    return ingest_report_from_json(impl_->check(res, "POST /clips"));
}

CharacterMap HttpBackend::characters() {
    return character_map_from_json(impl_->check(impl_->client.Get(impl_->url.path + "/characters"), "GET /characters"));
}

Trajectory HttpBackend::ask(const std::string& question, const std::optional<ScriptedPlan>& plan, int max_rounds) {
    json body = {{"question", question}, {"max_rounds", max_rounds}};
    if (plan) body["plan"] = to_json(*plan);
    const auto res = impl_->client.Post(impl_->url.path + "/ask", body.dump(), "application/json");
    return trajectory_from_json(impl_->check(res, "POST /ask").at("trajectory"));
}

ClipSearchResult HttpBackend::search(const std::string& query, std::size_t k, double threshold) {
    httplib::Params params{{"q", query}, {"k", std::to_string(k)}, {"t", json(threshold).dump()}};
    const auto res = impl_->client.Get(impl_->url.path + "/search", params, httplib::Headers{});
    return clip_search_result_from_json(impl_->check(res, "GET /search"));
}

} // namespace engram
