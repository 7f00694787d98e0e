#pragma once

#include "engram/control.hpp"
#include "engram/harness.hpp"
#include "engram/memorization.hpp"
#include "engram/store.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace engram {

struct ServiceConfig {
    IngestConfig ingest;
    ControlConfig control;
    // When set, the graph is written here after every successful ingestion.
    std::optional<std::filesystem::path> persist_path;
    // Policy for /ask requests without a plan; the scripted oracle when empty.
    std::function<std::unique_ptr<Policy>()> policy;
};

// HTTP JSON endpoints over a MemoryStore:
//   POST /clips            ClipInput            -> IngestReport
//   POST /ask              {question, max_rounds, plan?} -> {answer, rounds_used, terminated_by, trajectory}
//   GET  /clips/{n}        clip entries, entity ids rewritten
//   GET  /characters       character groups
//   GET  /search?q=&k=&t=  ClipSearchResult plus its formatted block
// Ingestion is serialized; reads run concurrently against published graph versions.
class Service {
public:
    Service(MemoryStore& store, const Embedder& embedder, ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds to 127.0.0.1 unless host is given; port 0 picks a free port. Returns the bound port.
    int bind(int port, const std::string& host = "127.0.0.1");
    // Blocks until stop().
    void listen();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// EvalBackend speaking to a running Service.
class HttpBackend final : public EvalBackend {
public:
    explicit HttpBackend(const std::string& base_url);
    ~HttpBackend() override;

    IngestReport ingest(const ClipInput& input) override;
    CharacterMap characters() override;
    Trajectory ask(const std::string& question, const std::optional<ScriptedPlan>& plan, int max_rounds) override;
    ClipSearchResult search(const std::string& query, std::size_t k, double threshold) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace engram
