#pragma once

#include "engram/memorization.hpp"
#include "engram/memory_graph.hpp"

#include <memory>
#include <mutex>

namespace engram {

// Single writer, many readers. Readers hold immutable graph versions; the writer
// ingests into a private copy and publishes it in one pointer swap, so a reader
// sees either all of a clip or none of it.
class MemoryStore {
public:
    explicit MemoryStore(MemoryGraph graph = MemoryGraph{});

    std::shared_ptr<const MemoryGraph> snapshot() const;

    IngestReport ingest(const ClipInput& input, MemoryGenerator& generator, const Embedder& embedder,
                        const IngestConfig& config);

    void replace(MemoryGraph graph);

private:
    mutable std::mutex publish_mutex_;
    std::mutex writer_mutex_;
    std::shared_ptr<const MemoryGraph> current_;
};

} // namespace engram
