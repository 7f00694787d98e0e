#include "engram/store.hpp"

namespace engram {

MemoryStore::MemoryStore(MemoryGraph graph) : current_(std::make_shared<const MemoryGraph>(std::move(graph))) {}

std::shared_ptr<const MemoryGraph> MemoryStore::snapshot() const {
    std::lock_guard lock(publish_mutex_);
    return current_;
}

IngestReport MemoryStore::ingest(const ClipInput& input, MemoryGenerator& generator, const Embedder& embedder,
                                 const IngestConfig& config) {
    std::lock_guard writer(writer_mutex_);
    // Only this writer replaces current_, so reading it without the publish lock is safe here.
    auto next = std::make_shared<MemoryGraph>(*current_);
    IngestReport report = ingest_clip(*next, input, generator, embedder, config);
    std::shared_ptr<const MemoryGraph> published = std::move(next);
    {
        std::lock_guard lock(publish_mutex_);
        current_.swap(published);
    }
    return report;
}

void MemoryStore::replace(MemoryGraph graph) {
    std::lock_guard writer(writer_mutex_);
    auto next = std::make_shared<const MemoryGraph>(std::move(graph));
    std::lock_guard lock(publish_mutex_);
    current_.swap(next);
}

} // namespace engram
