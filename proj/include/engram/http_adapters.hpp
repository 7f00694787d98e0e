#pragma once

#include "engram/control.hpp"
#include "engram/embedding.hpp"
#include "engram/memorization.hpp"

#include <string>

namespace engram {

// Plain-HTTP endpoint. url is "http://host[:port]/path".
struct HttpEndpoint {
    std::string url;
    std::string auth_header;  // sent verbatim as Authorization when non-empty
    std::string model;        // forwarded as "model" when non-empty
    int timeout_s = 60;
};

struct ParsedUrl {
    std::string scheme;
    std::string host;
    int port = 80;
    std::string path = "/";
};

ParsedUrl parse_url(const std::string& url);

// POST {model?, messages:[{role, content}]} -> {content}. OpenAI-style
// {choices:[{message:{content}}]} replies are accepted as well.
class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(HttpEndpoint endpoint);
    std::string complete(const std::vector<Message>& messages) override;

private:
    HttpEndpoint endpoint_;
};

// POST {input} -> {embedding:[float]}; normalized on arrival.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension);
    std::size_t dimension() const override { return dimension_; }
    Vector embed(std::string_view text) const override;

private:
    HttpEndpoint endpoint_;
    std::size_t dimension_;
};

// POST {clip_index, ids:[...], transcripts:[...]} -> {entries:[{kind, text}]}.
class HttpMemoryGenerator final : public MemoryGenerator {
public:
    explicit HttpMemoryGenerator(HttpEndpoint endpoint);
    std::vector<MemoryEntry> generate(const GenerationContext& context) override;

private:
    HttpEndpoint endpoint_;
};

// Posts a JSON body and returns the decoded JSON reply. Throws Error{transport}.
std::string http_post_json(const HttpEndpoint& endpoint, const std::string& body);

} // namespace engram
