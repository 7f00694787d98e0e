#include "engram/http_adapters.hpp"

#include "engram/json_io.hpp"

#include <httplib.h>

#include <charconv>

namespace engram {

ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(ErrorKind::configuration, "url without scheme: " + url);
    out.scheme = url.substr(0, scheme_end);
    if (out.scheme != "http") fail(ErrorKind::configuration, "only http:// endpoints are supported: " + url);

    const std::string rest = url.substr(scheme_end + 3);
    const auto slash = rest.find('/');
    const std::string authority = rest.substr(0, slash);
    out.path = slash == std::string::npos ? "/" : rest.substr(slash);

    const auto colon = authority.rfind(':');
    if (colon == std::string::npos) {
        out.host = authority;
    } else {
        out.host = authority.substr(0, colon);
        const std::string port = authority.substr(colon + 1);
        int value = 0;
        auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
        if (ec != std::errc{} || p != port.data() + port.size() || value <= 0 || value > 65535) {
            fail(ErrorKind::configuration, "bad port in url: " + url);
        }
        out.port = value;
    }
    if (out.host.empty()) fail(ErrorKind::configuration, "url without host: " + url);
    return out;
}

std::string http_post_json(const HttpEndpoint& endpoint, const std::string& body) {
    const ParsedUrl url = parse_url(endpoint.url);
    httplib::Client client(url.host, url.port);
    client.set_connection_timeout(endpoint.timeout_s, 0);
    client.set_read_timeout(endpoint.timeout_s, 0);
    client.set_write_timeout(endpoint.timeout_s, 0);
    httplib::Headers headers;
    if (!endpoint.auth_header.empty()) headers.emplace("Authorization", endpoint.auth_header);

    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
        fail(ErrorKind::transport, "POST " + endpoint.url + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        fail(ErrorKind::transport, "POST " + endpoint.url + " returned HTTP " + std::to_string(res->status));
    }
    return res->body;
}

namespace {

json post(const HttpEndpoint& endpoint, const json& request) {
    const std::string body = http_post_json(endpoint, request.dump());
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::transport, endpoint.url + " replied with invalid JSON: " + e.what());
    }
}

} // namespace

HttpChatClient::HttpChatClient(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::string HttpChatClient::complete(const std::vector<Message>& messages) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    json request = {{"messages", std::move(msgs)}};
    if (!endpoint_.model.empty()) request["model"] = endpoint_.model;

    const json reply = post(endpoint_, request);
    if (reply.contains("content") && reply["content"].is_string()) return reply["content"].get<std::string>();
    if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
        const json& first = reply["choices"][0];
        if (first.contains("message") && first["message"].contains("content") &&
            first["message"]["content"].is_string()) {
            return first["message"]["content"].get<std::string>();
        }
    }
    fail(ErrorKind::transport, endpoint_.url + " reply has neither content nor choices[0].message.content");
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension)
    : endpoint_(std::move(endpoint)), dimension_(dimension) {
    if (dimension_ == 0) fail(ErrorKind::configuration, "embedding dimension must be positive");
}

Vector HttpEmbedder::embed(std::string_view text) const {
    json request = {{"input", std::string(text)}};
    if (!endpoint_.model.empty()) request["model"] = endpoint_.model;
    const json reply = post(endpoint_, request);
    if (!reply.contains("embedding") || !reply["embedding"].is_array()) {
        fail(ErrorKind::transport, endpoint_.url + " reply has no embedding array");
    }
    Vector v;
    for (const auto& x : reply["embedding"]) {
        if (!x.is_number()) fail(ErrorKind::transport, endpoint_.url + " embedding holds a non-number");
        v.push_back(x.get<float>());
    }
    if (v.size() != dimension_) {
        fail(ErrorKind::transport, endpoint_.url + " returned dimension " + std::to_string(v.size()) + ", expected " +
                                       std::to_string(dimension_));
    }
    try {
        return normalized(v);
    } catch (const Error&) {
        fail(ErrorKind::transport, endpoint_.url + " returned a zero embedding");
    }
}

HttpMemoryGenerator::HttpMemoryGenerator(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<MemoryEntry> HttpMemoryGenerator::generate(const GenerationContext& context) {
    json ids = json::array();
    for (NodeId id : context.available) ids.push_back(id.str());
    json transcripts = json::array();
    for (const auto& o : context.input.observations) {
        const auto m = context.matched.find(o.tag);
        if (m == context.matched.end()) continue;
        for (const auto& s : o.observation.segments) {
            transcripts.push_back(
                {{"speaker", m->second.str()}, {"start_s", s.start_s}, {"end_s", s.end_s}, {"text", s.transcript}});
        }
    }
    json request = {{"clip_index", context.input.clip_index}, {"ids", std::move(ids)}, {"transcripts", std::move(transcripts)}};
    if (!endpoint_.model.empty()) request["model"] = endpoint_.model;

    const json reply = post(endpoint_, request);
    if (!reply.contains("entries") || !reply["entries"].is_array()) {
        fail(ErrorKind::transport, endpoint_.url + " reply has no entries array");
    }
    std::vector<MemoryEntry> out;
    for (const auto& e : reply["entries"]) {
        if (!e.is_object() || !e.contains("kind") || !e.contains("text") || !e["kind"].is_string() ||
            !e["text"].is_string()) {
            fail(ErrorKind::transport, endpoint_.url + " entry must be {kind, text}");
        }
        const auto kind = parse_entry_kind(e["kind"].get<std::string>());
        if (!kind) fail(ErrorKind::transport, endpoint_.url + " entry kind must be episodic or semantic");
        out.push_back({*kind, e["text"].get<std::string>()});
    }
    return out;
}

} // namespace engram
