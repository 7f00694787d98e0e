#pragma once

#include "engram/embedding.hpp"
#include "engram/error.hpp"
#include "engram/memory_graph.hpp"
#include "engram/retrieval.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace engram {

enum class Role : std::uint8_t { system, user, assistant };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view s);

struct Message {
    Role role = Role::user;
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

enum class Termination : std::uint8_t { answer, round_limit, parse_failure };

std::string_view to_string(Termination t);
std::optional<Termination> parse_termination(std::string_view s);

struct Trajectory {
    std::vector<Message> messages;
    std::optional<std::string> final_answer;
    int rounds_used = 0;
    Termination terminated_by = Termination::round_limit;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Action {
    enum class Type : std::uint8_t { search, answer };
    Type type = Type::search;
    std::string content;

    friend bool operator==(const Action&, const Action&) = default;
};

inline constexpr std::string_view search_token = "[Search]";
inline constexpr std::string_view answer_token = "[Answer]";

// Strips <think>...</think> spans, then takes the last [Search]/[Answer] token.
// An optional "Content:" label after the token is dropped. nullopt means parse failure.
std::optional<Action> parse_action(std::string_view assistant_text);

struct PromptTemplates {
    std::string system;       // must contain {question}
    std::string instruction;
    std::string last_round;

    static PromptTemplates defaults();
    // Reads system_prompt.txt, instruction_prompt.txt and last_round_prompt.txt.
    static PromptTemplates load(const std::filesystem::path& dir);

    void validate() const;
    std::string format_system(std::string_view question) const;
};

struct ControlConfig {
    int max_rounds = 5;
    PromptTemplates prompts = PromptTemplates::defaults();
    RetrievalConfig retrieval;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string respond(const Trajectory& trajectory) = 0;
};

// Carries whatever was built before the policy failed.
class SessionError : public Error {
public:
    SessionError(const std::string& message, Trajectory partial)
        : Error(ErrorKind::policy, message), partial_(std::move(partial)) {}

    const Trajectory& partial() const { return partial_; }

private:
    Trajectory partial_;
};

inline constexpr std::string_view node_query_prefix = "node:";

// Runs one search on behalf of the agent. Content starting with "node:" goes to
// search_node over text entries; everything else goes to search_clip.
std::string search_memory(const MemoryGraph& graph, std::string_view content, const Embedder& embedder,
                          const RetrievalConfig& config);

Trajectory run_control(std::string_view question, const MemoryGraph& graph, Policy& policy,
                       const Embedder& embedder, const ControlConfig& config = {});

std::optional<std::string> extract_answer(const Trajectory& trajectory);

class Judge {
public:
    virtual ~Judge() = default;
    virtual bool judge(std::string_view question, std::string_view reference, std::string_view candidate) = 0;
};

// Lowercase, punctuation to spaces, collapsed whitespace.
std::string normalize_answer(std::string_view text);

// True when the normalized reference occurs in the normalized candidate.
class MockJudge final : public Judge {
public:
    bool judge(std::string_view question, std::string_view reference, std::string_view candidate) override;
};

// Chat backend used by the LLM-facing adapters.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const std::vector<Message>& messages) = 0;
};

std::string judge_prompt(std::string_view question, std::string_view reference, std::string_view candidate);

// Accepts Yes / No (case-insensitive, optional trailing period). Anything else throws judge_protocol.
bool parse_judge_reply(std::string_view reply);

class ChatJudge final : public Judge {
public:
    explicit ChatJudge(ChatClient& client) : client_(client) {}
    bool judge(std::string_view question, std::string_view reference, std::string_view candidate) override;

private:
    ChatClient& client_;
};

bool judge_answer(std::string_view question, std::string_view reference, std::string_view candidate, Judge& judge);

class ChatPolicy final : public Policy {
public:
    explicit ChatPolicy(ChatClient& client) : client_(client) {}
    std::string respond(const Trajectory& trajectory) override;

private:
    ChatClient& client_;
};

struct SearchStep {
    // May reference earlier captures as {var}.
    std::string query;
    // Regex with one group, applied to this step's search results.
    std::string capture_pattern;
    std::string capture_var = "character";

    friend bool operator==(const SearchStep&, const SearchStep&) = default;
};

struct ScriptedPlan {
    std::vector<SearchStep> searches;
    // Regex with one group, searched in retrieved text newest first. Empty: first retrieved entry.
    std::string answer_pattern;
    std::string fallback_answer = "unknown";

    friend bool operator==(const ScriptedPlan&, const ScriptedPlan&) = default;
};

// Deterministic test policy. Replays the plan for the session's question, answering early
// when the last-round prompt appears or the plan is exhausted. Unknown questions
// get a single search on the question text.
class ScriptedOraclePolicy final : public Policy {
public:
    explicit ScriptedOraclePolicy(std::map<std::string, ScriptedPlan> plans = {},
                                  PromptTemplates prompts = PromptTemplates::defaults());

    std::string respond(const Trajectory& trajectory) override;

    static ScriptedPlan default_plan(std::string_view question);

private:
    std::map<std::string, ScriptedPlan> plans_;
    PromptTemplates prompts_;
};

} // namespace engram
