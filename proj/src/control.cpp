#include "engram/control.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

namespace engram {

namespace {

constexpr std::string_view default_system_prompt =
    R"(You are given a question and some relevant knowledge. Your task is to reason about whether the provided knowledge is sufficient to answer the question. If it is sufficient, output [Answer] followed by the answer. If it is not sufficient, output [Search] and generate a query that will be encoded into embeddings for a vector similarity search. The query will help retrieve additional information from a memory bank.

Question: {question})";

constexpr std::string_view default_instruction_prompt =
    R"(Output the answer in the format:
Action: [Answer] or [Search]
Content: {content}

If the answer cannot be derived yet, the {content} should be a single search query that would help retrieve the missing information. The search {content} needs to be different from the previous.
You can get the mapping relationship between character ID and name by using search query such as: "What is the name of <character_{i}>" or "What is the character id of {name}".
After obtaining the mapping, it is best to use character ID instead of name for searching.
If the answer can be derived from the provided knowledge, the {content} is the specific answer to the question. Only name can appear in the answer, not character ID like <character_{i}>.)";

constexpr std::string_view default_last_round_prompt =
    "The Action of this round must be [Answer]. If there is insufficient information, you can make reasonable guesses.";

constexpr std::string_view default_judge_prompt =
    R"(You are provided with a question, a ground truth answer, and an answer from an agent model. Your task is to determine whether the ground truth answer can be logically inferred from the agent's answer, in the context of the question.

Do not directly compare the surface forms of the agent answer and the ground truth answer. Instead, assess whether the meaning expressed by the agent answer supports or implies the ground truth answer. If the ground truth can be reasonably derived from the agent answer, return "Yes". If it cannot, return "No".

Important notes:
• Do not require exact wording or matching structure.
• Semantic inference is sufficient, as long as the agent answer entails or implies the meaning of the ground truth answer, given the question.
• Only return "Yes" or "No", with no additional explanation or formatting.

Input fields:
• question: the question asked
• ground_truth_answer: the correct answer
• agent_answer: the model's answer to be evaluated

Now evaluate the following input:

Input:
• question: {question}
• ground_truth_answer: {ground_truth_answer}
• agent_answer: {agent_answer}

Output ('Yes' or 'No'):)";

constexpr std::string_view question_placeholder = "{question}";
constexpr std::string_view think_open = "<think>";
constexpr std::string_view think_close = "</think>";
constexpr std::string_view result_separator = "\n\n";

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::configuration, "cannot read prompt file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string strip_think(std::string_view text) {
    std::string out;
    std::size_t cursor = 0;
    while (cursor < text.size()) {
        const auto open = text.find(think_open, cursor);
        const auto close = text.find(think_close, cursor);
        if (close != std::string_view::npos && (open == std::string_view::npos || close < open)) {
            // A closing marker with no opener: everything before it was reasoning.
            out.clear();
            cursor = close + think_close.size();
            continue;
        }
        if (open == std::string_view::npos) break;
        out.append(text.substr(cursor, open - cursor));
        const auto end = text.find(think_close, open + think_open.size());
        if (end == std::string_view::npos) return out;  // unterminated span runs to the end
        cursor = end + think_close.size();
    }
    if (cursor < text.size()) out.append(text.substr(cursor));
    return out;
}

} // namespace

std::string_view to_string(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

std::optional<Role> parse_role(std::string_view s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    return std::nullopt;
}

std::string_view to_string(Termination t) {
    switch (t) {
    case Termination::answer: return "answer";
    case Termination::round_limit: return "round_limit";
    case Termination::parse_failure: return "parse_failure";
    }
    return "round_limit";
}

std::optional<Termination> parse_termination(std::string_view s) {
    if (s == "answer") return Termination::answer;
    if (s == "round_limit") return Termination::round_limit;
    if (s == "parse_failure") return Termination::parse_failure;
    return std::nullopt;
}

std::optional<Action> parse_action(std::string_view assistant_text) {
    const std::string text = strip_think(assistant_text);
    const auto s = text.rfind(search_token);
    const auto a = text.rfind(answer_token);
    if (s == std::string::npos && a == std::string::npos) return std::nullopt;

    Action action;
    std::size_t body;
    if (a == std::string::npos || (s != std::string::npos && s > a)) {
        action.type = Action::Type::search;
        body = s + search_token.size();
    } else {
        action.type = Action::Type::answer;
        body = a + answer_token.size();
    }
    std::string content = trim(std::string_view(text).substr(body));
    static constexpr std::string_view label = "Content:";
    if (content.compare(0, label.size(), label) == 0) content = trim(std::string_view(content).substr(label.size()));
    if (content.empty()) return std::nullopt;
    action.content = std::move(content);
    return action;
}

PromptTemplates PromptTemplates::defaults() {
    return PromptTemplates{std::string(default_system_prompt), std::string(default_instruction_prompt),
                           std::string(default_last_round_prompt)};
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    PromptTemplates t{read_text_file(dir / "system_prompt.txt"), read_text_file(dir / "instruction_prompt.txt"),
                      read_text_file(dir / "last_round_prompt.txt")};
    t.validate();
    return t;
}

void PromptTemplates::validate() const {
    if (system.find(question_placeholder) == std::string::npos) {
        fail(ErrorKind::configuration, "system prompt must contain {question}");
    }
    if (trim(instruction).empty()) fail(ErrorKind::configuration, "instruction prompt is empty");
    if (trim(last_round).empty()) fail(ErrorKind::configuration, "last-round prompt is empty");
}

std::string PromptTemplates::format_system(std::string_view question) const {
    return replace_all(system, question_placeholder, question);
}

std::string search_memory(const MemoryGraph& graph, std::string_view content, const Embedder& embedder,
                          const RetrievalConfig& config) {
    if (content.substr(0, node_query_prefix.size()) == node_query_prefix) {
        const std::string query = trim(content.substr(node_query_prefix.size()));
        const auto nodes =
            search_node(graph, SearchQuery::for_text(query, config.node_k, config.node_threshold), embedder);
        return format_node_results(graph, nodes, resolve_characters(graph));
    }
    return format_results(
        search_clip(graph, content, embedder, config.clip_k, config.clip_threshold, config.max_query_variants));
}

Trajectory run_control(std::string_view question, const MemoryGraph& graph, Policy& policy,
                       const Embedder& embedder, const ControlConfig& config) {
    if (config.max_rounds < 1) fail(ErrorKind::configuration, "max_rounds must be at least 1");
    config.prompts.validate();

    const int horizon = config.max_rounds;
    Trajectory tau;
    tau.messages.push_back({Role::system, config.prompts.format_system(question)});
    tau.messages.push_back({Role::user, config.prompts.instruction});

    auto join = [](const std::string& memory, const std::string& prompt) {
        return memory + std::string(result_separator) + prompt;
    };

    int i = 0;
    while (i < horizon) {
        std::string reply;
        try {
            reply = policy.respond(tau);
        } catch (const std::exception& e) {
            throw SessionError(std::string("policy failed: ") + e.what(), tau);
        }
        tau.messages.push_back({Role::assistant, reply});
        ++tau.rounds_used;

        const auto action = parse_action(reply);
        if (!action) {
            tau.terminated_by = Termination::parse_failure;
            return tau;
        }
        if (action->type == Action::Type::answer) {
            tau.final_answer = action->content;
            tau.terminated_by = Termination::answer;
            return tau;
        }

        const std::string memory = search_memory(graph, action->content, embedder, config.retrieval);
        ++i;
        if (i == horizon) {
            // Budget spent on a search: close with the results and the last-round text.
            tau.messages.push_back({Role::user, join(memory, config.prompts.last_round)});
            break;
        }
        tau.messages.push_back({Role::user, join(memory, config.prompts.instruction)});
        if (i == horizon - 1) tau.messages.push_back({Role::user, join(memory, config.prompts.last_round)});
    }
    tau.terminated_by = Termination::round_limit;
    return tau;
}

std::optional<std::string> extract_answer(const Trajectory& trajectory) {
    return trajectory.terminated_by == Termination::answer ? trajectory.final_answer : std::nullopt;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += static_cast<char>(std::tolower(c));
        } else {
            pending_space = true;
        }
    }
    return out;
}

bool MockJudge::judge(std::string_view, std::string_view reference, std::string_view candidate) {
    const std::string ref = normalize_answer(reference);
    const std::string cand = normalize_answer(candidate);
    if (ref.empty() || cand.empty()) return false;
    return (" " + cand + " ").find(" " + ref + " ") != std::string::npos;
}

std::string judge_prompt(std::string_view question, std::string_view reference, std::string_view candidate) {
    std::string out(default_judge_prompt);
    out = replace_all(std::move(out), "{question}", question);
    out = replace_all(std::move(out), "{ground_truth_answer}", reference);
    return replace_all(std::move(out), "{agent_answer}", candidate);
}

bool parse_judge_reply(std::string_view reply) {
    std::string s = trim(reply);
    if (!s.empty() && s.back() == '.') s.pop_back();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "yes") return true;
    if (s == "no") return false;
    fail(ErrorKind::judge_protocol, "judge replied \"" + std::string(reply) + "\", expected Yes or No");
}

bool ChatJudge::judge(std::string_view question, std::string_view reference, std::string_view candidate) {
    return parse_judge_reply(client_.complete({{Role::user, judge_prompt(question, reference, candidate)}}));
}

bool judge_answer(std::string_view question, std::string_view reference, std::string_view candidate, Judge& judge) {
    return judge.judge(question, reference, candidate);
}

std::string ChatPolicy::respond(const Trajectory& trajectory) {
    return client_.complete(trajectory.messages);
}

ScriptedOraclePolicy::ScriptedOraclePolicy(std::map<std::string, ScriptedPlan> plans, PromptTemplates prompts)
    : plans_(std::move(plans)), prompts_(std::move(prompts)) {
    prompts_.validate();
}

ScriptedPlan ScriptedOraclePolicy::default_plan(std::string_view question) {
    ScriptedPlan plan;
    plan.searches.push_back(SearchStep{std::string(question), "", "character"});
    return plan;
}

namespace {

std::string regex_escape(std::string_view s) {
    static constexpr std::string_view special = R"(\^$.|?*+()[]{}<>-/)";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string_view::npos) out += '\\';
        out += c;
    }
    return out;
}

// Replaces {var} for every known capture; reports whether any placeholder stayed unresolved.
std::string substitute(const std::string& pattern, const std::map<std::string, std::string>& vars, bool escape,
                       bool& unresolved) {
    std::string out;
    std::size_t cursor = 0;
    unresolved = false;
    while (cursor < pattern.size()) {
        const auto open = pattern.find('{', cursor);
        if (open == std::string::npos) break;
        const auto close = pattern.find('}', open + 1);
        if (close == std::string::npos) break;
        const std::string name = pattern.substr(open + 1, close - open - 1);
        out.append(pattern, cursor, open - cursor);
        const bool is_name = !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
            return std::isalnum(c) || c == '_';
        });
        if (auto it = vars.find(name); it != vars.end()) {
            out += escape ? regex_escape(it->second) : it->second;
        } else {
            // Regex quantifiers like {2,3} are left alone.
            if (is_name && !std::all_of(name.begin(), name.end(), [](unsigned char c) { return std::isdigit(c); })) {
                unresolved = true;
            }
            out.append(pattern, open, close - open + 1);
        }
        cursor = close + 1;
    }
    out.append(pattern, std::min(cursor, pattern.size()), std::string::npos);
    return out;
}

std::string strip_suffix(const std::string& content, const std::string& suffix) {
    const std::string tail = std::string(result_separator) + suffix;
    if (content.size() >= tail.size() && content.compare(content.size() - tail.size(), tail.size(), tail) == 0) {
        return content.substr(0, content.size() - tail.size());
    }
    return content;
}

std::string recover_question(const std::string& system, const std::string& system_template) {
    const auto at = system_template.find(question_placeholder);
    const std::string prefix = system_template.substr(0, at);
    const std::string suffix = system_template.substr(at + question_placeholder.size());
    if (system.size() < prefix.size() + suffix.size() || system.compare(0, prefix.size(), prefix) != 0 ||
        system.compare(system.size() - suffix.size(), suffix.size(), suffix) != 0) {
        fail(ErrorKind::policy, "system message does not match the configured template");
    }
    return system.substr(prefix.size(), system.size() - prefix.size() - suffix.size());
}

// First quoted entry inside a formatted result block.
std::optional<std::string> first_entry(const std::string& block) {
    static const std::regex entry(R"re(\[\s*"((?:[^"\\]|\\.)*)")re");
    std::smatch m;
    if (std::regex_search(block, m, entry)) return m[1].str();
    return std::nullopt;
}

std::string answer(const std::string& pattern, const std::string& fallback, const std::vector<std::string>& blocks,
                   const std::map<std::string, std::string>& vars) {
    if (pattern.empty()) {
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
            if (auto e = first_entry(*it)) return *e;
        }
        return fallback;
    }
    bool unresolved = false;
    const std::string resolved = substitute(pattern, vars, true, unresolved);
    if (unresolved) return fallback;
    const std::regex re(resolved);
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
        std::smatch m;
        if (std::regex_search(*it, m, re) && m.size() > 1 && m[1].matched) return trim(m[1].str());
    }
    return fallback;
}

std::string render(Action::Type type, const std::string& content) {
    return std::string("Action: ") + std::string(type == Action::Type::search ? search_token : answer_token) +
           "\nContent: " + content;
}

} // namespace

std::string ScriptedOraclePolicy::respond(const Trajectory& trajectory) {
    if (trajectory.messages.empty() || trajectory.messages.front().role != Role::system) {
        fail(ErrorKind::policy, "trajectory must start with a system message");
    }
    const std::string question = recover_question(trajectory.messages.front().content, prompts_.system);
    const auto found = plans_.find(question);
    const ScriptedPlan plan = found != plans_.end() ? found->second : default_plan(question);

    // Replay: the k-th assistant turn ran searches[k]; the user message after it holds the results.
    std::map<std::string, std::string> vars;
    std::vector<std::string> blocks;
    std::size_t step = 0;
    bool last_round = false;
    for (std::size_t m = 1; m < trajectory.messages.size(); ++m) {
        const Message& msg = trajectory.messages[m];
        if (msg.role == Role::assistant) {
            ++step;
            continue;
        }
        if (msg.role != Role::user || step == 0) continue;
        if (msg.content.ends_with(prompts_.last_round)) last_round = true;
        // A second user message in a row is the last-round copy of the same results.
        if (trajectory.messages[m - 1].role == Role::user) continue;
        std::string block = strip_suffix(strip_suffix(msg.content, prompts_.instruction), prompts_.last_round);
        const std::size_t ran = step - 1;
        if (ran < plan.searches.size() && !plan.searches[ran].capture_pattern.empty()) {
            bool unresolved = false;
            const std::string pattern = substitute(plan.searches[ran].capture_pattern, vars, true, unresolved);
            std::smatch cap;
            if (!unresolved && std::regex_search(block, cap, std::regex(pattern)) && cap.size() > 1) {
                vars[plan.searches[ran].capture_var] = cap[1].str();
            }
        }
        blocks.push_back(std::move(block));
    }

    if (last_round || step >= plan.searches.size()) {
        const std::string a = answer(plan.answer_pattern, plan.fallback_answer, blocks, vars);
        return render(Action::Type::answer, trim(a).empty() ? plan.fallback_answer : a);
    }
    bool unresolved = false;
    const std::string query = substitute(plan.searches[step].query, vars, false, unresolved);
    if (unresolved) return render(Action::Type::answer, plan.fallback_answer);
    return render(Action::Type::search, query);
}

} // namespace engram
