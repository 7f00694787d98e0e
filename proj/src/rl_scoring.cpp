#include "engram/rl_scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace engram {

void ClipParams::validate() const {
    if (!(eps_low > 0.0 && eps_low <= eps_high)) fail(ErrorKind::invalid_argument, "need 0 < eps_low <= eps_high");
    if (!(eps > 0.0)) fail(ErrorKind::invalid_argument, "eps must be positive");
    if (!(beta >= 0.0)) fail(ErrorKind::invalid_argument, "beta must be non-negative");
}

int compute_reward(std::string_view question, std::string_view reference, const std::optional<std::string>& answer,
                   Judge& judge) {
    if (!answer) return 0;
    return judge_answer(question, reference, *answer, judge) ? 1 : 0;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
    if (rewards.size() < 2) fail(ErrorKind::invalid_argument, "a group needs at least two rewards");
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : rewards) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / n);

    std::vector<double> out(rewards.size(), 0.0);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

bool dapo_group_filter(std::span<const double> rewards) {
    const double sum = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    return sum > 0.0 && sum < static_cast<double>(rewards.size());
}

double clipped_term(double ratio, double advantage, double eps_low, double eps_high) {
    if (!(ratio > 0.0)) fail(ErrorKind::invalid_argument, "importance ratio must be positive");
    const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
    return std::min(ratio * advantage, clipped * advantage);
}

std::vector<bool> token_mask(std::span<const Role> roles, std::span<const std::size_t> token_counts) {
    if (roles.size() != token_counts.size()) {
        fail(ErrorKind::invalid_argument, "token counts (" + std::to_string(token_counts.size()) +
                                              ") do not match message count (" + std::to_string(roles.size()) + ")");
    }
    std::vector<bool> mask;
    for (std::size_t i = 0; i < roles.size(); ++i) mask.insert(mask.end(), token_counts[i], roles[i] == Role::assistant);
    return mask;
}

std::vector<bool> token_mask(const Trajectory& trajectory, std::span<const std::size_t> token_counts) {
    std::vector<Role> roles;
    roles.reserve(trajectory.messages.size());
    for (const auto& m : trajectory.messages) roles.push_back(m.role);
    return token_mask(roles, token_counts);
}

double kl_estimate(std::span<const double> probs_policy, std::span<const double> probs_reference,
                   const std::vector<bool>& mask) {
    if (probs_policy.size() != probs_reference.size() || probs_policy.size() != mask.size()) {
        fail(ErrorKind::invalid_argument, "probability and mask lengths differ");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < mask.size(); ++t) {
        const double p = probs_policy[t];
        const double q = probs_reference[t];
        if (!(p > 0.0 && p <= 1.0) || !(q > 0.0 && q <= 1.0)) {
            fail(ErrorKind::invalid_argument, "probabilities must lie in (0, 1] (token " + std::to_string(t) + ")");
        }
        if (!mask[t]) continue;
        const double r = q / p;
        sum += std::max(0.0, (r - 1.0) - std::log1p(r - 1.0));
        ++count;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

namespace {

void check_rollout(const TokenRollout& r) {
    if (r.ratios.size() != r.mask.size()) fail(ErrorKind::invalid_argument, "ratios and mask lengths differ");
}

} // namespace

double dapo_surrogate(std::span<const TokenRollout> group, const ClipParams& params) {
    params.validate();
    double sum = 0.0;
    std::size_t tokens = 0;
    for (const auto& r : group) {
        check_rollout(r);
        for (std::size_t t = 0; t < r.ratios.size(); ++t) {
            if (!r.mask[t]) continue;
            sum += clipped_term(r.ratios[t], r.advantage, params.eps_low, params.eps_high);
            ++tokens;
        }
    }
    return tokens == 0 ? 0.0 : sum / static_cast<double>(tokens);
}

double grpo_surrogate(std::span<const TokenRollout> group, const ClipParams& params) {
    params.validate();
    if (group.empty()) return 0.0;
    double total = 0.0;
    for (const auto& r : group) {
        check_rollout(r);
        double sum = 0.0;
        std::size_t tokens = 0;
        for (std::size_t t = 0; t < r.ratios.size(); ++t) {
            if (!r.mask[t]) continue;
            sum += clipped_term(r.ratios[t], r.advantage, params.eps, params.eps);
            ++tokens;
        }
        const double mean = tokens == 0 ? 0.0 : sum / static_cast<double>(tokens);
        total += mean - params.beta * kl_estimate(r.probs_policy, r.probs_reference, r.mask);
    }
    return total / static_cast<double>(group.size());
}

} // namespace engram
