#pragma once

#include "engram/control.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace engram {

struct ClipParams {
    double eps_low = 0.2;
    double eps_high = 0.28;
    double eps = 0.2;    // symmetric GRPO bound
    double beta = 0.01;  // GRPO KL weight

    void validate() const;
};

inline constexpr std::size_t default_group_size = 4;

// 1 iff an answer exists and the judge accepts it.
int compute_reward(std::string_view question, std::string_view reference,
                   const std::optional<std::string>& answer, Judge& judge);

// (R_i - mean) / population std. A zero-variance group yields all zeros.
std::vector<double> group_advantages(std::span<const double> rewards);

// 0 < sum(R) < G.
bool dapo_group_filter(std::span<const double> rewards);

// min(r * A, clip(r, 1 - eps_low, 1 + eps_high) * A).
double clipped_term(double ratio, double advantage, double eps_low, double eps_high);

// True on tokens of assistant messages. token_counts[i] is the length of messages[i].
std::vector<bool> token_mask(const Trajectory& trajectory, std::span<const std::size_t> token_counts);
std::vector<bool> token_mask(std::span<const Role> roles, std::span<const std::size_t> token_counts);

// Masked mean of r - log r - 1 with r = p_ref / p_policy. Zero when no token is masked.
double kl_estimate(std::span<const double> probs_policy, std::span<const double> probs_reference,
                   const std::vector<bool>& mask);

// One rollout's per-token inputs for the surrogate objectives.
struct TokenRollout {
    std::vector<double> ratios;  // pi_theta / pi_old per token
    std::vector<bool> mask;
    double advantage = 0.0;
    std::vector<double> probs_policy;     // GRPO only
    std::vector<double> probs_reference;  // GRPO only
};

// Token-level mean of clipped terms over every masked token in the group.
double dapo_surrogate(std::span<const TokenRollout> group, const ClipParams& params);

// Mean over rollouts of (per-rollout masked mean of clipped terms - beta * KL).
double grpo_surrogate(std::span<const TokenRollout> group, const ClipParams& params);

} // namespace engram
