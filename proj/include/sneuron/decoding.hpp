#pragma once

// Generation with four strategies:
//
//   greedy     argmax of the final-layer distribution
//   nucleus    seeded sample from the smallest top-p prefix
//   dola_early contrast the final layer against the most divergent early layer
//   sneuron    contrast against the most divergent late ("style") layer, run
//              with the style-neuron deactivation mask applied
//
// Contrastive step: M = argmax_{j in J} JSD(p^N, p^j) (ties to the larger
// j), Phi = {w : p^N(w) >= alpha * max p^N}, and the next token is the
// argmax of softmax over Phi of log(p^N(w) / p^M(w)).

#include "sneuron/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sneuron {

enum class Strategy { Greedy, Nucleus, DolaEarly, Sneuron };

std::string to_string(Strategy s);
// Accepts greedy|nucleus|dola_early|sneuron; throws Config error otherwise.
Strategy strategy_from_string(const std::string& s);

// Floor applied to probabilities before the log-ratio.
inline constexpr double kProbFloor = 1e-12;

struct DecodeConfig {
    Strategy strategy = Strategy::Greedy;
    std::size_t max_new_tokens = 16;
    double alpha = 0.1;
    // Explicit candidate set J; empty selects the strategy default.
    std::vector<std::size_t> candidate_layers;
    std::size_t style_layer_count = 4;
    double nucleus_p = 0.9;
    std::optional<TokenId> stop_token;
    std::uint64_t seed = 0;

    // Throws Config error for out-of-range parameters.
    void validate() const;
};

// Candidate layers for a model with n_layers blocks. Explicit sets are
// sorted and de-duplicated; the final layer n_layers is rejected. Defaults:
// sneuron takes the last style_layer_count layers below n_layers, dola_early
// the even layers of the first half.
std::vector<std::size_t> resolve_candidate_layers(const DecodeConfig& config, std::size_t n_layers);

// Lowest index among the maxima.
std::size_t argmax(std::span<const double> p);

// Argmax of the contrasted distribution. Ties go to the higher final-layer
// probability, then the lower id, so a zero contrast reduces to greedy.
TokenId contrastive_argmax(std::span<const double> adjusted, std::span<const double> final_dist);

std::vector<TokenId> plausible_set(std::span<const double> final_dist, double alpha);

// softmax over phi of log(max(p^N, floor) / max(p^M, floor)); exactly zero
// outside phi.
std::vector<double> contrast(std::span<const double> final_dist, std::span<const double> premature_dist,
                             std::span<const TokenId> phi);

// Jensen-Shannon divergence in nats.
double jsd(std::span<const double> p, std::span<const double> q);

struct PrematureChoice {
    std::size_t layer = 0;
    std::vector<double> divergences; // aligned with the candidate list
};

PrematureChoice select_premature(const LayerDistributions& dists, std::span<const std::size_t> candidates);

// Index into the sorted top-p prefix; exposed for testing.
TokenId nucleus_sample(std::span<const double> p, double top_p, double uniform01);

struct StepRecord {
    TokenId token = 0;
    std::optional<std::size_t> premature_layer;
    std::vector<std::size_t> candidate_layers;
    std::vector<double> divergences; // JSD per candidate layer
    std::vector<bool> plausible;     // Phi membership over the vocabulary
    double final_prob = 0.0;         // p^N(token)
    std::optional<double> premature_prob; // p^M(token)

    std::size_t plausible_size() const;
};

struct Generation {
    std::vector<TokenId> tokens; // newly generated tokens only
    std::vector<StepRecord> steps;
};

// Called once per step with that step's early-exit distributions.
using StepObserver = std::function<void(std::size_t step, const LayerDistributions&)>;

// Throws Capacity error when prompt + max_new_tokens exceeds max_seq_len and
// Config error for an invalid configuration.
Generation generate(const ModelWeights& weights, std::span<const TokenId> prompt, const DeactivationMask* mask,
                    const DecodeConfig& config, const StepObserver& observer = {});

} // namespace sneuron
