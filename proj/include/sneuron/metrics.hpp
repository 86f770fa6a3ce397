#pragma once

#include "sneuron/decoding.hpp"
#include "sneuron/model.hpp"

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sneuron {

// Lowercase, collapse whitespace, strip leading and trailing ASCII
// punctuation.
std::string normalize_for_copy(std::string_view s);

// Fraction of pairs whose normalised texts are equal. Throws Input error on
// length mismatch or empty input.
double copy_ratio(const std::vector<std::string>& inputs, const std::vector<std::string>& outputs);

struct PerplexityResult {
    double mean = 0.0;               // arithmetic mean over scored sequences
    std::vector<double> per_sequence; // NaN for skipped sequences
    std::size_t scored = 0;
    std::size_t skipped = 0; // sequences shorter than 2 tokens
};

// ppl = exp(-logprob / (len - 1)) per sequence, evaluated as the geometric
// mean of 1/p relative to the first step. A uniform model scores exactly
// vocab_size.
PerplexityResult perplexity(const ModelWeights& weights, const std::vector<std::vector<TokenId>>& sequences,
                            std::size_t workers = 1);

// Share of tokens in `lexicon` among all tokens, BOS excluded. 0 when there
// are no tokens.
double lexicon_rate(const std::vector<std::vector<TokenId>>& outputs, const std::set<TokenId>& lexicon);

struct EvalReport {
    std::size_t count = 0;
    double copy_ratio = 0.0;
    double mean_perplexity = 0.0;
    double target_lexicon_rate = 0.0;
    std::size_t perplexity_scored = 0;
    std::size_t perplexity_skipped = 0;
};

std::string eval_report_to_json(const EvalReport& report);
std::string format_eval_report(const EvalReport& report);

// JSD between each layer's early exit and the final layer, per decode step.
struct JsdProfile {
    std::size_t n_layers = 0;          // rows: layers 0..n_layers-1
    std::vector<TokenId> tokens;        // one generated token per step
    std::vector<double> cells;          // layer-major, n_layers x steps
    std::vector<std::size_t> max_layer; // most divergent layer per step (ties to the larger)

    std::size_t steps() const { return tokens.size(); }
    double at(std::size_t layer, std::size_t step) const { return cells[layer * steps() + step]; }
};

JsdProfile jsd_profile(const ModelWeights& weights, std::span<const TokenId> prompt, const DeactivationMask* mask,
                       const DecodeConfig& config);

// n_layers lines of `steps` comma-separated values; line i is layer i.
std::string jsd_profile_to_csv(const JsdProfile& profile);

} // namespace sneuron
