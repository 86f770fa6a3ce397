#include "sneuron/metrics.hpp"

#include "sneuron/corpus.hpp"
#include "sneuron/error.hpp"
#include "sneuron/parallel.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

namespace sneuron {

std::string normalize_for_copy(std::string_view s) {
    std::string lowered = normalize_whitespace(s);
    for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    auto is_strip = [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return u < 0x80 && (std::ispunct(u) || std::isspace(u));
    };
    std::size_t lo = 0;
    std::size_t hi = lowered.size();
    while (lo < hi && is_strip(lowered[lo])) ++lo;
    while (hi > lo && is_strip(lowered[hi - 1])) --hi;
    return lowered.substr(lo, hi - lo);
}

double copy_ratio(const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
    if (inputs.size() != outputs.size()) {
        fail(ErrorKind::Input, "copy ratio needs aligned lists (" + std::to_string(inputs.size()) + " inputs vs " +
                                   std::to_string(outputs.size()) + " outputs)");
    }
    if (inputs.empty()) fail(ErrorKind::Input, "copy ratio of an empty list");
    std::size_t copies = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (normalize_for_copy(inputs[i]) == normalize_for_copy(outputs[i])) ++copies;
    }
    return static_cast<double>(copies) / static_cast<double>(inputs.size());
}

PerplexityResult perplexity(const ModelWeights& weights, const std::vector<std::vector<TokenId>>& sequences,
                            std::size_t workers) {
    PerplexityResult r;
    r.per_sequence.assign(sequences.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_for(sequences.size(), workers, [&](std::size_t i) {
        const auto& seq = sequences[i];
        if (seq.size() < 2) return;
        // geometric mean of 1/p, pivoted on the first step
        const auto inv = token_inverse_probabilities(weights, seq);
        double log_ratio = 0.0;
        for (double q : inv) log_ratio += std::log(q / inv.front());
        r.per_sequence[i] = inv.front() * std::exp(log_ratio / static_cast<double>(inv.size()));
    });
    double total = 0.0;
    for (double v : r.per_sequence) {
        if (std::isnan(v)) {
            ++r.skipped;
        } else {
            ++r.scored;
            total += v;
        }
    }
    r.mean = r.scored == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(r.scored);
    return r;
}

double lexicon_rate(const std::vector<std::vector<TokenId>>& outputs, const std::set<TokenId>& lexicon) {
    std::size_t hits = 0;
    std::size_t total = 0;
    for (const auto& seq : outputs) {
        for (TokenId t : seq) {
            if (t == kBosId) continue;
            ++total;
            if (lexicon.contains(t)) ++hits;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

std::string eval_report_to_json(const EvalReport& r) {
    nlohmann::json j = {{"instances", r.count},
                        {"copy_ratio", r.copy_ratio},
                        {"mean_perplexity", r.mean_perplexity},
                        {"target_lexicon_rate", r.target_lexicon_rate},
                        {"perplexity_scored", r.perplexity_scored},
                        {"perplexity_skipped", r.perplexity_skipped}};
    return j.dump(2) + "\n";
}

std::string format_eval_report(const EvalReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%-22s %12zu\n%-22s %12.4f\n%-22s %12.4f\n%-22s %12.4f\n%-22s %12zu\n",
                  "instances", r.count, "copy ratio", r.copy_ratio, "mean perplexity", r.mean_perplexity,
                  "target lexicon rate", r.target_lexicon_rate, "ppl skipped (<2 tok)", r.perplexity_skipped);
    return buf;
}

JsdProfile jsd_profile(const ModelWeights& weights, std::span<const TokenId> prompt, const DeactivationMask* mask,
                       const DecodeConfig& config) {
    const std::size_t L = weights.config.n_layers;
    std::vector<std::vector<double>> columns;
    auto gen = generate(weights, prompt, mask, config, [&](std::size_t, const LayerDistributions& dists) {
        std::vector<double> col(L);
        for (std::size_t j = 0; j < L; ++j) col[j] = jsd(dists.final_row(), dists.row(j));
        columns.push_back(std::move(col));
    });

    JsdProfile profile;
    profile.n_layers = L;
    profile.tokens = gen.tokens;
    const std::size_t S = columns.size();
    profile.cells.assign(L * S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        std::size_t best = 0;
        for (std::size_t j = 0; j < L; ++j) {
            profile.cells[j * S + s] = columns[s][j];
            if (columns[s][j] >= columns[s][best]) best = j;
        }
        profile.max_layer.push_back(best);
    }
    return profile;
}

std::string jsd_profile_to_csv(const JsdProfile& profile) {
    std::string out;
    char buf[40];
    for (std::size_t j = 0; j < profile.n_layers; ++j) {
        for (std::size_t s = 0; s < profile.steps(); ++s) {
            std::snprintf(buf, sizeof buf, "%s%.17g", s == 0 ? "" : ",", profile.at(j, s));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

} // namespace sneuron
