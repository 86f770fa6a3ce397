#include "sneuron/decoding.hpp"

#include "sneuron/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sneuron {

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::Greedy: return "greedy";
    case Strategy::Nucleus: return "nucleus";
    case Strategy::DolaEarly: return "dola_early";
    case Strategy::Sneuron: return "sneuron";
    }
    return "greedy";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "greedy") return Strategy::Greedy;
    if (s == "nucleus") return Strategy::Nucleus;
    if (s == "dola_early") return Strategy::DolaEarly;
    if (s == "sneuron") return Strategy::Sneuron;
    fail(ErrorKind::Config, "unknown strategy '" + s + "' (expected greedy|nucleus|dola_early|sneuron)");
}

void DecodeConfig::validate() const {
    if (max_new_tokens < 1) fail(ErrorKind::Config, "max_new_tokens must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorKind::Config, "alpha must be in (0, 1]");
    if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) fail(ErrorKind::Config, "nucleus_p must be in (0, 1]");
    if (style_layer_count < 1) fail(ErrorKind::Config, "style layer count must be >= 1");
}

std::vector<std::size_t> resolve_candidate_layers(const DecodeConfig& config, std::size_t n_layers) {
    std::vector<std::size_t> J;
    if (!config.candidate_layers.empty()) {
        J = config.candidate_layers;
        std::sort(J.begin(), J.end());
        J.erase(std::unique(J.begin(), J.end()), J.end());
        if (J.back() >= n_layers) {
            fail(ErrorKind::Config, "candidate layer " + std::to_string(J.back()) + " must be below the final layer " +
                                        std::to_string(n_layers));
        }
        return J;
    }
    if (config.strategy == Strategy::DolaEarly) {
        const std::size_t half = std::max<std::size_t>(1, n_layers / 2);
        for (std::size_t j = 0; j < half; j += 2) J.push_back(j);
    } else {
        const std::size_t first = n_layers > config.style_layer_count ? n_layers - config.style_layer_count : 0;
        for (std::size_t j = first; j < n_layers; ++j) J.push_back(j);
    }
    return J;
}

std::size_t argmax(std::span<const double> p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i] > p[best]) best = i;
    }
    return best;
}

TokenId contrastive_argmax(std::span<const double> adjusted, std::span<const double> final_dist) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < adjusted.size(); ++i) {
        if (adjusted[i] > adjusted[best] || (adjusted[i] == adjusted[best] && final_dist[i] > final_dist[best])) {
            best = i;
        }
    }
    return static_cast<TokenId>(best);
}

std::vector<TokenId> plausible_set(std::span<const double> final_dist, double alpha) {
    const double threshold = alpha * final_dist[argmax(final_dist)];
    std::vector<TokenId> phi;
    for (std::size_t i = 0; i < final_dist.size(); ++i) {
        if (final_dist[i] >= threshold) phi.push_back(static_cast<TokenId>(i));
    }
    return phi;
}

std::vector<double> contrast(std::span<const double> final_dist, std::span<const double> premature_dist,
                             std::span<const TokenId> phi) {
    std::vector<double> out(final_dist.size(), 0.0);
    if (phi.empty()) return out;
    std::vector<double> score(phi.size());
    double mx = -INFINITY;
    for (std::size_t n = 0; n < phi.size(); ++n) {
        const TokenId w = phi[n];
        score[n] = std::log(std::max(final_dist[w], kProbFloor)) - std::log(std::max(premature_dist[w], kProbFloor));
        mx = std::max(mx, score[n]);
    }
    double sum = 0.0;
    for (auto& s : score) {
        s = std::exp(s - mx);
        sum += s;
    }
    for (std::size_t n = 0; n < phi.size(); ++n) out[phi[n]] = score[n] / sum;
    return out;
}

double jsd(std::span<const double> p, std::span<const double> q) {
    double kl_p = 0.0;
    double kl_q = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) kl_p += p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) kl_q += q[i] * std::log(q[i] / m);
    }
    return std::max(0.0, 0.5 * (kl_p + kl_q));
}

PrematureChoice select_premature(const LayerDistributions& dists, std::span<const std::size_t> candidates) {
    if (candidates.empty()) fail(ErrorKind::Config, "candidate layer set is empty");
    PrematureChoice choice;
    const auto final_row = dists.final_row();
    double best = -1.0;
    for (std::size_t j : candidates) {
        if (j >= dists.final_layer()) fail(ErrorKind::Config, "candidate layer must precede the final layer");
        const double d = jsd(final_row, dists.row(j));
        choice.divergences.push_back(d);
        if (d >= best) {
            best = d;
            choice.layer = j;
        }
    }
    return choice;
}

TokenId nucleus_sample(std::span<const double> p, double top_p, double uniform01) {
    std::vector<TokenId> order(p.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return p[a] > p[b]; });
    std::size_t keep = order.size();
    double mass = 0.0;
    for (std::size_t n = 0; n < order.size(); ++n) {
        mass += p[order[n]];
        if (mass >= top_p) {
            keep = n + 1;
            break;
        }
    }
    double total = 0.0;
    for (std::size_t n = 0; n < keep; ++n) total += p[order[n]];
    const double target = uniform01 * total;
    double acc = 0.0;
    for (std::size_t n = 0; n < keep; ++n) {
        acc += p[order[n]];
        if (target < acc) return order[n];
    }
    return order[keep - 1];
}

std::size_t StepRecord::plausible_size() const {
    return static_cast<std::size_t>(std::count(plausible.begin(), plausible.end(), true));
}

Generation generate(const ModelWeights& weights, std::span<const TokenId> prompt, const DeactivationMask* mask,
                    const DecodeConfig& config, const StepObserver& observer) {
    config.validate();
    const ModelConfig& mc = weights.config;
    if (prompt.empty()) fail(ErrorKind::Input, "prompt is empty");
    if (prompt.size() + config.max_new_tokens > mc.max_seq_len) {
        fail(ErrorKind::Capacity, "prompt of " + std::to_string(prompt.size()) + " tokens plus " +
                                      std::to_string(config.max_new_tokens) + " new tokens exceeds max_seq_len " +
                                      std::to_string(mc.max_seq_len));
    }
    if (mask != nullptr) mask->check_bounds(mc);

    const bool contrastive = config.strategy == Strategy::DolaEarly || config.strategy == Strategy::Sneuron;
    std::vector<std::size_t> J;
    if (contrastive) J = resolve_candidate_layers(config, mc.n_layers);

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<TokenId> context(prompt.begin(), prompt.end());
    Generation gen;
    for (std::size_t step = 0; step < config.max_new_tokens; ++step) {
        StepRecord rec;
        LayerDistributions dists;
        std::vector<double> final_dist;
        if (contrastive || observer) {
            dists = forward(weights, context, mask).distributions;
            final_dist.assign(dists.final_row().begin(), dists.final_row().end());
            if (observer) observer(step, dists);
        } else {
            final_dist = next_token_distribution(weights, context, mask);
        }

        switch (config.strategy) {
        case Strategy::Greedy:
            rec.token = static_cast<TokenId>(argmax(final_dist));
            break;
        case Strategy::Nucleus:
            rec.token = nucleus_sample(final_dist, config.nucleus_p, unit(rng));
            break;
        case Strategy::DolaEarly:
        case Strategy::Sneuron: {
            auto choice = select_premature(dists, J);
            const auto premature = dists.row(choice.layer);
            const auto phi = plausible_set(final_dist, config.alpha);
            const auto adjusted = contrast(final_dist, premature, phi);
            rec.token = contrastive_argmax(adjusted, final_dist);
            rec.premature_layer = choice.layer;
            rec.candidate_layers = J;
            rec.divergences = std::move(choice.divergences);
            rec.plausible.assign(final_dist.size(), false);
            for (TokenId w : phi) rec.plausible[w] = true;
            rec.premature_prob = premature[rec.token];
            break;
        }
        }
        rec.final_prob = final_dist[rec.token];
        context.push_back(rec.token);
        gen.tokens.push_back(rec.token);
        const bool stop = config.stop_token && rec.token == *config.stop_token;
        gen.steps.push_back(std::move(rec));
        if (stop) break;
    }
    return gen;
}

} // namespace sneuron
