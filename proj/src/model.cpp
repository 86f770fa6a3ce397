#include "sneuron/model.hpp"

#include "sneuron/error.hpp"
#include "sneuron/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sneuron {

std::string to_string(Activation a) {
    switch (a) {
    case Activation::SiluGlu: return "silu-glu";
    case Activation::Relu: return "relu";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& s) {
    if (s == "silu-glu") return Activation::SiluGlu;
    if (s == "relu") return Activation::Relu;
    fail(ErrorKind::Config, "unknown activation_kind '" + s + "' (expected silu-glu or relu)");
}

void ModelConfig::validate() const {
    if (n_layers < 1) fail(ErrorKind::Config, "n_layers must be >= 1");
    if (d_model < 1) fail(ErrorKind::Config, "d_model must be >= 1");
    if (n_heads < 1) fail(ErrorKind::Config, "n_heads must be >= 1");
    if (d_model % n_heads != 0) fail(ErrorKind::Config, "d_model must be divisible by n_heads");
    if (d_ffn < 1) fail(ErrorKind::Config, "d_ffn must be >= 1");
    if (vocab_size < 2) fail(ErrorKind::Config, "vocab_size must be >= 2");
    if (max_seq_len < 1) fail(ErrorKind::Config, "max_seq_len must be >= 1");
}

ModelWeights ModelWeights::zeros(const ModelConfig& config) {
    config.validate();
    const std::size_t d = config.d_model;
    ModelWeights w;
    w.config = config;
    w.token_embedding = Matrix(config.vocab_size, d);
    w.position_embedding = Matrix(config.max_seq_len, d);
    w.layers.resize(config.n_layers);
    for (auto& l : w.layers) {
        l.attn_q = Matrix(d, d);
        l.attn_k = Matrix(d, d);
        l.attn_v = Matrix(d, d);
        l.attn_o = Matrix(d, d);
        l.attn_norm.assign(d, 0.0f);
        l.ffn_norm.assign(d, 0.0f);
        l.ffn_gate = Matrix(config.d_ffn, d);
        l.ffn_gate_bias.assign(config.d_ffn, 0.0f);
        l.ffn_up = Matrix(config.d_ffn, d);
        l.ffn_down = Matrix(d, config.d_ffn);
    }
    w.final_norm.assign(d, 0.0f);
    w.vocab_head = Matrix(config.vocab_size, d);
    return w;
}

namespace {

void check_matrix(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
    if (m.rows != rows || m.cols != cols || m.data.size() != rows * cols) {
        fail(ErrorKind::Format, "tensor '" + name + "' has shape " + std::to_string(m.rows) + "x" +
                                    std::to_string(m.cols) + ", expected " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
    if (!std::all_of(m.data.begin(), m.data.end(), [](float v) { return std::isfinite(v); })) {
        fail(ErrorKind::Format, "tensor '" + name + "' contains non-finite values");
    }
}

void check_vector(const std::vector<float>& v, std::size_t n, const std::string& name) {
    if (v.size() != n) {
        fail(ErrorKind::Format, "tensor '" + name + "' has " + std::to_string(v.size()) + " elements, expected " +
                                    std::to_string(n));
    }
    if (!std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); })) {
        fail(ErrorKind::Format, "tensor '" + name + "' contains non-finite values");
    }
}

} // namespace

void ModelWeights::validate() const {
    config.validate();
    const std::size_t d = config.d_model;
    check_matrix(token_embedding, config.vocab_size, d, "token_embedding");
    check_matrix(position_embedding, config.max_seq_len, d, "position_embedding");
    if (layers.size() != config.n_layers) {
        fail(ErrorKind::Format, "model has " + std::to_string(layers.size()) + " layers, config says " +
                                    std::to_string(config.n_layers));
    }
    for (std::size_t j = 0; j < layers.size(); ++j) {
        const auto& l = layers[j];
        const std::string p = "layers." + std::to_string(j) + ".";
        check_matrix(l.attn_q, d, d, p + "attn_q");
        check_matrix(l.attn_k, d, d, p + "attn_k");
        check_matrix(l.attn_v, d, d, p + "attn_v");
        check_matrix(l.attn_o, d, d, p + "attn_o");
        check_vector(l.attn_norm, d, p + "attn_norm");
        check_vector(l.ffn_norm, d, p + "ffn_norm");
        check_matrix(l.ffn_gate, config.d_ffn, d, p + "ffn_gate");
        check_vector(l.ffn_gate_bias, config.d_ffn, p + "ffn_gate_bias");
        check_matrix(l.ffn_up, config.d_ffn, d, p + "ffn_up");
        check_matrix(l.ffn_down, d, config.d_ffn, p + "ffn_down");
    }
    check_vector(final_norm, d, "final_norm");
    check_matrix(vocab_head, config.vocab_size, d, "vocab_head");
}

void DeactivationMask::check_bounds(const ModelConfig& config) const {
    for (const auto& c : coords_) {
        if (c.layer >= config.n_layers || c.neuron >= config.d_ffn) {
            fail(ErrorKind::Config, "mask coordinate (" + std::to_string(c.layer) + ", " + std::to_string(c.neuron) +
                                        ") outside model with " + std::to_string(config.n_layers) + " layers x " +
                                        std::to_string(config.d_ffn) + " neurons");
        }
    }
}

float apply_activation(Activation kind, float x) {
    float a = 0.0f;
    switch (kind) {
    case Activation::SiluGlu:
        a = x / (1.0f + std::exp(-x));
        break;
    case Activation::Relu:
        a = x > 0.0f ? x : 0.0f;
        break;
    }
    // Collapse -0.0 so a neuron that is "already zero" matches a masked one bitwise.
    return a == 0.0f ? 0.0f : a;
}

std::vector<double> softmax(std::span<const float> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(static_cast<double>(logits[i]) - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

namespace {

// What a pass needs to produce besides the residual stream.
struct PassRequest {
    bool trace = false;
    bool early_exits = false;  // per-layer distributions at the last position
    bool all_positions = false; // final distribution at every position
};

struct PassOutput {
    ActivationTrace trace;
    LayerDistributions distributions;
    std::vector<std::vector<double>> per_position; // final rows, one per position
    std::vector<std::vector<float>> per_position_logits; // with all_positions
};

void check_tokens(const ModelConfig& cfg, std::span<const TokenId> tokens) {
    if (tokens.empty()) fail(ErrorKind::Capacity, "empty token sequence");
    if (tokens.size() > cfg.max_seq_len) {
        fail(ErrorKind::Capacity, "sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_seq_len " +
                                      std::to_string(cfg.max_seq_len));
    }
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t] >= cfg.vocab_size) {
            fail(ErrorKind::Input, "token id " + std::to_string(tokens[t]) + " at position " + std::to_string(t) +
                                       " outside vocabulary of " + std::to_string(cfg.vocab_size));
        }
    }
}

std::vector<float> head_logits(const ModelWeights& w, std::span<const float> x, std::vector<float>& normed) {
    const auto& k = kernels::active();
    const std::size_t d = w.config.d_model;
    k.rmsnorm(x.data(), w.final_norm.data(), normed.data(), d, kNormEps);
    std::vector<float> logits(w.config.vocab_size);
    k.matvec(w.vocab_head.data.data(), normed.data(), logits.data(), w.config.vocab_size, d);
    return logits;
}

PassOutput run_pass(const ModelWeights& w, std::span<const TokenId> tokens, const DeactivationMask* mask,
                    const PassRequest& req) {
    const ModelConfig& cfg = w.config;
    check_tokens(cfg, tokens);
    if (mask != nullptr) mask->check_bounds(cfg);

    const auto& k = kernels::active();
    const std::size_t T = tokens.size();
    const std::size_t d = cfg.d_model;
    const std::size_t F = cfg.d_ffn;
    const std::size_t H = cfg.n_heads;
    const std::size_t hd = cfg.head_dim();
    const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));

    PassOutput out;
    if (req.trace) {
        out.trace.n_layers = cfg.n_layers;
        out.trace.seq_len = T;
        out.trace.d_ffn = F;
        out.trace.values.assign(cfg.n_layers * T * F, 0.0f);
    }
    if (req.early_exits) {
        out.distributions.n_rows = cfg.n_layers + 1;
        out.distributions.vocab_size = cfg.vocab_size;
        out.distributions.probs.reserve((cfg.n_layers + 1) * cfg.vocab_size);
    }

    // Residual stream, T x d.
    std::vector<float> x(T * d);
    for (std::size_t t = 0; t < T; ++t) {
        auto emb = w.token_embedding.row(tokens[t]);
        auto pos = w.position_embedding.row(t);
        for (std::size_t i = 0; i < d; ++i) x[t * d + i] = emb[i] + pos[i];
    }

    std::vector<float> normed(d);
    auto emit_exit = [&]() {
        auto logits = head_logits(w, {x.data() + (T - 1) * d, d}, normed);
        auto p = softmax(logits);
        out.distributions.probs.insert(out.distributions.probs.end(), p.begin(), p.end());
    };
    if (req.early_exits) emit_exit();

    std::vector<float> h(T * d), q(T * d), kk(T * d), v(T * d), attn(T * d), proj(d);
    std::vector<float> scores(T), gate(F), up(F);
    std::vector<std::uint8_t> masked(F, 0);

    for (std::size_t j = 0; j < cfg.n_layers; ++j) {
        const LayerWeights& L = w.layers[j];

        // Attention sub-block.
        for (std::size_t t = 0; t < T; ++t) {
            float* ht = h.data() + t * d;
            k.rmsnorm(x.data() + t * d, L.attn_norm.data(), ht, d, kNormEps);
            k.matvec(L.attn_q.data.data(), ht, q.data() + t * d, d, d);
            k.matvec(L.attn_k.data.data(), ht, kk.data() + t * d, d, d);
            k.matvec(L.attn_v.data.data(), ht, v.data() + t * d, d, d);
        }
        std::fill(attn.begin(), attn.end(), 0.0f);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t hh = 0; hh < H; ++hh) {
                const float* qt = q.data() + t * d + hh * hd;
                float mx = -INFINITY;
                for (std::size_t s = 0; s <= t; ++s) {
                    scores[s] = k.dot(qt, kk.data() + s * d + hh * hd, hd) * inv_sqrt_hd;
                    mx = std::max(mx, scores[s]);
                }
                float sum = 0.0f;
                for (std::size_t s = 0; s <= t; ++s) {
                    scores[s] = std::exp(scores[s] - mx);
                    sum += scores[s];
                }
                float* at = attn.data() + t * d + hh * hd;
                for (std::size_t s = 0; s <= t; ++s) {
                    k.axpy(scores[s] / sum, v.data() + s * d + hh * hd, at, hd);
                }
            }
        }
        for (std::size_t t = 0; t < T; ++t) {
            k.matvec(L.attn_o.data.data(), attn.data() + t * d, proj.data(), d, d);
            float* xt = x.data() + t * d;
            for (std::size_t i = 0; i < d; ++i) xt[i] += proj[i];
        }

        // FFN sub-block.
        std::fill(masked.begin(), masked.end(), 0);
        if (mask != nullptr) {
            for (const auto& c : mask->coords()) {
                if (c.layer == j) masked[c.neuron] = 1;
            }
        }
        for (std::size_t t = 0; t < T; ++t) {
            float* xt = x.data() + t * d;
            float* ht = h.data() + t * d;
            k.rmsnorm(xt, L.ffn_norm.data(), ht, d, kNormEps);
            k.matvec(L.ffn_gate.data.data(), ht, gate.data(), F, d);
            k.matvec(L.ffn_up.data.data(), ht, up.data(), F, d);
            for (std::size_t i = 0; i < F; ++i) {
                float a = masked[i] ? 0.0f : apply_activation(cfg.activation_kind, gate[i] + L.ffn_gate_bias[i]);
                if (req.trace) out.trace.values[(j * T + t) * F + i] = a;
                gate[i] = a * up[i];
            }
            k.matvec(L.ffn_down.data.data(), gate.data(), proj.data(), d, F);
            for (std::size_t i = 0; i < d; ++i) xt[i] += proj[i];
        }

        if (req.early_exits && j + 1 < cfg.n_layers) emit_exit();
    }

    // Final row goes through the same code path whether or not early exits
    // were requested.
    if (req.early_exits) {
        emit_exit();
    }
    if (req.all_positions) {
        out.per_position.reserve(T);
        for (std::size_t t = 0; t < T; ++t) {
            auto logits = head_logits(w, {x.data() + t * d, d}, normed);
            out.per_position.push_back(softmax(logits));
            out.per_position_logits.push_back(std::move(logits));
        }
    } else if (!req.early_exits) {
        out.per_position.push_back(softmax(head_logits(w, {x.data() + (T - 1) * d, d}, normed)));
    }
    return out;
}

} // namespace

ForwardResult forward(const ModelWeights& weights, std::span<const TokenId> tokens, const DeactivationMask* mask) {
    auto out = run_pass(weights, tokens, mask, {.trace = true, .early_exits = true, .all_positions = false});
    return {std::move(out.distributions), std::move(out.trace)};
}

std::vector<double> next_token_distribution(const ModelWeights& weights, std::span<const TokenId> tokens,
                                            const DeactivationMask* mask) {
    auto out = run_pass(weights, tokens, mask, {});
    return std::move(out.per_position.back());
}

std::vector<double> token_probabilities(const ModelWeights& weights, std::span<const TokenId> tokens,
                                        const DeactivationMask* mask) {
    if (tokens.size() < 2) fail(ErrorKind::Input, "need at least 2 tokens to score a sequence");
    auto out = run_pass(weights, tokens, mask, {.all_positions = true});
    std::vector<double> probs(tokens.size() - 1);
    for (std::size_t t = 1; t < tokens.size(); ++t) probs[t - 1] = out.per_position[t - 1][tokens[t]];
    return probs;
}

std::vector<double> token_inverse_probabilities(const ModelWeights& weights, std::span<const TokenId> tokens,
                                                const DeactivationMask* mask) {
    if (tokens.size() < 2) fail(ErrorKind::Input, "need at least 2 tokens to score a sequence");
    auto out = run_pass(weights, tokens, mask, {.all_positions = true});
    std::vector<double> inv(tokens.size() - 1);
    for (std::size_t t = 1; t < tokens.size(); ++t) {
        const auto& z = out.per_position_logits[t - 1];
        const double mx = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (float v : z) sum += std::exp(static_cast<double>(v) - mx);
        inv[t - 1] = sum / std::exp(static_cast<double>(z[tokens[t]]) - mx);
    }
    return inv;
}

double logprob_sequence(const ModelWeights& weights, std::span<const TokenId> tokens) {
    double total = 0.0;
    for (double p : token_probabilities(weights, tokens)) total += std::log(p);
    return total;
}

} // namespace sneuron
