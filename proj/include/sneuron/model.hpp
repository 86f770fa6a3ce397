#pragma once

// Toy decoder-only transformer: pre-norm RMSNorm blocks, causal multi-head
// attention, learned absolute positions and a gated FFN
//
//     ffn(x) = down( act(gate x + b) * (up x) )
//
// A "neuron" is one of the d_ffn gate channels; its activation is the
// post-act value act(gate x + b). The forward pass records every neuron's
// activation at every position and can force a set of neurons to zero.
// Early exit applies the final norm and the vocabulary head to the residual
// stream after each layer (row 0 is the embedding output).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace sneuron {

using TokenId = std::uint32_t;

inline constexpr float kNormEps = 1e-5f;

enum class Activation { SiluGlu, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct ModelConfig {
    std::size_t n_layers = 1;
    std::size_t d_model = 8;
    std::size_t n_heads = 1;
    std::size_t d_ffn = 8;
    std::size_t vocab_size = 2;
    std::size_t max_seq_len = 16;
    Activation activation_kind = Activation::SiluGlu;

    std::size_t head_dim() const { return d_model / n_heads; }

    // Throws Config error naming the violated constraint.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

// Row-major rows x cols matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

struct LayerWeights {
    Matrix attn_q, attn_k, attn_v, attn_o; // d_model x d_model
    std::vector<float> attn_norm;          // d_model
    std::vector<float> ffn_norm;           // d_model
    Matrix ffn_gate;                       // d_ffn x d_model
    std::vector<float> ffn_gate_bias;      // d_ffn
    Matrix ffn_up;                         // d_ffn x d_model
    Matrix ffn_down;                       // d_model x d_ffn

    bool operator==(const LayerWeights&) const = default;
};

struct ModelWeights {
    ModelConfig config;
    Matrix token_embedding;    // vocab_size x d_model
    Matrix position_embedding; // max_seq_len x d_model
    std::vector<LayerWeights> layers;
    std::vector<float> final_norm; // d_model
    Matrix vocab_head;             // vocab_size x d_model

    // All tensors allocated for `config` and zero-filled.
    static ModelWeights zeros(const ModelConfig& config);

    // Shapes consistent with config and every entry finite.
    void validate() const;

    bool operator==(const ModelWeights&) const = default;
};

struct NeuronCoord {
    std::uint32_t layer = 0;
    std::uint32_t neuron = 0;

    auto operator<=>(const NeuronCoord&) const = default;
};

// Neurons forced to zero during a forward pass.
class DeactivationMask {
public:
    DeactivationMask() = default;
    explicit DeactivationMask(std::set<NeuronCoord> coords) : coords_(std::move(coords)) {}

    void insert(NeuronCoord c) { coords_.insert(c); }
    bool contains(NeuronCoord c) const { return coords_.contains(c); }
    bool empty() const { return coords_.empty(); }
    std::size_t size() const { return coords_.size(); }
    const std::set<NeuronCoord>& coords() const { return coords_; }

    // Throws Config error when a coordinate is outside the model.
    void check_bounds(const ModelConfig& config) const;

    bool operator==(const DeactivationMask&) const = default;

private:
    std::set<NeuronCoord> coords_;
};

// n_layers x seq_len x d_ffn post-activation gate values.
struct ActivationTrace {
    std::size_t n_layers = 0;
    std::size_t seq_len = 0;
    std::size_t d_ffn = 0;
    std::vector<float> values;

    float at(std::size_t layer, std::size_t pos, std::size_t neuron) const {
        return values[(layer * seq_len + pos) * d_ffn + neuron];
    }
    std::span<const float> row(std::size_t layer, std::size_t pos) const {
        return {values.data() + (layer * seq_len + pos) * d_ffn, d_ffn};
    }
};

// (n_layers + 1) x vocab_size next-token distributions at one position.
// Row 0 exits from the embeddings, row j after block j, row n_layers is the
// model's regular output.
struct LayerDistributions {
    std::size_t n_rows = 0;
    std::size_t vocab_size = 0;
    std::vector<double> probs;

    std::size_t final_layer() const { return n_rows - 1; }
    std::span<const double> row(std::size_t j) const { return {probs.data() + j * vocab_size, vocab_size}; }
    std::span<const double> final_row() const { return row(final_layer()); }
};

struct ForwardResult {
    LayerDistributions distributions; // at the last position
    ActivationTrace trace;
};

// Full forward pass. Throws Input error for out-of-range token ids and
// Capacity error when tokens exceed max_seq_len (or are empty).
ForwardResult forward(const ModelWeights& weights, std::span<const TokenId> tokens,
                      const DeactivationMask* mask = nullptr);

// Standard next-token distribution at the last position (no early exits,
// no trace). Bit-identical to forward(...).distributions.final_row().
std::vector<double> next_token_distribution(const ModelWeights& weights, std::span<const TokenId> tokens,
                                            const DeactivationMask* mask = nullptr);

// p(tokens[t] | tokens[<t]) for t = 1..len-1 from a single pass.
std::vector<double> token_probabilities(const ModelWeights& weights, std::span<const TokenId> tokens,
                                        const DeactivationMask* mask = nullptr);

// 1 / p(tokens[t] | tokens[<t]) as sum_v exp(z_v - max) / exp(z_t - max), so
// an all-equal row gives exactly vocab_size.
std::vector<double> token_inverse_probabilities(const ModelWeights& weights, std::span<const TokenId> tokens,
                                                const DeactivationMask* mask = nullptr);

// Sum over t >= 1 of ln p(tokens[t] | tokens[<t]). Requires len >= 2.
double logprob_sequence(const ModelWeights& weights, std::span<const TokenId> tokens);

// Numerically stable softmax of float logits into a double distribution.
std::vector<double> softmax(std::span<const float> logits);

float apply_activation(Activation kind, float x);

} // namespace sneuron
