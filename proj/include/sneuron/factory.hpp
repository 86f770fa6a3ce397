#pragma once

// Synthetic toy models with known ground truth.
//
// Planted models split the first three coordinate blocks of d_model between
// the style-A, style-B and shared token groups, so embeddings of different
// groups are exactly orthogonal. Each token also carries a centred identity
// vector inside its own block; the vocabulary head maps the identity of
// token u onto a fixed successor token, which gives the model a deterministic
// "next word" structure independent of style.
//
// A plant (layer, neuron, style X, gain) wires
//   gate row  = gain * u_X     (u_X: unit mean embedding direction of X)
//   up row    = u_X / sqrt(d_model)
//   down col  = push * o_X     (o_X: a style readout axis)
// and the head adds o_X to every style-X token row. The neuron therefore
// fires (> 0) exactly when the current token belongs to X, is exactly 0 for
// the other groups, and raises the logits of all style-X tokens. With
// d_model >= 5 the readout axes are the last two coordinates; smaller models
// reuse u_X as the readout direction.

#include "sneuron/corpus.hpp"
#include "sneuron/model.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace sneuron {

enum class Style { A, B };

std::string to_string(Style s);
Style style_from_string(const std::string& s);

struct Plant {
    std::uint32_t layer = 0;
    std::uint32_t neuron_index = 0;
    Style style = Style::A;
    double gain = 1.0;
};

struct PlantSpec {
    ModelConfig config;
    std::vector<TokenId> style_a_tokens;
    std::vector<TokenId> style_b_tokens;
    std::vector<TokenId> shared_tokens;
    std::vector<Plant> plants;
    double noise_scale = 0.0;
    std::uint64_t seed = 0;

    // Throws Construction error naming the violated constraint.
    void validate() const;

    const std::vector<TokenId>& tokens(Style s) const { return s == Style::A ? style_a_tokens : style_b_tokens; }
};

std::string plant_spec_to_json(const PlantSpec& spec);
// Throws Construction error on missing/ill-typed fields.
PlantSpec plant_spec_from_json(const std::string& text);

struct PlantRegistry {
    std::map<Style, std::set<NeuronCoord>> planted;

    const std::set<NeuronCoord>& of(Style s) const;
    bool operator==(const PlantRegistry&) const = default;
};

std::string registry_to_json(const PlantRegistry& registry);
PlantRegistry registry_from_json(const std::string& text);

struct PlantedModel {
    ModelWeights weights;
    PlantRegistry registry;
};

// i.i.d. N(0, 1) entries scaled by scale / sqrt(d_model), drawn in container
// tensor order from a 64-bit Mersenne Twister seeded with `seed`.
ModelWeights synth_random(const ModelConfig& config, std::uint64_t seed, double scale);

PlantedModel synth_planted(const PlantSpec& spec);

// Zeroes the output projections of `layer`, turning the block into an exact
// identity on the residual stream.
void make_identity_layer(ModelWeights& weights, std::size_t layer);

// Reference planted configuration: 4 layers, d_model 32, d_ffn 64, vocab 64,
// 8 A-plants and 8 B-plants spread across all layers, zero noise.
// Token ids: 0 UNK, 1 BOS, 2..21 style A, 22..41 style B, 42..61 shared.
PlantSpec reference_plant_spec(std::uint64_t seed = 7);

// Vocabulary naming planted-model tokens: "<unk>", "<bos>", style-A tokens
// "a<i>", style-B "b<i>", shared "s<i>", everything else "x<i>".
Vocabulary planted_vocabulary(const PlantSpec& spec);

// Random sentences for one style: 3..8 words, each a style token with
// probability 0.7 and a shared token otherwise.
std::vector<std::string> synth_style_sentences(const PlantSpec& spec, Style style, std::size_t count,
                                               std::uint64_t seed);

} // namespace sneuron
