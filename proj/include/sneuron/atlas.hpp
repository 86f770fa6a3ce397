#pragma once

// Style-specific neuron identification.
//
// A neuron's score for a style is its mean post-activation value over every
// token position of that style's corpus. Neurons with a positive score form
// the active set S; the k best of S form S'. The exclusive sets
// N_A = S'_A \ S'_B and N_B = S'_B \ S'_A are the style-specific neurons;
// S'_A ∩ S'_B is the overlap that is never deactivated.

#include "sneuron/corpus.hpp"
#include "sneuron/model.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace sneuron {

struct ActivationSummary {
    std::size_t n_layers = 0;
    std::size_t d_ffn = 0;
    std::size_t positions = 0;  // token positions aggregated
    std::vector<double> scores; // n_layers x d_ffn mean activations

    double score(std::size_t layer, std::size_t neuron) const { return scores[layer * d_ffn + neuron]; }
};

struct ScoredNeuron {
    NeuronCoord coord;
    double score = 0.0;

    bool operator==(const ScoredNeuron&) const = default;
};

// Throws Input error for an empty corpus or sentences longer than
// max_seq_len. Per-sentence sums are combined in corpus order, so the
// result is bitwise independent of `workers`.
ActivationSummary summarize_activations(const ModelWeights& weights, const StyleCorpus& corpus,
                                        std::size_t workers = 1);

// Active neurons (score > 0) ranked by descending score, ties by ascending
// (layer, neuron); truncated to k. Throws Input error when k < 1.
std::vector<ScoredNeuron> select_topk(const ActivationSummary& summary, std::size_t k);

struct NeuronAtlas {
    std::string style_a;
    std::string style_b;
    std::size_t k = 0;
    std::size_t n_layers = 0;
    std::size_t d_ffn = 0;
    std::vector<ScoredNeuron> top_a;       // S'_A, ranked
    std::vector<ScoredNeuron> top_b;       // S'_B, ranked
    std::vector<ScoredNeuron> exclusive_a; // N_A, coordinate order
    std::vector<ScoredNeuron> exclusive_b; // N_B, coordinate order
    std::vector<ScoredNeuron> overlap;     // S'_A ∩ S'_B with A's score, coordinate order

    bool operator==(const NeuronAtlas&) const = default;
};

NeuronAtlas atlas_from_summaries(const ActivationSummary& a, const ActivationSummary& b, std::string label_a,
                                 std::string label_b, std::size_t k);

NeuronAtlas build_atlas(const ModelWeights& weights, const StyleCorpus& corpus_a, const StyleCorpus& corpus_b,
                        std::size_t k, std::size_t workers = 1);

struct AtlasStats {
    double overlap_fraction = 0.0; // |overlap| / |S'_A ∪ S'_B|, 0 when both empty
    std::size_t union_size = 0;
    std::vector<std::size_t> exclusive_a_per_layer;
    std::vector<std::size_t> exclusive_b_per_layer;
    std::vector<std::size_t> overlap_per_layer;
};

AtlasStats atlas_stats(const NeuronAtlas& atlas);

// Plain-text report: overlap fraction plus a per-layer histogram.
std::string format_atlas_stats(const NeuronAtlas& atlas, const AtlasStats& stats);
std::string atlas_stats_to_json(const NeuronAtlas& atlas, const AtlasStats& stats);

// Atlas file: JSON with fields format, version, style_a, style_b, k,
// n_layers, d_ffn and arrays top_a, top_b, exclusive_a, exclusive_b,
// overlap of [layer, neuron, score].
std::string atlas_to_json(const NeuronAtlas& atlas);
NeuronAtlas atlas_from_json(const std::string& text);
void save_atlas(const NeuronAtlas& atlas, const std::filesystem::path& path);
NeuronAtlas load_atlas(const std::filesystem::path& path);

} // namespace sneuron
