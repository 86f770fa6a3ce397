#include "sneuron/atlas.hpp"

#include "sneuron/error.hpp"
#include "sneuron/io_util.hpp"
#include "sneuron/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <set>

namespace sneuron {

namespace {

using json = nlohmann::json;

std::vector<ScoredNeuron> sorted_by_coord(std::vector<ScoredNeuron> v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.coord < b.coord; });
    return v;
}

json neurons_to_json(const std::vector<ScoredNeuron>& v) {
    json arr = json::array();
    for (const auto& n : v) arr.push_back({n.coord.layer, n.coord.neuron, n.score});
    return arr;
}

std::vector<ScoredNeuron> neurons_from_json(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_array()) {
        fail(ErrorKind::Format, std::string("atlas field '") + field + "' missing or not an array");
    }
    std::vector<ScoredNeuron> out;
    for (const auto& e : j[field]) {
        if (!e.is_array() || e.size() != 3) {
            fail(ErrorKind::Format, std::string("atlas field '") + field + "' entries must be [layer, neuron, score]");
        }
        out.push_back({{e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>()}, e[2].get<double>()});
    }
    return out;
}

} // namespace

ActivationSummary summarize_activations(const ModelWeights& weights, const StyleCorpus& corpus, std::size_t workers) {
    if (corpus.sentences.empty()) fail(ErrorKind::Input, "corpus '" + corpus.label + "' is empty");
    const std::size_t L = weights.config.n_layers;
    const std::size_t F = weights.config.d_ffn;
    for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
        const auto& sent = corpus.sentences[s];
        if (sent.empty() || sent.size() > weights.config.max_seq_len) {
            const std::size_t line = s < corpus.line_numbers.size() ? corpus.line_numbers[s] : s + 1;
            fail(ErrorKind::Input, "corpus '" + corpus.label + "' line " + std::to_string(line) + " has " +
                                       std::to_string(sent.size()) + " tokens; model accepts 1.." +
                                       std::to_string(weights.config.max_seq_len));
        }
    }

    // Per-sentence sums, then a sequential combine in corpus order.
    std::vector<std::vector<double>> partial(corpus.sentences.size());
    parallel_for(corpus.sentences.size(), workers, [&](std::size_t s) {
        const auto trace = forward(weights, corpus.sentences[s]).trace;
        std::vector<double> sums(L * F, 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t t = 0; t < trace.seq_len; ++t) {
                auto row = trace.row(l, t);
                for (std::size_t i = 0; i < F; ++i) sums[l * F + i] += row[i];
            }
        }
        partial[s] = std::move(sums);
    });

    ActivationSummary summary;
    summary.n_layers = L;
    summary.d_ffn = F;
    summary.scores.assign(L * F, 0.0);
    for (std::size_t s = 0; s < partial.size(); ++s) {
        for (std::size_t i = 0; i < L * F; ++i) summary.scores[i] += partial[s][i];
        summary.positions += corpus.sentences[s].size();
    }
    const double n = static_cast<double>(summary.positions);
    for (auto& v : summary.scores) v /= n;
    return summary;
}

std::vector<ScoredNeuron> select_topk(const ActivationSummary& summary, std::size_t k) {
    if (k < 1) fail(ErrorKind::Input, "k must be >= 1");
    std::vector<ScoredNeuron> active;
    for (std::size_t l = 0; l < summary.n_layers; ++l) {
        for (std::size_t i = 0; i < summary.d_ffn; ++i) {
            const double s = summary.score(l, i);
            if (s > 0.0) active.push_back({{static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(i)}, s});
        }
    }
    auto better = [](const ScoredNeuron& a, const ScoredNeuron& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.coord < b.coord;
    };
    if (active.size() > k) {
        std::partial_sort(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(k), active.end(), better);
        active.resize(k);
    } else {
        std::sort(active.begin(), active.end(), better);
    }
    return active;
}

NeuronAtlas atlas_from_summaries(const ActivationSummary& a, const ActivationSummary& b, std::string label_a,
                                 std::string label_b, std::size_t k) {
    if (a.n_layers != b.n_layers || a.d_ffn != b.d_ffn) {
        fail(ErrorKind::Input, "activation summaries come from differently shaped models");
    }
    NeuronAtlas atlas;
    atlas.style_a = std::move(label_a);
    atlas.style_b = std::move(label_b);
    atlas.k = k;
    atlas.n_layers = a.n_layers;
    atlas.d_ffn = a.d_ffn;
    atlas.top_a = select_topk(a, k);
    atlas.top_b = select_topk(b, k);

    std::set<NeuronCoord> in_a, in_b;
    for (const auto& n : atlas.top_a) in_a.insert(n.coord);
    for (const auto& n : atlas.top_b) in_b.insert(n.coord);
    for (const auto& n : atlas.top_a) {
        (in_b.contains(n.coord) ? atlas.overlap : atlas.exclusive_a).push_back(n);
    }
    for (const auto& n : atlas.top_b) {
        if (!in_a.contains(n.coord)) atlas.exclusive_b.push_back(n);
    }
    atlas.exclusive_a = sorted_by_coord(std::move(atlas.exclusive_a));
    atlas.exclusive_b = sorted_by_coord(std::move(atlas.exclusive_b));
    atlas.overlap = sorted_by_coord(std::move(atlas.overlap));
    return atlas;
}

NeuronAtlas build_atlas(const ModelWeights& weights, const StyleCorpus& corpus_a, const StyleCorpus& corpus_b,
                        std::size_t k, std::size_t workers) {
    if (k < 1) fail(ErrorKind::Input, "k must be >= 1");
    const auto sa = summarize_activations(weights, corpus_a, workers);
    const auto sb = summarize_activations(weights, corpus_b, workers);
    return atlas_from_summaries(sa, sb, corpus_a.label, corpus_b.label, k);
}

AtlasStats atlas_stats(const NeuronAtlas& atlas) {
    AtlasStats s;
    s.union_size = atlas.top_a.size() + atlas.top_b.size() - atlas.overlap.size();
    s.overlap_fraction =
        s.union_size == 0 ? 0.0 : static_cast<double>(atlas.overlap.size()) / static_cast<double>(s.union_size);
    s.exclusive_a_per_layer.assign(atlas.n_layers, 0);
    s.exclusive_b_per_layer.assign(atlas.n_layers, 0);
    s.overlap_per_layer.assign(atlas.n_layers, 0);
    for (const auto& n : atlas.exclusive_a) ++s.exclusive_a_per_layer.at(n.coord.layer);
    for (const auto& n : atlas.exclusive_b) ++s.exclusive_b_per_layer.at(n.coord.layer);
    for (const auto& n : atlas.overlap) ++s.overlap_per_layer.at(n.coord.layer);
    return s;
}

std::string format_atlas_stats(const NeuronAtlas& atlas, const AtlasStats& stats) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "styles: %s vs %s   k = %zu\n", atlas.style_a.c_str(), atlas.style_b.c_str(),
                  atlas.k);
    out += buf;
    std::snprintf(buf, sizeof buf, "|S'_A| = %zu  |S'_B| = %zu  |N_A| = %zu  |N_B| = %zu  |overlap| = %zu\n",
                  atlas.top_a.size(), atlas.top_b.size(), atlas.exclusive_a.size(), atlas.exclusive_b.size(),
                  atlas.overlap.size());
    out += buf;
    std::snprintf(buf, sizeof buf, "overlap fraction: %.4f\n\n", stats.overlap_fraction);
    out += buf;
    std::snprintf(buf, sizeof buf, "%6s %10s %10s %10s\n", "layer", "N_A", "N_B", "overlap");
    out += buf;
    for (std::size_t l = 0; l < atlas.n_layers; ++l) {
        std::snprintf(buf, sizeof buf, "%6zu %10zu %10zu %10zu\n", l, stats.exclusive_a_per_layer[l],
                      stats.exclusive_b_per_layer[l], stats.overlap_per_layer[l]);
        out += buf;
    }
    return out;
}

std::string atlas_stats_to_json(const NeuronAtlas& atlas, const AtlasStats& stats) {
    json j = {{"style_a", atlas.style_a},
              {"style_b", atlas.style_b},
              {"k", atlas.k},
              {"overlap_fraction", stats.overlap_fraction},
              {"union_size", stats.union_size},
              {"exclusive_a_count", atlas.exclusive_a.size()},
              {"exclusive_b_count", atlas.exclusive_b.size()},
              {"overlap_count", atlas.overlap.size()},
              {"exclusive_a_per_layer", stats.exclusive_a_per_layer},
              {"exclusive_b_per_layer", stats.exclusive_b_per_layer},
              {"overlap_per_layer", stats.overlap_per_layer}};
    return j.dump(2) + "\n";
}

std::string atlas_to_json(const NeuronAtlas& atlas) {
    json j = {{"format", "sntm-atlas"},
              {"version", 1},
              {"style_a", atlas.style_a},
              {"style_b", atlas.style_b},
              {"k", atlas.k},
              {"n_layers", atlas.n_layers},
              {"d_ffn", atlas.d_ffn},
              {"top_a", neurons_to_json(atlas.top_a)},
              {"top_b", neurons_to_json(atlas.top_b)},
              {"exclusive_a", neurons_to_json(atlas.exclusive_a)},
              {"exclusive_b", neurons_to_json(atlas.exclusive_b)},
              {"overlap", neurons_to_json(atlas.overlap)}};
    return j.dump(2) + "\n";
}

NeuronAtlas atlas_from_json(const std::string& text) {
    NeuronAtlas atlas;
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "sntm-atlas") fail(ErrorKind::Format, "not an atlas file");
        if (j.value("version", 0) != 1) fail(ErrorKind::Format, "unsupported atlas version");
        atlas.style_a = j.at("style_a").get<std::string>();
        atlas.style_b = j.at("style_b").get<std::string>();
        atlas.k = j.at("k").get<std::size_t>();
        atlas.n_layers = j.at("n_layers").get<std::size_t>();
        atlas.d_ffn = j.at("d_ffn").get<std::size_t>();
        atlas.top_a = neurons_from_json(j, "top_a");
        atlas.top_b = neurons_from_json(j, "top_b");
        atlas.exclusive_a = neurons_from_json(j, "exclusive_a");
        atlas.exclusive_b = neurons_from_json(j, "exclusive_b");
        atlas.overlap = neurons_from_json(j, "overlap");
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed atlas file: ") + e.what());
    }
    for (const auto* set : {&atlas.top_a, &atlas.top_b}) {
        for (const auto& n : *set) {
            if (n.coord.layer >= atlas.n_layers || n.coord.neuron >= atlas.d_ffn) {
                fail(ErrorKind::Format, "atlas coordinate outside declared model shape");
            }
        }
    }
    return atlas;
}

void save_atlas(const NeuronAtlas& atlas, const std::filesystem::path& path) {
    write_file_atomic(path, atlas_to_json(atlas));
}

NeuronAtlas load_atlas(const std::filesystem::path& path) { return atlas_from_json(read_file(path)); }

} // namespace sneuron
