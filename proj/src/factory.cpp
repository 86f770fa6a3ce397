#include "sneuron/factory.hpp"

#include "sneuron/error.hpp"
#include "sneuron/model_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sneuron {

namespace {

using json = nlohmann::json;

// Planted-model geometry. Logit scale after the final norm is roughly
// sqrt(d_model) times these weights.
constexpr float kGroupAxisWeight = 1.0f; // embedding component along u_G
constexpr float kIdentityWeight = 1.0f;  // embedding component along the token's identity
constexpr float kSuccessorWeight = 1.0f; // head: identity(u) -> successor(u)
constexpr float kStyleReadout = 0.25f;   // head: o_X on style-X rows
constexpr float kStylePush = 0.75f;      // total down-projection push per style

template <typename F>
void for_each_tensor_data(ModelWeights& w, F&& f) {
    f(w.token_embedding.data);
    f(w.position_embedding.data);
    for (auto& l : w.layers) {
        f(l.attn_q.data);
        f(l.attn_k.data);
        f(l.attn_v.data);
        f(l.attn_o.data);
        f(l.attn_norm);
        f(l.ffn_norm);
        f(l.ffn_gate.data);
        f(l.ffn_gate_bias);
        f(l.ffn_up.data);
        f(l.ffn_down.data);
    }
    f(w.final_norm);
    f(w.vocab_head.data);
}

std::vector<TokenId> token_list(const json& j, const char* name) {
    if (!j.contains(name) || !j[name].is_array()) {
        fail(ErrorKind::Construction, std::string("plant spec field '") + name + "' missing or not an array");
    }
    std::vector<TokenId> out;
    for (const auto& v : j[name]) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            fail(ErrorKind::Construction, std::string("plant spec field '") + name + "' must hold token ids");
        }
        out.push_back(v.get<TokenId>());
    }
    return out;
}

} // namespace

std::string to_string(Style s) { return s == Style::A ? "A" : "B"; }

Style style_from_string(const std::string& s) {
    if (s == "A" || s == "a") return Style::A;
    if (s == "B" || s == "b") return Style::B;
    fail(ErrorKind::Construction, "unknown style '" + s + "' (expected A or B)");
}

void PlantSpec::validate() const {
    try {
        config.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Construction, e.what());
    }
    if (config.d_model < 3) {
        fail(ErrorKind::Construction, "d_model must be >= 3 to give the three token groups orthogonal embedding "
                                      "directions (got d_model = " +
                                          std::to_string(config.d_model) + ")");
    }
    std::set<TokenId> seen;
    for (const auto* group : {&style_a_tokens, &style_b_tokens, &shared_tokens}) {
        for (TokenId t : *group) {
            if (t >= config.vocab_size) {
                fail(ErrorKind::Construction, "token id " + std::to_string(t) + " outside vocabulary of " +
                                                  std::to_string(config.vocab_size));
            }
            if (!seen.insert(t).second) {
                fail(ErrorKind::Construction, "token id " + std::to_string(t) + " appears in more than one group");
            }
        }
    }
    std::set<NeuronCoord> coords;
    for (const auto& p : plants) {
        if (p.layer >= config.n_layers) {
            fail(ErrorKind::Construction, "plant layer " + std::to_string(p.layer) + " >= n_layers");
        }
        if (p.neuron_index >= config.d_ffn) {
            fail(ErrorKind::Construction, "plant neuron_index " + std::to_string(p.neuron_index) + " >= d_ffn");
        }
        if (!(p.gain > 0.0) || !std::isfinite(p.gain)) fail(ErrorKind::Construction, "plant gain must be positive");
        if (!coords.insert({p.layer, p.neuron_index}).second) {
            fail(ErrorKind::Construction, "duplicate plant at (" + std::to_string(p.layer) + ", " +
                                              std::to_string(p.neuron_index) + ")");
        }
    }
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
        fail(ErrorKind::Construction, "noise_scale must be non-negative");
    }
}

std::string plant_spec_to_json(const PlantSpec& spec) {
    json plants = json::array();
    for (const auto& p : spec.plants) {
        plants.push_back({{"layer", p.layer}, {"neuron_index", p.neuron_index}, {"style", to_string(p.style)},
                          {"gain", p.gain}});
    }
    json j = {{"config", json::parse(config_to_json(spec.config))},
              {"style_a_tokens", spec.style_a_tokens},
              {"style_b_tokens", spec.style_b_tokens},
              {"shared_tokens", spec.shared_tokens},
              {"plants", plants},
              {"noise_scale", spec.noise_scale},
              {"seed", spec.seed}};
    return j.dump(2) + "\n";
}

PlantSpec plant_spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::Construction, std::string("plant spec is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("config")) fail(ErrorKind::Construction, "plant spec needs a 'config' object");
    PlantSpec spec;
    try {
        spec.config = config_from_json(j["config"].dump());
    } catch (const Error& e) {
        fail(ErrorKind::Construction, e.what());
    }
    spec.style_a_tokens = token_list(j, "style_a_tokens");
    spec.style_b_tokens = token_list(j, "style_b_tokens");
    spec.shared_tokens = token_list(j, "shared_tokens");
    if (!j.contains("plants") || !j["plants"].is_array()) {
        fail(ErrorKind::Construction, "plant spec field 'plants' missing or not an array");
    }
    for (const auto& p : j["plants"]) {
        try {
            Plant plant;
            plant.layer = p.at("layer").get<std::uint32_t>();
            plant.neuron_index = p.at("neuron_index").get<std::uint32_t>();
            plant.style = style_from_string(p.at("style").get<std::string>());
            plant.gain = p.at("gain").get<double>();
            spec.plants.push_back(plant);
        } catch (const json::exception& e) {
            fail(ErrorKind::Construction, std::string("malformed plant entry: ") + e.what());
        }
    }
    spec.noise_scale = j.value("noise_scale", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    return spec;
}

const std::set<NeuronCoord>& PlantRegistry::of(Style s) const {
    static const std::set<NeuronCoord> kEmpty;
    auto it = planted.find(s);
    return it == planted.end() ? kEmpty : it->second;
}

std::string registry_to_json(const PlantRegistry& registry) {
    json j = json::object();
    for (Style s : {Style::A, Style::B}) {
        json arr = json::array();
        for (const auto& c : registry.of(s)) arr.push_back({c.layer, c.neuron});
        j[to_string(s)] = arr;
    }
    return j.dump(2) + "\n";
}

PlantRegistry registry_from_json(const std::string& text) {
    PlantRegistry r;
    try {
        const json j = json::parse(text);
        for (Style s : {Style::A, Style::B}) {
            auto& set = r.planted[s];
            for (const auto& c : j.at(to_string(s))) set.insert({c.at(0).get<std::uint32_t>(), c.at(1).get<std::uint32_t>()});
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed plant registry: ") + e.what());
    }
    return r;
}

ModelWeights synth_random(const ModelConfig& config, std::uint64_t seed, double scale) {
    if (!(scale >= 0.0) || !std::isfinite(scale)) fail(ErrorKind::Config, "scale must be non-negative");
    ModelWeights w = ModelWeights::zeros(config);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = scale / std::sqrt(static_cast<double>(config.d_model));
    for_each_tensor_data(w, [&](std::vector<float>& data) {
        for (auto& v : data) v = static_cast<float>(normal(rng) * s);
    });
    return w;
}

PlantedModel synth_planted(const PlantSpec& spec) {
    spec.validate();
    const ModelConfig& cfg = spec.config;
    const std::size_t d = cfg.d_model;
    const bool readout_axes = d >= 5;
    const std::size_t region = readout_axes ? d - 2 : d;
    const std::size_t block = region / 3;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    ModelWeights w = ModelWeights::zeros(cfg);
    for (auto& l : w.layers) {
        std::fill(l.attn_norm.begin(), l.attn_norm.end(), 1.0f);
        std::fill(l.ffn_norm.begin(), l.ffn_norm.end(), 1.0f);
    }
    std::fill(w.final_norm.begin(), w.final_norm.end(), 1.0f);

    const std::vector<TokenId>* groups[3] = {&spec.style_a_tokens, &spec.style_b_tokens, &spec.shared_tokens};

    // Unit group axes and per-token identity vectors, both inside the group's block.
    std::vector<std::vector<float>> axis(3, std::vector<float>(d, 0.0f));
    std::vector<std::vector<float>> identity(cfg.vocab_size, std::vector<float>(d, 0.0f));
    const float axis_coord = 1.0f / std::sqrt(static_cast<float>(block));
    for (std::size_t g = 0; g < 3; ++g) {
        const std::size_t lo = g * block;
        for (std::size_t i = lo; i < lo + block; ++i) axis[g][i] = axis_coord;

        const auto& toks = *groups[g];
        if (toks.empty() || block < 2) continue;
        std::vector<std::vector<double>> vecs;
        for (std::size_t n = 0; n < toks.size(); ++n) {
            std::vector<double> v(block);
            for (auto& x : v) x = normal(rng);
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(block);
            for (auto& x : v) x -= mean; // orthogonal to the all-ones block axis
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 0.0) for (auto& x : v) x /= norm;
            vecs.push_back(std::move(v));
        }
        // Centre across the group so the mean embedding is exactly along the axis.
        std::vector<double> centre(block, 0.0);
        for (const auto& v : vecs) for (std::size_t i = 0; i < block; ++i) centre[i] += v[i];
        for (auto& c : centre) c /= static_cast<double>(vecs.size());
        if (vecs.size() == 1) std::fill(centre.begin(), centre.end(), 0.0);
        for (std::size_t n = 0; n < toks.size(); ++n) {
            for (std::size_t i = 0; i < block; ++i) identity[toks[n]][lo + i] = static_cast<float>(vecs[n][i] - centre[i]);
        }
    }

    // Embeddings.
    for (std::size_t g = 0; g < 3; ++g) {
        for (TokenId t : *groups[g]) {
            auto row = w.token_embedding.row(t);
            for (std::size_t i = 0; i < d; ++i) row[i] = kGroupAxisWeight * axis[g][i] + kIdentityWeight * identity[t][i];
        }
    }

    // Successor structure over all grouped tokens. A spec without plants
    // leaves the head empty, so the model is uniform.
    const bool head = !spec.plants.empty();
    std::vector<TokenId> grouped;
    for (const auto* g : groups) grouped.insert(grouped.end(), g->begin(), g->end());
    std::vector<TokenId> successor = grouped;
    std::shuffle(successor.begin(), successor.end(), rng);
    // No styled token is followed by a token of its own style.
    std::vector<int> group_of(cfg.vocab_size, -1);
    for (int g = 0; g < 3; ++g) for (TokenId t : *groups[g]) group_of[t] = g;
    auto clash = [&](std::size_t n) {
        const int g = group_of[grouped[n]];
        return g < 2 && group_of[successor[n]] == g;
    };
    for (std::size_t n = 0; n < grouped.size(); ++n) {
        for (std::size_t m = 0; clash(n) && m < grouped.size(); ++m) {
            std::swap(successor[n], successor[m]);
            if (clash(n) || clash(m)) std::swap(successor[n], successor[m]);
        }
    }
    for (std::size_t n = 0; head && n < grouped.size(); ++n) {
        auto row = w.vocab_head.row(successor[n]);
        for (std::size_t i = 0; i < d; ++i) row[i] += kSuccessorWeight * identity[grouped[n]][i];
    }

    // Style readout directions.
    std::vector<std::vector<float>> readout(2, std::vector<float>(d, 0.0f));
    for (std::size_t s = 0; s < 2; ++s) {
        if (readout_axes) {
            readout[s][d - 2 + s] = 1.0f;
        } else {
            readout[s] = axis[s];
        }
        for (TokenId t : *groups[s]) {
            if (!head) break;
            auto row = w.vocab_head.row(t);
            for (std::size_t i = 0; i < d; ++i) row[i] += kStyleReadout * readout[s][i];
        }
    }

    // Plants.
    PlantRegistry registry;
    registry.planted[Style::A];
    registry.planted[Style::B];
    std::size_t per_style[2] = {0, 0};
    for (const auto& p : spec.plants) ++per_style[p.style == Style::A ? 0 : 1];
    const float up_scale = 1.0f / std::sqrt(static_cast<float>(d));
    for (const auto& p : spec.plants) {
        const std::size_t s = p.style == Style::A ? 0 : 1;
        LayerWeights& L = w.layers[p.layer];
        const float push = kStylePush / static_cast<float>(per_style[s]);
        for (std::size_t i = 0; i < d; ++i) {
            L.ffn_gate.at(p.neuron_index, i) = static_cast<float>(p.gain) * axis[s][i];
            L.ffn_up.at(p.neuron_index, i) = up_scale * axis[s][i];
            L.ffn_down.at(i, p.neuron_index) = push * readout[s][i];
        }
        registry.planted[p.style].insert({p.layer, p.neuron_index});
    }

    if (spec.noise_scale > 0.0) {
        for_each_tensor_data(w, [&](std::vector<float>& data) {
            for (auto& v : data) v += static_cast<float>(spec.noise_scale * normal(rng));
        });
    }
    w.validate();
    return {std::move(w), std::move(registry)};
}

void make_identity_layer(ModelWeights& weights, std::size_t layer) {
    if (layer >= weights.layers.size()) fail(ErrorKind::Config, "layer index out of range");
    auto& l = weights.layers[layer];
    std::fill(l.attn_o.data.begin(), l.attn_o.data.end(), 0.0f);
    std::fill(l.ffn_down.data.begin(), l.ffn_down.data.end(), 0.0f);
}

PlantSpec reference_plant_spec(std::uint64_t seed) {
    PlantSpec spec;
    spec.config = ModelConfig{.n_layers = 4,
                              .d_model = 32,
                              .n_heads = 4,
                              .d_ffn = 64,
                              .vocab_size = 64,
                              .max_seq_len = 64,
                              .activation_kind = Activation::SiluGlu};
    for (TokenId t = 2; t < 22; ++t) spec.style_a_tokens.push_back(t);
    for (TokenId t = 22; t < 42; ++t) spec.style_b_tokens.push_back(t);
    for (TokenId t = 42; t < 62; ++t) spec.shared_tokens.push_back(t);

    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::uint32_t>> free(spec.config.n_layers);
    for (auto& f : free) {
        f.resize(spec.config.d_ffn);
        std::iota(f.begin(), f.end(), 0u);
        std::shuffle(f.begin(), f.end(), rng);
    }
    for (Style s : {Style::A, Style::B}) {
        for (std::uint32_t i = 0; i < 8; ++i) {
            const std::uint32_t layer = i % spec.config.n_layers;
            spec.plants.push_back({layer, free[layer].back(), s, 2.0});
            free[layer].pop_back();
        }
    }
    spec.noise_scale = 0.0;
    spec.seed = seed;
    return spec;
}

Vocabulary planted_vocabulary(const PlantSpec& spec) {
    std::vector<std::string> names(spec.config.vocab_size);
    for (std::size_t i = 0; i < names.size(); ++i) names[i] = "x" + std::to_string(i);
    std::size_t n = 0;
    for (TokenId t : spec.style_a_tokens) names[t] = "a" + std::to_string(n++);
    n = 0;
    for (TokenId t : spec.style_b_tokens) names[t] = "b" + std::to_string(n++);
    n = 0;
    for (TokenId t : spec.shared_tokens) names[t] = "s" + std::to_string(n++);
    names[kUnkId] = "<unk>";
    if (names.size() > kBosId) names[kBosId] = "<bos>";
    return Vocabulary(std::move(names));
}

std::vector<std::string> synth_style_sentences(const PlantSpec& spec, Style style, std::size_t count,
                                               std::uint64_t seed) {
    const Vocabulary vocab = planted_vocabulary(spec);
    const auto& styled = spec.tokens(style);
    const auto& shared = spec.shared_tokens;
    if (styled.empty()) fail(ErrorKind::Construction, "style " + to_string(style) + " has no tokens");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> len_dist(3, 8);
    std::bernoulli_distribution use_style(shared.empty() ? 1.0 : 0.7);
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        const int len = len_dist(rng);
        std::string line;
        for (int i = 0; i < len; ++i) {
            const auto& pool = use_style(rng) ? styled : shared;
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            if (!line.empty()) line.push_back(' ');
            line += vocab.token(pool[pick(rng)]);
        }
        out.push_back(std::move(line));
    }
    return out;
}

} // namespace sneuron
