#include "oracles.hpp"
#include "support.hpp"

#include "sneuron/atlas.hpp"
#include "sneuron/error.hpp"
#include "sneuron/factory.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <random>
#include <set>

using namespace sneuron;
using testing_support::random_model;
using testing_support::TempDir;

namespace {

ActivationSummary summary_of(std::vector<double> scores, std::size_t layers, std::size_t d_ffn) {
    ActivationSummary s;
    s.n_layers = layers;
    s.d_ffn = d_ffn;
    s.positions = 1;
    s.scores = std::move(scores);
    return s;
}

StyleCorpus corpus_of(std::string label, std::vector<std::vector<TokenId>> sentences) {
    StyleCorpus c;
    c.label = std::move(label);
    for (std::size_t i = 0; i < sentences.size(); ++i) c.line_numbers.push_back(i + 1);
    c.sentences = std::move(sentences);
    return c;
}

StyleCorpus planted_corpus(const PlantSpec& spec, Style s, std::size_t n, std::uint64_t seed) {
    const auto vocab = planted_vocabulary(spec);
    const auto lines = synth_style_sentences(spec, s, n, seed);
    std::vector<std::size_t> numbers(lines.size());
    for (std::size_t i = 0; i < numbers.size(); ++i) numbers[i] = i + 1;
    return make_corpus(to_string(s), lines, numbers, vocab);
}

std::set<NeuronCoord> coords(const std::vector<ScoredNeuron>& v) {
    std::set<NeuronCoord> out;
    for (const auto& n : v) out.insert(n.coord);
    return out;
}

// Two-pass mean over positions in double.
std::vector<double> oracle_scores(const ModelWeights& w, const StyleCorpus& c) {
    const auto& cfg = w.config;
    std::vector<double> sum(cfg.n_layers * cfg.d_ffn, 0.0);
    double n = 0.0;
    for (const auto& s : c.sentences) {
        const auto pass = oracle::forward(w, s);
        for (std::size_t l = 0; l < cfg.n_layers; ++l)
            for (std::size_t t = 0; t < s.size(); ++t)
                for (std::size_t f = 0; f < cfg.d_ffn; ++f)
                    sum[l * cfg.d_ffn + f] += pass.trace[(l * s.size() + t) * cfg.d_ffn + f];
        n += static_cast<double>(s.size());
    }
    for (auto& v : sum) v /= n;
    return sum;
}

} // namespace

TEST_CASE("select_topk example") {
    const auto s = summary_of({0.5, 0.2, -0.1}, 1, 3);
    const auto top = select_topk(s, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0] == ScoredNeuron{{0, 0}, 0.5});
    CHECK(top[1] == ScoredNeuron{{0, 1}, 0.2});
    CHECK(select_topk(s, 10).size() == 2);
    CHECK(select_topk(summary_of({0.0, -1.0, -0.0}, 1, 3), 5).empty());
    CHECK_THROWS_AS(select_topk(s, 0), Error);
}

TEST_CASE("select_topk ties break by coordinate") {
    const auto s = summary_of({0.3, 0.7, 0.7, 0.3}, 2, 2);
    const auto top = select_topk(s, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].coord == NeuronCoord{0, 1});
    CHECK(top[1].coord == NeuronCoord{1, 0});
    CHECK(top[2].coord == NeuronCoord{0, 0});
}

TEST_CASE("summaries: degenerate inputs") {
    ModelConfig c{.n_layers = 2, .d_model = 4, .n_heads = 1, .d_ffn = 3, .vocab_size = 5, .max_seq_len = 6};
    const auto zero = ModelWeights::zeros(c);
    const auto s = summarize_activations(zero, corpus_of("A", {{1, 2, 3}}));
    CHECK(s.positions == 3);
    for (double v : s.scores) CHECK(v == 0.0);

    CHECK_THROWS_AS(summarize_activations(zero, corpus_of("A", {})), Error);
    CHECK_THROWS_AS(summarize_activations(zero, corpus_of("A", {{1, 2, 3, 4, 1, 2, 3}})), Error);

    const auto w = random_model(21);
    const std::vector<TokenId> one{1 % static_cast<TokenId>(w.config.vocab_size)};
    const auto single = summarize_activations(w, corpus_of("A", {one}));
    const auto pass = oracle::forward(w, one);
    for (std::size_t i = 0; i < single.scores.size(); ++i) CHECK(single.scores[i] == doctest::Approx(pass.trace[i]).epsilon(1e-5));
}

TEST_CASE("summaries match the two-pass oracle") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        const auto w = random_model(seed);
        std::mt19937_64 rng(seed);
        std::vector<std::vector<TokenId>> sents;
        for (std::size_t i = 0; i < 3; ++i) sents.push_back(testing_support::random_tokens(rng, w.config, 1 + (seed + i) % w.config.max_seq_len));
        const auto c = corpus_of("A", sents);
        const auto s = summarize_activations(w, c);
        const auto want = oracle_scores(w, c);
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(s.scores[i] - want[i]) <= 1e-4 * (1.0 + std::abs(want[i])));
    }
}

TEST_CASE("planted neurons are recovered") {
    const auto spec = reference_plant_spec();
    const auto pm = synth_planted(spec);
    const auto a = planted_corpus(spec, Style::A, 200, 11);
    const auto b = planted_corpus(spec, Style::B, 200, 12);
    const auto atlas = build_atlas(pm.weights, a, b, 8);
    CHECK(coords(atlas.exclusive_a) == pm.registry.of(Style::A));
    CHECK(coords(atlas.exclusive_b) == pm.registry.of(Style::B));
    CHECK(atlas.overlap.empty());
}

TEST_CASE("identical corpora give a full overlap") {
    const auto w = random_model(41);
    std::mt19937_64 rng(41);
    std::vector<std::vector<TokenId>> sents;
    for (int i = 0; i < 5; ++i) sents.push_back(testing_support::random_tokens(rng, w.config, 4));
    const auto atlas = build_atlas(w, corpus_of("A", sents), corpus_of("B", sents), 5);
    CHECK(atlas.exclusive_a.empty());
    CHECK(atlas.exclusive_b.empty());
    CHECK(coords(atlas.overlap) == coords(atlas.top_a));
}

TEST_CASE("atlas invariants over random models") {
    for (std::uint64_t seed = 50; seed < 70; ++seed) {
        const auto w = random_model(seed);
        std::mt19937_64 rng(seed);
        std::vector<std::vector<TokenId>> sa, sb;
        for (int i = 0; i < 4; ++i) {
            sa.push_back(testing_support::random_tokens(rng, w.config, 3));
            sb.push_back(testing_support::random_tokens(rng, w.config, 5));
        }
        const auto ca = corpus_of("A", sa), cb = corpus_of("B", sb);
        const auto sum_a = summarize_activations(w, ca), sum_b = summarize_activations(w, cb);
        std::size_t prev_overlap = 0;
        for (std::size_t k : {1u, 2u, 4u, 8u, 1000u}) {
            const auto atlas = atlas_from_summaries(sum_a, sum_b, "A", "B", k);
            const auto ta = coords(atlas.top_a), tb = coords(atlas.top_b);
            const auto ea = coords(atlas.exclusive_a), eb = coords(atlas.exclusive_b), ov = coords(atlas.overlap);
            CHECK(atlas.top_a.size() <= k);
            for (const auto& n : atlas.top_a) CHECK(n.score > 0.0);
            for (const auto& c : ea) CHECK((ta.contains(c) && !tb.contains(c)));
            for (const auto& c : eb) CHECK((tb.contains(c) && !ta.contains(c)));
            for (const auto& c : ov) CHECK((ta.contains(c) && tb.contains(c)));
            CHECK(ea.size() + ov.size() == ta.size());
            CHECK(eb.size() + ov.size() == tb.size());
            for (const auto& n : atlas.overlap) CHECK(n.score == sum_a.score(n.coord.layer, n.coord.neuron));
            CHECK(ov.size() >= prev_overlap);
            prev_overlap = ov.size();
        }
    }
}

TEST_CASE("summaries are invariant to sentence order and worker count") {
    const auto spec = reference_plant_spec();
    const auto w = synth_planted(spec).weights;
    auto c = planted_corpus(spec, Style::A, 60, 3);
    const auto base = summarize_activations(w, c, 1);
    for (std::size_t workers : {2u, 3u, 8u}) CHECK(testing_support::bit_equal(summarize_activations(w, c, workers).scores, base.scores));

    std::mt19937_64 rng(5);
    std::shuffle(c.sentences.begin(), c.sentences.end(), rng);
    const auto shuffled = summarize_activations(w, c, 4);
    for (std::size_t i = 0; i < base.scores.size(); ++i) CHECK(shuffled.scores[i] == doctest::Approx(base.scores[i]).epsilon(1e-9));
    const auto b = planted_corpus(spec, Style::B, 60, 4);
    CHECK(build_atlas(w, c, b, 8, 1) == build_atlas(w, c, b, 8, 4));
}

TEST_CASE("atlas JSON round-trip and stats") {
    const auto spec = reference_plant_spec();
    const auto w = synth_planted(spec).weights;
    const auto atlas = build_atlas(w, planted_corpus(spec, Style::A, 50, 1), planted_corpus(spec, Style::B, 50, 2), 12);
    CHECK(atlas_from_json(atlas_to_json(atlas)) == atlas);
    TempDir dir("atlas");
    save_atlas(atlas, dir / "a.json");
    CHECK(load_atlas(dir / "a.json") == atlas);
    CHECK_THROWS_AS(atlas_from_json("{\"format\": \"other\"}"), Error);
    CHECK_THROWS_AS(atlas_from_json("[1, 2"), Error);

    const auto st = atlas_stats(atlas);
    std::set<NeuronCoord> uni = coords(atlas.top_a);
    for (const auto& c : coords(atlas.top_b)) uni.insert(c);
    CHECK(st.union_size == uni.size());
    CHECK(st.overlap_fraction == doctest::Approx(static_cast<double>(atlas.overlap.size()) / static_cast<double>(uni.size())));
    std::size_t total = 0;
    for (auto v : st.exclusive_a_per_layer) total += v;
    CHECK(total == atlas.exclusive_a.size());
    CHECK(!format_atlas_stats(atlas, st).empty());
    CHECK_NOTHROW(nlohmann::json::parse(atlas_stats_to_json(atlas, st)));
}
