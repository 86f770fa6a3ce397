#include "oracles.hpp"
#include "support.hpp"

#include "sneuron/decoding.hpp"
#include "sneuron/error.hpp"
#include "sneuron/factory.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sneuron;
using testing_support::random_distribution;
using testing_support::random_model;

namespace {

using V = std::vector<double>;

LayerDistributions rows_of(const std::vector<V>& rows) {
    LayerDistributions d;
    d.n_rows = rows.size();
    d.vocab_size = rows.front().size();
    for (const auto& r : rows) d.probs.insert(d.probs.end(), r.begin(), r.end());
    return d;
}

// KL sums directly, natural log.
double kl(const V& p, const V& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
    return s;
}

double jsd_by_kl(const V& p, const V& q) {
    V m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    return 0.5 * kl(p, m) + 0.5 * kl(q, m);
}

} // namespace

TEST_CASE("plausible set") {
    CHECK(plausible_set(V{0.7, 0.2, 0.05, 0.05}, 0.1) == std::vector<TokenId>{0, 1});
    CHECK(plausible_set(V{0.2, 0.4, 0.4}, 1.0) == std::vector<TokenId>{1, 2});
    CHECK(plausible_set(V{0.25, 0.25, 0.25, 0.25}, 0.5).size() == 4);
    CHECK(plausible_set(V{0.25, 0.25, 0.25, 0.25}, 1.0).size() == 4);
}

TEST_CASE("contrast: worked example and degenerate cases") {
    const std::vector<TokenId> phi{0, 1};
    const auto out = contrast(V{0.5, 0.3, 0.2}, V{0.25, 0.3, 0.45}, phi);
    CHECK(std::abs(out[0] - 2.0 / 3.0) <= 1e-9);
    CHECK(std::abs(out[1] - 1.0 / 3.0) <= 1e-9);
    CHECK(out[2] == 0.0);

    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const auto p = random_distribution(rng, 9, i % 2 == 0);
        const auto phi2 = plausible_set(p, 0.1);
        const auto u = contrast(p, p, phi2);
        std::vector<bool> in(p.size(), false);
        for (TokenId w : phi2) in[w] = true;
        for (std::size_t w = 0; w < p.size(); ++w) {
            if (in[w]) CHECK(std::abs(u[w] - 1.0 / static_cast<double>(phi2.size())) <= 1e-9);
            else CHECK(u[w] == 0.0);
        }
    }

    const std::vector<TokenId> single{2};
    const auto one = contrast(V{0.1, 0.2, 0.7}, V{0.3, 0.3, 0.4}, single);
    CHECK(one == V{0.0, 0.0, 1.0});

    // zeros in the premature row are floored, not divided by
    const auto floored = contrast(V{0.6, 0.4}, V{1.0, 0.0}, phi);
    for (double v : floored) CHECK(std::isfinite(v));
    CHECK(floored[1] > floored[0]);
}

TEST_CASE("JSD values and properties") {
    CHECK(std::abs(jsd(V{1.0, 0.0}, V{0.5, 0.5}) - jsd_by_kl({1.0, 0.0}, {0.5, 0.5})) <= 1e-6);
    CHECK(jsd(V{1.0, 0.0}, V{0.5, 0.5}) == doctest::Approx(0.2158).epsilon(1e-3));
    CHECK(jsd(V{1.0, 0.0}, V{0.0, 1.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        const auto p = random_distribution(rng, 1 + i % 12, i % 3 == 0);
        const auto q = random_distribution(rng, p.size(), i % 5 == 0);
        const double a = jsd(p, q), b = jsd(q, p);
        CHECK(a >= 0.0);
        CHECK(std::abs(a - b) <= 1e-12);
        CHECK(a <= std::log(2.0) + 1e-12);
        CHECK(jsd(p, p) <= 1e-12);
        CHECK(std::abs(a - oracle::jsd(p, q)) <= 1e-9);
    }
}

TEST_CASE("premature layer selection") {
    const V f{0.6, 0.3, 0.1};
    const std::vector<std::size_t> J{0, 1, 2};
    const auto same = select_premature(rows_of({f, f, f, f}), J);
    CHECK(same.layer == 2);
    for (double d : same.divergences) CHECK(d == 0.0);

    const auto tie = select_premature(rows_of({V{0.1, 0.3, 0.6}, f, V{0.1, 0.3, 0.6}, f}), J);
    CHECK(tie.layer == 2);
    const auto one = select_premature(rows_of({V{0.1, 0.3, 0.6}, f, V{0.3, 0.3, 0.4}, f}), J);
    CHECK(one.layer == 0);
    CHECK(one.divergences.size() == 3);
    CHECK(one.divergences[1] == 0.0);
}

TEST_CASE("argmax helpers") {
    CHECK(argmax(V{0.2, 0.5, 0.5}) == 1);
    // equal contrast falls back to the final distribution, then the lower id
    CHECK(contrastive_argmax(V{0.5, 0.5, 0.0}, V{0.2, 0.3, 0.5}) == 1);
    CHECK(contrastive_argmax(V{0.5, 0.5}, V{0.4, 0.4}) == 0);
}

TEST_CASE("nucleus sampling") {
    const V p{0.1, 0.5, 0.15, 0.25};
    for (double u : {0.0, 0.3, 0.999}) CHECK(nucleus_sample(p, 1e-9, u) == 1);
    // top 0.7 keeps {1, 3}; u splits 0.5 : 0.25
    CHECK(nucleus_sample(p, 0.7, 0.0) == 1);
    CHECK(nucleus_sample(p, 0.7, 0.6) == 1);
    CHECK(nucleus_sample(p, 0.7, 0.7) == 3);
    CHECK(nucleus_sample(V{0.5, 0.5}, 0.5, 0.9) == 0);

    const auto w = random_model(61);
    const std::vector<TokenId> prompt{0};
    DecodeConfig c;
    c.max_new_tokens = std::min<std::size_t>(5, w.config.max_seq_len - 1);
    const auto greedy = generate(w, prompt, nullptr, c).tokens;
    c.strategy = Strategy::Nucleus;
    c.nucleus_p = 1e-12;
    c.seed = 3;
    CHECK(generate(w, prompt, nullptr, c).tokens == greedy);
    c.nucleus_p = 0.95;
    const auto a = generate(w, prompt, nullptr, c).tokens;
    CHECK(generate(w, prompt, nullptr, c).tokens == a);
}

TEST_CASE("candidate layers") {
    DecodeConfig c;
    c.strategy = Strategy::Sneuron;
    CHECK(resolve_candidate_layers(c, 8) == std::vector<std::size_t>{4, 5, 6, 7});
    CHECK(resolve_candidate_layers(c, 3) == std::vector<std::size_t>{0, 1, 2});
    c.strategy = Strategy::DolaEarly;
    CHECK(resolve_candidate_layers(c, 8) == std::vector<std::size_t>{0, 2});
    CHECK(resolve_candidate_layers(c, 1) == std::vector<std::size_t>{0});
    c.candidate_layers = {3, 1, 3};
    CHECK(resolve_candidate_layers(c, 4) == std::vector<std::size_t>{1, 3});
    c.candidate_layers = {4};
    CHECK_THROWS_AS(resolve_candidate_layers(c, 4), Error);
    CHECK_THROWS_AS(strategy_from_string("beam"), Error);
    for (Strategy s : {Strategy::Greedy, Strategy::Nucleus, Strategy::DolaEarly, Strategy::Sneuron})
        CHECK(strategy_from_string(to_string(s)) == s);
}

TEST_CASE("generation errors and stop token") {
    const auto w = random_model(62);
    const std::vector<TokenId> prompt{0, 1 % static_cast<TokenId>(w.config.vocab_size)};
    DecodeConfig c;
    c.max_new_tokens = w.config.max_seq_len;
    try {
        generate(w, prompt, nullptr, c);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Capacity);
    }
    c.max_new_tokens = 3;
    c.alpha = 0.0;
    CHECK_THROWS_AS(generate(w, prompt, nullptr, c), Error);
    c.alpha = 0.1;
    const auto g = generate(w, prompt, nullptr, c);
    c.stop_token = g.tokens.front();
    const auto stopped = generate(w, prompt, nullptr, c);
    CHECK(stopped.tokens.size() == 1);
    CHECK(stopped.tokens.front() == g.tokens.front());
}

TEST_CASE("contrastive step records") {
    for (std::uint64_t seed = 70; seed < 80; ++seed) {
        const auto w = random_model(seed);
        std::mt19937_64 rng(seed);
        const auto prompt = testing_support::random_tokens(rng, w.config, 2);
        for (Strategy s : {Strategy::Sneuron, Strategy::DolaEarly}) {
            DecodeConfig c;
            c.strategy = s;
            c.max_new_tokens = 4;
            const auto g = generate(w, prompt, nullptr, c);
            const auto J = resolve_candidate_layers(c, w.config.n_layers);
            for (const auto& r : g.steps) {
                REQUIRE(r.premature_layer.has_value());
                CHECK(std::find(J.begin(), J.end(), *r.premature_layer) != J.end());
                CHECK(r.plausible[r.token]);
                CHECK(r.divergences.size() == J.size());
                CHECK(r.plausible_size() >= 1);
            }
            CHECK(generate(w, prompt, nullptr, c).tokens == g.tokens);
        }
    }
}

TEST_CASE("identity final layer reduces sneuron to greedy") {
    for (std::uint64_t seed = 80; seed < 90; ++seed) {
        auto w = random_model(seed);
        make_identity_layer(w, w.config.n_layers - 1);
        std::mt19937_64 rng(seed);
        const auto prompt = testing_support::random_tokens(rng, w.config, 2);
        DecodeConfig c;
        c.max_new_tokens = 4;
        const auto greedy = generate(w, prompt, nullptr, c).tokens;
        c.strategy = Strategy::Sneuron;
        c.candidate_layers = {w.config.n_layers - 1};
        CHECK(generate(w, prompt, nullptr, c).tokens == greedy);
    }
}
