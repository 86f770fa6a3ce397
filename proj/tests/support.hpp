#pragma once

// Fixtures and helpers shared by the test binaries.

#include "sneuron/factory.hpp"
#include "sneuron/model.hpp"

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

namespace testing_support {

using namespace sneuron;

inline ModelConfig random_config(std::mt19937_64& rng) {
    auto pick = [&](int lo, int hi) { return static_cast<std::size_t>(std::uniform_int_distribution<int>(lo, hi)(rng)); };
    ModelConfig c;
    c.n_layers = pick(1, 4);
    c.n_heads = pick(1, 2);
    c.d_model = c.n_heads * pick(2, 8);
    c.d_ffn = pick(1, 16);
    c.vocab_size = pick(2, 24);
    c.max_seq_len = pick(6, 12);
    c.activation_kind = pick(0, 1) ? Activation::Relu : Activation::SiluGlu;
    return c;
}

inline ModelWeights random_model(std::uint64_t seed, double scale = 2.0) {
    std::mt19937_64 rng(seed);
    return synth_random(random_config(rng), seed, scale);
}

inline std::vector<TokenId> random_tokens(std::mt19937_64& rng, const ModelConfig& c, std::size_t len) {
    std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(c.vocab_size - 1));
    std::vector<TokenId> t(len);
    for (auto& v : t) v = tok(rng);
    return t;
}

inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n, bool sparse = false) {
    std::exponential_distribution<double> e(1.0);
    std::bernoulli_distribution zero(sparse ? 0.3 : 0.0);
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& v : p) s += (v = zero(rng) ? 0.0 : e(rng));
    if (s == 0.0) {
        p[0] = 1.0;
        s = 1.0;
    }
    for (auto& v : p) v /= s;
    return p;
}

template <typename T>
bool bit_equal(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

inline bool bit_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("sneuron_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the CLI with `args` (already shell-quoted where needed).
inline RunResult run_cli(const std::string& cli, const std::string& args, const TempDir& dir) {
    const std::string out = dir / "_stdout.txt";
    const std::string err = dir / "_stderr.txt";
    const std::string cmd = "'" + cli + "' " + args + " >'" + out + "' 2>'" + err + "'";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

} // namespace testing_support
