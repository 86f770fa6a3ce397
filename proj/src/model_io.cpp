#include "sneuron/model_io.hpp"

#include "sneuron/error.hpp"
#include "sneuron/io_util.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>

namespace sneuron {

namespace {

using json = nlohmann::json;

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
}

void put_f32(std::string& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }

// Visits every tensor in container order.
template <typename W, typename F>
void for_each_tensor(W& w, F&& f) {
    f("token_embedding", w.token_embedding.data);
    f("position_embedding", w.position_embedding.data);
    for (std::size_t j = 0; j < w.layers.size(); ++j) {
        auto& l = w.layers[j];
        const std::string p = "layers." + std::to_string(j) + ".";
        f(p + "attn_q", l.attn_q.data);
        f(p + "attn_k", l.attn_k.data);
        f(p + "attn_v", l.attn_v.data);
        f(p + "attn_o", l.attn_o.data);
        f(p + "attn_norm", l.attn_norm);
        f(p + "ffn_norm", l.ffn_norm);
        f(p + "ffn_gate", l.ffn_gate.data);
        f(p + "ffn_gate_bias", l.ffn_gate_bias);
        f(p + "ffn_up", l.ffn_up.data);
        f(p + "ffn_down", l.ffn_down.data);
    }
    f("final_norm", w.final_norm);
    f("vocab_head", w.vocab_head.data);
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    bool has(std::size_t n) const { return bytes_.size() - pos_ >= n; }

    template <typename T>
    T get_le(const std::string& what) {
        if (!has(sizeof(T))) fail(ErrorKind::Format, "model file truncated while reading " + what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }

    std::string_view take(std::size_t n, const std::string& what) {
        if (!has(n)) fail(ErrorKind::Format, "model file truncated while reading " + what);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::string> tensor_names(const ModelConfig& config) {
    auto w = ModelWeights{};
    w.layers.resize(config.n_layers);
    std::vector<std::string> names;
    for_each_tensor(w, [&](const std::string& name, auto&) { names.push_back(name); });
    return names;
}

std::string config_to_json(const ModelConfig& c) {
    json j = {{"n_layers", c.n_layers},     {"d_model", c.d_model},       {"n_heads", c.n_heads},
              {"d_ffn", c.d_ffn},           {"vocab_size", c.vocab_size}, {"max_seq_len", c.max_seq_len},
              {"activation_kind", to_string(c.activation_kind)}};
    return j.dump();
}

ModelConfig config_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, std::string("config record is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::Format, "config record must be a JSON object");
    auto field = [&](const char* name) -> std::size_t {
        if (!j.contains(name) || !j[name].is_number_integer() || j[name].get<long long>() < 0) {
            fail(ErrorKind::Format, std::string("config field '") + name + "' missing or not a non-negative integer");
        }
        return j[name].get<std::size_t>();
    };
    ModelConfig c;
    c.n_layers = field("n_layers");
    c.d_model = field("d_model");
    c.n_heads = field("n_heads");
    c.d_ffn = field("d_ffn");
    c.vocab_size = field("vocab_size");
    c.max_seq_len = field("max_seq_len");
    if (!j.contains("activation_kind") || !j["activation_kind"].is_string()) {
        fail(ErrorKind::Format, "config field 'activation_kind' missing or not a string");
    }
    c.activation_kind = activation_from_string(j["activation_kind"].get<std::string>());
    return c;
}

std::string serialize_model(const ModelWeights& weights) {
    weights.validate();
    std::string out(kModelMagic, sizeof(kModelMagic));
    put_le<std::uint32_t>(out, kModelVersion);
    const std::string cfg = config_to_json(weights.config);
    put_le<std::uint64_t>(out, cfg.size());
    out += cfg;
    for_each_tensor(weights, [&](const std::string& name, const std::vector<float>& data) {
        put_le<std::uint64_t>(out, name.size());
        out += name;
        put_le<std::uint64_t>(out, data.size());
        for (float v : data) put_f32(out, v);
    });
    return out;
}

ModelWeights deserialize_model(std::string_view bytes) {
    Reader r(bytes);
    auto magic = r.take(4, "magic");
    if (std::memcmp(magic.data(), kModelMagic, 4) != 0) fail(ErrorKind::Format, "bad magic: not an SNTM model file");
    const auto version = r.get_le<std::uint32_t>("version");
    if (version != kModelVersion) {
        fail(ErrorKind::Format, "unsupported model file version " + std::to_string(version));
    }
    const auto cfg_len = r.get_le<std::uint64_t>("config length");
    ModelConfig config = config_from_json(r.take(cfg_len, "config record"));
    try {
        config.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Format, std::string("invalid config record: ") + e.what());
    }

    ModelWeights w = ModelWeights::zeros(config);
    for_each_tensor(w, [&](const std::string& expected, std::vector<float>& data) {
        const auto name_len = r.get_le<std::uint64_t>("name of tensor '" + expected + "'");
        const auto name = r.take(name_len, "name of tensor '" + expected + "'");
        if (name != expected) {
            fail(ErrorKind::Format, "expected tensor '" + expected + "', found '" + std::string(name) + "'");
        }
        const auto count = r.get_le<std::uint64_t>("element count of tensor '" + expected + "'");
        if (count != data.size()) {
            fail(ErrorKind::Format, "tensor '" + expected + "' has " + std::to_string(count) + " elements, expected " +
                                        std::to_string(data.size()));
        }
        const auto raw = r.take(count * 4, "data of tensor '" + expected + "'");
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t u = 0;
            for (std::size_t b = 0; b < 4; ++b) {
                u |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[i * 4 + b])) << (8 * b);
            }
            data[i] = std::bit_cast<float>(u);
        }
    });
    if (!r.done()) fail(ErrorKind::Format, "trailing bytes after last tensor");
    w.validate();
    return w;
}

void save_model(const ModelWeights& weights, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_model(weights));
}

ModelWeights load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

} // namespace sneuron
