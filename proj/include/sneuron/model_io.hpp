#pragma once

// Weight container ("SNTM" v1), all integers and floats little-endian:
//
//   char[4]  magic "SNTM"
//   u32      version = 1
//   u64      n, then n bytes of UTF-8 JSON config
//            {activation_kind, d_ffn, d_model, max_seq_len, n_heads, n_layers, vocab_size}
//   repeated for each tensor in tensor_names(config) order:
//     u64 name length, name bytes, u64 element count, count x f32 (row-major)
//
// Tensor order: token_embedding, position_embedding, then for each layer j
// layers.j.{attn_q, attn_k, attn_v, attn_o, attn_norm, ffn_norm, ffn_gate,
// ffn_gate_bias, ffn_up, ffn_down}, then final_norm, vocab_head.

#include "sneuron/model.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sneuron {

inline constexpr char kModelMagic[4] = {'S', 'N', 'T', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

std::vector<std::string> tensor_names(const ModelConfig& config);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(std::string_view text);

std::string serialize_model(const ModelWeights& weights);
// Throws Format error naming the offending tensor on truncation or shape mismatch.
ModelWeights deserialize_model(std::string_view bytes);

void save_model(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights load_model(const std::filesystem::path& path);

} // namespace sneuron
