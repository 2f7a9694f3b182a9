#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relcap/nn.hpp"

namespace relcap {

struct DecoderConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 128;
    std::size_t n_layers = 2;
    std::size_t self_heads = 4;
    std::size_t cross_heads = 12;
    std::size_t cross_head_dim = 16;
    std::size_t mlp_hidden = 0;  // 0 means 4 * d_model
    std::size_t prompt_dim = 64;  // column width of the visual prompt R
    std::size_t max_seq_len = 160;
    bool cross_every_layer = true;  // false: cross-attention in the last layer only
};

struct DecoderLayer {
    LayerNormParams ln_self, ln_cross, ln_mlp;  // frozen
    MhaParams self_attn;                        // frozen
    MhaParams cross_attn;                       // trainable
    MlpParams mlp;                              // frozen
    bool has_cross = true;
};

// Toy causal decoder: frozen seeded-random backbone (embeddings, pre-LN
// self-attention + MLP blocks, output head) with a trainable cross-attention
// injection per layer reading the visual prompt.
struct DecoderParams {
    DecoderConfig cfg;
    Parameter tok_emb;  // V x d, frozen
    Parameter pos_emb;  // max_seq_len x d, frozen
    std::vector<DecoderLayer> layers;
    LayerNormParams ln_final;  // frozen
    Parameter head;            // d x V, frozen

    DecoderParams() = default;
    DecoderParams(const DecoderConfig& c, std::uint64_t seed);

    std::vector<Parameter*> trainable_parameters();  // cross-attention only
    std::vector<Parameter*> frozen_parameters();
    std::uint64_t frozen_checksum();
};

// Causal self-attention (strictly lower-triangular visibility) with additive
// cross-attention injection from R at every cross-equipped layer. Returns
// len x V logits. Throws on empty input, out-of-range ids, or length beyond
// max_seq_len.
Var decoder_forward(Tape& t, const std::vector<int>& tokens, Var r, DecoderParams& dp);

struct BeamResult {
    std::vector<int> ids;   // generated ids, terminal EOS stripped
    double log_prob = 0.0;  // cumulative log-probability, EOS step included
    double score = 0.0;     // log_prob / generated length
    bool truncated = false; // best beam never produced EOS within max_len
};

// Length-normalized beam search; finished beams stay in the pool; score ties
// break to the lexicographically smallest token path. beam=1 reduces to
// greedy argmax decoding.
BeamResult beam_search(const std::vector<int>& prompt_ids, const Matrix& r, DecoderParams& dp,
                       std::size_t beam, std::size_t max_len);

BeamResult greedy_decode(const std::vector<int>& prompt_ids, const Matrix& r, DecoderParams& dp,
                         std::size_t max_len);

}  // namespace relcap
