#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relcap/autodiff.hpp"

namespace relcap {

constexpr double kLayerNormEps = 1e-5;

// Two linear layers around a GELU. Biases included.
struct MlpParams {
    Parameter w1, b1, w2, b2;

    MlpParams() = default;
    MlpParams(const std::string& name, std::size_t d_in, std::size_t d_hidden,
              std::size_t d_out, Rng& rng, bool trainable = true);

    std::vector<Parameter*> parameters();
};

struct LayerNormParams {
    Parameter gamma, beta;

    LayerNormParams() = default;
    LayerNormParams(const std::string& name, std::size_t dim, bool trainable = true);

    std::vector<Parameter*> parameters();
};

// Projections for scaled dot-product attention. inner = heads * head_dim by
// construction; q_dim and kv_dim may differ (cross attention).
struct MhaParams {
    Parameter w_q, w_k, w_v, w_o;
    std::size_t heads = 1;

    MhaParams() = default;
    MhaParams(const std::string& name, std::size_t q_dim, std::size_t kv_dim,
              std::size_t out_dim, std::size_t n_heads, std::size_t head_dim, Rng& rng,
              bool trainable = true);

    std::vector<Parameter*> parameters();
};

// linear -> GELU -> linear, row-wise.
Var mlp_forward(Tape& t, Var x, MlpParams& p);

Var layer_norm(Tape& t, Var x, LayerNormParams& p, double eps = kLayerNormEps);

// Per-head scaled dot-product attention over column blocks, heads concatenated,
// output projection applied. `mask` (q_rows x kv_rows), when present, is added
// to every head's scores before the softmax. Throws if heads does not divide
// the projection width.
Var multi_head_attention(Tape& t, Var q_src, Var kv_src, MhaParams& p,
                         std::optional<Var> mask = std::nullopt);

}  // namespace relcap
