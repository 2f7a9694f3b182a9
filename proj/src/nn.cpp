#include "relcap/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace relcap {

namespace {
Matrix fan_in_init(std::size_t rows, std::size_t cols, Rng& rng) {
    return Matrix::gaussian(rows, cols, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
}
}  // namespace

MlpParams::MlpParams(const std::string& name, std::size_t d_in, std::size_t d_hidden,
                     std::size_t d_out, Rng& rng, bool trainable)
    : w1(name + ".w1", fan_in_init(d_in, d_hidden, rng), trainable),
      b1(name + ".b1", Matrix(1, d_hidden), trainable),
      w2(name + ".w2", fan_in_init(d_hidden, d_out, rng), trainable),
      b2(name + ".b2", Matrix(1, d_out), trainable) {}

std::vector<Parameter*> MlpParams::parameters() { return {&w1, &b1, &w2, &b2}; }

LayerNormParams::LayerNormParams(const std::string& name, std::size_t dim, bool trainable)
    : gamma(name + ".gamma", Matrix(1, dim, 1.0), trainable),
      beta(name + ".beta", Matrix(1, dim, 0.0), trainable) {}

std::vector<Parameter*> LayerNormParams::parameters() { return {&gamma, &beta}; }

MhaParams::MhaParams(const std::string& name, std::size_t q_dim, std::size_t kv_dim,
                     std::size_t out_dim, std::size_t n_heads, std::size_t head_dim, Rng& rng,
                     bool trainable)
    : w_q(name + ".w_q", fan_in_init(q_dim, n_heads * head_dim, rng), trainable),
      w_k(name + ".w_k", fan_in_init(kv_dim, n_heads * head_dim, rng), trainable),
      w_v(name + ".w_v", fan_in_init(kv_dim, n_heads * head_dim, rng), trainable),
      w_o(name + ".w_o", fan_in_init(n_heads * head_dim, out_dim, rng), trainable),
      heads(n_heads) {}

std::vector<Parameter*> MhaParams::parameters() { return {&w_q, &w_k, &w_v, &w_o}; }

Var mlp_forward(Tape& t, Var x, MlpParams& p) {
    Var h = t.add_row_broadcast(t.matmul(x, t.param(p.w1)), t.param(p.b1));
    h = t.gelu(h);
    return t.add_row_broadcast(t.matmul(h, t.param(p.w2)), t.param(p.b2));
}

Var layer_norm(Tape& t, Var x, LayerNormParams& p, double eps) {
    return t.layer_norm(x, t.param(p.gamma), t.param(p.beta), eps);
}

Var multi_head_attention(Tape& t, Var q_src, Var kv_src, MhaParams& p,
                         std::optional<Var> mask) {
    const std::size_t inner = p.w_q.value.cols();
    if (p.heads == 0 || inner % p.heads != 0)
        throw std::invalid_argument("multi_head_attention: heads " + std::to_string(p.heads) +
                                    " does not divide projection width " +
                                    std::to_string(inner));
    const std::size_t head_dim = inner / p.heads;
    Var q = t.matmul(q_src, t.param(p.w_q));
    Var k = t.matmul(kv_src, t.param(p.w_k));
    Var v = t.matmul(kv_src, t.param(p.w_v));
    std::vector<Var> head_outs;
    head_outs.reserve(p.heads);
    for (std::size_t h = 0; h < p.heads; ++h) {
        Var qh = t.slice_cols(q, h * head_dim, head_dim);
        Var kh = t.slice_cols(k, h * head_dim, head_dim);
        Var vh = t.slice_cols(v, h * head_dim, head_dim);
        Var scores = t.scale(t.matmul(qh, t.transpose(kh)),
                             1.0 / std::sqrt(static_cast<double>(head_dim)));
        if (mask) scores = t.add(scores, *mask);
        Var attn = t.softmax_rows(scores);
        head_outs.push_back(t.matmul(attn, vh));
    }
    Var concat = p.heads == 1 ? head_outs[0] : t.concat_cols(head_outs);
    return t.matmul(concat, t.param(p.w_o));
}

}  // namespace relcap
