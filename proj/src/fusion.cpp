#include "relcap/fusion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace relcap {

namespace {

Matrix fan_in_init(std::size_t rows, std::size_t cols, Rng& rng) {
    return Matrix::gaussian(rows, cols, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
}

double row_norm(const Matrix& m, std::size_t r) {
    double s = 0.0;
    const double* p = m.row_ptr(r);
    for (std::size_t j = 0; j < m.cols(); ++j) s += p[j] * p[j];
    return std::sqrt(s);
}

double row_dot(const Matrix& a, std::size_t ra, const Matrix& b, std::size_t rb) {
    double s = 0.0;
    const double* pa = a.row_ptr(ra);
    const double* pb = b.row_ptr(rb);
    for (std::size_t j = 0; j < a.cols(); ++j) s += pa[j] * pb[j];
    return s;
}

}  // namespace

FusionWeights::FusionWeights(const std::string& name, std::size_t d_v, std::size_t d_e,
                             std::size_t d_h, std::size_t heads, std::size_t head_dim,
                             std::size_t mlp_hidden, Rng& rng, bool trainable)
    : img_proj(name + ".img_proj", fan_in_init(d_v, d_h, rng), trainable),
      cap_proj(name + ".cap_proj", fan_in_init(d_e, d_h, rng), trainable),
      tup_proj(name + ".tup_proj", fan_in_init(d_e, d_h, rng), trainable),
      attn(name + ".attn", d_h, d_h, d_h, heads, head_dim, rng, trainable),
      mlp(name + ".mlp", d_h, mlp_hidden, d_h, rng, trainable),
      concat_mlp(name + ".concat_mlp", 2 * d_h, mlp_hidden, d_h, rng, trainable) {}

std::vector<Parameter*> FusionWeights::parameters(FusionMode mode, bool with_captions,
                                                  bool with_tuples) {
    std::vector<Parameter*> out = {&img_proj};
    if (with_captions) out.push_back(&cap_proj);
    if (with_tuples) out.push_back(&tup_proj);
    switch (mode) {
        case FusionMode::attn_mlp:
            for (auto* p : attn.parameters()) out.push_back(p);
            for (auto* p : mlp.parameters()) out.push_back(p);
            break;
        case FusionMode::sum:
            break;
        case FusionMode::concat_mlp:
            for (auto* p : concat_mlp.parameters()) out.push_back(p);
            break;
        case FusionMode::attn_only:
            for (auto* p : attn.parameters()) out.push_back(p);
            break;
    }
    return out;
}

Var project_texts(Tape& t, const Matrix& raw, Parameter& proj) {
    return t.matmul(t.leaf(raw), t.param(proj));
}

std::vector<std::size_t> cosine_picks(const Matrix& slots, const Matrix& candidates) {
    if (slots.cols() != candidates.cols()) {
        throw std::invalid_argument("cosine_picks: dim mismatch " + slots.shape_str() + " vs " +
                                    candidates.shape_str());
    }
    std::vector<std::size_t> picks(slots.rows(), 0);
    for (std::size_t k = 0; k < slots.rows(); ++k) {
        const double ns = row_norm(slots, k);
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < candidates.rows(); ++i) {
            const double nc = row_norm(candidates, i);
            double score;
            if (nc == 0.0) {
                score = -std::numeric_limits<double>::infinity();
            } else if (ns == 0.0) {
                score = 0.0;
            } else {
                score = row_dot(slots, k, candidates, i) / (ns * nc);
            }
            if (score > best) {
                best = score;
                best_i = i;
            }
        }
        picks[k] = best_i;
    }
    return picks;
}

RelationFeatures select_relevant(Tape& t, Var slots, std::optional<Var> c,
                                 std::optional<Var> tt) {
    const Matrix& s_val = t.value(slots);
    RelationFeatures out;
    std::vector<Var> blocks = {slots};

    if (c.has_value()) {
        const Matrix& c_val = t.value(*c);
        if (c_val.rows() == 0) {
            throw std::invalid_argument("select_relevant: empty caption features");
        }
        out.picks_c = cosine_picks(s_val, c_val);
        blocks.push_back(t.gather_rows(*c, out.picks_c));
    }
    if (tt.has_value()) {
        const Matrix& t_val = t.value(*tt);
        if (t_val.rows() == 0) {
            throw std::invalid_argument("select_relevant: empty tuple features");
        }
        out.picks_t = cosine_picks(s_val, t_val);
        blocks.push_back(t.gather_rows(*tt, out.picks_t));
    }
    out.p = blocks.size() == 1 ? slots : t.concat_rows(blocks);
    return out;
}

Var fuse(Tape& t, Var patches, Var p, FusionWeights& w, FusionMode mode, bool add_residual) {
    Var i_proj = t.matmul(patches, t.param(w.img_proj));  // N x D_h
    Var out;
    switch (mode) {
        case FusionMode::attn_mlp:
            out = mlp_forward(t, multi_head_attention(t, i_proj, p, w.attn), w.mlp);
            break;
        case FusionMode::sum:
            out = t.add_row_broadcast(i_proj, t.mean_rows(p));
            break;
        case FusionMode::concat_mlp: {
            const std::size_t n = t.value(patches).rows();
            const std::size_t d_h = w.img_proj.value.cols();
            Var mean_p = t.mean_rows(p);
            Var tiled = t.add_row_broadcast(t.leaf(Matrix::zeros(n, d_h)), mean_p);
            out = mlp_forward(t, t.concat_cols({i_proj, tiled}), w.concat_mlp);
            break;
        }
        case FusionMode::attn_only:
            out = multi_head_attention(t, i_proj, p, w.attn);
            break;
    }
    if (add_residual) out = t.add(out, i_proj);
    return out;
}

}  // namespace relcap
