#include "relcap/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "relcap/vocab.hpp"

namespace relcap {

namespace {

Matrix fan_in_init(std::size_t rows, std::size_t cols, Rng& rng) {
    return Matrix::gaussian(rows, cols, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
}

Matrix causal_mask(std::size_t len) {
    Matrix m(len, len, 0.0);
    for (std::size_t r = 0; r < len; ++r) {
        for (std::size_t c = r + 1; c < len; ++c) m.at(r, c) = -1e30;
    }
    return m;
}

}  // namespace

DecoderParams::DecoderParams(const DecoderConfig& c, std::uint64_t seed) : cfg(c) {
    if (cfg.vocab_size == 0) {
        throw std::invalid_argument("decoder: vocab_size must be positive");
    }
    if (cfg.mlp_hidden == 0) cfg.mlp_hidden = 4 * cfg.d_model;
    if (cfg.d_model % cfg.self_heads != 0) {
        throw std::invalid_argument("decoder: self_heads " + std::to_string(cfg.self_heads) +
                                    " does not divide d_model " + std::to_string(cfg.d_model));
    }

    Rng rng(derive_seed(seed, "decoder"));
    tok_emb = Parameter("decoder.tok_emb",
                        Matrix::gaussian(cfg.vocab_size, cfg.d_model, rng, 1.0), false);
    pos_emb = Parameter("decoder.pos_emb",
                        Matrix::gaussian(cfg.max_seq_len, cfg.d_model, rng, 1.0), false);

    layers.reserve(cfg.n_layers);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string name = "decoder.layer" + std::to_string(l);
        DecoderLayer layer;
        layer.has_cross = cfg.cross_every_layer || l + 1 == cfg.n_layers;
        layer.ln_self = LayerNormParams(name + ".ln_self", cfg.d_model, false);
        layer.ln_cross = LayerNormParams(name + ".ln_cross", cfg.d_model, false);
        layer.ln_mlp = LayerNormParams(name + ".ln_mlp", cfg.d_model, false);
        layer.self_attn = MhaParams(name + ".self_attn", cfg.d_model, cfg.d_model, cfg.d_model,
                                    cfg.self_heads, cfg.d_model / cfg.self_heads, rng, false);
        layer.cross_attn = MhaParams(name + ".cross_attn", cfg.d_model, cfg.prompt_dim,
                                     cfg.d_model, cfg.cross_heads, cfg.cross_head_dim, rng,
                                     layer.has_cross);
        // Start the injection close to the frozen backbone's behavior.
        layer.cross_attn.w_o.value.scale_in_place(0.1);
        layer.mlp = MlpParams(name + ".mlp", cfg.d_model, cfg.mlp_hidden, cfg.d_model, rng,
                              false);
        layers.push_back(std::move(layer));
    }
    ln_final = LayerNormParams("decoder.ln_final", cfg.d_model, false);
    head = Parameter("decoder.head", fan_in_init(cfg.d_model, cfg.vocab_size, rng), false);
}

namespace {

std::vector<Parameter*> all_parameters(DecoderParams& dp) {
    std::vector<Parameter*> out = {&dp.tok_emb, &dp.pos_emb};
    for (DecoderLayer& layer : dp.layers) {
        for (auto* p : layer.ln_self.parameters()) out.push_back(p);
        for (auto* p : layer.ln_cross.parameters()) out.push_back(p);
        for (auto* p : layer.ln_mlp.parameters()) out.push_back(p);
        for (auto* p : layer.self_attn.parameters()) out.push_back(p);
        for (auto* p : layer.cross_attn.parameters()) out.push_back(p);
        for (auto* p : layer.mlp.parameters()) out.push_back(p);
    }
    for (auto* p : dp.ln_final.parameters()) out.push_back(p);
    out.push_back(&dp.head);
    return out;
}

}  // namespace

std::vector<Parameter*> DecoderParams::trainable_parameters() {
    std::vector<Parameter*> out;
    for (Parameter* p : all_parameters(*this)) {
        if (p->trainable) out.push_back(p);
    }
    return out;
}

std::vector<Parameter*> DecoderParams::frozen_parameters() {
    std::vector<Parameter*> out;
    for (Parameter* p : all_parameters(*this)) {
        if (!p->trainable) out.push_back(p);
    }
    return out;
}

std::uint64_t DecoderParams::frozen_checksum() {
    std::uint64_t h = kFnvOffset;
    for (Parameter* p : frozen_parameters()) {
        h = fnv1a(p->name, h);
        h = fnv1a_bytes(p->value.data(), p->value.size() * sizeof(double), h);
    }
    return h;
}

Var decoder_forward(Tape& t, const std::vector<int>& tokens, Var r, DecoderParams& dp) {
    const std::size_t len = tokens.size();
    if (len == 0) {
        throw std::invalid_argument("decoder_forward: empty token sequence");
    }
    if (len > dp.cfg.max_seq_len) {
        throw std::invalid_argument("decoder_forward: length " + std::to_string(len) +
                                    " exceeds max_seq_len " +
                                    std::to_string(dp.cfg.max_seq_len));
    }
    std::vector<std::size_t> idx(len);
    for (std::size_t i = 0; i < len; ++i) {
        if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= dp.cfg.vocab_size) {
            throw std::invalid_argument("decoder_forward: token id " +
                                        std::to_string(tokens[i]) + " out of range");
        }
        idx[i] = static_cast<std::size_t>(tokens[i]);
    }

    Var h = t.add(t.gather_rows(t.param(dp.tok_emb), idx),
                  t.slice_rows(t.param(dp.pos_emb), 0, len));
    Var mask = t.leaf(causal_mask(len));

    for (DecoderLayer& layer : dp.layers) {
        Var x = layer_norm(t, h, layer.ln_self);
        h = t.add(h, multi_head_attention(t, x, x, layer.self_attn, mask));
        if (layer.has_cross) {
            Var q = layer_norm(t, h, layer.ln_cross);
            h = t.add(h, multi_head_attention(t, q, r, layer.cross_attn));
        }
        h = t.add(h, mlp_forward(t, layer_norm(t, h, layer.ln_mlp), layer.mlp));
    }
    return t.matmul(layer_norm(t, h, dp.ln_final), t.param(dp.head));
}

namespace {

// Log-softmax over the final position's logits, forward only.
std::vector<double> last_log_probs(const std::vector<int>& ctx, const Matrix& r,
                                   DecoderParams& dp) {
    Tape t;
    Var logits = decoder_forward(t, ctx, t.leaf(r), dp);
    const Matrix& lm = t.value(logits);
    const std::size_t last = lm.rows() - 1;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < lm.cols(); ++j) mx = std::max(mx, lm.at(last, j));
    double z = 0.0;
    for (std::size_t j = 0; j < lm.cols(); ++j) z += std::exp(lm.at(last, j) - mx);
    const double log_z = mx + std::log(z);
    std::vector<double> out(lm.cols());
    for (std::size_t j = 0; j < lm.cols(); ++j) out[j] = lm.at(last, j) - log_z;
    return out;
}

struct Beam {
    std::vector<int> path;  // generated ids, EOS kept once finished
    double logp = 0.0;
    bool done = false;
};

double beam_score(const Beam& b) {
    return b.logp / static_cast<double>(b.path.size());
}

BeamResult to_result(const Beam& b) {
    BeamResult res;
    res.ids = b.path;
    if (b.done && !res.ids.empty() && res.ids.back() == kEosId) res.ids.pop_back();
    res.log_prob = b.logp;
    res.score = beam_score(b);
    res.truncated = !b.done;
    return res;
}

}  // namespace

BeamResult beam_search(const std::vector<int>& prompt_ids, const Matrix& r, DecoderParams& dp,
                       std::size_t beam, std::size_t max_len) {
    if (beam < 1) throw std::invalid_argument("beam_search: beam must be at least 1");
    if (max_len < 1) throw std::invalid_argument("beam_search: max_len must be at least 1");

    std::vector<Beam> beams = {Beam{}};
    for (std::size_t step = 0; step < max_len; ++step) {
        bool any_active = false;
        std::vector<Beam> cands;
        for (const Beam& b : beams) {
            if (b.done) {
                cands.push_back(b);
                continue;
            }
            any_active = true;
            std::vector<int> ctx = prompt_ids;
            ctx.insert(ctx.end(), b.path.begin(), b.path.end());
            const std::vector<double> lp = last_log_probs(ctx, r, dp);
            for (int v = 0; v < static_cast<int>(lp.size()); ++v) {
                if (v == kBosId || v == kPadId) continue;
                Beam nb = b;
                nb.path.push_back(v);
                nb.logp += lp[static_cast<std::size_t>(v)];
                nb.done = v == kEosId;
                cands.push_back(std::move(nb));
            }
        }
        if (!any_active) break;
        std::sort(cands.begin(), cands.end(), [](const Beam& a, const Beam& b) {
            const double sa = beam_score(a);
            const double sb = beam_score(b);
            if (sa != sb) return sa > sb;
            return a.path < b.path;
        });
        if (cands.size() > beam) cands.resize(beam);
        beams = std::move(cands);
    }
    return to_result(beams.front());
}

BeamResult greedy_decode(const std::vector<int>& prompt_ids, const Matrix& r, DecoderParams& dp,
                         std::size_t max_len) {
    if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be at least 1");

    Beam b;
    std::vector<int> ctx = prompt_ids;
    for (std::size_t step = 0; step < max_len && !b.done; ++step) {
        const std::vector<double> lp = last_log_probs(ctx, r, dp);
        int best = -1;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (int v = 0; v < static_cast<int>(lp.size()); ++v) {
            if (v == kBosId || v == kPadId) continue;
            if (lp[static_cast<std::size_t>(v)] > best_lp) {
                best_lp = lp[static_cast<std::size_t>(v)];
                best = v;
            }
        }
        b.path.push_back(best);
        b.logp += best_lp;
        b.done = best == kEosId;
        ctx.push_back(best);
    }
    return to_result(b);
}

}  // namespace relcap
