#include "relcap/slots.hpp"

#include <cmath>
#include <stdexcept>

namespace relcap {

namespace {

Matrix fan_in_init(std::size_t rows, std::size_t cols, Rng& rng) {
    return Matrix::gaussian(rows, cols, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
}

}  // namespace

SlotAttentionWeights::SlotAttentionWeights(const std::string& name, std::size_t d_v,
                                           std::size_t d_h, std::size_t mlp_hidden, Rng& rng,
                                           bool trainable)
    : w_q(name + ".w_q", fan_in_init(d_h, d_h, rng), trainable),
      w_k(name + ".w_k", fan_in_init(d_v, d_h, rng), trainable),
      w_v(name + ".w_v", fan_in_init(d_v, d_h, rng), trainable),
      ln(name + ".ln", d_h, trainable),
      mlp(name + ".mlp", d_h, mlp_hidden, d_h, rng, trainable),
      pooled_proj(name + ".pooled_proj", fan_in_init(d_v, d_h, rng), trainable) {}

std::vector<Parameter*> SlotAttentionWeights::parameters() {
    std::vector<Parameter*> out = {&w_q, &w_k, &w_v};
    for (auto* p : ln.parameters()) out.push_back(p);
    for (auto* p : mlp.parameters()) out.push_back(p);
    out.push_back(&pooled_proj);
    return out;
}

Parameter init_slots(std::size_t k, std::size_t d_h, std::uint64_t seed) {
    if (k < 1 || d_h < 1) {
        throw std::invalid_argument("init_slots: k and d_h must be positive");
    }
    Rng rng(derive_seed(seed, "slots-s0"));
    return Parameter("slots.s0",
                     Matrix::gaussian(k, d_h, rng, 1.0 / std::sqrt(static_cast<double>(d_h))),
                     true);
}

SlotState slot_attention_step(Tape& t, const SlotState& prev, Var patches,
                              SlotAttentionWeights& w, SlotAttentionTrace* trace) {
    if (prev.iteration >= 2) {
        throw std::logic_error("slot_attention_step: refinement budget of 2 steps exhausted");
    }
    const double d_h = static_cast<double>(w.w_q.value.cols());

    Var q = t.matmul(prev.slots, t.param(w.w_q));  // K x D_h
    Var k = t.matmul(patches, t.param(w.w_k));     // N x D_h
    Var v = t.matmul(patches, t.param(w.w_v));     // N x D_h

    Var m = t.scale(t.matmul(k, t.transpose(q)), 1.0 / std::sqrt(d_h));  // N x K
    Var map = t.softmax_rows(m);   // competition over slots
    Var a = t.col_normalize(map);  // weighted mean over patches

    Var u = t.add(t.matmul(t.transpose(a), v), prev.slots);  // K x D_h
    Var updated = t.add(mlp_forward(t, layer_norm(t, u, w.ln), w.mlp), prev.slots);

    if (trace != nullptr) {
        trace->m = t.value(m);
        trace->map = t.value(map);
        trace->a = t.value(a);
    }
    return {updated, prev.iteration + 1};
}

SlotState object_aware_forward(Tape& t, Var patches, Var pooled, Var s0,
                               SlotAttentionWeights& w,
                               std::vector<SlotAttentionTrace>* traces) {
    SlotState state{s0, 0};
    for (int i = 0; i < 2; ++i) {
        SlotAttentionTrace tr;
        state = slot_attention_step(t, state, patches, w, &tr);
        if (traces != nullptr) traces->push_back(std::move(tr));
    }
    Var pooled_h = t.matmul(pooled, t.param(w.pooled_proj));  // 1 x D_h
    return {t.add_row_broadcast(state.slots, pooled_h), state.iteration};
}

}  // namespace relcap
