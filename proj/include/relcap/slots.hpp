#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relcap/nn.hpp"

namespace relcap {

// K slot vectors after `iteration` refinement steps.
struct SlotState {
    Var slots;          // K x D_h on the tape
    int iteration = 0;  // 0, 1, or 2
};

// Intermediate attention matrices of one refinement step, snapshotted for
// inspection: raw scores, the slot-axis softmax, and its column-normalized
// form. Every map row sums to 1; every a column sums to 1.
struct SlotAttentionTrace {
    Matrix m;    // N x K
    Matrix map;  // N x K
    Matrix a;    // N x K
};

// Projections and the update net, shared by both refinement iterations.
struct SlotAttentionWeights {
    Parameter w_q;          // D_h x D_h, applied to slots
    Parameter w_k;          // D_v x D_h, applied to patches
    Parameter w_v;          // D_v x D_h, applied to patches
    LayerNormParams ln;     // D_h
    MlpParams mlp;          // D_h -> hidden -> D_h
    Parameter pooled_proj;  // D_v x D_h, applied to the pooled image feature

    SlotAttentionWeights() = default;
    SlotAttentionWeights(const std::string& name, std::size_t d_v, std::size_t d_h,
                         std::size_t mlp_hidden, Rng& rng, bool trainable = true);

    std::vector<Parameter*> parameters();
};

// Trainable K x D_h slot seed, Gaussian with std 1/sqrt(D_h), deterministic
// per seed. Throws when k or d_h is zero.
Parameter init_slots(std::size_t k, std::size_t d_h, std::uint64_t seed);

// One refinement step: scores = (patches W_k)(slots W_q)^T / sqrt(D_h),
// softmax over the slot axis, column normalization over patches, then the
// residual MLP update slots' = MLP(LN(A^T v + slots)) + slots.
SlotState slot_attention_step(Tape& t, const SlotState& prev, Var patches,
                              SlotAttentionWeights& w, SlotAttentionTrace* trace = nullptr);

// Exactly two shared-weight refinement steps, then the pooled image feature,
// projected D_v -> D_h, is added to every slot row.
SlotState object_aware_forward(Tape& t, Var patches, Var pooled, Var s0,
                               SlotAttentionWeights& w,
                               std::vector<SlotAttentionTrace>* traces = nullptr);

}  // namespace relcap
