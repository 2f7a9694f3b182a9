#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "relcap/nn.hpp"

namespace relcap {

// How the fusion network combines image features with relational features.
enum class FusionMode {
    attn_mlp,    // cross-attention followed by an MLP (default)
    sum,         // image features plus the mean relational row
    concat_mlp,  // per-row concatenation with the mean relational row, then an MLP
    attn_only,   // cross-attention without the MLP
};

// Relational features: slot rows first (bitwise-preserved), then the per-slot
// picks from each provided source.
struct RelationFeatures {
    Var p;                             // (1 + provided sources) * K rows x D_h
    std::vector<std::size_t> picks_c;  // row of C chosen per slot; empty when C absent
    std::vector<std::size_t> picks_t;  // row of T chosen per slot; empty when T absent
};

struct FusionWeights {
    Parameter img_proj;    // D_v x D_h, query-side projection of patches
    Parameter cap_proj;    // D_e x D_h, caption-embedding projection
    Parameter tup_proj;    // D_e x D_h, tuple-embedding projection
    MhaParams attn;        // q D_h, kv D_h, out D_h
    MlpParams mlp;         // D_h -> hidden -> D_h
    MlpParams concat_mlp;  // 2*D_h -> hidden -> D_h, used by FusionMode::concat_mlp

    FusionWeights() = default;
    FusionWeights(const std::string& name, std::size_t d_v, std::size_t d_e, std::size_t d_h,
                  std::size_t heads, std::size_t head_dim, std::size_t mlp_hidden, Rng& rng,
                  bool trainable = true);

    // Parameters reachable under `mode` (with or without retrieval sources);
    // the optimizer registers exactly these.
    std::vector<Parameter*> parameters(FusionMode mode, bool with_captions = true,
                                       bool with_tuples = true);
};

// Pooled text embeddings (rows x D_e) projected to D_h on the tape.
Var project_texts(Tape& t, const Matrix& raw, Parameter& proj);

// argmax over cosine(slot row, candidate row) per slot. Ties break to the
// lowest candidate index; zero-norm candidate rows score -infinity.
std::vector<std::size_t> cosine_picks(const Matrix& slots, const Matrix& candidates);

// Builds P = [slots; picks from C; picks from T]. Either source may be absent
// (dropped block); a provided source must be non-empty, and at least one
// block besides the slots is not required here — the caller bypasses this
// function entirely when running without retrieval.
RelationFeatures select_relevant(Tape& t, Var slots, std::optional<Var> c, std::optional<Var> tt);

// Visual prompt R (same row count as patches). Queries are the projected
// patches; P supplies keys and values. `add_residual` adds the projected
// patches back onto the output.
Var fuse(Tape& t, Var patches, Var p, FusionWeights& w, FusionMode mode = FusionMode::attn_mlp,
         bool add_residual = false);

}  // namespace relcap
