#pragma once

#include <string>
#include <vector>

#include "relcap/matrix.hpp"
#include "relcap/scene.hpp"

namespace relcap {

// Per-image patch matrix plus the mean-pooled global row.
struct PatchFeatures {
    Matrix patches;  // n_patches x d_v
    Matrix pooled;   // 1 x d_v, arithmetic mean of patch rows
};

constexpr std::size_t kDefaultTextDim = 256;   // D_e
constexpr std::size_t kDefaultPatchCount = 16; // N
constexpr std::size_t kDefaultPatchDim = 64;   // D_v

// Deterministic stand-in for a frozen text encoder: signed feature hashing of
// unigrams and adjacent bigrams into `dim` buckets, L2-normalized. Identical
// text always yields the identical vector; distinctness on the toy caption
// grammar is verified exhaustively in the tests. Throws on empty text.
Matrix embed_text(const std::string& text, std::size_t dim = kDefaultTextDim);

// Deterministic stand-in for a frozen image encoder. Patch layout with block
// size g = max(1, n_patches / 8):
//   rows [0,g)    first object      rows [2g,3g)  relation
//   rows [g,2g)   second object     rows [3g,4g)  environment
// Every row additionally carries a content-independent positional stamp, and
// rows >= 4g hold low-magnitude noise seeded by (scene.seed, scene_id, row).
PatchFeatures embed_scene(const ToyScene& scene, std::size_t n_patches = kDefaultPatchCount,
                          std::size_t d_v = kDefaultPatchDim);

double cosine_similarity(const Matrix& a, const Matrix& b);

}  // namespace relcap
