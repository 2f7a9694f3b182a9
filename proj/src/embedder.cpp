#include "relcap/embedder.hpp"

#include <cmath>
#include <stdexcept>

#include "relcap/rng.hpp"
#include "relcap/spoe.hpp"

namespace relcap {

namespace {

void hash_feature(const std::string& feature, Matrix& acc) {
    const std::uint64_t h = fnv1a(feature);
    const std::size_t bucket = h % acc.cols();
    const double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
    acc.at(0, bucket) += sign;
}

// Unit-norm content stamp for one scene component ("red circle", "park", ...).
Matrix component_stamp(const std::string& text, std::size_t d_v) {
    Rng rng(derive_seed(fnv1a(text), "component-stamp"));
    Matrix v = Matrix::gaussian(1, d_v, rng);
    const double norm = v.l2_norm();
    v.scale_in_place(1.0 / norm);
    return v;
}

Matrix position_stamp(std::size_t row, std::size_t d_v) {
    Rng rng(derive_seed(row, "patch-position"));
    Matrix v = Matrix::gaussian(1, d_v, rng);
    const double norm = v.l2_norm();
    v.scale_in_place(0.5 / norm);
    return v;
}

}  // namespace

Matrix embed_text(const std::string& text, std::size_t dim) {
    const std::vector<std::string> tokens = tokenize_whitespace(text);
    if (tokens.empty())
        throw std::invalid_argument("embed_text: empty text (render placeholders instead)");
    Matrix v(1, dim);
    for (const std::string& tok : tokens) hash_feature("u:" + tok, v);
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
        hash_feature("b:" + tokens[i] + " " + tokens[i + 1], v);
    const double norm = v.l2_norm();
    if (norm == 0.0)
        throw std::runtime_error("embed_text: zero vector after hashing, raise the bucket count");
    v.scale_in_place(1.0 / norm);
    return v;
}

PatchFeatures embed_scene(const ToyScene& scene, std::size_t n_patches, std::size_t d_v) {
    if (n_patches < 4)
        throw std::invalid_argument("embed_scene: need at least 4 patches, got " +
                                    std::to_string(n_patches));
    if (scene.objects.size() != 2)
        throw std::invalid_argument("embed_scene: scene must hold exactly two objects");
    const std::size_t g = std::max<std::size_t>(1, n_patches / 8);

    const std::string components[4] = {
        scene.objects[0].color + " " + scene.objects[0].shape,
        scene.objects[1].color + " " + scene.objects[1].shape,
        scene.relation,
        scene.environment,
    };

    PatchFeatures pf;
    pf.patches = Matrix(n_patches, d_v);
    for (std::size_t r = 0; r < n_patches; ++r) {
        Matrix row = position_stamp(r, d_v);
        if (r < 4 * g) {
            const Matrix stamp = component_stamp(components[r / g], d_v);
            row.add_in_place(stamp);
        } else {
            Rng noise(derive_seed(scene.seed ^ (scene.scene_id * 0x9e3779b97f4a7c15ULL) ^ r,
                                  "patch-noise"));
            for (std::size_t c = 0; c < d_v; ++c)
                row.at(0, c) += 0.05 * noise.next_gaussian();
        }
        for (std::size_t c = 0; c < d_v; ++c) pf.patches.at(r, c) = row.at(0, c);
    }

    pf.pooled = Matrix(1, d_v);
    for (std::size_t r = 0; r < n_patches; ++r)
        for (std::size_t c = 0; c < d_v; ++c) pf.pooled.at(0, c) += pf.patches.at(r, c);
    pf.pooled.scale_in_place(1.0 / static_cast<double>(n_patches));
    return pf;
}

double cosine_similarity(const Matrix& a, const Matrix& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine_similarity: dim mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a.data()[i] * b.data()[i];
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace relcap
