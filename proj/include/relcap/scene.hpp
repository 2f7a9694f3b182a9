#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relcap/spoe.hpp"

namespace relcap {

struct SceneObject {
    std::string shape;
    std::string color;

    bool operator==(const SceneObject&) const = default;
};

// A toy scene: two distinct colored shapes, one relation, one environment,
// and the caption "a {color1} {shape1} {relation} a {color2} {shape2} in a
// {environment}". Regeneration from (seed, scene_id) is byte-identical.
struct ToyScene {
    std::uint64_t scene_id = 0;
    std::vector<SceneObject> objects;  // exactly two
    std::string relation;
    std::string environment;
    std::string caption;
    SpoeTuple gt_tuple;
    std::uint64_t seed = 0;
};

extern const std::vector<std::string> kShapes;        // circle, square, triangle, star
extern const std::vector<std::string> kColors;        // red, blue, green, yellow
extern const std::vector<std::string> kRelations;     // left of, above, next to, holding
extern const std::vector<std::string> kEnvironments;  // park, room, beach, field

ToyScene generate_scene(std::uint64_t seed, std::uint64_t scene_id);

// scene_ids 0..n-1. Throws on n == 0.
std::vector<ToyScene> generate_corpus(std::uint64_t seed, std::size_t n);

// First 90% of ids train, last 10% val.
struct CorpusSplit {
    std::vector<const ToyScene*> train;
    std::vector<const ToyScene*> val;
};
CorpusSplit split_corpus(const std::vector<ToyScene>& corpus);

// Every grammar caption exactly once, in a fixed enumeration order.
std::vector<std::string> all_grammar_captions();

// JSON Lines, one scene per line with keys scene_id, objects, relation,
// environment, caption, seed.
void save_corpus_jsonl(const std::vector<ToyScene>& corpus, const std::string& path);
std::vector<ToyScene> load_corpus_jsonl(const std::string& path);

}  // namespace relcap
