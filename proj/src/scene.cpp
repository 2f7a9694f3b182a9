#include "relcap/scene.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "relcap/rng.hpp"

namespace relcap {

const std::vector<std::string> kShapes = {"circle", "square", "triangle", "star"};
const std::vector<std::string> kColors = {"red", "blue", "green", "yellow"};
const std::vector<std::string> kRelations = {"left of", "above", "next to", "holding"};
const std::vector<std::string> kEnvironments = {"park", "room", "beach", "field"};

namespace {

std::string make_caption(const SceneObject& a, const std::string& relation,
                         const SceneObject& b, const std::string& environment) {
    return "a " + a.color + " " + a.shape + " " + relation + " a " + b.color + " " + b.shape +
           " in a " + environment;
}

}  // namespace

ToyScene generate_scene(std::uint64_t seed, std::uint64_t scene_id) {
    Rng rng(derive_seed(seed, "scene-" + std::to_string(scene_id)));
    ToyScene s;
    s.seed = seed;
    s.scene_id = scene_id;
    SceneObject a{kShapes[rng.next_below(kShapes.size())], kColors[rng.next_below(kColors.size())]};
    SceneObject b = a;
    while (b == a) {
        b.shape = kShapes[rng.next_below(kShapes.size())];
        b.color = kColors[rng.next_below(kColors.size())];
    }
    s.objects = {a, b};
    s.relation = kRelations[rng.next_below(kRelations.size())];
    s.environment = kEnvironments[rng.next_below(kEnvironments.size())];
    s.caption = make_caption(a, s.relation, b, s.environment);
    s.gt_tuple.subject = a.color + " " + a.shape;
    s.gt_tuple.predicate = s.relation;
    s.gt_tuple.object = b.color + " " + b.shape;
    s.gt_tuple.environment = s.environment;
    return s;
}

std::vector<ToyScene> generate_corpus(std::uint64_t seed, std::size_t n) {
    if (n == 0) throw std::invalid_argument("generate_corpus: empty corpus requested");
    std::vector<ToyScene> corpus;
    corpus.reserve(n);
    for (std::size_t i = 0; i < n; ++i) corpus.push_back(generate_scene(seed, i));
    return corpus;
}

CorpusSplit split_corpus(const std::vector<ToyScene>& corpus) {
    CorpusSplit split;
    const std::size_t n_train = corpus.size() * 9 / 10;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        (i < n_train ? split.train : split.val).push_back(&corpus[i]);
    }
    return split;
}

std::vector<std::string> all_grammar_captions() {
    std::vector<std::string> captions;
    captions.reserve(16 * 4 * 16 * 4);
    for (const auto& c1 : kColors)
        for (const auto& s1 : kShapes)
            for (const auto& rel : kRelations)
                for (const auto& c2 : kColors)
                    for (const auto& s2 : kShapes)
                        for (const auto& env : kEnvironments)
                            captions.push_back(
                                make_caption({s1, c1}, rel, {s2, c2}, env));
    return captions;
}

void save_corpus_jsonl(const std::vector<ToyScene>& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_corpus_jsonl: cannot open " + path);
    for (const ToyScene& s : corpus) {
        nlohmann::json j;
        j["scene_id"] = s.scene_id;
        nlohmann::json objs = nlohmann::json::array();
        for (const SceneObject& o : s.objects)
            objs.push_back({{"shape", o.shape}, {"color", o.color}});
        j["objects"] = objs;
        j["relation"] = s.relation;
        j["environment"] = s.environment;
        j["caption"] = s.caption;
        j["seed"] = s.seed;
        out << j.dump() << "\n";
    }
}

std::vector<ToyScene> load_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_corpus_jsonl: cannot open " + path);
    std::vector<ToyScene> corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        ToyScene s;
        s.scene_id = j.at("scene_id").get<std::uint64_t>();
        for (const auto& o : j.at("objects"))
            s.objects.push_back({o.at("shape").get<std::string>(),
                                 o.at("color").get<std::string>()});
        s.relation = j.at("relation").get<std::string>();
        s.environment = j.at("environment").get<std::string>();
        s.caption = j.at("caption").get<std::string>();
        s.seed = j.at("seed").get<std::uint64_t>();
        if (s.objects.size() == 2) {
            s.gt_tuple.subject = s.objects[0].color + " " + s.objects[0].shape;
            s.gt_tuple.predicate = s.relation;
            s.gt_tuple.object = s.objects[1].color + " " + s.objects[1].shape;
            s.gt_tuple.environment = s.environment;
        }
        corpus.push_back(std::move(s));
    }
    return corpus;
}

}  // namespace relcap
