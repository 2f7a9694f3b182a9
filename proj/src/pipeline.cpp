#include "relcap/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "relcap/prompt.hpp"

namespace relcap {

namespace {

constexpr char kCkptMagic[8] = {'R', 'C', 'A', 'P', 'C', 'K', 'P', '\0'};
constexpr std::uint32_t kCkptVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint persistence assumes a little-endian host");

const std::vector<std::pair<Ablation, std::string>>& ablation_table() {
    static const std::vector<std::pair<Ablation, std::string>> table = {
        {Ablation::full, "full"},
        {Ablation::raw_slots, "raw-slots"},
        {Ablation::mha_slots, "mha-slots"},
        {Ablation::object_name, "object-name"},
        {Ablation::spo_triplets, "spo-triplets"},
        {Ablation::no_retrieval, "no-retrieval"},
        {Ablation::cap_only, "cap-only"},
        {Ablation::tuple_only, "tuple-only"},
        {Ablation::fuse_sum, "fuse-sum"},
        {Ablation::fuse_concat_mlp, "fuse-concat-mlp"},
        {Ablation::fuse_attn_only, "fuse-attn-only"},
    };
    return table;
}

FusionMode fusion_mode_for(Ablation a) {
    switch (a) {
        case Ablation::fuse_sum: return FusionMode::sum;
        case Ablation::fuse_concat_mlp: return FusionMode::concat_mlp;
        case Ablation::fuse_attn_only: return FusionMode::attn_only;
        default: return FusionMode::attn_mlp;
    }
}

}  // namespace

Ablation ablation_from_string(const std::string& name) {
    for (const auto& [a, n] : ablation_table()) {
        if (n == name) return a;
    }
    throw std::invalid_argument("unknown ablation \"" + name + "\"");
}

std::string ablation_name(Ablation a) {
    for (const auto& [ab, n] : ablation_table()) {
        if (ab == a) return n;
    }
    throw std::logic_error("unmapped ablation value");
}

const std::vector<Ablation>& all_ablations() {
    static const std::vector<Ablation> all = [] {
        std::vector<Ablation> v;
        for (const auto& [a, n] : ablation_table()) v.push_back(a);
        return v;
    }();
    return all;
}

std::string train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["weight_decay"] = cfg.weight_decay;
    j["seed"] = cfg.seed;
    j["k_retrieved"] = cfg.k_retrieved;
    j["beam"] = cfg.beam;
    j["n_slots"] = cfg.n_slots;
    j["n_patches"] = cfg.n_patches;
    j["d_v"] = cfg.d_v;
    j["d_h"] = cfg.d_h;
    j["d_e"] = cfg.d_e;
    j["d_model"] = cfg.d_model;
    j["n_layers"] = cfg.n_layers;
    j["max_len"] = cfg.max_len;
    j["ablation"] = ablation_name(cfg.ablation);
    j["fuse_residual"] = cfg.fuse_residual;
    j["cross_every_layer"] = cfg.cross_every_layer;
    j["lexicon_path"] = cfg.lexicon_path;
    return j.dump();
}

TrainConfig train_config_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    TrainConfig cfg;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.k_retrieved = j.value("k_retrieved", cfg.k_retrieved);
    cfg.beam = j.value("beam", cfg.beam);
    cfg.n_slots = j.value("n_slots", cfg.n_slots);
    cfg.n_patches = j.value("n_patches", cfg.n_patches);
    cfg.d_v = j.value("d_v", cfg.d_v);
    cfg.d_h = j.value("d_h", cfg.d_h);
    cfg.d_e = j.value("d_e", cfg.d_e);
    cfg.d_model = j.value("d_model", cfg.d_model);
    cfg.n_layers = j.value("n_layers", cfg.n_layers);
    cfg.max_len = j.value("max_len", cfg.max_len);
    cfg.ablation = ablation_from_string(j.value("ablation", std::string("full")));
    cfg.fuse_residual = j.value("fuse_residual", cfg.fuse_residual);
    cfg.cross_every_layer = j.value("cross_every_layer", cfg.cross_every_layer);
    cfg.lexicon_path = j.value("lexicon_path", cfg.lexicon_path);
    return cfg;
}

std::uint64_t train_config_hash(const TrainConfig& cfg) {
    return fnv1a(train_config_to_json(cfg));
}

Pipeline::Pipeline(const TrainConfig& cfg, std::vector<ToyScene> corpus)
    : cfg_(cfg), corpus_(std::move(corpus)) {
    if (corpus_.empty()) {
        throw std::invalid_argument("pipeline: empty corpus");
    }
    split_ = split_corpus(corpus_);
    if (split_.train.size() <= cfg_.k_retrieved) {
        throw std::invalid_argument("pipeline: training split of " +
                                    std::to_string(split_.train.size()) +
                                    " scenes cannot serve k=" +
                                    std::to_string(cfg_.k_retrieved) + " retrieval");
    }

    // Closed vocabulary over the full grammar plus the prompt wording, so the
    // decoder shape never depends on which scenes a corpus happens to contain.
    std::vector<std::string> vocab_texts = all_grammar_captions();
    vocab_texts.push_back("Similar images show , . This image shows");
    vocab_ = Vocabulary::build(vocab_texts);

    lexicon_ = !cfg_.lexicon_path.empty() && std::filesystem::exists(cfg_.lexicon_path)
                   ? Lexicon::load(cfg_.lexicon_path)
                   : Lexicon::builtin();

    std::vector<std::pair<std::uint64_t, std::string>> entries;
    entries.reserve(split_.train.size());
    for (const ToyScene* s : split_.train) {
        entries.push_back({s->scene_id, s->caption});
        id_to_caption_[s->scene_id] = s->caption;
    }
    index_ = build_index(entries, cfg_.d_e, "train-split");

    s0_ = init_slots(cfg_.n_slots, cfg_.d_h, cfg_.seed);
    {
        Rng rng(derive_seed(cfg_.seed, "slot-weights"));
        slot_w_ = SlotAttentionWeights("slots", cfg_.d_v, cfg_.d_h, 4 * cfg_.d_h, rng);
    }
    {
        Rng rng(derive_seed(cfg_.seed, "mha-slots"));
        const std::size_t head_dim = std::max<std::size_t>(1, cfg_.d_h / 4);
        mha_slot_w_ = MhaParams("mha_slots", cfg_.d_h, cfg_.d_v, cfg_.d_h, 4, head_dim, rng);
    }
    {
        Rng rng(derive_seed(cfg_.seed, "fusion"));
        fusion_w_ = FusionWeights("fusion", cfg_.d_v, cfg_.d_e, cfg_.d_h, 12, 16,
                                  4 * cfg_.d_h, rng);
    }
    {
        DecoderConfig dc;
        dc.vocab_size = vocab_.size();
        dc.d_model = cfg_.d_model;
        dc.n_layers = cfg_.n_layers;
        dc.prompt_dim = cfg_.d_h;
        dc.cross_every_layer = cfg_.cross_every_layer;
        decoder_ = DecoderParams(dc, cfg_.seed);
    }

    trainable_.push_back(&s0_);
    switch (cfg_.ablation) {
        case Ablation::raw_slots:
            break;
        case Ablation::mha_slots:
            for (auto* p : mha_slot_w_.parameters()) trainable_.push_back(p);
            break;
        default:
            for (auto* p : slot_w_.parameters()) trainable_.push_back(p);
            break;
    }
    const bool with_c = cfg_.ablation != Ablation::no_retrieval &&
                        cfg_.ablation != Ablation::tuple_only;
    const bool with_t = cfg_.ablation != Ablation::no_retrieval &&
                        cfg_.ablation != Ablation::cap_only;
    for (auto* p : fusion_w_.parameters(fusion_mode_for(cfg_.ablation), with_c, with_t)) {
        trainable_.push_back(p);
    }
    for (auto* p : decoder_.trainable_parameters()) trainable_.push_back(p);

    AdamWConfig acfg;
    acfg.lr = cfg_.learning_rate;
    acfg.weight_decay = cfg_.weight_decay;
    opt_.emplace(trainable_, acfg);
}

std::vector<Parameter*> Pipeline::frozen_parameters() { return decoder_.frozen_parameters(); }

std::uint64_t Pipeline::frozen_checksum() { return decoder_.frozen_checksum(); }

ParamCounts Pipeline::param_counts() {
    ParamCounts counts;
    for (Parameter* p : trainable_) counts.trainable += p->value.size();
    for (Parameter* p : frozen_parameters()) counts.frozen += p->value.size();
    return counts;
}

std::string Pipeline::render_tuple_for_ablation(const SpoeTuple& tuple) const {
    SpoeTuple t = tuple;
    if (cfg_.ablation == Ablation::object_name) {
        t.predicate.reset();
        t.environment.reset();
    } else if (cfg_.ablation == Ablation::spo_triplets) {
        t.environment.reset();
    }
    return render_tuple(t);
}

const Pipeline::SceneCtx& Pipeline::scene_ctx(const ToyScene& scene) {
    auto it = ctx_cache_.find(scene.scene_id);
    if (it != ctx_cache_.end()) return it->second;

    SceneCtx ctx;
    ctx.pf = embed_scene(scene, cfg_.n_patches, cfg_.d_v);

    const Matrix query = embed_text(scene.caption, cfg_.d_e);
    const std::size_t ask = std::min(index_.ids.size(), cfg_.k_retrieved + 1);
    for (const SearchHit& hit : query_topk(index_, query, ask)) {
        if (hit.id == scene.scene_id) continue;  // never retrieve the scene itself
        if (ctx.captions.size() < cfg_.k_retrieved) {
            ctx.captions.push_back(id_to_caption_.at(hit.id));
        }
    }
    if (ctx.captions.size() < cfg_.k_retrieved) {
        throw std::runtime_error("pipeline: retrieval produced fewer than k captions for scene " +
                                 std::to_string(scene.scene_id));
    }

    ctx.c_raw = Matrix(cfg_.k_retrieved, cfg_.d_e);
    ctx.t_raw = Matrix(cfg_.k_retrieved, cfg_.d_e);
    for (std::size_t i = 0; i < ctx.captions.size(); ++i) {
        const Matrix c = embed_text(ctx.captions[i], cfg_.d_e);
        std::copy(c.data(), c.data() + c.size(), ctx.c_raw.row_ptr(i));
        const std::string rendered =
            render_tuple_for_ablation(extract_spoe(ctx.captions[i], lexicon_));
        const Matrix tv = embed_text(rendered, cfg_.d_e);
        std::copy(tv.data(), tv.data() + tv.size(), ctx.t_raw.row_ptr(i));
    }

    ctx.prompt_ids = {kBosId};
    for (int id : vocab_.encode(assemble_prompt(ctx.captions, cfg_.k_retrieved))) {
        ctx.prompt_ids.push_back(id);
    }
    ctx.caption_ids = vocab_.encode(scene.caption);

    return ctx_cache_.emplace(scene.scene_id, std::move(ctx)).first->second;
}

Var Pipeline::build_visual_prompt(Tape& t, const SceneCtx& ctx) {
    Var patches = t.leaf(ctx.pf.patches);
    Var pooled = t.leaf(ctx.pf.pooled);

    Var slots;
    switch (cfg_.ablation) {
        case Ablation::raw_slots:
            slots = t.param(s0_);
            break;
        case Ablation::mha_slots:
            slots = multi_head_attention(t, t.param(s0_), patches, mha_slot_w_);
            break;
        default:
            slots = object_aware_forward(t, patches, pooled, t.param(s0_), slot_w_).slots;
            break;
    }

    Var p;
    if (cfg_.ablation == Ablation::no_retrieval) {
        p = slots;
    } else {
        std::optional<Var> c;
        std::optional<Var> tt;
        if (cfg_.ablation != Ablation::tuple_only) {
            c = project_texts(t, ctx.c_raw, fusion_w_.cap_proj);
        }
        if (cfg_.ablation != Ablation::cap_only) {
            tt = project_texts(t, ctx.t_raw, fusion_w_.tup_proj);
        }
        p = select_relevant(t, slots, c, tt).p;
    }

    return fuse(t, patches, p, fusion_w_, fusion_mode_for(cfg_.ablation), cfg_.fuse_residual);
}

Var Pipeline::build_scene_loss(Tape& t, const ToyScene& scene) {
    const SceneCtx& ctx = scene_ctx(scene);
    Var r = build_visual_prompt(t, ctx);

    std::vector<int> input = ctx.prompt_ids;
    input.insert(input.end(), ctx.caption_ids.begin(), ctx.caption_ids.end());

    std::vector<int> targets(input.size());
    std::vector<int> mask(input.size(), 0);
    for (std::size_t i = 0; i + 1 < input.size(); ++i) targets[i] = input[i + 1];
    targets.back() = kEosId;
    for (std::size_t i = ctx.prompt_ids.size() - 1; i < input.size(); ++i) mask[i] = 1;

    Var logits = decoder_forward(t, input, r, decoder_);
    return t.cross_entropy(logits, targets, mask);
}

double Pipeline::scene_loss(const ToyScene& scene) {
    Tape t;
    return t.value(build_scene_loss(t, scene)).at(0, 0);
}

double Pipeline::mean_loss(const std::vector<const ToyScene*>& scenes) {
    if (scenes.empty()) return 0.0;
    double sum = 0.0;
    for (const ToyScene* s : scenes) sum += scene_loss(*s);
    return sum / static_cast<double>(scenes.size());
}

EpochStats Pipeline::train_epoch() {
    EpochStats stats;
    const auto& train = split_.train;
    for (std::size_t start = 0; start < train.size(); start += cfg_.batch_size) {
        const std::size_t end = std::min(train.size(), start + cfg_.batch_size);
        for (Parameter* p : trainable_) p->zero_grad();
        for (std::size_t i = start; i < end; ++i) {
            Tape t;
            Var loss = build_scene_loss(t, *train[i]);
            stats.sum_loss += t.value(loss).at(0, 0);
            t.backward(loss);
            ++stats.examples;
        }
        opt_->step(trainable_);
    }
    stats.mean_loss = stats.sum_loss / static_cast<double>(stats.examples);
    return stats;
}

std::vector<EpochStats> Pipeline::train() {
    std::vector<EpochStats> history;
    history.reserve(cfg_.epochs);
    for (std::size_t e = 0; e < cfg_.epochs; ++e) history.push_back(train_epoch());
    return history;
}

std::vector<std::string> Pipeline::retrieved_captions(const ToyScene& scene) {
    return scene_ctx(scene).captions;
}

BeamResult Pipeline::decode_scene(const ToyScene& scene, std::size_t beam) {
    const SceneCtx& ctx = scene_ctx(scene);
    Tape t;
    const Matrix r = t.value(build_visual_prompt(t, ctx));
    return beam_search(ctx.prompt_ids, r, decoder_, beam, cfg_.max_len);
}

BeamResult Pipeline::decode_scene_greedy(const ToyScene& scene) {
    const SceneCtx& ctx = scene_ctx(scene);
    Tape t;
    const Matrix r = t.value(build_visual_prompt(t, ctx));
    return greedy_decode(ctx.prompt_ids, r, decoder_, cfg_.max_len);
}

std::string Pipeline::caption_scene(const ToyScene& scene, std::size_t beam) {
    return vocab_.decode(decode_scene(scene, beam).ids);
}

EvalReport Pipeline::evaluate(const std::vector<const ToyScene*>& scenes, std::size_t beam) {
    std::vector<ExampleEval> examples;
    examples.reserve(scenes.size());
    for (const ToyScene* s : scenes) {
        ExampleEval e;
        e.scene_id = s->scene_id;
        e.candidate = caption_scene(*s, beam);
        e.reference = s->caption;
        e.bleu4 = bleu4(e.candidate, {e.reference});
        e.exact = normalize_whitespace(e.candidate) == normalize_whitespace(e.reference);
        examples.push_back(std::move(e));
    }
    return make_eval_report(examples, train_config_to_json(cfg_));
}

std::vector<Parameter*> Pipeline::all_parameters() {
    std::vector<Parameter*> out = {&s0_};
    for (auto* p : slot_w_.parameters()) out.push_back(p);
    for (auto* p : mha_slot_w_.parameters()) out.push_back(p);
    for (auto* p : fusion_w_.parameters(FusionMode::attn_mlp)) out.push_back(p);
    for (auto* p : fusion_w_.concat_mlp.parameters()) out.push_back(p);
    for (auto* p : decoder_.trainable_parameters()) out.push_back(p);
    for (auto* p : decoder_.frozen_parameters()) out.push_back(p);
    return out;
}

void Pipeline::save_checkpoint(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);

    std::vector<Parameter*> params = all_parameters();
    nlohmann::json meta;
    meta["config"] = nlohmann::json::parse(train_config_to_json(cfg_));
    meta["config_hash"] = train_config_hash(cfg_);
    meta["seed"] = cfg_.seed;
    meta["frozen_checksum"] = frozen_checksum();
    nlohmann::json tensors = nlohmann::json::array();
    for (Parameter* p : params) {
        tensors.push_back(
            {{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
    }
    meta["tensors"] = tensors;
    const std::string meta_str = meta.dump();

    out.write(kCkptMagic, sizeof(kCkptMagic));
    const std::uint32_t version = kCkptVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint32_t meta_len = static_cast<std::uint32_t>(meta_str.size());
    out.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    for (Parameter* p : params) {
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

void Pipeline::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (in.gcount() != sizeof(magic) || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kCkptVersion) {
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(version));
    }
    std::uint32_t meta_len = 0;
    in.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), meta_len);
    if (static_cast<std::uint32_t>(in.gcount()) != meta_len) {
        throw std::runtime_error("load_checkpoint: truncated manifest in " + path);
    }
    nlohmann::json meta = nlohmann::json::parse(meta_str);

    if (meta.at("config_hash").get<std::uint64_t>() != train_config_hash(cfg_)) {
        throw std::runtime_error(
            "load_checkpoint: checkpoint was produced by a different configuration");
    }

    std::unordered_map<std::string, Parameter*> by_name;
    for (Parameter* p : all_parameters()) by_name[p->name] = p;

    for (const auto& entry : meta.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::size_t rows = entry.at("rows").get<std::size_t>();
        const std::size_t cols = entry.at("cols").get<std::size_t>();
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw std::runtime_error("load_checkpoint: unknown tensor \"" + name + "\"");
        }
        Parameter* p = it->second;
        if (p->value.rows() != rows || p->value.cols() != cols) {
            throw std::runtime_error("load_checkpoint: shape mismatch for \"" + name + "\"");
        }
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        if (static_cast<std::size_t>(in.gcount()) != p->value.size() * sizeof(double)) {
            throw std::runtime_error("load_checkpoint: truncated payload at \"" + name + "\"");
        }
    }

    if (frozen_checksum() != meta.at("frozen_checksum").get<std::uint64_t>()) {
        throw std::runtime_error("load_checkpoint: frozen-parameter checksum mismatch");
    }
}

}  // namespace relcap
