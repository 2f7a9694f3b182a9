#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relcap/adamw.hpp"
#include "relcap/decoder.hpp"
#include "relcap/embedder.hpp"
#include "relcap/fusion.hpp"
#include "relcap/index.hpp"
#include "relcap/metrics.hpp"
#include "relcap/scene.hpp"
#include "relcap/slots.hpp"
#include "relcap/spoe.hpp"
#include "relcap/vocab.hpp"

namespace relcap {

// Structural pipeline variants, one per ablation-table row plus "full".
enum class Ablation {
    full,
    raw_slots,       // slots used untouched, no attention refinement
    mha_slots,       // one standard attention pass instead of slot refinement
    object_name,     // tuple text reduced to subject and object names
    spo_triplets,    // tuple environment rendered [MISSING] unconditionally
    no_retrieval,    // P = slots; retrieved captions still fill the prompt
    cap_only,        // P drops the tuple block
    tuple_only,      // P drops the caption block
    fuse_sum,        // fusion by summation
    fuse_concat_mlp, // fusion by concatenation + MLP
    fuse_attn_only,  // fusion by cross-attention without the MLP
};

Ablation ablation_from_string(const std::string& name);  // throws on unknown name
std::string ablation_name(Ablation a);
const std::vector<Ablation>& all_ablations();

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    double learning_rate = 3e-3;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    std::size_t k_retrieved = 4;
    std::size_t beam = 3;
    std::size_t n_slots = 4;    // K
    std::size_t n_patches = 16; // N
    std::size_t d_v = 64;
    std::size_t d_h = 64;
    std::size_t d_e = 256;
    std::size_t d_model = 128;
    std::size_t n_layers = 2;
    std::size_t max_len = 24;   // generation budget in tokens
    Ablation ablation = Ablation::full;
    bool fuse_residual = false;
    bool cross_every_layer = true;
    std::string lexicon_path = "data/lexicon.json";
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& json_text);
std::uint64_t train_config_hash(const TrainConfig& cfg);

struct EpochStats {
    double mean_loss = 0.0;
    double sum_loss = 0.0;
    std::size_t examples = 0;
};

struct ParamCounts {
    std::size_t trainable = 0;
    std::size_t frozen = 0;
};

// End-to-end model: deterministic embedders feed slot attention, per-slot
// retrieval, fusion, and the cross-attention decoder; a single optimizer
// updates exactly the trainable subset. All randomness derives from
// cfg.seed, and training is single-threaded and bitwise reproducible.
class Pipeline {
public:
    Pipeline(const TrainConfig& cfg, std::vector<ToyScene> corpus);

    const TrainConfig& config() const { return cfg_; }
    const std::vector<ToyScene>& corpus() const { return corpus_; }
    const CorpusSplit& split() const { return split_; }
    const Vocabulary& vocab() const { return vocab_; }
    const EmbeddingIndex& index() const { return index_; }

    std::vector<Parameter*> trainable_parameters() { return trainable_; }
    std::vector<Parameter*> frozen_parameters();
    std::uint64_t frozen_checksum();
    ParamCounts param_counts();

    // Scene loss on a caller-provided tape; exposed for gradient checks.
    Var build_scene_loss(Tape& t, const ToyScene& scene);
    double scene_loss(const ToyScene& scene);  // forward only
    double mean_loss(const std::vector<const ToyScene*>& scenes);

    // One pass over the training split: batches accumulate gradients over
    // summed per-example losses, then one optimizer step per batch.
    EpochStats train_epoch();
    std::vector<EpochStats> train();  // cfg.epochs passes

    // Retrieval-rank captions feeding the prompt for this scene (the scene's
    // own id, when indexed, is excluded).
    std::vector<std::string> retrieved_captions(const ToyScene& scene);

    BeamResult decode_scene(const ToyScene& scene, std::size_t beam);
    BeamResult decode_scene_greedy(const ToyScene& scene);
    std::string caption_scene(const ToyScene& scene, std::size_t beam);

    EvalReport evaluate(const std::vector<const ToyScene*>& scenes, std::size_t beam);

    // Single file: 8-byte magic, manifest JSON (config + seed + config hash +
    // frozen checksum + tensor directory), then raw 64-bit payloads. Loading
    // requires an identical config hash and validates the frozen checksum.
    void save_checkpoint(const std::string& path);
    void load_checkpoint(const std::string& path);

    DecoderParams& decoder() { return decoder_; }
    Parameter& slot_seed() { return s0_; }

private:
    struct SceneCtx {
        PatchFeatures pf;
        std::vector<std::string> captions;  // retrieval rank order
        Matrix c_raw;                       // k x D_e caption embeddings
        Matrix t_raw;                       // k x D_e rendered-tuple embeddings
        std::vector<int> prompt_ids;        // BOS + prompt tokens
        std::vector<int> caption_ids;       // target caption tokens
    };

    const SceneCtx& scene_ctx(const ToyScene& scene);
    Var build_visual_prompt(Tape& t, const SceneCtx& ctx);
    std::string render_tuple_for_ablation(const SpoeTuple& tuple) const;
    std::vector<Parameter*> all_parameters();

    TrainConfig cfg_;
    std::vector<ToyScene> corpus_;
    CorpusSplit split_;
    Vocabulary vocab_;
    Lexicon lexicon_;
    EmbeddingIndex index_;
    std::unordered_map<std::uint64_t, std::string> id_to_caption_;
    std::unordered_map<std::uint64_t, SceneCtx> ctx_cache_;

    Parameter s0_;
    SlotAttentionWeights slot_w_;
    MhaParams mha_slot_w_;
    FusionWeights fusion_w_;
    DecoderParams decoder_;

    std::vector<Parameter*> trainable_;
    std::optional<AdamW> opt_;
};

}  // namespace relcap
