// Temporary smoke driver; replaced by the full CLI below.
#include <cstdio>

#include "relcap/pipeline.hpp"

int main() {
    using namespace relcap;
    TrainConfig cfg;
    cfg.seed = 7;
    cfg.epochs = 1;
    auto corpus = generate_corpus(cfg.seed, 60);
    Pipeline pipe(cfg, std::move(corpus));
    const auto counts = pipe.param_counts();
    std::printf("vocab=%zu trainable=%zu frozen=%zu\n", pipe.vocab().size(), counts.trainable,
                counts.frozen);
    const double init = pipe.mean_loss(pipe.split().train);
    std::printf("initial mean loss %.4f\n", init);
    auto stats = pipe.train_epoch();
    std::printf("epoch mean loss %.4f over %zu examples\n", stats.mean_loss, stats.examples);
    const ToyScene& v = *pipe.split().val.front();
    std::printf("ref: %s\ncand: %s\n", v.caption.c_str(), pipe.caption_scene(v, 3).c_str());
    return 0;
}
