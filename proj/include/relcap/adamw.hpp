#pragma once

#include <cstddef>
#include <vector>

#include "relcap/autodiff.hpp"

namespace relcap {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled weight decay: theta -= lr * wd * theta on top of the bias-corrected
// Adam update. State is keyed by position in the parameter list handed to the
// constructor, so the same list must be passed to every step() call.
class AdamW {
public:
    AdamW(const std::vector<Parameter*>& params, AdamWConfig cfg = {});

    void step(const std::vector<Parameter*>& params);

    std::size_t step_count() const { return step_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    AdamWConfig cfg_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::size_t step_ = 0;
};

}  // namespace relcap
