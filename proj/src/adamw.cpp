#include "relcap/adamw.hpp"

#include <cmath>
#include <stdexcept>

namespace relcap {

AdamW::AdamW(const std::vector<Parameter*>& params, AdamWConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Parameter* p : params) {
        m_.emplace_back(p->value.rows(), p->value.cols(), 0.0);
        v_.emplace_back(p->value.rows(), p->value.cols(), 0.0);
    }
}

void AdamW::step(const std::vector<Parameter*>& params) {
    if (params.size() != m_.size())
        throw std::invalid_argument("adamw_step: parameter list size changed");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (!p.value.same_shape(m_[i]))
            throw std::invalid_argument("adamw_step: shape changed for " + p.name);
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad.data()[j];
            double& m = m_[i].data()[j];
            double& v = v_[i].data()[j];
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            double& w = p.value.data()[j];
            const double decay = cfg_.lr * cfg_.weight_decay * w;  // decoupled, pre-update w
            w -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps));
            w -= decay;
        }
    }
}

}  // namespace relcap
