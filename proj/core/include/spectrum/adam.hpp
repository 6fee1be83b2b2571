#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "spectrum/tensor.hpp"

namespace spectrum {

template <class S>
struct NamedParamT {
    std::string name;
    TensorT<S> tensor;
};

using NamedParam = NamedParamT<float>;

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0; // decoupled: applied to parameters directly
};

// Adam with bias correction and decoupled L2. Moment buffers are keyed by
// position in the parameter list, which must stay stable across steps.
template <class S>
class AdamT {
  public:
    explicit AdamT(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    int64_t step_count() const { return step_; }

    void step(std::vector<NamedParamT<S>>& params) {
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(params[i].tensor.data().size(), 0.0);
                v_[i].assign(params[i].tensor.data().size(), 0.0);
            }
        }
        if (m_.size() != params.size())
            throw std::runtime_error("adam: parameter list size changed");
        for (auto& p : params)
            if (!p.tensor.has_grad())
                throw std::runtime_error("adam: missing gradient for parameter '" + p.name + "'");
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& theta = params[i].tensor.data();
            const auto& grad = params[i].tensor.grad();
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < theta.size(); ++j) {
                const double g = static_cast<double>(grad[j]);
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                double upd = cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
                upd += cfg_.lr * cfg_.weight_decay * static_cast<double>(theta[j]);
                theta[j] = static_cast<S>(static_cast<double>(theta[j]) - upd);
            }
        }
    }

    static void zero_grad(std::vector<NamedParamT<S>>& params) {
        for (auto& p : params) p.tensor.zero_grad();
    }

  private:
    AdamConfig cfg_;
    int64_t step_ = 0;
    // moments kept in double so float training stays well-conditioned
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

using Adam = AdamT<float>;

} // namespace spectrum
