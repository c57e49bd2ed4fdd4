#include "organdiff/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace organdiff {

Adam::Adam(std::size_t size, AdamConfig cfg) : cfg_(cfg), m_(size, 0.0f), v_(size, 0.0f) {}

void Adam::begin_step() {
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, step_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, step_);
    lr_t_ = cfg_.lr * std::sqrt(c2) / c1;
}

void Adam::update(float* params, const float* grads, std::size_t n, std::size_t offset) {
    if (offset + n > m_.size()) throw std::out_of_range("Adam::update slice exceeds state size");
    const auto b1 = static_cast<float>(cfg_.beta1);
    const auto b2 = static_cast<float>(cfg_.beta2);
    const auto lr_t = static_cast<float>(lr_t_);
    // Bias corrections are folded into lr_t and eps_hat: the step is lr * m_hat / (sqrt(v_hat) + eps).
    const auto eps_hat = static_cast<float>(cfg_.eps * std::sqrt(1.0 - std::pow(cfg_.beta2, step_)));
    const auto decay = static_cast<float>(cfg_.lr * cfg_.weight_decay);
    float* m = m_.data() + offset;
    float* v = v_.data() + offset;
    for (std::size_t i = 0; i < n; ++i) {
        const float g = grads[i];
        m[i] = b1 * m[i] + (1.0f - b1) * g;
        v[i] = b2 * v[i] + (1.0f - b2) * g * g;
        if (decay != 0.0f) params[i] -= decay * params[i];
        params[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps_hat);
    }
}

}  // namespace organdiff
