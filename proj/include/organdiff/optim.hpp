#pragma once

#include <cstddef>
#include <vector>

namespace organdiff {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Decoupled (AdamW) decay; 0 gives plain Adam.
    double weight_decay = 0.0;
};

/// Adam over a parameter vector split into any number of contiguous slices. Call
/// begin_step() once per optimizer step, then update() for each slice with its offset
/// into the full vector.
class Adam {
public:
    Adam(std::size_t size, AdamConfig cfg);

    void begin_step();
    void update(float* params, const float* grads, std::size_t n, std::size_t offset);

    const AdamConfig& config() const { return cfg_; }
    long step() const { return step_; }

private:
    AdamConfig cfg_;
    std::vector<float> m_;
    std::vector<float> v_;
    long step_ = 0;
    double lr_t_ = 0.0;
};

}  // namespace organdiff
