#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace organdiff::diffusion {

/// Linear beta schedule over t = 1..T. Arrays are indexed by t; index 0 holds the
/// noise-free state (beta 0, alpha_bar 1).
struct DiffusionSchedule {
    int T = 0;
    double beta_min = 0.0;
    double beta_max = 0.0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    double alpha_bar(int t) const { return alpha_bars.at(static_cast<std::size_t>(t)); }
};

/// beta_t = beta_min + (beta_max - beta_min) (t - 1) / (T - 1), alpha_bar the cumulative
/// product of 1 - beta. T = 1 uses beta_min. Throws UsageError unless
/// 0 < beta_min < beta_max < 1 and T >= 1.
DiffusionSchedule make_schedule(int T = 1000, double beta_min = 1e-4, double beta_max = 0.02);

nlohmann::json to_json(const DiffusionSchedule& s);
DiffusionSchedule schedule_from_json(const nlohmann::json& j);

/// theta_t = sqrt(alpha_bar_t) theta0 + sqrt(1 - alpha_bar_t) noise, column-wise or for a
/// single vector.
Eigen::MatrixXf q_sample(const Eigen::MatrixXf& theta0, std::span<const int> t, const Eigen::MatrixXf& noise,
                         const DiffusionSchedule& sched);
std::vector<float> q_sample(std::span<const float> theta0, int t, std::span<const float> noise,
                            const DiffusionSchedule& sched);

/// Noise implied by a clean estimate: (theta_t - sqrt(alpha_bar_t) x0) / sqrt(1 - alpha_bar_t).
std::vector<float> predict_noise(std::span<const float> theta_t, int t, std::span<const float> x0,
                                 const DiffusionSchedule& sched);

}  // namespace organdiff::diffusion
