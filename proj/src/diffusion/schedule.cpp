#include "organdiff/diffusion/schedule.hpp"

#include <cmath>

#include <fmt/format.h>

#include "organdiff/error.hpp"

namespace organdiff::diffusion {

DiffusionSchedule make_schedule(int T, double beta_min, double beta_max) {
    if (T < 1) throw UsageError("schedule: T must be >= 1");
    if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0)) {
        throw UsageError(fmt::format("schedule: need 0 < beta_min < beta_max < 1, got {} and {}", beta_min, beta_max));
    }
    DiffusionSchedule s;
    s.T = T;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.betas.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alphas.assign(static_cast<std::size_t>(T) + 1, 1.0);
    s.alpha_bars.assign(static_cast<std::size_t>(T) + 1, 1.0);
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        const auto i = static_cast<std::size_t>(t);
        s.betas[i] = beta_min + (beta_max - beta_min) * frac;
        s.alphas[i] = 1.0 - s.betas[i];
        s.alpha_bars[i] = s.alpha_bars[i - 1] * s.alphas[i];
    }
    return s;
}

nlohmann::json to_json(const DiffusionSchedule& s) {
    return {{"T", s.T}, {"beta_min", s.beta_min}, {"beta_max", s.beta_max}, {"kind", "linear"}};
}

DiffusionSchedule schedule_from_json(const nlohmann::json& j) {
    try {
        return make_schedule(j.at("T").get<int>(), j.at("beta_min").get<double>(), j.at("beta_max").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed schedule: ") + e.what());
    }
}

namespace {

void check_t(int t, const DiffusionSchedule& sched) {
    if (t < 0 || t > sched.T) throw UsageError(fmt::format("timestep {} outside [0, {}]", t, sched.T));
}

// One kernel for the batched and single forms so both round identically.
void q_sample_into(const float* x0, const float* noise, std::size_t n, int t, const DiffusionSchedule& sched,
                   float* out) {
    check_t(t, sched);
    const auto a = static_cast<float>(std::sqrt(sched.alpha_bar(t)));
    const auto s = static_cast<float>(std::sqrt(1.0 - sched.alpha_bar(t)));
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x0[i] + s * noise[i];
}

}  // namespace

Eigen::MatrixXf q_sample(const Eigen::MatrixXf& theta0, std::span<const int> t, const Eigen::MatrixXf& noise,
                         const DiffusionSchedule& sched) {
    if (noise.rows() != theta0.rows() || noise.cols() != theta0.cols()) throw DataError("q_sample: noise shape differs");
    if (static_cast<std::size_t>(theta0.cols()) != t.size()) throw DataError("q_sample: one timestep per column required");
    Eigen::MatrixXf out(theta0.rows(), theta0.cols());
    for (Eigen::Index b = 0; b < theta0.cols(); ++b) {
        q_sample_into(theta0.col(b).data(), noise.col(b).data(), static_cast<std::size_t>(theta0.rows()),
                      t[static_cast<std::size_t>(b)], sched, out.col(b).data());
    }
    return out;
}

std::vector<float> q_sample(std::span<const float> theta0, int t, std::span<const float> noise,
                            const DiffusionSchedule& sched) {
    if (noise.size() != theta0.size()) throw DataError("q_sample: noise length differs");
    std::vector<float> out(theta0.size());
    q_sample_into(theta0.data(), noise.data(), out.size(), t, sched, out.data());
    return out;
}

std::vector<float> predict_noise(std::span<const float> theta_t, int t, std::span<const float> x0,
                                 const DiffusionSchedule& sched) {
    if (x0.size() != theta_t.size()) throw DataError("predict_noise: length mismatch");
    check_t(t, sched);
    if (t == 0) throw UsageError("predict_noise: undefined at t = 0");
    const double a = std::sqrt(sched.alpha_bar(t));
    const double s = std::sqrt(1.0 - sched.alpha_bar(t));
    std::vector<float> eps(theta_t.size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = static_cast<float>((theta_t[i] - a * x0[i]) / s);
    return eps;
}

}  // namespace organdiff::diffusion
