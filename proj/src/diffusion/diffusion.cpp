#include "organdiff/diffusion/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "organdiff/error.hpp"
#include "organdiff/geometry/mesh_io.hpp"
#include "organdiff/inr/fit.hpp"
#include "organdiff/inr/mlp.hpp"

namespace organdiff::diffusion {

using weightspace::Denoiser;

double training_loss(const X0Predictor& model, const Eigen::MatrixXf& theta0, std::span<const int> t,
                     const Eigen::MatrixXf& noise, const DiffusionSchedule& sched) {
    const Eigen::MatrixXf theta_t = q_sample(theta0, t, noise, sched);
    const Eigen::MatrixXf x0 = model.predict_x0(theta_t, t);
    return (x0 - theta0).cast<double>().squaredNorm() / static_cast<double>(theta0.size());
}

void TrainConfig::validate() const {
    if (epochs < 1) throw UsageError("train: epochs must be >= 1");
    if (batch < 1) throw UsageError("train: batch must be >= 1");
    if (validate_every < 1) throw UsageError("train: validate_every must be >= 1");
    if (!(adamw.lr > 0.0)) throw UsageError("train: learning rate must be positive");
}

namespace {

Eigen::MatrixXf normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXf m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = static_cast<float>(rng.normal());
    return m;
}

int draw_timestep(Rng& rng, int T) { return 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T))); }

}  // namespace

TrainResult train(std::span<const FlatTheta> train_set, std::span<const FlatTheta> val_set, const TrainConfig& cfg,
                  const weightspace::DenoiserConfig& model_cfg, const DiffusionSchedule& sched,
                  const TrainProgress& progress) {
    cfg.validate();
    if (train_set.size() < 2) {
        throw UsageError(fmt::format("train: need at least 2 training thetas, got {}", train_set.size()));
    }
    TrainResult res{Denoiser(model_cfg), {}, 0, 0.0, weightspace::compute_stats(train_set), {}, {}};
    Denoiser& model = res.model;
    const auto P = static_cast<Eigen::Index>(model.theta_size());
    const auto check_len = [&](const FlatTheta& th) {
        if (static_cast<Eigen::Index>(th.size()) != P) {
            throw DataError(fmt::format("train: theta length {} differs from expected {}", th.size(), P));
        }
    };

    const auto N = static_cast<Eigen::Index>(train_set.size());
    Eigen::MatrixXf data(P, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        check_len(train_set[static_cast<std::size_t>(i)]);
        const FlatTheta s = weightspace::standardize(train_set[static_cast<std::size_t>(i)], res.stats);
        data.col(i) = Eigen::Map<const Eigen::VectorXf>(s.data(), P);
    }

    // Fixed validation draw.
    const auto V = static_cast<Eigen::Index>(val_set.size());
    Eigen::MatrixXf val_data(P, V);
    std::vector<int> val_t(static_cast<std::size_t>(V));
    Eigen::MatrixXf val_noise;
    {
        Rng vrng(derive_seed(cfg.seed, 2));
        for (Eigen::Index i = 0; i < V; ++i) {
            check_len(val_set[static_cast<std::size_t>(i)]);
            const FlatTheta s = weightspace::standardize(val_set[static_cast<std::size_t>(i)], res.stats);
            val_data.col(i) = Eigen::Map<const Eigen::VectorXf>(s.data(), P);
            val_t[static_cast<std::size_t>(i)] = draw_timestep(vrng, sched.T);
        }
        val_noise = normal_matrix(P, V, vrng);
    }

    Adam opt(model.parameter_count(), cfg.adamw);
    Rng rng(derive_seed(cfg.seed, 1));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
    weightspace::AlignedFloats grad;
    const Eigen::Index B = std::min<Eigen::Index>(cfg.batch, N);
    res.best_val_loss = std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::shuffle(order.begin(), order.end(), rng.engine());
        double loss_sum = 0.0;
        for (Eigen::Index start = 0; start < N; start += B) {
            const Eigen::Index nb = std::min(B, N - start);
            Eigen::MatrixXf x0(P, nb);
            std::vector<int> t(static_cast<std::size_t>(nb));
            for (Eigen::Index b = 0; b < nb; ++b) {
                x0.col(b) = data.col(order[static_cast<std::size_t>(start + b)]);
                t[static_cast<std::size_t>(b)] = draw_timestep(rng, sched.T);
            }
            const Eigen::MatrixXf noise = normal_matrix(P, nb, rng);
            const Eigen::MatrixXf theta_t = q_sample(x0, t, noise, sched);
            const double loss = model.loss_and_gradient(theta_t, t, x0, grad);
            if (!std::isfinite(loss)) {
                throw NumericError(fmt::format("train: non-finite loss at epoch {}, batch start {}", epoch, start));
            }
            opt.begin_step();
            opt.update(model.parameters().data(), grad.data(), grad.size(), 0);
            loss_sum += loss * static_cast<double>(nb);
        }
        const double epoch_loss = loss_sum / static_cast<double>(N);
        res.train_loss.push_back(epoch_loss);
        if (progress) progress(epoch, epoch_loss);

        if (V > 0 && (epoch % cfg.validate_every == 0 || epoch == cfg.epochs)) {
            const double vl = training_loss(model, val_data, val_t, val_noise, sched);
            if (!std::isfinite(vl)) throw NumericError(fmt::format("train: non-finite validation loss at epoch {}", epoch));
            res.val_loss.emplace_back(epoch, vl);
            spdlog::debug("epoch {} train {:.6g} val {:.6g}", epoch, epoch_loss, vl);
            if (vl < res.best_val_loss) {
                res.best_val_loss = vl;
                res.best_epoch = epoch;
                res.best_parameters.assign(model.parameters().begin(), model.parameters().end());
            }
        }
    }
    if (V == 0) {
        res.best_epoch = cfg.epochs;
        res.best_val_loss = res.train_loss.back();
        res.best_parameters.assign(model.parameters().begin(), model.parameters().end());
    }
    return res;
}

nlohmann::json checkpoint_meta(const ThetaStats& stats, const DiffusionSchedule& sched, int epoch) {
    return {{"stats", {{"mean", stats.mean}, {"std", stats.std}}}, {"schedule", to_json(sched)}, {"epoch", epoch}};
}

TrainedModel load_trained(const std::filesystem::path& path) {
    nlohmann::json header;
    Denoiser model = weightspace::load_denoiser(path, &header);
    try {
        ThetaStats stats{header.at("stats").at("mean").get<double>(), header.at("stats").at("std").get<double>()};
        DiffusionSchedule sched = schedule_from_json(header.at("schedule"));
        const int epoch = header.at("epoch").get<int>();
        return {std::move(model), stats, std::move(sched), epoch};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": missing diffusion metadata: " + e.what());
    }
}

void SampleConfig::validate(int T) const {
    if (ddim_steps < 1 || ddim_steps > T) {
        throw UsageError(fmt::format("sample: ddim_steps must be in [1, {}], got {}", T, ddim_steps));
    }
    if (!(eta >= 0.0 && eta <= 1.0)) throw UsageError(fmt::format("sample: eta must be in [0, 1], got {}", eta));
    if (count < 0) throw UsageError("sample: count must be >= 0");
}

std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) throw UsageError(fmt::format("ddim_steps must be in [1, {}], got {}", T, steps));
    std::vector<int> ts;
    ts.reserve(static_cast<std::size_t>(steps));
    for (int k = steps; k >= 1; --k) {
        ts.push_back(static_cast<int>(static_cast<long long>(k) * T / steps));
    }
    return ts;
}

double ddim_sigma(int t, int t_prev, double eta, const DiffusionSchedule& sched) {
    const double a = sched.alpha_bar(t);
    const double ap = sched.alpha_bar(t_prev);
    return eta * std::sqrt((1.0 - ap) / (1.0 - a)) * std::sqrt(1.0 - a / ap);
}

std::vector<float> ddim_step(std::span<const float> theta_t, std::span<const float> x0, int t, int t_prev, double eta,
                             std::span<const float> z, const DiffusionSchedule& sched) {
    if (!(t_prev < t)) throw UsageError(fmt::format("ddim_step: t_prev {} must be below t {}", t_prev, t));
    if (x0.size() != theta_t.size() || z.size() != theta_t.size()) throw DataError("ddim_step: length mismatch");
    const std::vector<float> eps = predict_noise(theta_t, t, x0, sched);
    const double ap = sched.alpha_bar(t_prev);
    const double sigma = ddim_sigma(t, t_prev, eta, sched);
    const double c_x0 = std::sqrt(ap);
    const double c_eps = std::sqrt(std::max(0.0, 1.0 - ap - sigma * sigma));
    std::vector<float> out(theta_t.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(c_x0 * x0[i] + c_eps * eps[i] + sigma * z[i]);
    }
    return out;
}

FlatTheta ddim_sample(const X0Predictor& model, const DiffusionSchedule& sched, const SampleConfig& cfg,
                      const ThetaStats& stats, Rng& rng) {
    cfg.validate(sched.T);
    const std::size_t P = model.theta_size();
    std::vector<float> theta(P);
    for (auto& v : theta) v = static_cast<float>(rng.normal());

    std::vector<int> ts = ddim_timesteps(sched.T, cfg.ddim_steps);
    ts.push_back(0);
    std::vector<float> x0(P);
    std::vector<float> z(P, 0.0f);
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const int t = ts[k];
        const int t_prev = ts[k + 1];
        const int tt[1] = {t};
        const Eigen::MatrixXf pred =
            model.predict_x0(Eigen::Map<const Eigen::MatrixXf>(theta.data(), static_cast<Eigen::Index>(P), 1), tt);
        std::copy(pred.data(), pred.data() + P, x0.begin());
        if (!std::all_of(x0.begin(), x0.end(), [](float v) { return std::isfinite(v); })) {
            throw NumericError(fmt::format("sample: non-finite clean estimate at t = {}", t));
        }
        if (cfg.eta > 0.0 && t_prev > 0) {
            for (auto& v : z) v = static_cast<float>(rng.normal());
        } else {
            std::fill(z.begin(), z.end(), 0.0f);
        }
        theta = ddim_step(theta, x0, t, t_prev, cfg.eta, z, sched);
        if (!std::all_of(theta.begin(), theta.end(), [](float v) { return std::isfinite(v); })) {
            throw NumericError(fmt::format("sample: non-finite state after step t = {} -> {}", t, t_prev));
        }
    }
    return weightspace::destandardize(x0, stats);
}

std::vector<GeneratedSample> generate(const X0Predictor& model, const DiffusionSchedule& sched, const SampleConfig& cfg,
                                      const ThetaStats& stats, int mc_resolution) {
    cfg.validate(sched.T);
    std::vector<GeneratedSample> out;
    out.reserve(static_cast<std::size_t>(cfg.count));
    for (int i = 0; i < cfg.count; ++i) {
        GeneratedSample s;
        s.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        Rng rng(s.seed);
        s.theta = ddim_sample(model, sched, cfg, stats, rng);
        inr::Reconstruction rec = inr::reconstruct(weightspace::unflatten(s.theta), mc_resolution);
        s.mesh = std::move(rec.mesh);
        s.empty_surface = rec.empty_surface;
        if (s.empty_surface) spdlog::warn("sample {}: empty surface", i);
        out.push_back(std::move(s));
    }
    return out;
}

void write_generation(const std::filesystem::path& dir, const std::vector<GeneratedSample>& samples,
                      const SampleConfig& cfg) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = nlohmann::json::array();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const std::string id = fmt::format("sample_{:03d}", i);
        inr::save_mlp(dir / (id + ".mlp"), weightspace::unflatten(s.theta), s.seed);
        nlohmann::json entry{{"id", id},        {"theta", id + ".mlp"},     {"seed", s.seed},
                             {"steps", cfg.ddim_steps}, {"eta", cfg.eta}, {"empty_surface", s.empty_surface}};
        if (s.empty_surface) {
            entry["mesh"] = nullptr;
        } else {
            geometry::save_obj(s.mesh, dir / (id + ".obj"));
            entry["mesh"] = id + ".obj";
        }
        manifest.push_back(std::move(entry));
    }
    const auto tmp = dir / "manifest.json.tmp";
    {
        std::ofstream f(tmp);
        f << manifest.dump(2) << '\n';
        if (!f) throw DataError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, dir / "manifest.json");
}

}  // namespace organdiff::diffusion
