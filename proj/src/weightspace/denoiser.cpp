#include "organdiff/weightspace/denoiser.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "organdiff/checkpoint.hpp"
#include "organdiff/error.hpp"
#include "organdiff/rng.hpp"

namespace organdiff::weightspace {

namespace {

using Mat = Eigen::MatrixXf;
using MapMat = Eigen::Map<Mat>;
using CMapMat = Eigen::Map<const Mat>;
using MapVec = Eigen::Map<Eigen::VectorXf>;
using CMapVec = Eigen::Map<const Eigen::VectorXf>;

constexpr float kLnEps = 1e-5f;
constexpr int kPerLayer = 12;
enum LayerTensor { Ln1G, Ln1B, WQkv, BQkv, WO, BO, Ln2G, Ln2B, WFc1, BFc1, WFc2, BFc2 };

struct LnCache {
    Mat xhat;
    Eigen::RowVectorXf rstd;
};

Mat layer_norm(const Mat& x, const CMapVec& gamma, const CMapVec& beta, LnCache* cache) {
    const Eigen::RowVectorXf mean = x.colwise().mean();
    Mat xhat = x.rowwise() - mean;
    const Eigen::RowVectorXf var = xhat.array().square().colwise().mean();
    const Eigen::RowVectorXf rstd = (var.array() + kLnEps).rsqrt();
    xhat = xhat * rstd.asDiagonal();
    Mat y = (xhat.array().colwise() * gamma.array()).colwise() + beta.array();
    if (cache != nullptr) {
        cache->xhat = std::move(xhat);
        cache->rstd = rstd;
    }
    return y;
}

Mat layer_norm_backward(const Mat& dy, const CMapVec& gamma, const LnCache& c, MapVec dgamma, MapVec dbeta) {
    dgamma += dy.cwiseProduct(c.xhat).rowwise().sum();
    dbeta += dy.rowwise().sum();
    const Mat dxhat = dy.array().colwise() * gamma.array();
    const Eigen::RowVectorXf m1 = dxhat.colwise().mean();
    const Eigen::RowVectorXf m2 = dxhat.cwiseProduct(c.xhat).colwise().mean();
    Mat dx = dxhat.rowwise() - m1;
    dx -= c.xhat * m2.asDiagonal();
    return dx * c.rstd.asDiagonal();
}

float gelu(float u) { return 0.5f * u * (1.0f + std::erf(u * static_cast<float>(std::numbers::sqrt2 / 2))); }

float gelu_grad(float u) {
    const float cdf = 0.5f * (1.0f + std::erf(u * static_cast<float>(std::numbers::sqrt2 / 2)));
    const float pdf = std::exp(-0.5f * u * u) * static_cast<float>(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
    return cdf + u * pdf;
}

void softmax_rows(Mat& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const float mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
    }
}

}  // namespace

DenoiserConfig DenoiserConfig::desk() {
    DenoiserConfig cfg;
    cfg.n_emb = 256;
    cfg.layers = 4;
    cfg.heads = 4;
    return cfg;
}

void DenoiserConfig::validate() const {
    if (n_emb < 1 || layers < 0 || heads < 1 || mlp_ratio < 1) throw UsageError("denoiser: sizes must be positive");
    if (n_emb % heads != 0) throw UsageError(fmt::format("denoiser: n_emb {} not divisible by heads {}", n_emb, heads));
}

nlohmann::json to_json(const DenoiserConfig& cfg) {
    return {{"n_emb", cfg.n_emb}, {"layers", cfg.layers}, {"heads", cfg.heads}, {"mlp_ratio", cfg.mlp_ratio}, {"seed", cfg.seed}};
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
    DenoiserConfig cfg;
    cfg.n_emb = j.value("n_emb", cfg.n_emb);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.mlp_ratio = j.value("mlp_ratio", cfg.mlp_ratio);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

std::vector<float> timestep_embedding(int t, int dim) {
    if (t < 0) throw UsageError("timestep_embedding: t must be >= 0");
    std::vector<float> emb(static_cast<std::size_t>(dim), 0.0f);
    const int half = dim / 2;
    for (int k = 0; k < half; ++k) {
        const double w = std::pow(10000.0, -2.0 * k / dim);
        emb[static_cast<std::size_t>(k)] = static_cast<float>(std::sin(t * w));
        emb[static_cast<std::size_t>(half + k)] = static_cast<float>(std::cos(t * w));
    }
    return emb;
}

struct Denoiser::Cache {
    struct Layer {
        Mat x_in, a, qkv, attn, x_mid, c, u, g;
        LnCache ln1, ln2;
        std::vector<Mat> probs;
    };
    std::vector<Layer> layers;
    LnCache lnf;
    Mat hf;
};

Denoiser::Denoiser(const DenoiserConfig& cfg, ShapeSignature sig) : cfg_(cfg), sig_(std::move(sig)) {
    cfg_.validate();
    if (sig_.empty()) throw UsageError("denoiser: empty signature");
    theta_size_ = signature_total(sig_);
    std::size_t acc = 0;
    for (auto s : sig_) {
        sig_offsets_.push_back(acc);
        acc += s;
    }

    const int n = cfg_.n_emb;
    const int ntok = static_cast<int>(sig_.size()) + 1;
    std::size_t offset = 0;
    auto add = [&](std::string name, int rows, int cols) {
        views_.push_back({std::move(name), offset, rows, cols});
        offset += views_.back().size();
    };
    for (std::size_t i = 0; i < sig_.size(); ++i) {
        add(fmt::format("in_w.{}", i), n, static_cast<int>(sig_[i]));
        add(fmt::format("in_b.{}", i), n, 1);
    }
    add("pos", n, ntok);
    const int hidden = cfg_.mlp_ratio * n;
    for (int l = 0; l < cfg_.layers; ++l) {
        add(fmt::format("layer{}.ln1_g", l), n, 1);
        add(fmt::format("layer{}.ln1_b", l), n, 1);
        add(fmt::format("layer{}.w_qkv", l), 3 * n, n);
        add(fmt::format("layer{}.b_qkv", l), 3 * n, 1);
        add(fmt::format("layer{}.w_o", l), n, n);
        add(fmt::format("layer{}.b_o", l), n, 1);
        add(fmt::format("layer{}.ln2_g", l), n, 1);
        add(fmt::format("layer{}.ln2_b", l), n, 1);
        add(fmt::format("layer{}.w_fc1", l), hidden, n);
        add(fmt::format("layer{}.b_fc1", l), hidden, 1);
        add(fmt::format("layer{}.w_fc2", l), n, hidden);
        add(fmt::format("layer{}.b_fc2", l), n, 1);
    }
    add("lnf_g", n, 1);
    add("lnf_b", n, 1);
    for (std::size_t i = 0; i < sig_.size(); ++i) {
        add(fmt::format("out_w.{}", i), static_cast<int>(sig_[i]), n);
        add(fmt::format("out_b.{}", i), static_cast<int>(sig_[i]), 1);
    }
    params_.assign(offset, 0.0f);

    // Linear weights uniform(+-1/sqrt(fan_in)), biases zero, LayerNorm gains one,
    // positional encoding N(0, 0.02^2).
    Rng rng(cfg_.seed);
    for (const auto& v : views_) {
        float* p = params_.data() + v.offset;
        const bool is_gain = v.name.ends_with("_g");
        const bool is_weight = v.name.starts_with("in_w") || v.name.starts_with("out_w") || v.name.find(".w_") != std::string::npos;
        if (v.name == "pos") {
            for (std::size_t k = 0; k < v.size(); ++k) p[k] = static_cast<float>(rng.normal(0.0, 0.02));
        } else if (is_gain) {
            std::fill(p, p + v.size(), 1.0f);
        } else if (is_weight) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(v.cols));
            for (std::size_t k = 0; k < v.size(); ++k) p[k] = static_cast<float>(rng.uniform(-bound, bound));
        }
    }
}

const TensorView& Denoiser::tensor(const std::string& name) const {
    for (const auto& v : views_) {
        if (v.name == name) return v;
    }
    throw UsageError("denoiser has no tensor " + name);
}

void Denoiser::check_inputs(const Eigen::MatrixXf& theta_t, std::span<const int> t) const {
    if (static_cast<std::size_t>(theta_t.rows()) != theta_size_) {
        throw DataError(fmt::format("denoiser: theta has {} values, expected {}", theta_t.rows(), theta_size_));
    }
    if (static_cast<std::size_t>(theta_t.cols()) != t.size()) throw DataError("denoiser: one timestep per sample required");
    if (!theta_t.allFinite()) throw NumericError("denoiser: non-finite input theta");
    for (int s : t) {
        if (s < 0) throw DataError("denoiser: negative timestep");
    }
}

Eigen::MatrixXf Denoiser::forward(const Eigen::MatrixXf& theta_t, std::span<const int> t, Cache* cache) const {
    const int n = cfg_.n_emb;
    const auto nt = static_cast<int>(sig_.size());
    const int ntok = nt + 1;
    const auto batch = static_cast<int>(theta_t.cols());
    const int heads = cfg_.heads;
    const int d = n / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    const float* base = params_.data();
    auto mat = [&](std::size_t idx) {
        const auto& v = views_[idx];
        return CMapMat(base + v.offset, v.rows, v.cols);
    };
    auto vec = [&](std::size_t idx) {
        const auto& v = views_[idx];
        return CMapVec(base + v.offset, v.rows);
    };
    const std::size_t pos_idx = 2 * sig_.size();

    Mat x(n, ntok * batch);
    for (int i = 0; i < nt; ++i) {
        const Mat tok = (mat(2 * i) * theta_t.middleRows(static_cast<Eigen::Index>(sig_offsets_[i]),
                                                         static_cast<Eigen::Index>(sig_[i])))
                            .colwise() +
                        vec(2 * i + 1);
        for (int b = 0; b < batch; ++b) x.col(b * ntok + i) = tok.col(b);
    }
    for (int b = 0; b < batch; ++b) {
        const auto emb = timestep_embedding(t[b], n);
        x.col(b * ntok + nt) = CMapVec(emb.data(), n);
    }
    const auto pos = mat(pos_idx);
    for (int b = 0; b < batch; ++b) x.middleCols(b * ntok, ntok) += pos;

    if (cache != nullptr) cache->layers.resize(static_cast<std::size_t>(cfg_.layers));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::size_t li = pos_idx + 1 + static_cast<std::size_t>(kPerLayer * l);
        Cache::Layer* lc = cache != nullptr ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;
        if (lc != nullptr) lc->x_in = x;

        Mat a = layer_norm(x, vec(li + Ln1G), vec(li + Ln1B), lc != nullptr ? &lc->ln1 : nullptr);
        Mat qkv = (mat(li + WQkv) * a).colwise() + vec(li + BQkv);
        Mat attn(n, ntok * batch);
        if (lc != nullptr) lc->probs.resize(static_cast<std::size_t>(batch * heads));
        for (int b = 0; b < batch; ++b) {
            for (int h = 0; h < heads; ++h) {
                const auto q = qkv.block(h * d, b * ntok, d, ntok);
                const auto k = qkv.block(n + h * d, b * ntok, d, ntok);
                const auto v = qkv.block(2 * n + h * d, b * ntok, d, ntok);
                Mat p = (q.transpose() * k) * scale;
                softmax_rows(p);
                attn.block(h * d, b * ntok, d, ntok).noalias() = v * p.transpose();
                if (lc != nullptr) lc->probs[static_cast<std::size_t>(b * heads + h)] = std::move(p);
            }
        }
        x.noalias() += mat(li + WO) * attn;
        x.colwise() += vec(li + BO);
        if (lc != nullptr) {
            lc->a = std::move(a);
            lc->qkv = std::move(qkv);
            lc->attn = std::move(attn);
            lc->x_mid = x;
        }

        Mat c = layer_norm(x, vec(li + Ln2G), vec(li + Ln2B), lc != nullptr ? &lc->ln2 : nullptr);
        Mat u = (mat(li + WFc1) * c).colwise() + vec(li + BFc1);
        Mat g = u.unaryExpr([](float s) { return gelu(s); });
        x.noalias() += mat(li + WFc2) * g;
        x.colwise() += vec(li + BFc2);
        if (lc != nullptr) {
            lc->c = std::move(c);
            lc->u = std::move(u);
            lc->g = std::move(g);
        }
    }

    const std::size_t lnf_idx = pos_idx + 1 + static_cast<std::size_t>(kPerLayer * cfg_.layers);
    Mat hf = layer_norm(x, vec(lnf_idx), vec(lnf_idx + 1), cache != nullptr ? &cache->lnf : nullptr);

    Mat out(static_cast<Eigen::Index>(theta_size_), batch);
    Mat hi(n, batch);
    for (int i = 0; i < nt; ++i) {
        for (int b = 0; b < batch; ++b) hi.col(b) = hf.col(b * ntok + i);
        const std::size_t oi = lnf_idx + 2 + 2 * static_cast<std::size_t>(i);
        out.middleRows(static_cast<Eigen::Index>(sig_offsets_[i]), static_cast<Eigen::Index>(sig_[i])) =
            (mat(oi) * hi).colwise() + vec(oi + 1);
    }
    if (cache != nullptr) cache->hf = std::move(hf);
    return out;
}

Eigen::MatrixXf Denoiser::tokenize(std::span<const float> theta, int t) const {
    const Mat th = CMapMat(theta.data(), static_cast<Eigen::Index>(theta.size()), 1);
    const int ts[1] = {t};
    check_inputs(th, ts);
    const int n = cfg_.n_emb;
    const auto nt = static_cast<int>(sig_.size());
    const float* base = params_.data();
    Mat tokens(nt + 1, n);
    for (int i = 0; i < nt; ++i) {
        const auto& w = views_[2 * static_cast<std::size_t>(i)];
        const auto& bias = views_[2 * static_cast<std::size_t>(i) + 1];
        const Eigen::VectorXf tok =
            CMapMat(base + w.offset, w.rows, w.cols) *
                th.middleRows(static_cast<Eigen::Index>(sig_offsets_[i]), static_cast<Eigen::Index>(sig_[i])) +
            CMapVec(base + bias.offset, n);
        tokens.row(i) = tok.transpose();
    }
    const auto emb = timestep_embedding(t, n);
    tokens.row(nt) = CMapVec(emb.data(), n).transpose();
    const auto& pos = views_[2 * sig_.size()];
    tokens += CMapMat(base + pos.offset, n, nt + 1).transpose();
    return tokens;
}

std::vector<float> Denoiser::denoise(std::span<const float> theta_t, int t) const {
    const Mat th = CMapMat(theta_t.data(), static_cast<Eigen::Index>(theta_t.size()), 1);
    const int ts[1] = {t};
    const Mat out = predict_x0(th, ts);
    return {out.data(), out.data() + out.size()};
}

Eigen::MatrixXf Denoiser::predict_x0(const Eigen::MatrixXf& theta_t, std::span<const int> t) const {
    check_inputs(theta_t, t);
    // Batched GEMMs round a column differently depending on its position in the batch, so
    // inference runs one sample at a time to make each output independent of its batch.
    Mat out(theta_t.rows(), theta_t.cols());
    for (Eigen::Index b = 0; b < theta_t.cols(); ++b) {
        out.col(b) = forward(theta_t.col(b), t.subspan(static_cast<std::size_t>(b), 1), nullptr);
    }
    return out;
}

double Denoiser::loss_and_gradient(const Eigen::MatrixXf& theta_t, std::span<const int> t, const Eigen::MatrixXf& target,
                                   AlignedFloats& grad) const {
    check_inputs(theta_t, t);
    if (target.rows() != theta_t.rows() || target.cols() != theta_t.cols()) {
        throw DataError("denoiser: target shape differs from input shape");
    }
    Cache cache;
    const Mat pred = forward(theta_t, t, &cache);
    const Mat diff = pred - target;
    const double count = static_cast<double>(diff.size());
    const double loss = diff.cast<double>().squaredNorm() / count;
    const Mat dout = diff * static_cast<float>(2.0 / count);

    grad.assign(params_.size(), 0.0f);
    const int n = cfg_.n_emb;
    const auto nt = static_cast<int>(sig_.size());
    const int ntok = nt + 1;
    const auto batch = static_cast<int>(theta_t.cols());
    const int heads = cfg_.heads;
    const int d = n / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    const float* base = params_.data();
    auto mat = [&](std::size_t idx) {
        const auto& v = views_[idx];
        return CMapMat(base + v.offset, v.rows, v.cols);
    };
    auto vec = [&](std::size_t idx) {
        const auto& v = views_[idx];
        return CMapVec(base + v.offset, v.rows);
    };
    auto gmat = [&](std::size_t idx) {
        const auto& v = views_[idx];
        return MapMat(grad.data() + v.offset, v.rows, v.cols);
    };
    auto gvec = [&](std::size_t idx) {
        const auto& v = views_[idx];
        return MapVec(grad.data() + v.offset, v.rows);
    };
    const std::size_t pos_idx = 2 * sig_.size();
    const std::size_t lnf_idx = pos_idx + 1 + static_cast<std::size_t>(kPerLayer * cfg_.layers);

    Mat dhf = Mat::Zero(n, ntok * batch);
    Mat hi(n, batch);
    for (int i = 0; i < nt; ++i) {
        const std::size_t oi = lnf_idx + 2 + 2 * static_cast<std::size_t>(i);
        for (int b = 0; b < batch; ++b) hi.col(b) = cache.hf.col(b * ntok + i);
        const auto dslice = dout.middleRows(static_cast<Eigen::Index>(sig_offsets_[i]), static_cast<Eigen::Index>(sig_[i]));
        gmat(oi).noalias() += dslice * hi.transpose();
        gvec(oi + 1) += dslice.rowwise().sum();
        const Mat dhi = mat(oi).transpose() * dslice;
        for (int b = 0; b < batch; ++b) dhf.col(b * ntok + i) = dhi.col(b);
    }
    Mat dx = layer_norm_backward(dhf, vec(lnf_idx), cache.lnf, gvec(lnf_idx), gvec(lnf_idx + 1));

    for (int l = cfg_.layers - 1; l >= 0; --l) {
        const std::size_t li = pos_idx + 1 + static_cast<std::size_t>(kPerLayer * l);
        const auto& lc = cache.layers[static_cast<std::size_t>(l)];

        // x_out = x_mid + W_fc2 gelu(W_fc1 LN2(x_mid) + b_fc1) + b_fc2
        gmat(li + WFc2).noalias() += dx * lc.g.transpose();
        gvec(li + BFc2) += dx.rowwise().sum();
        Mat du = mat(li + WFc2).transpose() * dx;
        du.array() *= lc.u.unaryExpr([](float s) { return gelu_grad(s); }).array();
        gmat(li + WFc1).noalias() += du * lc.c.transpose();
        gvec(li + BFc1) += du.rowwise().sum();
        const Mat dc = mat(li + WFc1).transpose() * du;
        Mat dmid = dx + layer_norm_backward(dc, vec(li + Ln2G), lc.ln2, gvec(li + Ln2G), gvec(li + Ln2B));

        // x_mid = x_in + W_o attn + b_o
        gmat(li + WO).noalias() += dmid * lc.attn.transpose();
        gvec(li + BO) += dmid.rowwise().sum();
        const Mat dattn = mat(li + WO).transpose() * dmid;
        Mat dqkv(3 * n, ntok * batch);
        for (int b = 0; b < batch; ++b) {
            for (int h = 0; h < heads; ++h) {
                const Mat& p = lc.probs[static_cast<std::size_t>(b * heads + h)];
                const auto q = lc.qkv.block(h * d, b * ntok, d, ntok);
                const auto k = lc.qkv.block(n + h * d, b * ntok, d, ntok);
                const auto v = lc.qkv.block(2 * n + h * d, b * ntok, d, ntok);
                const auto dout_h = dattn.block(h * d, b * ntok, d, ntok);
                dqkv.block(2 * n + h * d, b * ntok, d, ntok).noalias() = dout_h * p;
                const Mat dp = dout_h.transpose() * v;
                const Eigen::VectorXf rowdot = dp.cwiseProduct(p).rowwise().sum();
                const Mat ds = p.cwiseProduct(dp.colwise() - rowdot) * scale;
                dqkv.block(h * d, b * ntok, d, ntok).noalias() = k * ds.transpose();
                dqkv.block(n + h * d, b * ntok, d, ntok).noalias() = q * ds;
            }
        }
        gmat(li + WQkv).noalias() += dqkv * lc.a.transpose();
        gvec(li + BQkv) += dqkv.rowwise().sum();
        const Mat da = mat(li + WQkv).transpose() * dqkv;
        dx = dmid + layer_norm_backward(da, vec(li + Ln1G), lc.ln1, gvec(li + Ln1G), gvec(li + Ln1B));
    }

    auto gpos = gmat(pos_idx);
    for (int b = 0; b < batch; ++b) gpos += dx.middleCols(b * ntok, ntok);
    Mat dtok(n, batch);
    for (int i = 0; i < nt; ++i) {
        for (int b = 0; b < batch; ++b) dtok.col(b) = dx.col(b * ntok + i);
        gmat(2 * static_cast<std::size_t>(i)).noalias() +=
            dtok * theta_t.middleRows(static_cast<Eigen::Index>(sig_offsets_[i]), static_cast<Eigen::Index>(sig_[i])).transpose();
        gvec(2 * static_cast<std::size_t>(i) + 1) += dtok.rowwise().sum();
    }
    return loss;
}

void save_denoiser(const std::filesystem::path& path, const Denoiser& model, const nlohmann::json& meta) {
    nlohmann::json header = meta.is_object() ? meta : nlohmann::json::object();
    header["config"] = to_json(model.config());
    header["signature"] = model.signature();
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& v : model.tensors()) tensors.push_back({{"name", v.name}, {"rows", v.rows}, {"cols", v.cols}});
    header["tensors"] = std::move(tensors);
    write_framed(path, kDenoiserMagic, header, model.parameters());
}

Denoiser load_denoiser(const std::filesystem::path& path, nlohmann::json* header) {
    FramedFile file = read_framed(path, kDenoiserMagic);
    try {
        Denoiser model(denoiser_config_from_json(file.header.at("config")),
                       file.header.at("signature").get<ShapeSignature>());
        const auto& tensors = file.header.at("tensors");
        if (tensors.size() != model.tensors().size()) throw DataError(path.string() + ": tensor list does not match config");
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            const auto& v = model.tensors()[i];
            if (tensors[i].at("name") != v.name || tensors[i].at("rows") != v.rows || tensors[i].at("cols") != v.cols) {
                throw DataError(fmt::format("{}: tensor {} does not match config", path.string(), v.name));
            }
        }
        if (file.values.size() != model.parameter_count()) {
            throw DataError(fmt::format("{}: expected {} parameters, found {}", path.string(), model.parameter_count(),
                                        file.values.size()));
        }
        std::copy(file.values.begin(), file.values.end(), model.parameters().begin());
        if (header != nullptr) *header = std::move(file.header);
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed denoiser header: " + e.what());
    } catch (const UsageError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace organdiff::weightspace
