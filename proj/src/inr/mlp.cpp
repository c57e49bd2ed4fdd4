#include "organdiff/inr/mlp.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "organdiff/checkpoint.hpp"
#include "organdiff/error.hpp"
#include "organdiff/rng.hpp"

namespace organdiff::inr {

namespace {

constexpr std::array<std::array<int, 2>, kLayers> kShapes = {{
    {kHidden, kInputDim}, {kHidden, kHidden}, {kHidden, kHidden}, {1, kHidden},
}};

constexpr std::size_t kChunk = 8192;

Eigen::MatrixXf encode_batch(std::span<const Vec3> points, const PeConfig& pe) {
    Eigen::MatrixXf x(pe.dim(), static_cast<Eigen::Index>(points.size()));
    for (std::size_t j = 0; j < points.size(); ++j) positional_encode(points[j], pe, x.col(static_cast<Eigen::Index>(j)).data());
    return x;
}

void check_batch(std::span<const Vec3> points, const PeConfig& pe) {
    if (pe.dim() != kInputDim) throw DataError(fmt::format("positional encoding has {} dims, MLP expects {}", pe.dim(), kInputDim));
    for (const auto& p : points) {
        if (!p.allFinite()) throw DataError("non-finite input coordinate");
    }
}

}  // namespace

void positional_encode(const Vec3& x, const PeConfig& cfg, float* out) {
    int k = 0;
    for (int c = 0; c < 3; ++c) {
        const double v = x[c];
        if (cfg.include_input) out[k++] = static_cast<float>(v);
        double freq = cfg.base;
        for (int l = 0; l < cfg.num_frequencies; ++l, freq *= 2.0) {
            out[k++] = static_cast<float>(std::sin(freq * v));
            out[k++] = static_cast<float>(std::cos(freq * v));
        }
    }
}

std::vector<float> positional_encode(const Vec3& x, const PeConfig& cfg) {
    std::vector<float> out(static_cast<std::size_t>(cfg.dim()));
    positional_encode(x, cfg, out.data());
    return out;
}

MlpParams MlpParams::zeros() {
    MlpParams p;
    for (int l = 0; l < kLayers; ++l) {
        p.weights[l] = MatrixRM::Zero(kShapes[l][0], kShapes[l][1]);
        p.biases[l] = Eigen::VectorXf::Zero(kShapes[l][0]);
    }
    return p;
}

MlpParams MlpParams::kaiming_uniform(std::uint64_t seed) {
    MlpParams p = zeros();
    Rng rng(seed);
    for (int l = 0; l < kLayers; ++l) {
        const double bound = std::sqrt(6.0 / kShapes[l][1]);
        for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) {
            p.weights[l].data()[i] = static_cast<float>(rng.uniform(-bound, bound));
        }
    }
    return p;
}

std::span<float> MlpParams::tensor(int i) {
    if (i % 2 == 0) return {weights[i / 2].data(), static_cast<std::size_t>(weights[i / 2].size())};
    return {biases[i / 2].data(), static_cast<std::size_t>(biases[i / 2].size())};
}

std::span<const float> MlpParams::tensor(int i) const {
    if (i % 2 == 0) return {weights[i / 2].data(), static_cast<std::size_t>(weights[i / 2].size())};
    return {biases[i / 2].data(), static_cast<std::size_t>(biases[i / 2].size())};
}

const char* MlpParams::tensor_name(int i) {
    static constexpr std::array<const char*, 8> names = {"W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4"};
    return names.at(static_cast<std::size_t>(i));
}

void MlpParams::validate() const {
    for (int l = 0; l < kLayers; ++l) {
        if (weights[l].rows() != kShapes[l][0] || weights[l].cols() != kShapes[l][1]) {
            throw DataError(fmt::format("tensor {} has shape {}x{}, expected {}x{}", tensor_name(2 * l), weights[l].rows(),
                                        weights[l].cols(), kShapes[l][0], kShapes[l][1]));
        }
        if (biases[l].size() != kShapes[l][0]) {
            throw DataError(fmt::format("tensor {} has {} elements, expected {}", tensor_name(2 * l + 1), biases[l].size(),
                                        kShapes[l][0]));
        }
    }
    for (int i = 0; i < 8; ++i) {
        const auto t = tensor(i);
        if (!std::all_of(t.begin(), t.end(), [](float v) { return std::isfinite(v); })) {
            throw NumericError(fmt::format("tensor {} contains non-finite values", tensor_name(i)));
        }
    }
}

bool MlpParams::operator==(const MlpParams& other) const {
    for (int i = 0; i < 8; ++i) {
        const auto a = tensor(i);
        const auto b = other.tensor(i);
        if (a.size() != b.size() || !std::equal(a.begin(), a.end(), b.begin())) return false;
    }
    return true;
}

std::vector<float> mlp_forward(const MlpParams& params, std::span<const Vec3> points, const PeConfig& pe) {
    params.validate();
    check_batch(points, pe);
    std::vector<float> logits(points.size());
    for (std::size_t start = 0; start < points.size(); start += kChunk) {
        const auto chunk = points.subspan(start, std::min(kChunk, points.size() - start));
        Eigen::MatrixXf h = encode_batch(chunk, pe);
        for (int l = 0; l < kLayers; ++l) {
            Eigen::MatrixXf z = params.weights[l] * h;
            z.colwise() += params.biases[l];
            h = l + 1 < kLayers ? Eigen::MatrixXf(z.cwiseMax(0.0f)) : z;
        }
        std::copy(h.data(), h.data() + h.size(), logits.begin() + static_cast<std::ptrdiff_t>(start));
    }
    return logits;
}

double bce_loss(std::span<const float> logits, std::span<const std::uint8_t> labels) {
    if (logits.empty()) throw DataError("bce_loss on an empty batch");
    if (logits.size() != labels.size()) throw DataError("bce_loss: logits and labels differ in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        sum += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
    }
    return sum / static_cast<double>(logits.size());
}

double mlp_gradients(const MlpParams& params, std::span<const Vec3> points, std::span<const std::uint8_t> labels,
                     MlpParams& grads, const PeConfig& pe) {
    params.validate();
    check_batch(points, pe);
    if (points.empty()) throw DataError("mlp_gradients on an empty batch");
    if (points.size() != labels.size()) throw DataError("mlp_gradients: points and labels differ in length");
    const auto n = static_cast<Eigen::Index>(points.size());

    std::array<Eigen::MatrixXf, kLayers + 1> act;
    act[0] = encode_batch(points, pe);
    for (int l = 0; l < kLayers; ++l) {
        act[l + 1] = params.weights[l] * act[l];
        act[l + 1].colwise() += params.biases[l];
        if (l + 1 < kLayers) act[l + 1] = act[l + 1].cwiseMax(0.0f);
    }

    std::vector<float> logits(act[kLayers].data(), act[kLayers].data() + n);
    const double loss = bce_loss(logits, labels);

    // dL/dz at the output: (sigmoid(z) - o) / n.
    Eigen::MatrixXf delta(1, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double z = logits[static_cast<std::size_t>(j)];
        const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        delta(0, j) = static_cast<float>((s - labels[static_cast<std::size_t>(j)]) / static_cast<double>(n));
    }

    grads = MlpParams::zeros();
    for (int l = kLayers - 1; l >= 0; --l) {
        grads.weights[l].noalias() = delta * act[l].transpose();
        grads.biases[l] = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXf back = params.weights[l].transpose() * delta;
        delta = back.cwiseProduct((act[l].array() > 0.0f).cast<float>().matrix());
    }
    return loss;
}

void save_mlp(const std::filesystem::path& path, const MlpParams& params, std::uint64_t seed, const PeConfig& pe) {
    params.validate();
    nlohmann::json header;
    header["signature"] = kSignature;
    header["pe"] = {{"num_frequencies", pe.num_frequencies}, {"include_input", pe.include_input}, {"base", pe.base}};
    header["seed"] = seed;
    std::vector<float> values;
    values.reserve(kParamCount);
    for (int i = 0; i < 8; ++i) {
        const auto t = params.tensor(i);
        values.insert(values.end(), t.begin(), t.end());
    }
    write_framed(path, kMlpMagic, header, values);
}

MlpParams load_mlp(const std::filesystem::path& path, nlohmann::json* header) {
    FramedFile file = read_framed(path, kMlpMagic);
    try {
        const auto sig = file.header.at("signature").get<std::vector<std::size_t>>();
        if (!std::equal(sig.begin(), sig.end(), kSignature.begin(), kSignature.end())) {
            throw DataError(path.string() + ": checkpoint signature does not match the occupancy MLP");
        }
        const auto& pe = file.header.at("pe");
        const PeConfig stored{pe.at("num_frequencies").get<int>(), pe.at("include_input").get<bool>(),
                              pe.at("base").get<double>()};
        if (!(stored == PeConfig{})) throw DataError(path.string() + ": unsupported positional encoding in checkpoint");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed checkpoint header: " + e.what());
    }
    if (file.values.size() != kParamCount) {
        throw DataError(fmt::format("{}: expected {} values, found {}", path.string(), kParamCount, file.values.size()));
    }
    MlpParams params = MlpParams::zeros();
    std::size_t offset = 0;
    for (int i = 0; i < 8; ++i) {
        auto t = params.tensor(i);
        std::copy_n(file.values.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.begin());
        offset += t.size();
    }
    if (header != nullptr) *header = std::move(file.header);
    return params;
}

}  // namespace organdiff::inr
