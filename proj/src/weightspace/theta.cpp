#include "organdiff/weightspace/theta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "organdiff/error.hpp"

namespace organdiff::weightspace {

ShapeSignature mlp_signature() { return {inr::kSignature.begin(), inr::kSignature.end()}; }

std::size_t signature_total(const ShapeSignature& sig) { return std::accumulate(sig.begin(), sig.end(), std::size_t{0}); }

FlatTheta flatten(const inr::MlpParams& params) {
    FlatTheta theta;
    theta.reserve(inr::kParamCount);
    for (int i = 0; i < 8; ++i) {
        const auto t = params.tensor(i);
        if (t.size() != inr::kSignature[i]) {
            throw DataError(fmt::format("flatten: tensor {} has {} elements, expected {}", inr::MlpParams::tensor_name(i),
                                        t.size(), inr::kSignature[i]));
        }
        theta.insert(theta.end(), t.begin(), t.end());
    }
    // Element counts alone do not catch a transposed weight.
    params.validate();
    return theta;
}

inr::MlpParams unflatten(std::span<const float> theta, const ShapeSignature& sig) {
    if (sig != mlp_signature()) throw DataError("unflatten: signature does not describe the occupancy MLP");
    if (theta.size() != signature_total(sig)) {
        throw DataError(fmt::format("unflatten: theta has {} values, signature needs {}", theta.size(), signature_total(sig)));
    }
    auto params = inr::MlpParams::zeros();
    std::size_t offset = 0;
    for (int i = 0; i < 8; ++i) {
        auto t = params.tensor(i);
        std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.begin());
        offset += t.size();
    }
    return params;
}

ThetaStats compute_stats(std::span<const FlatTheta> thetas) {
    if (thetas.empty()) throw DataError("compute_stats: no thetas");
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& t : thetas) {
        for (float v : t) sum += v;
        count += t.size();
    }
    if (count == 0) throw DataError("compute_stats: empty thetas");
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (const auto& t : thetas) {
        for (float v : t) sq += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(sq / static_cast<double>(count));
    if (!(sd > 0.0) || !std::isfinite(sd)) throw DataError("compute_stats: thetas have zero or non-finite spread");
    return {mean, sd};
}

FlatTheta standardize(std::span<const float> theta, const ThetaStats& stats) {
    FlatTheta out(theta.size());
    std::transform(theta.begin(), theta.end(), out.begin(),
                   [&](float v) { return static_cast<float>((v - stats.mean) / stats.std); });
    return out;
}

FlatTheta destandardize(std::span<const float> theta, const ThetaStats& stats) {
    FlatTheta out(theta.size());
    std::transform(theta.begin(), theta.end(), out.begin(),
                   [&](float v) { return static_cast<float>(v * stats.std + stats.mean); });
    return out;
}

}  // namespace organdiff::weightspace
