#pragma once

#include <span>
#include <vector>

#include "organdiff/inr/mlp.hpp"

namespace organdiff::weightspace {

/// MLP tensors concatenated in signature order, row-major within each tensor.
using FlatTheta = std::vector<float>;
using ShapeSignature = std::vector<std::size_t>;

ShapeSignature mlp_signature();
std::size_t signature_total(const ShapeSignature& sig);

/// Throws DataError naming the offending tensor when params are mis-shaped.
FlatTheta flatten(const inr::MlpParams& params);
/// Throws DataError on a length mismatch or a signature other than the MLP's.
inr::MlpParams unflatten(std::span<const float> theta, const ShapeSignature& sig = mlp_signature());

/// Global scalar standardization shared by every coordinate.
struct ThetaStats {
    double mean = 0.0;
    double std = 1.0;
};

/// Mean and population standard deviation over all coordinates of all thetas. Throws
/// DataError on an empty set or zero spread.
ThetaStats compute_stats(std::span<const FlatTheta> thetas);
FlatTheta standardize(std::span<const float> theta, const ThetaStats& stats);
FlatTheta destandardize(std::span<const float> theta, const ThetaStats& stats);

}  // namespace organdiff::weightspace
