#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "organdiff/geometry/mesh.hpp"

namespace organdiff::inr {

using geometry::Vec3;
using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Positional encoding. Per coordinate c the output holds, in order, the raw value (when
/// include_input) and then sin(base 2^k c), cos(base 2^k c) for k = 0..L-1. Coordinates are
/// encoded x block, then y block, then z block.
struct PeConfig {
    int num_frequencies = 4;
    bool include_input = true;
    double base = std::numbers::pi;

    int dim() const { return 3 * ((include_input ? 1 : 0) + 2 * num_frequencies); }
    bool operator==(const PeConfig&) const = default;
};

inline constexpr int kHidden = 128;
inline constexpr int kInputDim = 27;
inline constexpr int kLayers = 4;

/// Element counts of W1, b1, W2, b2, W3, b3, W4, b4.
inline constexpr std::array<std::size_t, 8> kSignature = {3456, 128, 16384, 128, 16384, 128, 128, 1};
inline constexpr std::size_t kParamCount = 36737;

/// Writes cfg.dim() values to `out`.
void positional_encode(const Vec3& x, const PeConfig& cfg, float* out);
std::vector<float> positional_encode(const Vec3& x, const PeConfig& cfg = {});

/// Occupancy MLP 27 -> 128 -> 128 -> 128 -> 1 with ReLU hidden layers. Weights are
/// row-major (out x in), so flattening tensor by tensor gives row-major slices.
struct MlpParams {
    std::array<MatrixRM, kLayers> weights;
    std::array<Eigen::VectorXf, kLayers> biases;

    static MlpParams zeros();
    /// Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) weights, zero biases.
    static MlpParams kaiming_uniform(std::uint64_t seed);

    /// Tensor `i` in signature order (W1, b1, W2, ...).
    std::span<float> tensor(int i);
    std::span<const float> tensor(int i) const;
    static const char* tensor_name(int i);

    /// Throws DataError naming the first tensor whose shape is wrong, or whose values are
    /// not finite.
    void validate() const;
    bool operator==(const MlpParams& other) const;
};

/// Logits for each point, in input order.
std::vector<float> mlp_forward(const MlpParams& params, std::span<const Vec3> points, const PeConfig& pe = {});

/// Mean binary cross-entropy of sigmoid(logits) against 0/1 labels, evaluated as
/// max(z, 0) - z o + log(1 + exp(-|z|)). Throws DataError on an empty or mismatched batch.
double bce_loss(std::span<const float> logits, std::span<const std::uint8_t> labels);

/// Reverse-mode gradients of bce_loss(mlp_forward(params, points), labels); `grads` is
/// resized to the parameter shapes. Returns the loss.
double mlp_gradients(const MlpParams& params, std::span<const Vec3> points, std::span<const std::uint8_t> labels,
                     MlpParams& grads, const PeConfig& pe = {});

inline constexpr const char* kMlpMagic = "INRMLP01";

/// Checkpoint: magic, JSON header {signature, pe, seed}, then the tensors in signature order.
void save_mlp(const std::filesystem::path& path, const MlpParams& params, std::uint64_t seed,
              const PeConfig& pe = {});
MlpParams load_mlp(const std::filesystem::path& path, nlohmann::json* header = nullptr);

}  // namespace organdiff::inr
