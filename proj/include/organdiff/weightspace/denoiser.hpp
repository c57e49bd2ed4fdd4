#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/StdVector>
#include <json.hpp>

#include "organdiff/weightspace/theta.hpp"

namespace organdiff::weightspace {

struct DenoiserConfig {
    int n_emb = 2880;
    int layers = 12;
    int heads = 16;
    int mlp_ratio = 4;
    std::uint64_t seed = 0;

    /// n_emb 256, 4 layers, 4 heads.
    static DenoiserConfig desk();
    /// Throws UsageError unless all sizes are positive and heads divides n_emb.
    void validate() const;
};

nlohmann::json to_json(const DenoiserConfig& cfg);
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

/// Sinusoidal embedding of step t: entries k < dim/2 are sin(t w_k), the next dim/2 are
/// cos(t w_k), with w_k = 10000^(-2k/dim). An odd trailing entry is zero.
std::vector<float> timestep_embedding(int t, int dim);

/// Anything that predicts clean thetas from noisy ones. Columns are samples.
class X0Predictor {
public:
    virtual ~X0Predictor() = default;
    virtual std::size_t theta_size() const = 0;
    virtual Eigen::MatrixXf predict_x0(const Eigen::MatrixXf& theta_t, std::span<const int> t) const = 0;
};

/// Parameter and gradient storage. Eigen's vectorized reductions depend on the base
/// alignment, so a fixed alignment keeps results bitwise reproducible across runs.
using AlignedFloats = std::vector<float, Eigen::aligned_allocator<float>>;

/// Named slice of the flat parameter buffer. Matrices are stored column-major.
struct TensorView {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Pre-norm Transformer encoder over 9 tokens: one per signature tensor, each made by its
/// own affine projection to n_emb, plus the timestep embedding as the last token. A
/// learnable positional encoding is added to all 9. After a final LayerNorm, token i is
/// projected back to tensor i by its own output projection; the time token's output is
/// discarded.
///
/// Parameter order in the flat buffer: for each tensor i: in_w[i] (n_emb x size_i),
/// in_b[i]; pos (n_emb x 9); per layer: ln1_g, ln1_b, w_qkv (3n x n), b_qkv, w_o, b_o,
/// ln2_g, ln2_b, w_fc1 (r n x n), b_fc1, w_fc2 (n x r n), b_fc2; lnf_g, lnf_b; for each
/// tensor i: out_w[i] (size_i x n_emb), out_b[i].
class Denoiser : public X0Predictor {
public:
    explicit Denoiser(const DenoiserConfig& cfg, ShapeSignature sig = mlp_signature());

    const DenoiserConfig& config() const { return cfg_; }
    const ShapeSignature& signature() const { return sig_; }
    std::size_t theta_size() const override { return theta_size_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<float> parameters() { return params_; }
    std::span<const float> parameters() const { return params_; }
    const std::vector<TensorView>& tensors() const { return views_; }
    const TensorView& tensor(const std::string& name) const;

    /// Input tokens (9 x n_emb, one row per token) before the first Transformer layer.
    Eigen::MatrixXf tokenize(std::span<const float> theta, int t) const;

    std::vector<float> denoise(std::span<const float> theta_t, int t) const;
    Eigen::MatrixXf predict_x0(const Eigen::MatrixXf& theta_t, std::span<const int> t) const override;

    /// Mean over batch and coordinates of (predict_x0(theta_t, t) - target)^2, with its
    /// gradient with respect to every parameter written to `grad` (resized to match).
    double loss_and_gradient(const Eigen::MatrixXf& theta_t, std::span<const int> t, const Eigen::MatrixXf& target,
                             AlignedFloats& grad) const;

private:
    struct Cache;
    Eigen::MatrixXf forward(const Eigen::MatrixXf& theta_t, std::span<const int> t, Cache* cache) const;
    void check_inputs(const Eigen::MatrixXf& theta_t, std::span<const int> t) const;

    DenoiserConfig cfg_;
    ShapeSignature sig_;
    std::size_t theta_size_ = 0;
    std::vector<std::size_t> sig_offsets_;
    AlignedFloats params_;
    std::vector<TensorView> views_;
};

inline constexpr const char* kDenoiserMagic = "HDXFMR01";

/// Header: config, signature, the caller's `meta` (stats, schedule, epoch) and the tensor
/// list; payload: the flat parameter buffer.
void save_denoiser(const std::filesystem::path& path, const Denoiser& model, const nlohmann::json& meta);
Denoiser load_denoiser(const std::filesystem::path& path, nlohmann::json* header = nullptr);

}  // namespace organdiff::weightspace
