#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "organdiff/geometry/mesh.hpp"
#include "organdiff/geometry/sampling.hpp"
#include "organdiff/metrics/kdtree.hpp"
#include "organdiff/rng.hpp"

namespace organdiff::metrics {

using geometry::PointCloud;
using geometry::TriMesh;

/// Points per mesh for the set-level metrics.
inline constexpr std::size_t kSetCloudPoints = 2048;

// ---- reconstruction metrics ----

struct ViouResult {
    double value = 0.0;
    /// Binomial standard error of the estimate over the samples in the union.
    double std_error = 0.0;
    std::size_t n_samples = 0;
};

/// Monte-Carlo volumetric IoU: uniform samples in the box spanning both bounding boxes,
/// inside tests by winding number. Throws DataError if either mesh is not watertight or
/// no sample lands in either solid.
ViouResult viou(const TriMesh& a, const TriMesh& b, std::size_t n_samples, Rng& rng);

/// 0.5 (mean_a min_b |a - b| + mean_b min_a |a - b|). DataError on an empty cloud.
double chamfer_l1(const PointCloud& a, const PointCloud& b);
double chamfer_l1(const PointCloud& a, const KdTree& ta, const PointCloud& b, const KdTree& tb);

/// 0.5 (mean_a |n_a . n_NN_B(a)| + mean_b |n_b . n_NN_A(b)|). DataError without normals.
double normal_consistency(const PointCloud& a, const PointCloud& b);

struct FScore {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

/// Precision: fraction of A within tau of B; recall: fraction of B within tau of A.
/// UsageError unless tau > 0.
FScore f_score(const PointCloud& a, const PointCloud& b, double tau = 0.01);

struct ReconstructionMetrics {
    ViouResult viou;
    double chamfer_l1 = 0.0;
    double nc = 0.0;
    double fscore = 0.0;
};

/// All four reconstruction metrics of `pred` against `ref`; the two surfaces are sampled
/// with `cloud_points` points each.
ReconstructionMetrics reconstruction_metrics(const TriMesh& pred, const TriMesh& ref, Rng& rng,
                                             std::size_t cloud_points = 100000, std::size_t viou_samples = 100000,
                                             double tau = 0.01);

nlohmann::json to_json(const ReconstructionMetrics& m);

// ---- set metrics (Sg generated, Sr reference) ----

/// D(g, r) = chamfer_l1(Sg[g], Sr[r]).
Eigen::MatrixXd chamfer_matrix(std::span<const PointCloud> sg, std::span<const PointCloud> sr);
/// Symmetric matrix of pairwise chamfer distances within one set (zero diagonal).
Eigen::MatrixXd chamfer_matrix(std::span<const PointCloud> s);

/// Mean over r of min over g of D(g, r). Raw value; reports multiply by 100.
double mmd(const Eigen::MatrixXd& d_gr);
double mmd(std::span<const PointCloud> sg, std::span<const PointCloud> sr);

/// Percentage of references that are the nearest reference (lowest index on ties) of some
/// generated cloud.
double coverage(const Eigen::MatrixXd& d_gr);
double coverage(std::span<const PointCloud> sg, std::span<const PointCloud> sr);

/// Leave-one-out 1-NN accuracy over Sg and Sr pooled (generated first), in percent. Ties
/// go to the lowest pooled index. UsageError unless both sets have at least 2 clouds.
double one_nna(const Eigen::MatrixXd& d_gg, const Eigen::MatrixXd& d_rr, const Eigen::MatrixXd& d_gr);
double one_nna(std::span<const PointCloud> sg, std::span<const PointCloud> sr);

/// 51 values: covariance eigenvalues (descending), the 6 second-order and 10 third-order
/// central moments (xx xy xz yy yz zz, xxx xxy xxz xyy xyz xzz yyy yyz yzz zzz), and a
/// 32-bin histogram of |p - centroid| over [0, 0.9] summing to 1; radii beyond 0.9 fall in
/// the last bin.
inline constexpr int kDescriptorDim = 51;
Eigen::VectorXd geometric_descriptor(const PointCloud& cloud);

/// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)), with the root trace taken as the sum of
/// square roots of the eigenvalues of S1^(1/2) S2 S1^(1/2); negative eigenvalues clamp to 0.
double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& s2);

/// Sample mean and (n - 1)-normalized covariance of the rows of `x`.
void mean_and_covariance(const Eigen::MatrixXd& x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov);

/// Frechet distance between the descriptor populations. UsageError unless each set has at
/// least 2 clouds.
double frechet_geom_distance(std::span<const PointCloud> sg, std::span<const PointCloud> sr);

struct SetMetricsReport {
    double mmd = 0.0;
    double cov = 0.0;
    double one_nna = 0.0;
    double fgd = 0.0;
};

SetMetricsReport set_metrics(std::span<const PointCloud> sg, std::span<const PointCloud> sr);

/// {mmd_x100, cov_pct, one_nna_pct, fgd}.
nlohmann::json to_json(const SetMetricsReport& r);

/// kSetCloudPoints surface samples per mesh, mesh i drawing from derive_seed(seed, i).
std::vector<PointCloud> sample_clouds(std::span<const TriMesh> meshes, std::uint64_t seed,
                                      std::size_t n = kSetCloudPoints);

}  // namespace organdiff::metrics
