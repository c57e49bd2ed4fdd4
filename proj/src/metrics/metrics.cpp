#include "organdiff/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "organdiff/error.hpp"
#include "organdiff/geometry/qa.hpp"
#include "organdiff/geometry/winding_number.hpp"

namespace organdiff::metrics {

namespace {

void require_points(const PointCloud& c, const char* what) {
    if (c.points.empty()) throw DataError(fmt::format("{}: empty point cloud", what));
}

void require_watertight(const TriMesh& m, const char* which) {
    if (m.empty()) throw DataError(fmt::format("viou: mesh {} is empty", which));
    if (!geometry::qa_report(m).watertight) throw DataError(fmt::format("viou: mesh {} is not watertight", which));
}

double mean_nn_distance(const PointCloud& from, const KdTree& to) {
    double sum = 0.0;
    for (const auto& p : from.points) sum += std::sqrt(to.nearest(p).dist2);
    return sum / static_cast<double>(from.points.size());
}

}  // namespace

ViouResult viou(const TriMesh& a, const TriMesh& b, std::size_t n_samples, Rng& rng) {
    if (n_samples == 0) throw UsageError("viou: n_samples must be positive");
    require_watertight(a, "A");
    require_watertight(b, "B");
    geometry::Aabb box = geometry::bounding_box(a);
    box.expand(geometry::bounding_box(b));
    const geometry::WindingNumberTree wa(a), wb(b);
    std::size_t both = 0, either = 0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const Vec3 p(rng.uniform(box.min.x(), box.max.x()), rng.uniform(box.min.y(), box.max.y()),
                     rng.uniform(box.min.z(), box.max.z()));
        const bool ia = wa(p) > 0.5;
        const bool ib = wb(p) > 0.5;
        both += (ia && ib) ? 1 : 0;
        either += (ia || ib) ? 1 : 0;
    }
    if (either == 0) throw DataError("viou: no sample inside either solid");
    ViouResult r;
    r.n_samples = n_samples;
    r.value = static_cast<double>(both) / static_cast<double>(either);
    r.std_error = std::sqrt(r.value * (1.0 - r.value) / static_cast<double>(either));
    return r;
}

double chamfer_l1(const PointCloud& a, const KdTree& ta, const PointCloud& b, const KdTree& tb) {
    require_points(a, "chamfer_l1");
    require_points(b, "chamfer_l1");
    return 0.5 * (mean_nn_distance(a, tb) + mean_nn_distance(b, ta));
}

double chamfer_l1(const PointCloud& a, const PointCloud& b) {
    require_points(a, "chamfer_l1");
    require_points(b, "chamfer_l1");
    return chamfer_l1(a, KdTree(a.points), b, KdTree(b.points));
}

double normal_consistency(const PointCloud& a, const PointCloud& b) {
    require_points(a, "normal_consistency");
    require_points(b, "normal_consistency");
    if (!a.has_normals() || !b.has_normals()) throw DataError("normal_consistency: both clouds need normals");
    const KdTree ta(a.points), tb(b.points);
    auto one_way = [](const PointCloud& from, const PointCloud& to, const KdTree& tree) {
        double sum = 0.0;
        for (std::size_t i = 0; i < from.points.size(); ++i) {
            sum += std::abs(from.normals[i].dot(to.normals[tree.nearest(from.points[i]).index]));
        }
        return sum / static_cast<double>(from.points.size());
    };
    return 0.5 * (one_way(a, b, tb) + one_way(b, a, ta));
}

FScore f_score(const PointCloud& a, const PointCloud& b, double tau) {
    if (!(tau > 0.0)) throw UsageError(fmt::format("f_score: tau must be positive, got {}", tau));
    require_points(a, "f_score");
    require_points(b, "f_score");
    const KdTree ta(a.points), tb(b.points);
    const double tau2 = tau * tau;
    auto within = [tau2](const PointCloud& from, const KdTree& to) {
        std::size_t n = 0;
        for (const auto& p : from.points) n += to.nearest(p).dist2 <= tau2 ? 1 : 0;
        return static_cast<double>(n) / static_cast<double>(from.points.size());
    };
    FScore s;
    s.precision = within(a, tb);
    s.recall = within(b, ta);
    s.f = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

ReconstructionMetrics reconstruction_metrics(const TriMesh& pred, const TriMesh& ref, Rng& rng,
                                             std::size_t cloud_points, std::size_t viou_samples, double tau) {
    ReconstructionMetrics m;
    m.viou = viou(pred, ref, viou_samples, rng);
    const PointCloud cp = geometry::surface_sample(pred, cloud_points, rng);
    const PointCloud cr = geometry::surface_sample(ref, cloud_points, rng);
    m.chamfer_l1 = chamfer_l1(cp, cr);
    m.nc = normal_consistency(cp, cr);
    m.fscore = f_score(cp, cr, tau).f;
    return m;
}

nlohmann::json to_json(const ReconstructionMetrics& m) {
    return {{"viou", m.viou.value},
            {"viou_std_error", m.viou.std_error},
            {"chamfer_l1", m.chamfer_l1},
            {"nc", m.nc},
            {"fscore", m.fscore}};
}

namespace {

std::vector<KdTree> trees_of(std::span<const PointCloud> s) {
    std::vector<KdTree> t;
    t.reserve(s.size());
    for (const auto& c : s) {
        require_points(c, "set metrics");
        t.emplace_back(c.points);
    }
    return t;
}

void require_nonempty(std::span<const PointCloud> s, const char* what) {
    if (s.empty()) throw UsageError(fmt::format("{}: empty set", what));
}

}  // namespace

Eigen::MatrixXd chamfer_matrix(std::span<const PointCloud> sg, std::span<const PointCloud> sr) {
    const auto tg = trees_of(sg);
    const auto tr = trees_of(sr);
    Eigen::MatrixXd d(static_cast<Eigen::Index>(sg.size()), static_cast<Eigen::Index>(sr.size()));
    for (std::size_t g = 0; g < sg.size(); ++g) {
        for (std::size_t r = 0; r < sr.size(); ++r) {
            d(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(r)) = chamfer_l1(sg[g], tg[g], sr[r], tr[r]);
        }
    }
    return d;
}

Eigen::MatrixXd chamfer_matrix(std::span<const PointCloud> s) {
    const auto t = trees_of(s);
    const auto n = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
            d(i, j) = d(j, i) = chamfer_l1(s[ui], t[ui], s[uj], t[uj]);
        }
    }
    return d;
}

double mmd(const Eigen::MatrixXd& d_gr) {
    if (d_gr.size() == 0) throw UsageError("mmd: empty set");
    double sum = 0.0;
    for (Eigen::Index r = 0; r < d_gr.cols(); ++r) sum += d_gr.col(r).minCoeff();
    return sum / static_cast<double>(d_gr.cols());
}

double mmd(std::span<const PointCloud> sg, std::span<const PointCloud> sr) {
    require_nonempty(sg, "mmd");
    require_nonempty(sr, "mmd");
    return mmd(chamfer_matrix(sg, sr));
}

double coverage(const Eigen::MatrixXd& d_gr) {
    if (d_gr.size() == 0) throw UsageError("coverage: empty set");
    std::vector<bool> hit(static_cast<std::size_t>(d_gr.cols()), false);
    for (Eigen::Index g = 0; g < d_gr.rows(); ++g) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < d_gr.cols(); ++r) {
            if (d_gr(g, r) < d_gr(g, best)) best = r;
        }
        hit[static_cast<std::size_t>(best)] = true;
    }
    const auto covered = std::count(hit.begin(), hit.end(), true);
    return 100.0 * static_cast<double>(covered) / static_cast<double>(d_gr.cols());
}

double coverage(std::span<const PointCloud> sg, std::span<const PointCloud> sr) {
    require_nonempty(sg, "coverage");
    require_nonempty(sr, "coverage");
    return coverage(chamfer_matrix(sg, sr));
}

double one_nna(const Eigen::MatrixXd& d_gg, const Eigen::MatrixXd& d_rr, const Eigen::MatrixXd& d_gr) {
    const Eigen::Index ng = d_gg.rows(), nr = d_rr.rows();
    if (ng < 2 || nr < 2) throw UsageError("one_nna: each set needs at least 2 clouds");
    if (d_gg.cols() != ng || d_rr.cols() != nr || d_gr.rows() != ng || d_gr.cols() != nr) {
        throw DataError("one_nna: distance matrix shapes disagree");
    }
    const Eigen::Index n = ng + nr;
    auto dist = [&](Eigen::Index i, Eigen::Index j) {
        if (i < ng && j < ng) return d_gg(i, j);
        if (i >= ng && j >= ng) return d_rr(i - ng, j - ng);
        return i < ng ? d_gr(i, j - ng) : d_gr(j, i - ng);
    };
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = dist(i, j);
            if (best < 0 || d < best_d) {
                best = j;
                best_d = d;
            }
        }
        correct += ((i < ng) == (best < ng)) ? 1 : 0;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

double one_nna(std::span<const PointCloud> sg, std::span<const PointCloud> sr) {
    if (sg.size() < 2 || sr.size() < 2) throw UsageError("one_nna: each set needs at least 2 clouds");
    return one_nna(chamfer_matrix(sg), chamfer_matrix(sr), chamfer_matrix(sg, sr));
}

Eigen::VectorXd geometric_descriptor(const PointCloud& cloud) {
    require_points(cloud, "geometric_descriptor");
    const auto n = static_cast<double>(cloud.points.size());
    Vec3 c = Vec3::Zero();
    for (const auto& p : cloud.points) c += p;
    c /= n;

    std::array<double, 6> m2{};
    std::array<double, 10> m3{};
    constexpr int kBins = 32;
    constexpr double kMaxRadius = 0.9;
    std::array<double, kBins> hist{};
    for (const auto& p : cloud.points) {
        const Vec3 q = p - c;
        const double x = q.x(), y = q.y(), z = q.z();
        m2[0] += x * x, m2[1] += x * y, m2[2] += x * z, m2[3] += y * y, m2[4] += y * z, m2[5] += z * z;
        m3[0] += x * x * x, m3[1] += x * x * y, m3[2] += x * x * z, m3[3] += x * y * y, m3[4] += x * y * z;
        m3[5] += x * z * z, m3[6] += y * y * y, m3[7] += y * y * z, m3[8] += y * z * z, m3[9] += z * z * z;
        const auto bin = static_cast<int>(q.norm() / kMaxRadius * kBins);
        hist[static_cast<std::size_t>(std::clamp(bin, 0, kBins - 1))] += 1.0;
    }
    for (auto& v : m2) v /= n;
    for (auto& v : m3) v /= n;
    for (auto& v : hist) v /= n;

    Eigen::Matrix3d cov;
    cov << m2[0], m2[1], m2[2], m2[1], m2[3], m2[4], m2[2], m2[4], m2[5];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov, Eigen::EigenvaluesOnly);
    const Eigen::Vector3d ev = eig.eigenvalues();  // ascending

    Eigen::VectorXd d(kDescriptorDim);
    d << ev[2], ev[1], ev[0];
    for (int i = 0; i < 6; ++i) d[3 + i] = m2[static_cast<std::size_t>(i)];
    for (int i = 0; i < 10; ++i) d[9 + i] = m3[static_cast<std::size_t>(i)];
    for (int i = 0; i < kBins; ++i) d[19 + i] = hist[static_cast<std::size_t>(i)];
    return d;
}

void mean_and_covariance(const Eigen::MatrixXd& x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    if (x.rows() < 2) throw UsageError("covariance needs at least 2 samples");
    mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& s2) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(0.5 * (s1 + s1.transpose()));
    const Eigen::VectorXd l1 = e1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd root1 = e1.eigenvectors() * l1.asDiagonal() * e1.eigenvectors().transpose();
    const Eigen::MatrixXd m = root1 * s2 * root1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    const double root_trace = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double value = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * root_trace;
    return std::max(0.0, value);
}

double frechet_geom_distance(std::span<const PointCloud> sg, std::span<const PointCloud> sr) {
    if (sg.size() < 2 || sr.size() < 2) throw UsageError("frechet_geom_distance: each set needs at least 2 clouds");
    auto stack = [](std::span<const PointCloud> s) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(s.size()), kDescriptorDim);
        for (std::size_t i = 0; i < s.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = geometric_descriptor(s[i]);
        return x;
    };
    Eigen::VectorXd mg, mr;
    Eigen::MatrixXd cg, cr;
    mean_and_covariance(stack(sg), mg, cg);
    mean_and_covariance(stack(sr), mr, cr);
    return frechet_distance(mg, cg, mr, cr);
}

SetMetricsReport set_metrics(std::span<const PointCloud> sg, std::span<const PointCloud> sr) {
    require_nonempty(sg, "set_metrics");
    require_nonempty(sr, "set_metrics");
    const Eigen::MatrixXd d_gr = chamfer_matrix(sg, sr);
    SetMetricsReport r;
    r.mmd = mmd(d_gr);
    r.cov = coverage(d_gr);
    if (sg.size() >= 2 && sr.size() >= 2) {
        r.one_nna = one_nna(chamfer_matrix(sg), chamfer_matrix(sr), d_gr);
        r.fgd = frechet_geom_distance(sg, sr);
    } else {
        r.one_nna = std::numeric_limits<double>::quiet_NaN();
        r.fgd = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

nlohmann::json to_json(const SetMetricsReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"mmd_x100", num(100.0 * r.mmd)}, {"cov_pct", num(r.cov)}, {"one_nna_pct", num(r.one_nna)},
            {"fgd", num(r.fgd)}};
}

std::vector<PointCloud> sample_clouds(std::span<const TriMesh> meshes, std::uint64_t seed, std::size_t n) {
    std::vector<PointCloud> out;
    out.reserve(meshes.size());
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        Rng rng(derive_seed(seed, i));
        out.push_back(geometry::surface_sample(meshes[i], n, rng, false));
    }
    return out;
}

}  // namespace organdiff::metrics
