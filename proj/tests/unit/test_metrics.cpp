#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "organdiff/error.hpp"
#include "organdiff/metrics/metrics.hpp"
#include "support/oracles.hpp"

using namespace organdiff;
using namespace organdiff::metrics;
using geometry::Vec3;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, const Vec3& center = Vec3::Zero(), double spread = 0.5) {
    Rng rng(seed);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        c.points.push_back(center + Vec3(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                                         rng.uniform(-spread, spread)));
    }
    return c;
}

/// Points on the z = z0 plane with a fixed normal.
PointCloud plane_cloud(int side, double z0, const Vec3& normal) {
    PointCloud c;
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            c.points.emplace_back(i * 0.01, j * 0.01, z0);
            c.normals.push_back(normal);
        }
    }
    return c;
}

/// Noisy sphere surface cloud; different seeds give different draws of the same shape.
PointCloud sphere_cloud(std::size_t n, double r, const Vec3& center, std::uint64_t seed) {
    Rng rng(seed);
    PointCloud c;
    while (c.points.size() < n) {
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        if (v.norm() < 1e-9) continue;
        c.points.push_back(center + r * v.normalized());
    }
    return c;
}

std::vector<PointCloud> clouds(const std::vector<std::vector<Vec3>>& pts) {
    std::vector<PointCloud> out;
    for (const auto& p : pts) out.push_back(PointCloud{p, {}});
    return out;
}

Eigen::MatrixXd brute_matrix(const std::vector<PointCloud>& a, const std::vector<PointCloud>& b) {
    Eigen::MatrixXd d(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = oracle::brute_chamfer(a[i].points, b[j].points);
    return d;
}

Vec3 rotate(const Vec3& p) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    return r * p + Vec3(0.3, -0.2, 0.1);
}

PointCloud transformed(const PointCloud& c) {
    PointCloud out;
    const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    for (const auto& p : c.points) out.points.push_back(rotate(p));
    for (const auto& n : c.normals) out.normals.push_back(r * n);
    return out;
}

}  // namespace

TEST_SUITE("nearest neighbor") {
    TEST_CASE("k-d tree equals brute force including ties") {
        // Lattice points (many exact ties) plus duplicates and random points.
        std::vector<Vec3> pts;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                for (int k = 0; k < 8; ++k) pts.emplace_back(i * 0.125, j * 0.125, k * 0.125);
        for (int i = 0; i < 100; ++i) pts.push_back(pts[static_cast<std::size_t>(i * 5)]);
        const auto extra = random_cloud(388, 3).points;
        pts.insert(pts.end(), extra.begin(), extra.end());
        REQUIRE(pts.size() == 1000);
        const KdTree tree(pts, 4);
        Rng rng(1);
        std::vector<Vec3> queries = random_cloud(2000, 9, Vec3::Constant(0.4), 0.6).points;
        for (int i = 0; i < 200; ++i) queries.push_back(pts[static_cast<std::size_t>(i * 3)]);
        for (int i = 0; i < 200; ++i) queries.emplace_back(0.0625 + 0.125 * (i % 7), 0.0625, 0.125 * (i % 5));
        for (const auto& q : queries) {
            const auto a = tree.nearest(q);
            const auto b = brute_nearest(pts, q);
            REQUIRE(a.index == b.index);
            REQUIRE(a.dist2 == b.dist2);
        }
    }

    TEST_CASE("empty input is rejected") {
        CHECK_THROWS_AS(KdTree(std::vector<Vec3>{}), DataError);
        CHECK_THROWS_AS(brute_nearest({}, Vec3::Zero()), DataError);
    }
}

TEST_SUITE("reconstruction metrics") {
    TEST_CASE("chamfer examples") {
        const auto a = random_cloud(500, 1);
        CHECK(chamfer_l1(a, a) == 0.0);
        CHECK(chamfer_l1(PointCloud{{Vec3(0, 0, 0)}, {}}, PointCloud{{Vec3(1, 0, 0)}, {}}) == 1.0);
        const auto b = random_cloud(400, 2);
        const double fast = chamfer_l1(a, b);
        CHECK(std::abs(fast - oracle::brute_chamfer(a.points, b.points)) <= 1e-9);
        CHECK(fast == chamfer_l1(b, a));
        CHECK(std::abs(chamfer_l1(transformed(a), transformed(b)) - fast) < 1e-9);
        CHECK_THROWS_AS(chamfer_l1(a, PointCloud{}), DataError);
    }

    TEST_CASE("normal consistency examples") {
        const auto p = plane_cloud(20, 0.0, Vec3(0, 0, 1));
        CHECK(normal_consistency(p, p) == doctest::Approx(1.0));
        CHECK(normal_consistency(p, plane_cloud(20, 0.05, Vec3(0, 0, 1))) == doctest::Approx(1.0));
        CHECK(std::abs(normal_consistency(p, plane_cloud(20, 0.0, Vec3(1, 0, 0)))) <= 1e-6);
        // Flipped normals count as consistent.
        CHECK(normal_consistency(p, plane_cloud(20, 0.0, Vec3(0, 0, -1))) == doctest::Approx(1.0));
        CHECK_THROWS_AS(normal_consistency(p, random_cloud(10, 1)), DataError);

        Rng rng(4);
        const auto s = geometry::surface_sample(geometry::make_icosphere(3, 0.4), 800, rng);
        const auto t = geometry::surface_sample(geometry::make_icosphere(3, 0.4), 800, rng);
        CHECK(std::abs(normal_consistency(transformed(s), transformed(t)) - normal_consistency(s, t)) < 1e-9);
    }

    TEST_CASE("f-score examples") {
        const auto a = random_cloud(300, 5);
        CHECK(f_score(a, a).f == 1.0);
        PointCloud far = a;
        for (auto& p : far.points) p.x() += 10 * 0.01 + 1.5;
        CHECK(f_score(a, far).f == 0.0);

        // Half of A sits on B, the other half 0.5 away; every point of B has a partner in A.
        PointCloud b, c;
        for (int i = 0; i < 50; ++i) {
            b.points.emplace_back(i * 0.1, 0, 0);
            c.points.emplace_back(i * 0.1, 0, 0);
            c.points.emplace_back(i * 0.1, 0.5, 0);
        }
        const auto s = f_score(c, b);
        CHECK(s.precision == 0.5);
        CHECK(s.recall == 1.0);
        CHECK(s.f == doctest::Approx(2.0 / 3.0));
        CHECK_THROWS_AS(f_score(a, a, 0.0), UsageError);
    }

    TEST_CASE("viou examples") {
        const auto sphere = geometry::make_icosphere(3, 0.4);
        Rng rng(11);
        const auto same = viou(sphere, sphere, 100000, rng);
        CHECK(same.value == doctest::Approx(1.0).epsilon(0.005));

        const auto other = geometry::make_icosphere(3, 0.4, Vec3(2, 0, 0));
        CHECK(viou(sphere, other, 20000, rng).value == 0.0);

        const auto s4 = geometry::make_icosphere(5, 0.4);
        const auto shifted = geometry::make_icosphere(5, 0.4, Vec3(0.4, 0, 0));
        const double lens = oracle::lens_volume(0.4, 0.4);
        const double expected = lens / (2 * oracle::sphere_volume(0.4) - lens);
        const auto r = viou(s4, shifted, 100000, rng);
        CHECK(std::abs(r.value - expected) < 0.01);
        CHECK(r.std_error > 0.0);
        CHECK(r.std_error < 0.005);

        geometry::TriMesh open = sphere;
        open.faces.pop_back();
        CHECK_THROWS_AS(viou(open, sphere, 100, rng), DataError);
        CHECK_THROWS_AS(viou(geometry::TriMesh{}, sphere, 100, rng), DataError);
    }

    TEST_CASE("viou is invariant under a shared rigid transform") {
        const auto a = geometry::make_icosphere(4, 0.3);
        const auto b = geometry::make_ellipsoid(4, Vec3(0.35, 0.25, 0.3), Vec3(0.1, 0, 0));
        auto move = [](geometry::TriMesh m) {
            for (auto& v : m.vertices) v = rotate(v);
            return m;
        };
        Rng r1(3), r2(4);
        const auto base = viou(a, b, 100000, r1);
        const auto moved = viou(move(a), move(b), 100000, r2);
        CHECK(std::abs(base.value - moved.value) < 4 * (base.std_error + moved.std_error));
    }
}

TEST_SUITE("set metrics") {
    TEST_CASE("mmd examples") {
        const auto x = random_cloud(200, 1), y = random_cloud(200, 2);
        const std::vector<PointCloud> s = {x, y, random_cloud(200, 3)};
        CHECK(mmd(s, s) == 0.0);
        const std::vector<PointCloud> g = {x}, r = {x, y};
        CHECK(mmd(g, r) == doctest::Approx(chamfer_l1(x, y) / 2).epsilon(1e-12));
        // Not symmetric: swapping roles changes which set is averaged over.
        CHECK(mmd(r, g) == 0.0);
        CHECK(mmd(g, r) != mmd(r, g));
    }

    TEST_CASE("coverage examples") {
        const std::vector<PointCloud> s = {random_cloud(100, 1), random_cloud(100, 2, Vec3(3, 0, 0)),
                                           random_cloud(100, 3, Vec3(0, 3, 0)), random_cloud(100, 4, Vec3(0, 0, 3))};
        CHECK(coverage(s, s) == 100.0);
        const std::vector<PointCloud> near_first = {random_cloud(100, 5), random_cloud(100, 6)};
        CHECK(coverage(near_first, s) == 25.0);
        for (std::size_t k = 1; k < s.size(); ++k) {
            CHECK(coverage(std::span(s).first(k), s) <= 100.0 * static_cast<double>(k) / 4.0);
        }
    }

    TEST_CASE("coverage and 1-NNA break ties by lowest index") {
        // D(g, r) all equal.
        const Eigen::MatrixXd d = Eigen::MatrixXd::Constant(3, 4, 0.5);
        CHECK(coverage(d) == 25.0);
        // Every pairwise distance ties, so each cloud picks the lowest pooled index other
        // than itself: generated clouds pick the other generated one (correct), references
        // pick generated cloud 0 (wrong).
        Eigen::MatrixXd gg(2, 2), rr(2, 2), gr(2, 2);
        gg << 0, 1, 1, 0;
        rr << 0, 1, 1, 0;
        gr << 1, 1, 1, 1;
        CHECK(one_nna(gg, rr, gr) == 50.0);
    }

    TEST_CASE("1-NNA examples") {
        std::vector<PointCloud> g, r;
        for (int i = 0; i < 6; ++i) g.push_back(random_cloud(60, 10 + i, Vec3::Zero(), 0.2));
        for (int i = 0; i < 6; ++i) r.push_back(random_cloud(60, 20 + i, Vec3(4, 0, 0), 0.2));
        CHECK(one_nna(g, r) == 100.0);
        CHECK(one_nna(g, r) == one_nna(r, g));

        // Each cloud's nearest neighbor is in the other class.
        const auto inter = clouds({{Vec3(0, 0, 0)}, {Vec3(10, 0, 0)}});
        const auto inter_r = clouds({{Vec3(0.1, 0, 0)}, {Vec3(10.1, 0, 0)}});
        CHECK(one_nna(inter, inter_r) == 0.0);
        CHECK_THROWS_AS(one_nna(std::span(g).first(1), r), UsageError);
    }

    TEST_CASE("1-NNA on identical generators stays near 50 percent") {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            std::vector<PointCloud> g, r;
            Rng rng(seed);
            auto draw = [&] {
                const double radius = rng.uniform(0.2, 0.4);
                const Vec3 center(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
                return sphere_cloud(128, radius, center, rng.engine()());
            };
            for (int i = 0; i < 64; ++i) g.push_back(draw());
            for (int i = 0; i < 64; ++i) r.push_back(draw());
            const double acc = one_nna(g, r);
            CHECK_MESSAGE(acc >= 35.0, "seed " << seed << " acc " << acc);
            CHECK_MESSAGE(acc <= 65.0, "seed " << seed << " acc " << acc);
            CHECK(acc == one_nna(r, g));
        }
    }

    TEST_CASE("set metrics equal brute-force double loops exactly") {
        std::vector<PointCloud> g, r;
        for (int i = 0; i < 12; ++i) g.push_back(random_cloud(50, 100 + i, Vec3(0.05 * i, 0, 0), 0.3));
        for (int i = 0; i < 20; ++i) r.push_back(random_cloud(50, 200 + i, Vec3(0, 0.04 * i, 0), 0.3));
        const Eigen::MatrixXd d_gr = brute_matrix(g, r);
        const Eigen::MatrixXd d_gg = brute_matrix(g, g);
        const Eigen::MatrixXd d_rr = brute_matrix(r, r);
        CHECK(chamfer_matrix(g, r) == d_gr);
        CHECK(chamfer_matrix(g) == d_gg);

        double sum = 0;
        for (Eigen::Index j = 0; j < d_gr.cols(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < d_gr.rows(); ++i) best = std::min(best, d_gr(i, j));
            sum += best;
        }
        CHECK(mmd(g, r) == sum / static_cast<double>(r.size()));

        std::set<Eigen::Index> covered;
        for (Eigen::Index i = 0; i < d_gr.rows(); ++i) {
            Eigen::Index best = 0;
            for (Eigen::Index j = 0; j < d_gr.cols(); ++j)
                if (d_gr(i, j) < d_gr(i, best)) best = j;
            covered.insert(best);
        }
        CHECK(coverage(g, r) == 100.0 * static_cast<double>(covered.size()) / static_cast<double>(r.size()));

        const auto ng = static_cast<Eigen::Index>(g.size()), n = ng + static_cast<Eigen::Index>(r.size());
        std::vector<PointCloud> pooled = g;
        pooled.insert(pooled.end(), r.begin(), r.end());
        int correct = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = -1;
            double bd = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double d = oracle::brute_chamfer(pooled[static_cast<std::size_t>(i)].points,
                                                       pooled[static_cast<std::size_t>(j)].points);
                if (best < 0 || d < bd) best = j, bd = d;
            }
            correct += ((i < ng) == (best < ng)) ? 1 : 0;
        }
        CHECK(one_nna(g, r) == 100.0 * correct / static_cast<double>(n));
    }

    TEST_CASE("chamfer and set metrics are invariant under a shared rigid transform") {
        std::vector<PointCloud> g, r, gt, rt;
        for (int i = 0; i < 4; ++i) g.push_back(random_cloud(80, 300 + i, Vec3(0.1 * i, 0, 0), 0.3));
        for (int i = 0; i < 5; ++i) r.push_back(random_cloud(80, 400 + i, Vec3(0, 0.1 * i, 0), 0.3));
        for (const auto& c : g) gt.push_back(transformed(c));
        for (const auto& c : r) rt.push_back(transformed(c));
        const auto a = set_metrics(g, r), b = set_metrics(gt, rt);
        CHECK(a.mmd == doctest::Approx(b.mmd).epsilon(1e-9));
        CHECK(a.cov == b.cov);
        CHECK(a.one_nna == b.one_nna);
        // The moment entries of the descriptor rotate with the data but are not an
        // orthonormal coordinate system, so FGD is only approximately rotation invariant.
        CHECK(a.fgd == doctest::Approx(b.fgd).epsilon(0.01));
    }

    TEST_CASE("frechet geometric distance is invariant under a shared translation") {
        std::vector<PointCloud> g, r, gt, rt;
        for (int i = 0; i < 4; ++i) g.push_back(random_cloud(80, 300 + i, Vec3(0.1 * i, 0, 0), 0.3));
        for (int i = 0; i < 5; ++i) r.push_back(random_cloud(80, 400 + i, Vec3(0, 0.1 * i, 0), 0.3));
        auto shift = [](PointCloud c) {
            for (auto& p : c.points) p += Vec3(0.25, -0.5, 0.125);
            return c;
        };
        for (const auto& c : g) gt.push_back(shift(c));
        for (const auto& c : r) rt.push_back(shift(c));
        CHECK(frechet_geom_distance(g, r) == doctest::Approx(frechet_geom_distance(gt, rt)).epsilon(1e-6));
    }
}

TEST_SUITE("frechet geometric distance") {
    TEST_CASE("descriptor layout") {
        Rng rng(2);
        const auto c = geometry::surface_sample(geometry::make_icosphere(4, 0.4), 4000, rng, false);
        const auto d = geometric_descriptor(c);
        REQUIRE(d.size() == kDescriptorDim);
        CHECK(d[0] >= d[1]);
        CHECK(d[1] >= d[2]);
        // Sphere: each covariance eigenvalue close to r^2 / 3.
        CHECK(d[0] == doctest::Approx(0.16 / 3).epsilon(0.05));
        CHECK(d[3] == doctest::Approx(0.16 / 3).epsilon(0.05));
        CHECK(d.segment(19, 32).sum() == doctest::Approx(1.0));
        // All radii are just under 0.4: bin floor(0.4 / 0.9 * 32) = 14 and its lower neighbor.
        Eigen::Index peak = 0;
        d.segment(19, 32).maxCoeff(&peak);
        CHECK(peak == 14);
        CHECK(d[19 + 13] + d[19 + 14] > 0.99);

        PointCloud far;
        far.points = {Vec3(-2, 0, 0), Vec3(2, 0, 0)};
        CHECK(geometric_descriptor(far)[19 + 31] == 1.0);
    }

    TEST_CASE("identical sets give zero") {
        std::vector<PointCloud> s;
        for (int i = 0; i < 6; ++i) s.push_back(random_cloud(300, 50 + i, Vec3::Zero(), 0.1 + 0.05 * i));
        CHECK(frechet_geom_distance(s, s) <= 1e-6);
    }

    TEST_CASE("frechet distance matches the Gaussian closed form") {
        const int dim = kDescriptorDim;
        Rng rng(77);
        auto random_spd = [&](double scale) {
            Eigen::MatrixXd a(dim, dim);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
            return Eigen::MatrixXd(scale * (a * a.transpose() / dim + 0.5 * Eigen::MatrixXd::Identity(dim, dim)));
        };
        const Eigen::MatrixXd s1 = random_spd(1.0), s2 = random_spd(2.0);
        Eigen::VectorXd m1(dim), m2(dim);
        for (int i = 0; i < dim; ++i) m1[i] = rng.normal(), m2[i] = rng.normal();
        const double expected = oracle::frechet_gaussian(m1, s1, m2, s2);

        auto draw = [&](const Eigen::VectorXd& m, const Eigen::MatrixXd& s, int n) {
            const Eigen::MatrixXd l = s.llt().matrixL();
            Eigen::MatrixXd x(n, dim);
            for (int r = 0; r < n; ++r) {
                Eigen::VectorXd z(dim);
                for (int i = 0; i < dim; ++i) z[i] = rng.normal();
                x.row(r) = (m + l * z).transpose();
            }
            return x;
        };
        Eigen::VectorXd mu1, mu2;
        Eigen::MatrixXd c1, c2;
        mean_and_covariance(draw(m1, s1, 500), mu1, c1);
        mean_and_covariance(draw(m2, s2, 500), mu2, c2);
        const double got = frechet_distance(mu1, c1, mu2, c2);
        CHECK(std::abs(got - expected) <= 0.05 * expected);
        // Exact inputs reproduce the oracle closely.
        CHECK(frechet_distance(m1, s1, m2, s2) == doctest::Approx(expected).epsilon(1e-6));
    }

    TEST_CASE("scaling one set increases the distance") {
        std::vector<PointCloud> a, b, scaled;
        for (int i = 0; i < 8; ++i) a.push_back(sphere_cloud(400, 0.2 + 0.02 * i, Vec3::Zero(), 500 + i));
        for (int i = 0; i < 8; ++i) b.push_back(sphere_cloud(400, 0.2 + 0.02 * i, Vec3::Zero(), 600 + i));
        for (auto c : b) {
            for (auto& p : c.points) p *= 2.0;
            scaled.push_back(c);
        }
        CHECK(frechet_geom_distance(a, scaled) > frechet_geom_distance(a, b));
        CHECK_THROWS_AS(frechet_geom_distance(std::span(a).first(1), b), UsageError);
    }

    TEST_CASE("report keys") {
        std::vector<PointCloud> a, b;
        for (int i = 0; i < 3; ++i) a.push_back(sphere_cloud(100, 0.3, Vec3::Zero(), 700 + i));
        for (int i = 0; i < 3; ++i) b.push_back(sphere_cloud(100, 0.35, Vec3::Zero(), 800 + i));
        const auto j = to_json(set_metrics(a, b));
        for (const char* k : {"mmd_x100", "cov_pct", "one_nna_pct", "fgd"}) CHECK(j.contains(k));
        CHECK(j["mmd_x100"].get<double>() == doctest::Approx(100 * mmd(a, b)));
    }
}
