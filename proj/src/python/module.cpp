#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "organdiff/diffusion/schedule.hpp"
#include "organdiff/error.hpp"
#include "organdiff/geometry/mesh_io.hpp"
#include "organdiff/geometry/qa.hpp"
#include "organdiff/geometry/winding_number.hpp"
#include "organdiff/inr/fit.hpp"
#include "organdiff/metrics/metrics.hpp"
#include "organdiff/pipeline/commands.hpp"
#include "organdiff/weightspace/theta.hpp"

namespace py = pybind11;
using namespace organdiff;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<geometry::Vec3> to_vec3(const Points& p) {
    std::vector<geometry::Vec3> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) out[static_cast<std::size_t>(i)] = p.row(i).transpose();
    return out;
}

Points from_vec3(const std::vector<geometry::Vec3>& v) {
    Points p(static_cast<Eigen::Index>(v.size()), 3);
    for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
    return p;
}

geometry::TriMesh to_mesh(const Points& v, const Faces& f) {
    geometry::TriMesh m;
    m.vertices = to_vec3(v);
    m.faces.resize(static_cast<std::size_t>(f.rows()));
    for (Eigen::Index i = 0; i < f.rows(); ++i) m.faces[static_cast<std::size_t>(i)] = {f(i, 0), f(i, 1), f(i, 2)};
    m.validate();
    return m;
}

py::tuple from_mesh(const geometry::TriMesh& m) {
    Faces f(static_cast<Eigen::Index>(m.faces.size()), 3);
    for (std::size_t i = 0; i < m.faces.size(); ++i) {
        for (int k = 0; k < 3; ++k) f(static_cast<Eigen::Index>(i), k) = m.faces[i][static_cast<std::size_t>(k)];
    }
    return py::make_tuple(from_vec3(m.vertices), f);
}

std::vector<geometry::PointCloud> to_clouds(const std::vector<Points>& clouds) {
    std::vector<geometry::PointCloud> out;
    out.reserve(clouds.size());
    for (const auto& c : clouds) out.push_back({to_vec3(c), {}});
    return out;
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "organdiff native core";
    m.attr("THETA_SIZE") = weightspace::signature_total(weightspace::mlp_signature());

    static py::exception<UsageError> usage_exc(m, "UsageError", PyExc_ValueError);
    static py::exception<DataError> data_exc(m, "DataError", PyExc_RuntimeError);
    static py::exception<NumericError> numeric_exc(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const UsageError& e) {
            py::set_error(usage_exc, e.what());
        } catch (const DataError& e) {
            py::set_error(data_exc, e.what());
        } catch (const NumericError& e) {
            py::set_error(numeric_exc, e.what());
        }
    });

    m.def("make_icosphere", [](int subdivisions, double radius) {
        return from_mesh(geometry::make_icosphere(subdivisions, radius));
    }, py::arg("subdivisions"), py::arg("radius"));
    m.def("load_mesh", [](const std::filesystem::path& p) { return from_mesh(geometry::load_mesh(p)); }, py::arg("path"));
    m.def("qa_report", [](const Points& v, const Faces& f) {
        return json_to_py(geometry::to_json(geometry::qa_report(to_mesh(v, f))));
    }, py::arg("vertices"), py::arg("faces"));
    m.def("winding_numbers", [](const Points& v, const Faces& f, const Points& q) {
        const auto mesh = to_mesh(v, f);
        const geometry::WindingNumberTree tree(mesh);
        const auto pts = to_vec3(q);
        const auto w = tree.evaluate(pts);
        return Eigen::VectorXd::Map(w.data(), static_cast<Eigen::Index>(w.size())).eval();
    }, py::arg("vertices"), py::arg("faces"), py::arg("points"));

    m.def("positional_encode", [](const Points& q) {
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(q.rows(), inr::PeConfig{}.dim());
        for (Eigen::Index i = 0; i < q.rows(); ++i) inr::positional_encode(q.row(i).transpose(), {}, out.row(i).data());
        return out;
    }, py::arg("points"));
    m.def("load_theta", [](const std::filesystem::path& p) {
        const auto theta = weightspace::flatten(inr::load_mlp(p));
        return Eigen::VectorXf::Map(theta.data(), static_cast<Eigen::Index>(theta.size())).eval();
    }, py::arg("path"), "Flat weight vector of an MLP checkpoint.");
    m.def("mlp_logits", [](const Eigen::VectorXf& theta, const Points& q) {
        const auto params = weightspace::unflatten({theta.data(), static_cast<std::size_t>(theta.size())});
        const auto pts = to_vec3(q);
        const auto z = inr::mlp_forward(params, pts);
        return Eigen::VectorXf::Map(z.data(), static_cast<Eigen::Index>(z.size())).eval();
    }, py::arg("theta"), py::arg("points"));
    m.def("reconstruct", [](const Eigen::VectorXf& theta, int resolution) {
        const auto params = weightspace::unflatten({theta.data(), static_cast<std::size_t>(theta.size())});
        return from_mesh(inr::reconstruct(params, resolution).mesh);
    }, py::arg("theta"), py::arg("resolution") = 128);

    m.def("alpha_bars", [](int T, double beta_min, double beta_max) {
        return diffusion::make_schedule(T, beta_min, beta_max).alpha_bars;
    }, py::arg("T") = 1000, py::arg("beta_min") = 1e-4, py::arg("beta_max") = 0.02,
       "alpha_bar_t for t = 0..T (alpha_bar_0 = 1).");

    m.def("chamfer_l1", [](const Points& a, const Points& b) {
        return metrics::chamfer_l1({to_vec3(a), {}}, {to_vec3(b), {}});
    }, py::arg("a"), py::arg("b"));
    m.def("set_metrics", [](const std::vector<Points>& generated, const std::vector<Points>& reference) {
        const auto sg = to_clouds(generated);
        const auto sr = to_clouds(reference);
        return json_to_py(metrics::to_json(metrics::set_metrics(sg, sr)));
    }, py::arg("generated"), py::arg("reference"),
       "{mmd_x100, cov_pct, one_nna_pct, fgd} of two lists of (n, 3) clouds.");

    m.def("split_counts", [](std::size_t n, double train, double val, double test) {
        const auto c = pipeline::split_counts(n, {train, val, test});
        return py::make_tuple(c.train, c.val, c.test);
    }, py::arg("n"), py::arg("train") = 0.80, py::arg("val") = 0.05, py::arg("test") = 0.15);
    m.def("qa", [](const std::filesystem::path& input_dir, const std::filesystem::path& manifest) {
        return json_to_py(pipeline::cmd_qa(input_dir, manifest).report);
    }, py::arg("input_dir"), py::arg("manifest"), "Runs the qa command; returns the report.");
}
