#include "organdiff/pipeline/commands.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "organdiff/checkpoint.hpp"
#include "organdiff/error.hpp"
#include "organdiff/geometry/mesh_io.hpp"
#include "organdiff/inr/fit.hpp"
#include "organdiff/metrics/metrics.hpp"
#include "organdiff/rng.hpp"
#include "organdiff/weightspace/theta.hpp"

namespace organdiff::pipeline {

namespace {

void say(const Log& log, const std::string& line) {
    if (log) log(line);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

fs::path manifest_dir(const fs::path& manifest_path) {
    return manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

Manifest require_manifest(const fs::path& path) {
    if (!fs::exists(path)) throw DataError(fmt::format("manifest {} not found (run `qa` first)", path.string()));
    return load_manifest(path);
}

// Seed for everything drawn while fitting one shape; keyed by id so that adding shapes
// leaves existing fits unchanged.
std::uint64_t shape_seed(std::uint64_t seed, const std::string& id) { return derive_seed(seed, fnv1a64(id)); }

}  // namespace

std::string status_table(const Manifest& m) {
    std::map<ShapeStatus, std::size_t> counts;
    for (const auto& e : m.entries) ++counts[e.status()];
    const double total = static_cast<double>(m.entries.size());
    std::string out = fmt::format("{:<18}{:>8}{:>10}\n", "Status", "Count", "Percent");
    for (auto s : geometry::kAllStatuses) {
        const std::size_t c = counts[s];
        const double pct = total > 0 ? 100.0 * static_cast<double>(c) / total : 0.0;
        out += fmt::format("{:<18}{:>8}{:>9.2f}%\n", geometry::status_label(s), c, pct);
    }
    out += fmt::format("{:<18}{:>8}\n", "Total", m.entries.size());
    return out;
}

QaResult cmd_qa(const fs::path& input_dir, const fs::path& manifest_path, const Log& log) {
    if (!fs::is_directory(input_dir)) throw UsageError(fmt::format("{} is not a directory", input_dir.string()));
    const fs::path base = manifest_dir(manifest_path);

    std::vector<fs::path> files;
    for (const auto& de : fs::directory_iterator(input_dir)) {
        if (!de.is_regular_file()) continue;
        const auto ext = lower(de.path().extension().string());
        if (ext == ".obj" || ext == ".stl") files.push_back(de.path());
    }
    std::sort(files.begin(), files.end());

    // A rerun keeps human review, splits and fits of shapes it already knows.
    Manifest previous;
    if (fs::exists(manifest_path)) previous = load_manifest(manifest_path);

    QaResult result;
    nlohmann::json rows = nlohmann::json::array();
    std::map<std::string, int> stems;
    for (const auto& f : files) ++stems[f.stem().string()];

    for (const auto& f : files) {
        ManifestEntry e;
        e.id = stems[f.stem().string()] > 1 ? f.filename().string() : f.stem().string();
        e.mesh = relative_to(base, f);
        nlohmann::json row{{"id", e.id}, {"mesh", e.mesh}};
        try {
            const auto mesh = geometry::load_mesh(f);
            const auto qa = geometry::qa_report(mesh);
            e.qa_status = qa.suggested_status;
            row["qa"] = geometry::to_json(qa);
        } catch (const EmptyMeshError& err) {
            e.qa_status = ShapeStatus::NoFullShape;
            e.error = err.what();
        } catch (const std::exception& err) {
            e.qa_status = ShapeStatus::NotUsable;
            e.error = err.what();
            say(log, fmt::format("warning: {}: {}", e.id, err.what()));
        }
        if (const auto* old = previous.find(e.id); old != nullptr && old->mesh == e.mesh) {
            e.human_status = old->human_status;
            e.split = old->split;
            e.mlp = old->mlp;
            e.metrics = old->metrics;
        }
        row["suggested_status"] = geometry::status_label(e.qa_status);
        row["error"] = e.error ? nlohmann::json(*e.error) : nlohmann::json(nullptr);
        rows.push_back(std::move(row));
        result.manifest.entries.push_back(std::move(e));
    }
    if (files.empty()) say(log, fmt::format("warning: no .obj or .stl files in {}", input_dir.string()));

    nlohmann::json distribution = nlohmann::json::array();
    for (auto s : geometry::kAllStatuses) {
        const auto n = static_cast<std::size_t>(std::count_if(result.manifest.entries.begin(),
                                                              result.manifest.entries.end(),
                                                              [s](const ManifestEntry& e) { return e.status() == s; }));
        const double pct = files.empty() ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(files.size());
        distribution.push_back({{"status", geometry::status_label(s)}, {"count", n}, {"percent", pct}});
    }
    result.table = status_table(result.manifest);
    result.report = {{"input_dir", input_dir.string()},
                     {"total", files.size()},
                     {"distribution", std::move(distribution)},
                     {"entries", std::move(rows)}};

    save_manifest(result.manifest, manifest_path);
    write_json(base / "qa_report.json", result.report);
    return result;
}

SplitCounts split_counts(std::size_t n, const SplitRatios& r) {
    SplitCounts c;
    // The epsilon keeps exact products such as 20 * 0.8 from flooring to 15.
    c.train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.train + 1e-9));
    c.val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.val + 1e-9));
    c.train = std::min(c.train, n);
    c.val = std::min(c.val, n - c.train);
    c.test = n - c.train - c.val;
    return c;
}

SplitCounts assign_splits(Manifest& m, std::uint64_t seed, const SplitRatios& r, std::size_t min_usable) {
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        m.entries[i].split = Split::None;
        if (m.entries[i].status() == ShapeStatus::Usable) usable.push_back(i);
    }
    if (usable.size() < min_usable) {
        throw DataError(fmt::format("split needs at least {} Usable entries, found {}", min_usable, usable.size()));
    }
    Rng rng(seed);
    std::shuffle(usable.begin(), usable.end(), rng.engine());
    const auto c = split_counts(usable.size(), r);
    for (std::size_t k = 0; k < usable.size(); ++k) {
        auto& e = m.entries[usable[k]];
        e.split = k < c.train ? Split::Train : (k < c.train + c.val ? Split::Val : Split::Test);
    }
    return c;
}

SplitCounts cmd_split(const fs::path& manifest_path, const RunConfig& cfg, const Log& log) {
    auto m = require_manifest(manifest_path);
    const auto c = assign_splits(m, cfg.seed, cfg.split, cfg.min_usable);
    save_manifest(m, manifest_path);
    say(log, fmt::format("split: train {} / val {} / test {}", c.train, c.val, c.test));
    return c;
}

FitSummary cmd_fit(const fs::path& manifest_path, const RunConfig& cfg, const fs::path& out_dir, bool deterministic,
                   const Log& log) {
    auto m = require_manifest(manifest_path);
    const fs::path base = manifest_dir(manifest_path);
    fs::create_directories(out_dir);
    FitSummary summary;

    std::size_t usable = 0;
    for (const auto& e : m.entries) usable += e.status() == ShapeStatus::Usable ? 1 : 0;
    if (usable == 0) say(log, "warning: no Usable entries to fit");

    std::size_t done = 0;
    for (auto& e : m.entries) {
        if (e.status() != ShapeStatus::Usable) continue;
        ++done;
        const fs::path ckpt = out_dir / (e.id + ".mlp");
        if (fs::exists(ckpt)) {
            try {
                (void)inr::load_mlp(ckpt);
                e.mlp = relative_to(base, ckpt);
                ++summary.skipped;
                say(log, fmt::format("[{}/{}] {}: checkpoint exists, skipped", done, usable, e.id));
                continue;
            } catch (const Error&) {
                say(log, fmt::format("[{}/{}] {}: unreadable checkpoint, refitting", done, usable, e.id));
            }
        }
        try {
            const auto mesh = geometry::normalize_to_unit_cube(geometry::load_mesh(resolve(base, e.mesh)));
            inr::FitConfig fc = cfg.fit;
            fc.seed = shape_seed(cfg.seed, e.id);
            auto fit = inr::fit_mlp(mesh, fc);
            inr::save_mlp(ckpt, fit.params, fc.seed);
            e.mlp = relative_to(base, ckpt);
            e.error.reset();

            const auto rec = inr::reconstruct(fit.params, cfg.fit_resolution);
            nlohmann::json metrics{{"final_bce", fit.epoch_loss.back()}};
            if (rec.empty_surface) {
                e.error = "reconstruction has no surface";
            } else {
                // The checkpoint stands even when the reconstruction cannot be scored.
                try {
                    Rng rng(derive_seed(fc.seed, 1));
                    const auto rm = metrics::reconstruction_metrics(rec.mesh, mesh, rng, cfg.fit_metric_points,
                                                                    cfg.fit_viou_samples);
                    metrics.update(metrics::to_json(rm));
                } catch (const DataError& err) {
                    e.error = std::string("metrics: ") + err.what();
                }
            }
            e.metrics = std::move(metrics);
            ++summary.fitted;
            say(log, fmt::format("[{}/{}] {}: bce {:.5f}{}", done, usable, e.id, fit.epoch_loss.back(),
                                 e.metrics->contains("viou")
                                     ? fmt::format(" viou {:.4f}", (*e.metrics)["viou"].get<double>())
                                     : std::string()));
        } catch (const Error& err) {
            e.error = err.what();
            ++summary.failed;
            if (!summary.failure) summary.failure = err.kind();
            say(log, fmt::format("warning: [{}/{}] {}: failed: {}", done, usable, e.id, err.what()));
        }
        save_manifest(m, manifest_path);
    }
    save_manifest(m, manifest_path);

    auto run = reproducibility_block("fit", cfg, deterministic);
    run["fitted"] = summary.fitted;
    run["skipped"] = summary.skipped;
    run["failed"] = summary.failed;
    write_json(out_dir / "run.json", run);
    return summary;
}

namespace {

std::vector<weightspace::FlatTheta> split_thetas(const Manifest& m, const fs::path& base, Split split) {
    std::vector<weightspace::FlatTheta> out;
    for (const auto& e : m.entries) {
        if (e.split != split) continue;
        if (!e.mlp) {
            throw DataError(fmt::format("entry '{}' ({} split) has no MLP checkpoint (run `fit` first)", e.id,
                                        split_name(split)));
        }
        const fs::path p = resolve(base, *e.mlp);
        if (!fs::exists(p)) {
            throw DataError(fmt::format("MLP checkpoint {} of entry '{}' is missing (run `fit` first)", p.string(), e.id));
        }
        out.push_back(weightspace::flatten(inr::load_mlp(p)));
    }
    return out;
}

}  // namespace

TrainSummary cmd_train(const fs::path& manifest_path, const RunConfig& cfg, const fs::path& out_dir,
                       bool deterministic, const Log& log) {
    const auto m = require_manifest(manifest_path);
    const fs::path base = manifest_dir(manifest_path);
    const auto train_set = split_thetas(m, base, Split::Train);
    const auto val_set = split_thetas(m, base, Split::Val);
    if (train_set.size() < 2) {
        throw DataError(fmt::format("train split has {} fitted shapes, at least 2 are needed (run `split`)",
                                    train_set.size()));
    }
    say(log, fmt::format("train: {} train / {} val thetas, {} epochs", train_set.size(), val_set.size(),
                         cfg.train.epochs));

    const auto sched = cfg.schedule();
    const int every = std::max(1, cfg.train.validate_every);
    auto res = diffusion::train(train_set, val_set, cfg.train, cfg.denoiser, sched, [&](int epoch, double loss) {
        if ((epoch + 1) % every == 0 || epoch + 1 == cfg.train.epochs) {
            say(log, fmt::format("epoch {}/{} loss {:.6f}", epoch + 1, cfg.train.epochs, loss));
        }
    });

    fs::create_directories(out_dir);
    weightspace::save_denoiser(out_dir / "last.ckpt", res.model, diffusion::checkpoint_meta(res.stats, sched, cfg.train.epochs));
    weightspace::Denoiser best = res.model;
    std::copy(res.best_parameters.begin(), res.best_parameters.end(), best.parameters().begin());
    weightspace::save_denoiser(out_dir / "best.ckpt", best, diffusion::checkpoint_meta(res.stats, sched, res.best_epoch));

    std::map<int, double> val(res.val_loss.begin(), res.val_loss.end());
    std::string csv = "epoch,train_loss,val_loss\n";
    for (std::size_t i = 0; i < res.train_loss.size(); ++i) {
        const int epoch = static_cast<int>(i) + 1;
        const auto it = val.find(epoch);
        csv += fmt::format("{},{:.9g},{}\n", epoch, res.train_loss[i],
                           it == val.end() ? std::string() : fmt::format("{:.9g}", it->second));
    }
    write_text_atomic(out_dir / "loss.csv", csv);

    TrainSummary s{train_set.size(), val_set.size(), res.best_epoch, res.train_loss.back()};
    auto run = reproducibility_block("train", cfg, deterministic);
    run["train_count"] = s.train_count;
    run["val_count"] = s.val_count;
    run["best_epoch"] = s.best_epoch;
    run["final_train_loss"] = s.final_loss;
    if (!val_set.empty()) run["best_val_loss"] = res.best_val_loss;
    write_json(out_dir / "run.json", run);
    return s;
}

std::size_t cmd_sample(const fs::path& checkpoint, const RunConfig& cfg, const fs::path& out_dir, bool deterministic,
                       const Log& log) {
    if (!fs::exists(checkpoint)) {
        throw DataError(fmt::format("denoiser checkpoint {} not found (run `train` first)", checkpoint.string()));
    }
    const auto tm = diffusion::load_trained(checkpoint);
    say(log, fmt::format("sample: {} samples, {} DDIM steps, eta {}", cfg.sample.count, cfg.sample.ddim_steps,
                         cfg.sample.eta));
    const auto samples = diffusion::generate(tm.model, tm.schedule, cfg.sample, tm.stats, cfg.sample_resolution);
    diffusion::write_generation(out_dir, samples, cfg.sample);
    const auto empty = static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.empty_surface; }));

    auto run = reproducibility_block("sample", cfg, deterministic);
    run["checkpoint"] = fs::absolute(checkpoint).lexically_normal().string();
    run["checkpoint_epoch"] = tm.epoch;
    run["count"] = samples.size();
    run["empty_surfaces"] = empty;
    write_json(out_dir / "run.json", run);
    if (empty > 0) say(log, fmt::format("warning: {} of {} samples have no surface", empty, samples.size()));
    return empty;
}

nlohmann::json cmd_eval(const fs::path& generated_dir, const fs::path& manifest_path, const RunConfig& cfg,
                        const fs::path& out_dir, bool deterministic, const Log& log) {
    const fs::path gen_manifest = generated_dir / "manifest.json";
    if (!fs::exists(gen_manifest)) {
        throw DataError(fmt::format("{} not found (run `sample` first)", gen_manifest.string()));
    }
    nlohmann::json gen;
    {
        std::ifstream f(gen_manifest);
        try {
            f >> gen;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(gen_manifest.string() + ": " + e.what());
        }
    }
    std::vector<geometry::TriMesh> generated;
    std::size_t empty = 0;
    for (const auto& item : gen) {
        if (!item.contains("mesh") || item["mesh"].is_null()) {
            ++empty;
            continue;
        }
        generated.push_back(geometry::load_mesh(generated_dir / item["mesh"].get<std::string>()));
    }

    const auto m = require_manifest(manifest_path);
    const fs::path base = manifest_dir(manifest_path);
    const Split ref_split = *parse_split(cfg.eval_reference_split);
    std::vector<geometry::TriMesh> reference;
    nlohmann::json per_shape = nlohmann::json::array();
    for (const auto& e : m.entries) {
        if (e.metrics) per_shape.push_back({{"id", e.id}, {"split", split_name(e.split)}, {"metrics", *e.metrics}});
        if (e.split == ref_split) reference.push_back(geometry::normalize_to_unit_cube(geometry::load_mesh(resolve(base, e.mesh))));
    }
    if (generated.size() < 2 || reference.size() < 2) {
        throw DataError(fmt::format("eval needs at least 2 generated and 2 reference meshes, found {} and {} ({} split)",
                                    generated.size(), reference.size(), cfg.eval_reference_split));
    }
    say(log, fmt::format("eval: {} generated vs {} {} meshes", generated.size(), reference.size(),
                         cfg.eval_reference_split));

    const auto sg = metrics::sample_clouds(generated, derive_seed(cfg.seed, 1), cfg.eval_cloud_points);
    const auto sr = metrics::sample_clouds(reference, derive_seed(cfg.seed, 2), cfg.eval_cloud_points);
    const auto report = metrics::set_metrics(sg, sr);

    double viou_sum = 0.0;
    std::size_t viou_n = 0;
    for (const auto& p : per_shape) {
        if (p["metrics"].contains("viou")) {
            viou_sum += p["metrics"]["viou"].get<double>();
            ++viou_n;
        }
    }
    nlohmann::json out{{"set_metrics", metrics::to_json(report)},
                       {"generated_count", generated.size()},
                       {"generated_empty", empty},
                       {"reference_split", cfg.eval_reference_split},
                       {"reference_count", reference.size()},
                       {"cloud_points", cfg.eval_cloud_points},
                       {"per_shape", std::move(per_shape)},
                       {"mean_fit_viou", viou_n > 0 ? nlohmann::json(viou_sum / static_cast<double>(viou_n))
                                                    : nlohmann::json(nullptr)},
                       {"reproducibility", reproducibility_block("eval", cfg, deterministic)}};
    write_json(out_dir / "eval.json", out);
    return out;
}

}  // namespace organdiff::pipeline
