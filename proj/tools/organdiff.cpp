// organdiff command-line tool: qa, split, fit, train, sample, eval, serve.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "organdiff/error.hpp"
#include "organdiff/pipeline/commands.hpp"
#include "organdiff/review/service.hpp"

namespace fs = std::filesystem;
using namespace organdiff;

namespace {

struct Common {
    std::string manifest = "manifest.json";
    std::string config;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    std::string out_dir;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--manifest", c.manifest, "Dataset manifest (JSON)");
    app->add_option("--config", c.config, "Run configuration (JSON); flags override it");
    app->add_option("--seed", c.seed, "Base seed for every stage");
    app->add_flag("--deterministic", c.deterministic, "Single-threaded, bitwise-reproducible execution");
    app->add_option("--out-dir", c.out_dir, "Output directory");
}

pipeline::RunConfig run_config(const Common& c) {
    auto cfg = c.config.empty() ? pipeline::RunConfig{} : pipeline::load_config(c.config);
    if (c.seed) cfg.apply_seed(*c.seed);
    return cfg;
}

fs::path out_dir(const Common& c, const char* fallback) { return c.out_dir.empty() ? fs::path(fallback) : fs::path(c.out_dir); }

void log_line(const std::string& line) {
    if (line.rfind("warning: ", 0) == 0) {
        spdlog::warn("{}", line.substr(9));
    } else {
        spdlog::info("{}", line);
    }
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Usage: return 1;
        case ErrorKind::Data: return 2;
        case ErrorKind::Numeric: return 3;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("organdiff"));
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"organdiff: occupancy-MLP fitting, weight-space diffusion, evaluation and review"};
    app.require_subcommand(1);
    Common common;

    auto* qa = app.add_subcommand("qa", "Run mesh QA on a directory and write the manifest");
    std::string input_dir;
    qa->add_option("input_dir", input_dir, "Directory of .obj/.stl meshes")->required();
    add_common(qa, common);

    auto* split = app.add_subcommand("split", "Partition Usable entries into train/val/test");
    add_common(split, common);

    auto* fit = app.add_subcommand("fit", "Fit one occupancy MLP per Usable entry (resumable)");
    add_common(fit, common);

    auto* train = app.add_subcommand("train", "Train the weight-space denoiser on the train split");
    add_common(train, common);

    auto* sample = app.add_subcommand("sample", "Generate shapes from a denoiser checkpoint");
    std::string checkpoint;
    std::optional<int> count, steps;
    std::optional<double> eta;
    sample->add_option("--checkpoint", checkpoint, "Denoiser checkpoint (best.ckpt)")->required();
    sample->add_option("--count", count, "Number of samples");
    sample->add_option("--steps", steps, "DDIM steps");
    sample->add_option("--eta", eta, "DDIM eta in [0, 1]");
    add_common(sample, common);

    auto* eval = app.add_subcommand("eval", "Set metrics of generated shapes against a reference split");
    std::string generated;
    std::optional<std::string> reference_split;
    eval->add_option("--generated", generated, "Directory written by `sample`")->required();
    eval->add_option("--reference-split", reference_split, "train, val or test");
    add_common(eval, common);

    auto* serve = app.add_subcommand("serve", "Run the expert-review HTTP service");
    review::ServiceOptions sopts;
    std::string survey_manifest, store = sopts.store.string(), ui_dir;
    serve->add_option("--manifest", survey_manifest, "Survey manifest {seed, items}");
    serve->add_option("--port", sopts.port, "TCP port (0 picks a free one)");
    serve->add_option("--host", sopts.host, "Bind address");
    serve->add_option("--admin-token", sopts.admin_token, "Token required to reveal ground truth");
    serve->add_option("--store", store, "Append-only label log (JSON lines)");
    serve->add_option("--ui-dir", ui_dir, "Static files served at /");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (common.deterministic) Eigen::setNbThreads(1);

        if (*qa) {
            const auto res = pipeline::cmd_qa(input_dir, common.manifest, log_line);
            std::cout << res.table << std::flush;
        } else if (*split) {
            (void)pipeline::cmd_split(common.manifest, run_config(common), log_line);
        } else if (*fit) {
            const auto s = pipeline::cmd_fit(common.manifest, run_config(common), out_dir(common, "fits"),
                                             common.deterministic, log_line);
            spdlog::info("fit: {} fitted, {} skipped, {} failed", s.fitted, s.skipped, s.failed);
            // The run completes either way; a failed shape still makes the exit status non-zero.
            if (s.failure) return exit_code(*s.failure);
        } else if (*train) {
            const auto s = pipeline::cmd_train(common.manifest, run_config(common), out_dir(common, "train"),
                                               common.deterministic, log_line);
            spdlog::info("train: best epoch {}, final loss {:.6f}", s.best_epoch, s.final_loss);
        } else if (*sample) {
            auto cfg = run_config(common);
            if (count) cfg.sample.count = *count;
            if (steps) cfg.sample.ddim_steps = *steps;
            if (eta) cfg.sample.eta = *eta;
            cfg.validate();
            (void)pipeline::cmd_sample(checkpoint, cfg, out_dir(common, "samples"), common.deterministic, log_line);
        } else if (*eval) {
            auto cfg = run_config(common);
            if (reference_split) cfg.eval_reference_split = *reference_split;
            cfg.validate();
            const auto report =
                pipeline::cmd_eval(generated, common.manifest, cfg, out_dir(common, "eval"), common.deterministic, log_line);
            std::cout << report["set_metrics"].dump(2) << std::endl;
        } else if (*serve) {
            if (!survey_manifest.empty()) sopts.manifest = survey_manifest;
            sopts.store = store;
            if (!ui_dir.empty()) sopts.ui_dir = ui_dir;
            if (!sopts.manifest) spdlog::warn("no --manifest given; survey routes will answer 409");
            review::serve(sopts, [&](int port) {
                spdlog::info("review service listening on http://{}:{}", sopts.host, port);
            });
        }
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
    return 0;
}
