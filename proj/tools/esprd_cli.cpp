// Command-line front end for the ESP readout discrimination toolkit:
// simulate -> prep -> train -> evaluate -> report, plus decision-surface and
// histogram exports for external plotting.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "esprd/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitFit = 4;
constexpr int kExitEval = 5;

struct CommonOpts {
    std::string manifest_path;
    std::string out_flag;
    std::optional<std::uint64_t> seed;
    std::string models_list;
    std::string mode;
};

// Output directory precedence: --out flag > manifest out_dir > ESPRD_OUT env.
std::filesystem::path resolve_out_dir(const CommonOpts& opts, const esprd::Manifest& m) {
    if (!opts.out_flag.empty()) return opts.out_flag;
    if (!m.out_dir.empty()) return m.out_dir;
    if (const char* env = std::getenv("ESPRD_OUT"); env && *env) return env;
    throw esprd::config_error("no output directory: pass --out, set out_dir in the manifest, "
                              "or set ESPRD_OUT");
}

esprd::Manifest load_manifest(const CommonOpts& opts) {
    esprd::Manifest m = esprd::manifest_from_file(opts.manifest_path);
    if (opts.seed) m.seed_override = opts.seed;
    if (!opts.mode.empty()) {
        if (opts.mode != "single" && opts.mode != "multi")
            throw esprd::config_error("--mode must be single or multi");
        m.mode = opts.mode;
    }
    return m;
}

std::optional<std::set<std::string>> model_filter(const CommonOpts& opts) {
    if (opts.models_list.empty()) return std::nullopt;
    std::set<std::string> names;
    std::stringstream ss(opts.models_list);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) names.insert(tok);
    return names;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_manifest = true) {
    auto* m = cmd->add_option("--manifest", opts.manifest_path, "Experiment manifest (JSON)");
    if (needs_manifest) m->required();
    cmd->add_option("--out", opts.out_flag, "Output directory (overrides manifest and ESPRD_OUT)");
    cmd->add_option("--seed", opts.seed, "Override the device seed");
    cmd->add_option("--models", opts.models_list, "Comma-separated subset of manifest models");
    cmd->add_option("--mode", opts.mode, "Evaluation mode: single | multi");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ESP readout discrimination toolkit"};
    app.require_subcommand(1);
    CommonOpts opts;

    auto* simulate = app.add_subcommand("simulate", "Generate the synthetic IQ dataset");
    add_common(simulate, opts);

    auto* prep = app.add_subcommand("prep", "Outlier removal, split, and scaling");
    add_common(prep, opts);

    auto* train = app.add_subcommand("train", "Fit all manifest models on the train split");
    add_common(train, opts);

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate models and write fidelity reports");
    add_common(evaluate, opts);

    auto* report = app.add_subcommand("report", "Re-render the combined comparison table");
    add_common(report, opts);

    auto* surface = app.add_subcommand("decision-surface", "Export a predicted-label I-Q grid");
    std::string surface_model, surface_out;
    unsigned surface_qubit = 0;
    esprd::GridSpec grid;
    surface->add_option("--model", surface_model, "Model artifact path")->required();
    surface->add_option("--qubit", surface_qubit, "Qubit index");
    surface->add_option("--output", surface_out, "Output grid file")->required();
    surface->add_option("--i-min", grid.i_min);
    surface->add_option("--i-max", grid.i_max);
    surface->add_option("--q-min", grid.q_min);
    surface->add_option("--q-max", grid.q_max);
    surface->add_option("--i-steps", grid.i_steps);
    surface->add_option("--q-steps", grid.q_steps);

    auto* histogram = app.add_subcommand("histogram", "Export I and Q marginal histograms");
    std::string hist_dataset, hist_out;
    unsigned hist_qubit = 0;
    int hist_state = 0;
    std::size_t hist_bins = 50;
    histogram->add_option("--dataset", hist_dataset, "Dataset file path")->required();
    histogram->add_option("--qubit", hist_qubit, "Qubit index");
    histogram->add_option("--state", hist_state, "Prepared state (0, 1 or 2)");
    histogram->add_option("--bins", hist_bins, "Bin count");
    histogram->add_option("--output", hist_out, "Output histogram file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (surface->parsed()) {
            esprd::run_decision_surface(surface_model, surface_qubit, grid, surface_out);
            return 0;
        }
        if (histogram->parsed()) {
            esprd::run_histogram(hist_dataset, hist_qubit, hist_state, hist_bins, hist_out);
            return 0;
        }

        const esprd::Manifest manifest = load_manifest(opts);
        const auto out_dir = resolve_out_dir(opts, manifest);
        const auto only = model_filter(opts);
        const auto* only_ptr = only ? &*only : nullptr;

        if (simulate->parsed()) {
            esprd::run_simulate(manifest, out_dir, std::cout);
        } else if (prep->parsed()) {
            esprd::run_prep(manifest, out_dir, std::cout);
        } else if (train->parsed()) {
            if (esprd::run_train(manifest, out_dir, std::cout, only_ptr) > 0) return kExitFit;
        } else if (evaluate->parsed()) {
            esprd::run_evaluate(manifest, out_dir, std::cout, only_ptr);
        } else if (report->parsed()) {
            esprd::run_report(manifest, out_dir, std::cout);
        }
        return 0;
    } catch (const esprd::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const esprd::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const esprd::fit_error& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return kExitFit;
    } catch (const esprd::eval_error& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return kExitEval;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
