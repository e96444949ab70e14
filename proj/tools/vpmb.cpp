// Command-line driver for the tracking experiments.
#include "vpmb/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

namespace {

using vpmb::ExperimentConfig;
using vpmb::ExperimentResult;

void add_experiment_options(CLI::App& app, ExperimentConfig& cfg, std::string& config_file) {
    app.add_option("--runs", cfg.n_runs, "Monte-Carlo runs")->capture_default_str();
    app.add_option("--seed", cfg.rng_seed, "base measurement seed (run r uses seed + r)")
        ->capture_default_str();
    app.add_option("--max-hyp", cfg.max_hyp, "global hypothesis cap")->capture_default_str();
    app.add_option("--truth-seed", cfg.truth_seed, "ground-truth seed")->capture_default_str();
    app.add_option("--clutter", cfg.clutter_rate, "mean clutter count per scan")
        ->capture_default_str();
    app.add_option("--gate", cfg.gate, "squared Mahalanobis gate")->capture_default_str();
    app.add_option("--gamma-ppp", cfg.gamma_ppp, "PPP weight pruning threshold")
        ->capture_default_str();
    app.add_option("--gamma-bern", cfg.gamma_bern, "Bernoulli existence pruning threshold")
        ->capture_default_str();
    app.add_option("--estimator", cfg.estimator_threshold, "existence threshold of the estimator")
        ->capture_default_str();
    app.add_option("--vpmb-gamma", cfg.vpmb_gamma, "V-PMB cost convergence threshold")
        ->capture_default_str();
    app.add_option("--vpmb-max-iter", cfg.vpmb_max_iter, "V-PMB iteration cap")
        ->capture_default_str();
    app.add_option("--workers", cfg.workers, "worker threads (0: VPMB_WORKERS or all cores)")
        ->capture_default_str();
    app.add_option("--config", config_file, "key = value file; command-line flags take precedence")
        ->configurable(false)
        ->check(CLI::ExistingFile);
    app.allow_config_extras(CLI::config_extras_mode::error);
}

// The parser only reads config files attached to the top-level app, so a
// subcommand's file is fed in by hand; options already given are kept.
void apply_config(CLI::App& sub, const std::string& config_file) {
    if (config_file.empty()) return;
    std::ifstream is(config_file);
    sub.parse_from_stream(is);
    for (CLI::Option* opt : sub.get_options([](const CLI::Option* o) { return o->count() > 0; }))
        opt->run_callback();
}

void write_file(const std::filesystem::path& path, const auto& writer) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    writer(os);
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_results(const std::filesystem::path& dir, const std::vector<ExperimentResult>& results) {
    std::filesystem::create_directories(dir);
    write_file(dir / "steps.csv", [&](std::ostream& os) { vpmb::write_step_csv(os, results); });
    write_file(dir / "summary.csv", [&](std::ostream& os) { vpmb::write_summary_csv(os, results); });
}

void print_timing(const std::vector<ExperimentResult>& results) {
    std::cerr << "mean seconds per run:";
    for (const auto& r : results)
        std::cerr << ' ' << vpmb::to_string(r.config.filter) << "@" << r.config.p_detect << '='
                  << std::setprecision(3) << r.mean_seconds_per_run;
    std::cerr << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PMBM / PMB multi-target tracking experiments"};
    app.require_subcommand(1);

    ExperimentConfig run_cfg;
    std::string filter_name = "pmbm";
    std::string run_out = "results";
    auto* run = app.add_subcommand("run", "Monte-Carlo RMS-GOSPA of one filter");
    run->add_option("--filter", filter_name, "pmbm | m-pmb | bp-pmb | gnn-pmb | v-pmb")
        ->check(CLI::IsMember({"pmbm", "m-pmb", "bp-pmb", "gnn-pmb", "v-pmb"}))
        ->capture_default_str();
    run->add_option("--pd", run_cfg.p_detect, "probability of detection")->capture_default_str();
    run->add_option("--out", run_out, "output directory")->capture_default_str();
    std::string run_config;
    add_experiment_options(*run, run_cfg, run_config);

    std::uint64_t scenario_seed = vpmb::kCanonicalTruthSeed;
    std::string scenario_out;
    auto* scenario = app.add_subcommand("scenario", "write the ground-truth trajectories as CSV");
    scenario->add_option("--seed", scenario_seed, "truth seed")->capture_default_str();
    scenario->add_option("--out", scenario_out, "output file (default: stdout)");

    ExperimentConfig table_cfg;
    std::string table_out;
    auto* table = app.add_subcommand("table1", "all five filters at pD 0.7, 0.8, 0.9, 0.99");
    table->add_option("--out", table_out, "also write steps.csv and summary.csv here");
    std::string table_config;
    add_experiment_options(*table, table_cfg, table_config);

    CLI11_PARSE(app, argc, argv);

    try {
        apply_config(*run, run_config);
        apply_config(*table, table_config);
        if (*run) {
            run_cfg.filter = vpmb::parse_filter_kind(filter_name);
            const std::vector<ExperimentResult> results{vpmb::run_experiment(run_cfg)};
            write_results(run_out, results);
            if (!results.front().projections.empty())
                write_file(std::filesystem::path(run_out) / "projections.txt", [&](std::ostream& os) {
                    for (const auto& p : results.front().projections) vpmb::write_projection_report(os, p);
                });
            std::cout << vpmb::to_string(run_cfg.filter) << " pd=" << run_cfg.p_detect
                      << " rms-gospa=" << std::setprecision(6) << results.front().summary << '\n';
            print_timing(results);
        } else if (*scenario) {
            const auto truth = vpmb::generate_scenario(scenario_seed);
            if (scenario_out.empty())
                vpmb::write_scenario(std::cout, truth);
            else
                write_file(scenario_out, [&](std::ostream& os) { vpmb::write_scenario(os, truth); });
        } else if (*table) {
            std::vector<ExperimentResult> results;
            for (double pd : {0.9, 0.99, 0.8, 0.7})
                for (vpmb::FilterKind kind : vpmb::kAllFilters) {
                    ExperimentConfig cfg = table_cfg;
                    cfg.p_detect = pd;
                    cfg.filter = kind;
                    results.push_back(vpmb::run_experiment(cfg));
                }
            vpmb::write_summary_csv(std::cout, results);
            if (!table_out.empty()) write_results(table_out, results);
            print_timing(results);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
