// Command-line front end: train model fixtures, run benchmark scenarios,
// sweep remediation knobs, and dump plot-ready data from saved traces.
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "pta/errors.hpp"
#include "pta/simulation.hpp"

using namespace pta;

namespace {

int run_command(const std::string& scenario_path, std::uint64_t seed, bool seed_set,
                const std::string& out, const std::string& format, bool parallel,
                bool no_remediation, std::uint64_t periodic_remap, bool quiet) {
    ScenarioConfig cfg = load_scenario(scenario_path);
    if (seed_set) cfg.seed = seed;
    if (no_remediation) cfg.remediation = false;
    if (periodic_remap > 0) cfg.periodic_remap = periodic_remap;

    RunTrace trace = run_scenario(cfg, parallel ? ExecMode::Parallel : ExecMode::Serial);
    if (!out.empty())
        emit_trace(trace, out, format == "json" ? TraceFormat::Json : TraceFormat::Csv);
    if (!quiet) {
        const TracePoint& last = trace.points.back();
        std::printf("%s seed=%llu hash=%016llx\n", trace.scenario.c_str(),
                    (unsigned long long)trace.seed, (unsigned long long)trace.config_hash);
        std::printf("clean=%.4f final_accuracy=%.4f final_nmae=%.4f overhead=%.4f\n",
                    trace.clean_accuracy, last.accuracy, last.nmae, trace.overhead());
        const CycleLedger led = trace.final_ledger();
        std::printf(
            "cycles: inference=%llu probe=%llu calibration=%llu remap=%llu\n",
            (unsigned long long)led.inference_cycles, (unsigned long long)led.probe_cycles,
            (unsigned long long)led.calibration_cycles, (unsigned long long)led.remap_cycles);
    }
    return 0;
}

int sweep_command(const std::string& scenario_path, const std::string& out,
                  const std::vector<double>& betas, const std::vector<std::uint64_t>& taus,
                  const std::vector<int>& shots, const std::vector<std::string>& methods,
                  bool parallel) {
    const ScenarioConfig base = load_scenario(scenario_path);
    FILE* f = out.empty() ? stdout : std::fopen(out.c_str(), "w");
    if (f == nullptr) throw IoError("cannot open '" + out + "' for writing");
    std::fprintf(f,
                 "selection_fraction,cooling_time,probe_shots,remap_method,"
                 "final_accuracy,final_nmae,overhead\n");
    for (double beta : betas) {
        for (std::uint64_t tau : taus) {
            for (int m : shots) {
                for (const std::string& method : methods) {
                    ScenarioConfig cfg = base;
                    cfg.calibration.selection_fraction = beta;
                    cfg.controller.cooling_time = tau;
                    cfg.calibration.probe_shots = m;
                    if (method == "mae")
                        cfg.remap.method = CostMethod::MAE;
                    else if (method == "first_order")
                        cfg.remap.method = CostMethod::FirstOrder;
                    else if (method == "second_order")
                        cfg.remap.method = CostMethod::SecondOrder;
                    else
                        throw ConfigError("unknown remap method '" + method + "'");
                    RunTrace tr =
                        run_scenario(cfg, parallel ? ExecMode::Parallel : ExecMode::Serial);
                    std::fprintf(f, "%g,%llu,%d,%s,%.17g,%.17g,%.17g\n", beta,
                                 (unsigned long long)tau, m, method.c_str(),
                                 tr.points.back().accuracy, tr.points.back().nmae,
                                 tr.overhead());
                    std::fflush(f);
                }
            }
        }
    }
    if (f != stdout) std::fclose(f);
    return 0;
}

int plots_command(const std::string& trace_path, const std::string& out) {
    emit_trace(load_trace_json(trace_path), out, TraceFormat::Csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photonic tensor accelerator drift/remediation simulator"};
    app.require_subcommand(1);

    // train-fixture
    auto* train = app.add_subcommand("train-fixture", "Train an MLP fixture and save it as JSON");
    std::uint64_t train_seed = 1;
    std::string train_out = "fixture.json";
    TrainOptions opts;
    std::size_t tiles = 4, cores = 4, core_size = 8;
    train->add_option("--seed", train_seed, "trainer RNG seed");
    train->add_option("--out", train_out, "output fixture path")->required();
    train->add_option("--epochs", opts.epochs, "training epochs");
    train->add_option("--hidden", opts.hidden, "hidden width");
    train->add_option("--train-samples", opts.train_samples, "training set size");
    train->add_option("--eval-samples", opts.eval_samples, "held-out set size");
    train->add_option("--accuracy-floor", opts.accuracy_floor, "minimum clean accuracy");
    train->add_option("--tiles", tiles, "tile rows the salience tables are cut for");
    train->add_option("--cores", cores, "cores per tile");
    train->add_option("--core-size", core_size, "MRR core size k");

    // run
    auto* run = app.add_subcommand("run", "Run one scenario and report the trace");
    std::string scenario_path;
    std::uint64_t run_seed = 0;
    std::string run_out, run_format = "csv";
    bool parallel = false, no_remediation = false, quiet = false;
    std::uint64_t periodic_remap = 0;
    run->add_option("--scenario", scenario_path, "scenario JSON")->required();
    auto* seed_opt = run->add_option("--seed", run_seed, "override the scenario seed");
    run->add_option("--out", run_out, "trace output path");
    run->add_option("--format", run_format, "trace format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    run->add_flag("--parallel", parallel, "use the OpenMP kernels");
    run->add_flag("--no-remediation", no_remediation, "disable the controller (baseline)");
    run->add_option("--periodic-remap", periodic_remap, "remap every N steps instead");
    run->add_flag("--quiet", quiet, "suppress the summary lines");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Grid-sweep remediation knobs over one scenario");
    std::string sweep_scenario, sweep_out;
    std::vector<double> betas{1.0};
    std::vector<std::uint64_t> taus{4000};
    std::vector<int> shots{1};
    std::vector<std::string> methods{"mae"};
    bool sweep_parallel = false;
    sweep->add_option("--scenario", sweep_scenario, "scenario JSON")->required();
    sweep->add_option("--out", sweep_out, "summary CSV path (default stdout)");
    sweep->add_option("--beta", betas, "calibration selection fractions");
    sweep->add_option("--tau", taus, "controller cooling times");
    sweep->add_option("--shots", shots, "calibration probe shots");
    sweep->add_option("--method", methods, "remap cost methods");
    sweep->add_flag("--parallel", sweep_parallel, "use the OpenMP kernels");

    // emit-plots-data
    auto* plots = app.add_subcommand("emit-plots-data", "Convert a JSON trace to plot-ready CSV");
    std::string trace_path, plots_out;
    plots->add_option("--trace", trace_path, "JSON trace from `run --format json`")->required();
    plots->add_option("--out", plots_out, "CSV output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            ModelFixture f = train_fixture(opts, train_seed, tiles, cores, core_size);
            save_fixture(f, train_out);
            std::printf("wrote %s (clean accuracy %.4f)\n", train_out.c_str(), f.clean_accuracy);
            return 0;
        }
        if (run->parsed())
            return run_command(scenario_path, run_seed, seed_opt->count() > 0, run_out,
                               run_format, parallel, no_remediation, periodic_remap, quiet);
        if (sweep->parsed())
            return sweep_command(sweep_scenario, sweep_out, betas, taus, shots, methods,
                                 sweep_parallel);
        if (plots->parsed()) return plots_command(trace_path, plots_out);
    } catch (const Diverged& e) {
        std::fprintf(stderr, "diverged: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
