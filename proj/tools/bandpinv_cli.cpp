// Command-line driver for the banded-pseudoinverse toolkit. Every
// subcommand maps to one experiment in bandpinv::harness::run_config; the
// flags here are conveniences merged into the JSON config, so anything
// expressible on the command line is also expressible in --config.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error,
// 3 validate-metric ran but the metric violates the axioms. Errors are
// written to stderr as a single JSON object.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bandpinv/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"exponentially accurate banded approximants of Moore-Penrose inverses"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("-o,--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", seed, "override the generator seed");
    app.add_flag("-q,--quiet", quiet, "suppress the summary on stdout");

    std::optional<int> instances;
    std::optional<std::string> matrix_path, metric_path, scenario;
    std::optional<double> kappa_flag, a_flag, b_flag;
    std::vector<int> Ns_flag;

    CLI::App* approx = app.add_subcommand(
        "approx", "banded approximants: randomized verification suite, or one input matrix");
    approx->add_option("--instances", instances, "suite instance count");
    approx->add_option("--matrix", matrix_path, "matrix CSV file (single-matrix mode)");
    approx->add_option("--metric", metric_path, "metric JSON file (single-matrix mode)");
    approx->add_option("--kappa", kappa_flag, "target bandwidth (single-matrix mode)");

    CLI::App* bounds = app.add_subcommand("bounds-table", "tabulate the decay-bound families");
    bounds->add_option("--a", a_flag, "lower edge of the singular-value enclosure");
    bounds->add_option("--b", b_flag, "upper edge of the singular-value enclosure");

    CLI::App* saddle = app.add_subcommand(
        "saddle", "singular-value enclosures of saddle systems, or one given G and F");
    saddle->add_option("--instances", instances, "suite instance count");

    CLI::App* ocprun =
        app.add_subcommand("ocp-run", "solve a control scenario: trajectories, rates, responses");
    ocprun->add_option("--scenario", scenario,
                       "preset name (regular-boundary, regular-middle, near-singular-boundary, "
                       "near-singular-middle)");
    ocprun->add_option("--N", Ns_flag, "mesh sizes (repeatable)");

    CLI::App* ocpsweep =
        app.add_subcommand("ocp-sweep", "stability and consistency sweeps over mesh families");
    ocpsweep->add_option("--scenario", scenario, "preset name or use --config");

    CLI::App* vm = app.add_subcommand("validate-metric", "check a metric description");
    vm->add_option("--metric", metric_path, "metric JSON file");

    for (CLI::App* s : {approx, bounds, saddle, ocprun, ocpsweep, vm}) s->fallthrough();

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    auto fail = [&](const std::string& message, int code) {
        nlohmann::json err;
        err["error"] = message;
        err["command"] = command;
        std::cerr << err.dump() << "\n";
        return code;
    };

    nlohmann::json cfg = nlohmann::json::object();
    try {
        if (!config_path.empty()) cfg = bandpinv::load_json_file(config_path);
        if (!cfg.is_object()) throw std::invalid_argument("config root must be a JSON object");
    } catch (const std::exception& e) {
        return fail(e.what(), 2);
    }
    cfg["command"] = command;
    if (instances) cfg["instances"] = *instances;
    if (matrix_path) cfg["matrix"] = *matrix_path;
    if (metric_path) cfg["metric"] = *metric_path;
    if (kappa_flag) cfg["kappa"] = *kappa_flag;
    if (a_flag) cfg["a"] = *a_flag;
    if (b_flag) cfg["b"] = *b_flag;
    if (scenario) cfg["scenario"] = *scenario;
    if (!Ns_flag.empty()) cfg["Ns"] = Ns_flag;

    try {
        const auto t0 = std::chrono::steady_clock::now();
        const bandpinv::harness::RunArtifacts arts =
            bandpinv::harness::run_config(cfg, out_dir, seed);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const std::uint64_t resolved_seed = seed ? *seed : cfg.value("seed", std::uint64_t{1});
        const nlohmann::json manifest =
            bandpinv::harness::make_manifest(cfg, resolved_seed, arts, wall);
        bandpinv::write_file(std::filesystem::path(out_dir) / "manifest.json",
                             manifest.dump(2) + "\n");

        if (!quiet) std::cout << arts.summary.dump(2) << "\n";
        if (command == "validate-metric" && !arts.summary.value("valid", false)) return 3;
        return 0;
    } catch (const nlohmann::json::exception& e) {
        return fail(e.what(), 2);
    } catch (const std::invalid_argument& e) {
        return fail(e.what(), 2);
    } catch (const std::exception& e) {
        return fail(e.what(), 1);
    }
}
