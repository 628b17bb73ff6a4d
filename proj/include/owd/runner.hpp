#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "owd/config.hpp"
#include "owd/eval.hpp"

namespace owd {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunResult {
    std::vector<EvalReport> reports;  // one per task
};

/// Full experiment: build frame and world, train each task (with replay from
/// task 2 on), refresh the exemplar store, evaluate. When write_files is set,
/// all artifacts land under config.out_dir.
RunResult run_experiment(const ExperimentConfig& config, bool write_files = true);

/// One named configuration variant for grids and sweeps.
struct Variant {
    std::string label;
    ExperimentConfig config;
};

struct VariantRow {
    std::string label;
    std::uint64_t seed = 0;
    int task = 0;
    double previous_map = 0.0;
    double current_map = 0.0;
    double known_map = 0.0;
    double u_recall = 0.0;
    bool u_recall_defined = false;
    double h = 0.0;
    bool h_defined = false;
};

/// Runs every variant (optionally on `parallel` worker threads; each run is
/// independent and deterministic) and flattens the per-task reports.
std::vector<VariantRow> run_variants(const std::vector<Variant>& variants, int parallel);

/// The 2x2 separation x distinction grid over the given seeds.
std::vector<Variant> make_ablation_grid(const ExperimentConfig& base,
                                        const std::vector<std::uint64_t>& seeds);

/// Margin or frame-size sweeps (key "m" or "k") over the given seeds.
std::vector<Variant> make_sweep(const ExperimentConfig& base, const std::string& key,
                                const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds);

void write_variant_csv(const std::string& path, const std::vector<VariantRow>& rows);

}  // namespace owd
