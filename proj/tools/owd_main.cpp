// Command-line front end: full runs, ablation grids/sweeps, frame checks,
// and feature projection. Exit codes: 0 ok, 1 config error, 2 numerical
// divergence, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "owd/config.hpp"
#include "owd/runner.hpp"

namespace {

using namespace owd;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw ConfigError("expected a comma-separated seed list");
    return seeds;
}

// "m=0.25,0.5,1.0" or "k=32,64,128"
std::pair<std::string, std::vector<double>> parse_sweep(const std::string& text) {
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep: expected key=v1,v2,...");
    const std::string key = text.substr(0, eq);
    std::vector<double> values;
    std::stringstream ss(text.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        values.push_back(std::stod(item));
    }
    if (values.empty()) throw ConfigError("sweep: no values given");
    return {key, values};
}

ExperimentConfig load_config(const std::string& path, bool have_seed, std::uint64_t seed,
                             const std::string& out_override) {
    ExperimentConfig config = path.empty() ? ExperimentConfig{} : parse_config_file(path);
    if (have_seed) config.world.master_seed = seed;
    if (!out_override.empty()) config.out_dir = out_override;
    return config;
}

int cmd_run(const std::string& config_path, bool have_seed, std::uint64_t seed,
            const std::string& out_override) {
    const ExperimentConfig config = load_config(config_path, have_seed, seed, out_override);
    const RunResult result = run_experiment(config, /*write_files=*/true);
    for (const EvalReport& r : result.reports) {
        std::printf("task %d: known mAP %.2f", r.task, r.known_map);
        if (r.u_recall.defined)
            std::printf(", U-Rec %.2f, H-Score %.2f", r.u_recall.value, r.h);
        std::printf("\n");
    }
    std::printf("artifacts written to %s\n", config.out_dir.c_str());
    return 0;
}

int cmd_ablate(const std::string& config_path, bool have_seed, std::uint64_t seed,
               const std::string& out_override, const std::string& seeds_text,
               const std::string& sweep_text, int parallel) {
    ExperimentConfig base = load_config(config_path, have_seed, seed, out_override);
    std::vector<std::uint64_t> seeds =
        seeds_text.empty() ? std::vector<std::uint64_t>{base.world.master_seed}
                           : parse_seed_list(seeds_text);

    std::vector<Variant> variants;
    std::string csv_name;
    if (sweep_text.empty()) {
        variants = make_ablation_grid(base, seeds);
        csv_name = "ablation.csv";
    } else {
        const auto [key, values] = parse_sweep(sweep_text);
        variants = make_sweep(base, key, values, seeds);
        csv_name = "sweep_" + key + ".csv";
    }

    const std::vector<VariantRow> rows = run_variants(variants, parallel);
    std::error_code ec;
    std::filesystem::create_directories(base.out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + base.out_dir);
    const std::string csv_path = base.out_dir + "/" + csv_name;
    write_variant_csv(csv_path, rows);
    std::printf("%zu runs, results in %s\n", variants.size(), csv_path.c_str());
    return 0;
}

int cmd_etf_check(std::size_t k, std::size_t d, std::uint64_t seed) {
    const EtfFrame frame = build_simplex_etf(k, d, seed);
    const GramErrors err = gram_errors(frame);
    nlohmann::json j;
    j["max_diag_err"] = err.max_diag_err;
    j["max_offdiag_err"] = err.max_offdiag_err;
    std::printf("%s\n", j.dump().c_str());
    return 0;
}

int cmd_project(const std::string& input, const std::string& output) {
    std::ifstream in(input);
    if (!in) throw IoError("cannot open " + input);
    std::vector<Vec> features;
    std::vector<std::string> labels;
    bool has_labels = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Vec row;
        std::string label;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(cell, &pos);
                if (pos != cell.size()) throw std::invalid_argument("");
                row.push_back(v);
            } catch (const std::exception&) {
                label = cell;  // trailing non-numeric cell is the label
                has_labels = true;
                break;
            }
        }
        if (row.empty()) continue;  // header or malformed line
        features.push_back(std::move(row));
        labels.push_back(label);
    }
    if (features.size() < 2) throw ConfigError("project: need at least two feature rows");

    const std::vector<ProjectedPoint> points =
        pca_project(features, has_labels ? labels : std::vector<std::string>{});
    std::ofstream out(output, std::ios::binary);
    if (!out) throw IoError("cannot open " + output);
    out << (has_labels ? "x,y,label\n" : "x,y\n");
    char buf[96];
    for (const ProjectedPoint& p : points) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g", p.x, p.y);
        out << buf;
        if (has_labels) out << "," << p.label;
        out << "\n";
    }
    std::printf("wrote %zu projected points to %s\n", points.size(), output.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-world detection numerics and synthetic benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds_text, sweep_text;
    std::uint64_t seed = 0;
    bool have_seed = false;
    int parallel = 1;

    CLI::App* run = app.add_subcommand("run", "Train and evaluate a full incremental schedule");
    run->add_option("--config", config_path, "Config file (defaults used when omitted)");
    run->add_option("--seed", seed, "Master seed override")->trigger_on_parse();
    run->add_option("--out", out_dir, "Output directory override");

    CLI::App* ablate = app.add_subcommand("ablate", "Run the 2x2 loss grid or a sweep");
    ablate->add_option("--config", config_path, "Config file");
    ablate->add_option("--seed", seed, "Master seed override");
    ablate->add_option("--seeds", seeds_text, "Comma-separated seed list shared across cells");
    ablate->add_option("--sweep", sweep_text, "m=v1,v2,... or k=v1,v2,... instead of the grid");
    ablate->add_option("--out", out_dir, "Output directory override");
    ablate->add_option("--parallel", parallel, "Worker threads for independent cells");

    CLI::App* etf = app.add_subcommand("etf", "Frame utilities");
    CLI::App* etf_check = etf->add_subcommand("check", "Print the frame's Gram deviations");
    std::size_t k = 128, d = 256;
    std::uint64_t frame_seed = 1;
    etf_check->add_option("--k", k, "Number of frame vectors");
    etf_check->add_option("--d", d, "Feature dimension");
    etf_check->add_option("--seed", frame_seed, "Frame seed");
    etf->require_subcommand(1);

    CLI::App* project = app.add_subcommand("project", "Project feature CSV onto top-2 PCs");
    std::string input_path, output_path = "projection.csv";
    project->add_option("--input", input_path, "Input CSV of features")->required();
    project->add_option("--out", output_path, "Output CSV path");

    try {
        app.parse(argc, argv);
        have_seed = run->count("--seed") > 0 || ablate->count("--seed") > 0;
        if (run->parsed()) return cmd_run(config_path, have_seed, seed, out_dir);
        if (ablate->parsed())
            return cmd_ablate(config_path, have_seed, seed, out_dir, seeds_text, sweep_text,
                              parallel);
        if (etf->parsed()) return cmd_etf_check(k, d, frame_seed);
        if (project->parsed()) return cmd_project(input_path, output_path);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
