#include "owd/runner.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace owd {

namespace {

using nlohmann::json;

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

json report_to_json(const EvalReport& r) {
    json j;
    j["task"] = r.task;
    j["previous_map"] = r.previous_map;
    j["current_map"] = r.current_map;
    j["known_map"] = r.known_map;
    j["u_recall"] = r.u_recall.value;
    j["u_recall_defined"] = r.u_recall.defined;
    j["h_score"] = r.h;
    j["h_score_defined"] = r.h_defined;
    json heat = json::array();
    for (std::size_t i = 0; i < r.heatmap.rows; ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < r.heatmap.cols; ++k) row.push_back(r.heatmap(i, k));
        heat.push_back(row);
    }
    j["heatmap"] = heat;
    json pcs = json::array();
    for (const PerClassScore& p : r.per_class_scores) {
        pcs.push_back({{"class_id", p.class_id},
                       {"mean_s_known", p.summary.mean_s_known},
                       {"mean_s_unknown", p.summary.mean_s_unknown},
                       {"count", p.summary.count}});
    }
    j["per_class_scores"] = pcs;
    j["known_scores"] = {{"mean_s_known", r.known_scores.mean_s_known},
                         {"mean_s_unknown", r.known_scores.mean_s_unknown},
                         {"count", r.known_scores.count}};
    j["unknown_scores"] = {{"mean_s_known", r.unknown_scores.mean_s_known},
                           {"mean_s_unknown", r.unknown_scores.mean_s_unknown},
                           {"count", r.unknown_scores.count}};
    return j;
}

std::string detections_to_jsonl(const std::vector<Detection>& dets) {
    std::string out;
    for (const Detection& d : dets) {
        json j;
        j["image_id"] = d.image_id;
        j["box"] = {d.box.x1, d.box.y1, d.box.x2, d.box.y2};
        if (d.class_id == kUnknownClass)
            j["class_id"] = "unknown";
        else
            j["class_id"] = d.class_id;
        j["score"] = d.score;
        out += j.dump();
        out += "\n";
    }
    return out;
}

std::string summary_csv(const std::vector<EvalReport>& reports) {
    std::string out = "task,previous_map,current_map,known_map,u_recall,h_score\n";
    for (const EvalReport& r : reports) {
        out += std::to_string(r.task) + ",";
        out += (r.task > 1 ? fmt(r.previous_map) : std::string{}) + ",";
        out += fmt(r.current_map) + ",";
        out += fmt(r.known_map) + ",";
        out += (r.u_recall.defined ? fmt(r.u_recall.value) : std::string{}) + ",";
        out += (r.h_defined ? fmt(r.h) : std::string{}) + "\n";
    }
    return out;
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
    std::string out =
        "task,phase,step,loss_cls,loss_l1,loss_giou,loss_margin,loss_subspace,loss_distinction,"
        "loss_total\n";
    for (const TrainLogRow& r : log) {
        out += std::to_string(r.task) + "," + (r.replay ? "replay" : "fresh") + "," +
               std::to_string(r.step) + "," + fmt(r.losses.cls, "%.9g") + "," +
               fmt(r.losses.l1, "%.9g") + "," + fmt(r.losses.giou, "%.9g") + "," +
               fmt(r.losses.energy_margin, "%.9g") + "," + fmt(r.losses.subspace_focal, "%.9g") +
               "," + fmt(r.losses.distinction, "%.9g") + "," + fmt(r.losses.total, "%.9g") + "\n";
    }
    return out;
}

std::string heatmap_csv(const Mat& heat) {
    std::string out = "task";
    for (std::size_t j = 0; j < heat.cols; ++j) out += ",head_" + std::to_string(j + 1);
    out += "\n";
    for (std::size_t i = 0; i < heat.rows; ++i) {
        out += std::to_string(i + 1);
        for (std::size_t j = 0; j < heat.cols; ++j) out += "," + fmt(heat(i, j), "%.9g");
        out += "\n";
    }
    return out;
}

std::string class_scores_csv(const EvalReport& r) {
    std::string out = "class_id,mean_s_known,mean_s_unknown,count\n";
    for (const PerClassScore& p : r.per_class_scores)
        out += std::to_string(p.class_id) + "," + fmt(p.summary.mean_s_known, "%.9g") + "," +
               fmt(p.summary.mean_s_unknown, "%.9g") + "," + std::to_string(p.summary.count) + "\n";
    return out;
}

std::string projection_csv(const std::vector<ProjectedPoint>& points) {
    std::string out = "x,y,label\n";
    for (const ProjectedPoint& p : points)
        out += fmt(p.x, "%.9g") + "," + fmt(p.y, "%.9g") + "," + p.label + "\n";
    return out;
}

json frame_to_json(const EtfFrame& frame) {
    json j;
    j["k"] = frame.num_vectors();
    j["d"] = frame.feature_dim();
    j["seed"] = frame.seed();
    json basis = json::array();
    for (std::size_t i = 0; i < frame.basis().rows; ++i) {
        json row = json::array();
        for (std::size_t c = 0; c < frame.basis().cols; ++c) row.push_back(frame.basis()(i, c));
        basis.push_back(row);
    }
    j["basis"] = basis;
    return j;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, bool write_files) {
    const EtfFrame frame = build_simplex_etf(config.frame.k, config.frame.d, config.frame.seed);
    const World world = generate_world(config.world);
    const std::uint64_t master = config.world.master_seed;

    HeadParams params = make_head(static_cast<std::size_t>(config.world.input_dim),
                                  config.frame.d,
                                  static_cast<std::size_t>(config.world.classes_per_task),
                                  split_seed(master, 100));
    ExemplarStore store;
    std::vector<TrainLogRow> log;
    RunResult result;

    std::filesystem::path out_dir(config.out_dir);
    if (write_files) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create output directory: " + out_dir.string());
        json manifest;
        manifest["config_hash"] = config_hash(config);
        manifest["seed"] = master;
        write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
        write_text(out_dir / "config.cfg", config_to_text(config));
        write_text(out_dir / "frame.json", frame_to_json(frame).dump() + "\n");
    }

    for (int task = 1; task <= config.world.num_tasks; ++task) {
        if (task > 1)
            grow_classifier(params, static_cast<std::size_t>(config.world.classes_per_task),
                            split_seed(master, 200 + static_cast<std::uint64_t>(task)));

        Rng scene_rng(split_seed(master, 3000 + static_cast<std::uint64_t>(task)));
        std::vector<Scene> scenes;
        for (int i = 0; i < config.world.scenes_per_task; ++i)
            scenes.push_back(
                generate_scene(world, task, SceneMode::Fresh, task * 10000 + i, scene_rng));

        train_task(scenes, task, world, params, frame, config.weights, config.pseudo, config.train,
                   config.ablation, store, &log);
        update_exemplars(store, scenes, task, config.world.exemplars_per_class);

        std::vector<Detection> detections;
        std::vector<ProjectedPoint> projection;
        const EvalReport report = evaluate_task(
            world, task, params, frame, config.inference, config.ablation.separation,
            write_files ? &detections : nullptr, write_files ? &projection : nullptr);
        result.reports.push_back(report);

        if (write_files) {
            const std::string t = std::to_string(task);
            write_text(out_dir / ("report_task" + t + ".json"),
                       report_to_json(report).dump(2) + "\n");
            write_text(out_dir / ("detections_task" + t + ".jsonl"),
                       detections_to_jsonl(detections));
            write_text(out_dir / ("heatmap_task" + t + ".csv"), heatmap_csv(report.heatmap));
            write_text(out_dir / ("class_scores_task" + t + ".csv"), class_scores_csv(report));
            write_text(out_dir / ("pca_task" + t + ".csv"), projection_csv(projection));
        }
    }

    if (write_files) {
        write_text(out_dir / "train_log.csv", train_log_csv(log));
        write_text(out_dir / "summary.csv", summary_csv(result.reports));
    }
    return result;
}

std::vector<VariantRow> run_variants(const std::vector<Variant>& variants, int parallel) {
    std::vector<std::vector<VariantRow>> per_variant(variants.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= variants.size()) return;
            const Variant& v = variants[idx];
            const RunResult res = run_experiment(v.config, /*write_files=*/false);
            std::vector<VariantRow> rows;
            for (const EvalReport& r : res.reports) {
                rows.push_back({v.label, v.config.world.master_seed, r.task, r.previous_map,
                                r.current_map, r.known_map, r.u_recall.value, r.u_recall.defined,
                                r.h, r.h_defined});
            }
            per_variant[idx] = std::move(rows);
        }
    };

    const int n_threads = std::max(1, parallel);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    std::vector<VariantRow> rows;
    for (const std::vector<VariantRow>& v : per_variant)
        rows.insert(rows.end(), v.begin(), v.end());
    return rows;
}

std::vector<Variant> make_ablation_grid(const ExperimentConfig& base,
                                        const std::vector<std::uint64_t>& seeds) {
    std::vector<Variant> variants;
    for (std::uint64_t seed : seeds) {
        for (int sep = 0; sep <= 1; ++sep) {
            for (int dist = 0; dist <= 1; ++dist) {
                ExperimentConfig c = base;
                c.world.master_seed = seed;
                c.ablation.separation = sep != 0;
                c.ablation.distinction = dist != 0;
                const std::string label = std::string("sep=") + (sep ? "on" : "off") +
                                          ",dist=" + (dist ? "on" : "off");
                variants.push_back({label, c});
            }
        }
    }
    return variants;
}

std::vector<Variant> make_sweep(const ExperimentConfig& base, const std::string& key,
                                const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds) {
    if (key != "m" && key != "k")
        throw ConfigError("sweep: unknown key '" + key + "' (expected m or k)");
    std::vector<Variant> variants;
    for (std::uint64_t seed : seeds) {
        for (double v : values) {
            ExperimentConfig c = base;
            c.world.master_seed = seed;
            std::string label;
            if (key == "m") {
                c.weights.margin = v;
                label = "m=" + fmt(v, "%g");
            } else {
                const auto k = static_cast<std::size_t>(v);
                if (static_cast<double>(k) != v || k < 2 || k % 2 != 0)
                    throw ConfigError("sweep: k values must be even integers");
                c.frame.k = k;
                if (c.frame.d < k) c.frame.d = k;
                label = "k=" + std::to_string(k);
            }
            variants.push_back({label, c});
        }
    }
    return variants;
}

void write_variant_csv(const std::string& path, const std::vector<VariantRow>& rows) {
    std::string out = "variant,seed,task,previous_map,current_map,known_map,u_recall,h_score\n";
    for (const VariantRow& r : rows) {
        out += r.label + "," + std::to_string(r.seed) + "," + std::to_string(r.task) + ",";
        out += (r.task > 1 ? fmt(r.previous_map) : std::string{}) + ",";
        out += fmt(r.current_map) + ",";
        out += fmt(r.known_map) + ",";
        out += (r.u_recall_defined ? fmt(r.u_recall) : std::string{}) + ",";
        out += (r.h_defined ? fmt(r.h) : std::string{}) + "\n";
    }
    write_text(path, out);
}

}  // namespace owd
