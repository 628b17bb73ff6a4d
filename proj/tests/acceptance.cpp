// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Criteria 6-8 run full synthetic training, so this binary takes a few
// minutes; everything else is sub-second.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "gradcheck_common.hpp"
#include "owd/runner.hpp"

using namespace owd;
using namespace owd::testing;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// ---- criterion 1: ETF geometry ----
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_diag = 0.0, worst_off = 0.0;
    for (const std::size_t k : {2ul, 4ul, 32ul, 64ul, 128ul}) {
        for (const std::size_t d : {k, 2 * k}) {
            const GramErrors err = gram_errors(build_simplex_etf(k, d, 7));
            worst_diag = std::max(worst_diag, err.max_diag_err);
            worst_off = std::max(worst_off, err.max_offdiag_err);
        }
    }
    const double secs = elapsed_s(t0);
    const bool pass = worst_diag < 1e-9 && worst_off < 1e-9 && secs < 1.0;
    report(1, pass,
           "ETF Gram: diag err " + fmt("%.2e", worst_diag) + ", offdiag err " +
               fmt("%.2e", worst_off) + ", " + fmt("%.2f", secs) + " s");
}

// ---- criterion 2: gradient fidelity ----
void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = 100;
    struct Entry {
        const char* name;
        double err;
    };
    std::vector<Entry> entries;
    entries.push_back({"focal", gradcheck_focal(201, n).max_err});
    entries.push_back({"energy-margin", gradcheck_margin(202, n).max_err});
    entries.push_back({"subspace-focal", gradcheck_subspace_focal(203, n).max_err});
    entries.push_back({"distinction", gradcheck_distinction(204, n).max_err});
    entries.push_back({"l1", gradcheck_l1(205, n).max_err});
    entries.push_back({"giou", gradcheck_giou(206, n).max_err});
    entries.push_back({"total", gradcheck_total(207, n, LossWeights{}).max_err});
    const double secs = elapsed_s(t0);

    bool pass = secs < 30.0;
    std::string detail = "gradcheck max rel err:";
    for (const Entry& e : entries) {
        pass = pass && e.err < 1e-5;
        detail += std::string(" ") + e.name + "=" + fmt("%.1e", e.err);
    }
    detail += ", " + fmt("%.1f", secs) + " s";
    report(2, pass, detail);
}

// ---- criterion 3: paper formula anchors ----
void criterion_3() {
    const double h1 = h_score(66.2, 65.1);
    const double h2 = h_score(71.6, 68.7);
    const bool pass = std::abs(h1 - 65.6) <= 0.05 && std::abs(h2 - 70.1) <= 0.05 &&
                      pseudo_count(3, 20, 20) == 6 && pseudo_count(3, 60, 20) == 3;
    report(3, pass,
           "h(66.2,65.1)=" + fmt("%.3f", h1) + ", h(71.6,68.7)=" + fmt("%.3f", h2) +
               ", pseudo_count(3,20,20)=" + std::to_string(pseudo_count(3, 20, 20)) +
               ", pseudo_count(3,60,20)=" + std::to_string(pseudo_count(3, 60, 20)));
}

// ---- criterion 4: exact loss zero regions ----
void criterion_4() {
    bool pass = true;

    const std::vector<MatchStatus> statuses{MatchStatus::gt_matched(0), MatchStatus::gt_matched(1),
                                            MatchStatus::pseudo_unknown(),
                                            MatchStatus::pseudo_unknown(),
                                            MatchStatus::background()};
    const Vec offsets{-0.5, -1.7, 0.5, 2.2, 0.0};
    pass = pass && energy_margin_loss(offsets, statuses, 0.5) == 0.0;

    const EtfFrame frame = build_simplex_etf(8, 16, 17);
    TotalLossInstance inst = make_total_instance(frame, 404);
    std::fill(inst.batch.from_prev.begin(), inst.batch.from_prev.end(), 0);
    // replay batch with no previous-task proposals: distinction term exactly 0
    // (and an entirely empty feature list gives exactly 0 as well)
    pass = pass && distinction_loss({}, {}, inst.params) == 0.0;

    HeadParams a = inst.params;
    HeadParams b = inst.params;
    a.prev_class_count = 1;
    b.prev_class_count = 3;
    const double la = total_loss(inst.batch, frame, a, LossWeights{}, false).total;
    const double lb = total_loss(inst.batch, frame, b, LossWeights{}, false).total;
    pass = pass && la == lb;

    report(4, pass,
           "margin zero region exact, empty replay distinction = 0, replay-off total "
           "partition-independent (" +
               fmt("%.12g", la) + " == " + fmt("%.12g", lb) + ")");
}

// ---- criterion 5: calibration properties ----
void criterion_5() {
    Rng rng(505);
    bool pass = true;
    double worst_mean = 0.0, worst_affine = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform_int(0, 12));
        const Vec z_u = random_vec(rng, n, 3.0);
        const Vec offsets = random_vec(rng, n, 2.0);
        const Vec out = calibrate_unknown(z_u, offsets);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += out[i] - z_u[i];
        worst_mean = std::max(worst_mean, std::abs(mean / static_cast<double>(n)));

        Vec rescaled(n);
        const double scale = rng.uniform(0.2, 5.0);
        const double shift = rng.uniform(-3.0, 3.0);
        for (std::size_t i = 0; i < n; ++i) rescaled[i] = scale * offsets[i] + shift;
        const Vec out2 = calibrate_unknown(z_u, rescaled);
        for (std::size_t i = 0; i < n; ++i)
            worst_affine = std::max(worst_affine, std::abs(out[i] - out2[i]));

        const Vec constant(n, 1.234);
        pass = pass && calibrate_unknown(z_u, constant) == z_u;
    }
    pass = pass && worst_mean < 1e-9 && worst_affine < 1e-9;
    report(5, pass,
           "calibration mean err " + fmt("%.2e", worst_mean) + ", affine-invariance err " +
               fmt("%.2e", worst_affine) + ", equal-offset identity exact");
}

// ---- criteria 6-8 share trained runs ----

struct CellResult {
    std::vector<EvalReport> reports;
};

ExperimentConfig acceptance_config(std::uint64_t seed) {
    ExperimentConfig c;  // defaults
    c.world.master_seed = seed;
    return c;
}

CellResult run_cell(std::uint64_t seed, bool separation, bool distinction, int tasks) {
    ExperimentConfig c = acceptance_config(seed);
    c.world.num_tasks = tasks;
    c.ablation.separation = separation;
    c.ablation.distinction = distinction;
    return {run_experiment(c, /*write_files=*/false).reports};
}

void criteria_6_7_8() {
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    const auto t0 = std::chrono::steady_clock::now();

    // --- criterion 6: 2x2 grid on the default 4-task world ---
    bool pass6a = true;
    std::string detail6a;
    std::vector<CellResult> on_on, on_off, off_on, off_off;
    for (const std::uint64_t seed : seeds) {
        on_on.push_back(run_cell(seed, true, true, 4));
        on_off.push_back(run_cell(seed, true, false, 4));
        off_on.push_back(run_cell(seed, false, true, 4));
        off_off.push_back(run_cell(seed, false, false, 4));
    }
    // (a) separation strictly raises U-Rec for every task with unknown gt,
    // every seed, at both settings of the distinction flag.
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        for (std::size_t t = 0; t < on_on[s].reports.size(); ++t) {
            const EvalReport& on1 = on_on[s].reports[t];
            const EvalReport& off1 = off_on[s].reports[t];
            if (on1.u_recall.defined && off1.u_recall.defined &&
                !(on1.u_recall.value > off1.u_recall.value)) {
                pass6a = false;
                detail6a += " [seed " + std::to_string(seeds[s]) + " task " +
                            std::to_string(on1.task) + " dist=on: " +
                            fmt("%.1f", on1.u_recall.value) + " !> " +
                            fmt("%.1f", off1.u_recall.value) + "]";
            }
            const EvalReport& on2 = on_off[s].reports[t];
            const EvalReport& off2 = off_off[s].reports[t];
            if (on2.u_recall.defined && off2.u_recall.defined &&
                !(on2.u_recall.value > off2.u_recall.value)) {
                pass6a = false;
                detail6a += " [seed " + std::to_string(seeds[s]) + " task " +
                            std::to_string(on2.task) + " dist=off: " +
                            fmt("%.1f", on2.u_recall.value) + " !> " +
                            fmt("%.1f", off2.u_recall.value) + "]";
            }
        }
    }

    // (b) with separation fixed, distinction keeps previous-mAP at least as
    // high on average over seeds, for tasks 2..4.
    bool pass6b = true;
    std::string detail6b;
    for (int task_idx = 1; task_idx < 4; ++task_idx) {
        double with_sep_on = 0.0, without_sep_on = 0.0;
        double with_sep_off = 0.0, without_sep_off = 0.0;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            with_sep_on += on_on[s].reports[static_cast<std::size_t>(task_idx)].previous_map;
            without_sep_on += on_off[s].reports[static_cast<std::size_t>(task_idx)].previous_map;
            with_sep_off += off_on[s].reports[static_cast<std::size_t>(task_idx)].previous_map;
            without_sep_off += off_off[s].reports[static_cast<std::size_t>(task_idx)].previous_map;
        }
        if (with_sep_on < without_sep_on - 1e-9) {
            pass6b = false;
            detail6b += " [sep=on task " + std::to_string(task_idx + 1) + ": " +
                        fmt("%.2f", with_sep_on / 5.0) + " < " +
                        fmt("%.2f", without_sep_on / 5.0) + "]";
        }
        if (with_sep_off < without_sep_off - 1e-9) {
            pass6b = false;
            detail6b += " [sep=off task " + std::to_string(task_idx + 1) + ": " +
                        fmt("%.2f", with_sep_off / 5.0) + " < " +
                        fmt("%.2f", without_sep_off / 5.0) + "]";
        }
    }
    const double secs6 = elapsed_s(t0);
    report(6, pass6a && pass6b && secs6 < 300.0,
           "ablation directions over 5 seeds (" + fmt("%.0f", secs6) + " s)" +
               (pass6a ? " U-Rec: separation strictly higher in every task/seed" : detail6a) +
               (pass6b ? "; previous-mAP preserved by distinction" : detail6b));

    // --- criterion 7: heatmap direction on 2-task runs ---
    int heat_ok = 0;
    std::string detail7;
    for (const std::uint64_t seed : seeds) {
        const CellResult with_dist = run_cell(seed, true, true, 2);
        const CellResult without_dist = run_cell(seed, true, false, 2);
        const Mat& hw = with_dist.reports.back().heatmap;
        const Mat& ho = without_dist.reports.back().heatmap;
        const double diag = (hw(0, 0) + hw(1, 1)) / 2.0;
        const double off = (hw(0, 1) + hw(1, 0)) / 2.0;
        const double off_base = (ho(0, 1) + ho(1, 0)) / 2.0;
        const bool ok = diag > off && off < off_base;
        heat_ok += ok ? 1 : 0;
        detail7 += " [seed " + std::to_string(seed) + ": diag " + fmt("%.2f", diag) + " off " +
                   fmt("%.2f", off) + " base-off " + fmt("%.2f", off_base) + (ok ? "" : " X") + "]";
    }
    report(7, heat_ok >= 4, "heatmap direction holds in " + std::to_string(heat_ok) + "/5 seeds:" + detail7);

    // --- criterion 8: subspace score separation after task 1 ---
    bool pass8 = true;
    std::string detail8;
    for (const std::uint64_t seed : seeds) {
        const CellResult r = run_cell(seed, true, true, 1);
        const EvalReport& rep = r.reports[0];
        const bool known_ok = rep.known_scores.count > 0 &&
                              rep.known_scores.mean_s_known > rep.known_scores.mean_s_unknown;
        const bool unknown_ok = rep.unknown_scores.count > 0 &&
                                rep.unknown_scores.mean_s_unknown > rep.unknown_scores.mean_s_known;
        if (!(known_ok && unknown_ok)) pass8 = false;
        detail8 += " [seed " + std::to_string(seed) + ": known " +
                   fmt("%.2f", rep.known_scores.mean_s_known) + "/" +
                   fmt("%.2f", rep.known_scores.mean_s_unknown) + ", unknown " +
                   fmt("%.2f", rep.unknown_scores.mean_s_known) + "/" +
                   fmt("%.2f", rep.unknown_scores.mean_s_unknown) +
                   ((known_ok && unknown_ok) ? "" : " X") + "]";
    }
    report(8, pass8, "task-1 subspace separation (mean s_k/s_u):" + detail8);
}

// ---- criterion 9: byte-identical reruns ----
void criterion_9() {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "owd_acceptance_determinism";
    fs::remove_all(base);

    ExperimentConfig c = acceptance_config(11);
    c.world.num_tasks = 2;
    c.train.steps_per_task = 300;
    c.train.replay_steps = 150;

    auto run_into = [&](const std::string& name) {
        ExperimentConfig cc = c;
        cc.out_dir = (base / name).string();
        run_experiment(cc, /*write_files=*/true);
        return cc.out_dir;
    };
    const std::string dir_a = run_into("a");
    const std::string dir_b = run_into("b");

    bool pass = true;
    std::string mismatch;
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        ++files;
        const fs::path other = fs::path(dir_b) / entry.path().filename();
        std::ifstream fa(entry.path(), std::ios::binary);
        std::ifstream fb(other, std::ios::binary);
        std::stringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        if (sa.str() != sb.str()) {
            pass = false;
            mismatch += " " + entry.path().filename().string();
        }
    }
    pass = pass && files >= 10;  // manifest, frame, logs, per-task artifacts
    report(9, pass,
           "two identical runs, " + std::to_string(files) + " files compared" +
               (mismatch.empty() ? ", all byte-identical" : ", mismatch:" + mismatch));
    fs::remove_all(base);
}

// ---- criterion 10: metric oracles ----
void criterion_10() {
    const Box g1{0.0, 0.0, 0.2, 0.2};
    const Box g2{0.5, 0.5, 0.7, 0.7};
    const Box far{0.8, 0.0, 0.9, 0.1};
    std::map<int, std::vector<Box>> gts{{1, {g1, g2}}};
    const double ap = average_precision(
        {{1, g1, 0, 0.9}, {1, far, 0, 0.8}, {1, g2, 0, 0.7}}, gts);
    const double iou_val = iou(Box{0, 0, 2, 2}, Box{1, 1, 3, 3});
    const double giou_val = giou(Box{0, 0, 1, 1}, Box{2, 2, 3, 3});
    const bool pass = std::abs(ap - 5.0 / 6.0) < 1e-6 && std::abs(iou_val - 1.0 / 7.0) < 1e-9 &&
                      std::abs(giou_val + 7.0 / 9.0) < 1e-9;
    report(10, pass,
           "AP=" + fmt("%.6f", ap) + " (5/6), IoU=" + fmt("%.6f", iou_val) +
               " (1/7), gIoU=" + fmt("%.6f", giou_val) + " (-7/9)");
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criteria_6_7_8();
    criterion_9();
    criterion_10();
    if (failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
