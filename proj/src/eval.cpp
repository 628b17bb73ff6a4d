#include "owd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "owd/energy.hpp"
#include "owd/matching.hpp"

namespace owd {

namespace {

bool score_order(const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.image_id < b.image_id;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
    std::stable_sort(detections.begin(), detections.end(), score_order);
    std::vector<Detection> kept;
    for (const Detection& d : detections) {
        bool suppressed = false;
        for (const Detection& k : kept) {
            if (k.image_id != d.image_id || k.class_id != d.class_id) continue;
            if (iou(k.box, d.box) >= iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

std::vector<Detection> infer_scene(const HeadParams& params, const EtfFrame& frame,
                                   const Scene& scene, const InferenceConfig& config,
                                   bool use_calibration) {
    const ProposalBatch& batch = scene.proposals;
    const std::size_t n = batch.size();
    if (n == 0) return {};

    const std::size_t c_known = params.known_classes();
    std::vector<HeadOutputs> outs(n);
    Vec z_u(n, 0.0), offsets(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        outs[i] = forward(params, batch.raw[i]);
        z_u[i] = unknown_logit(std::span<const double>(outs[i].z_cls.data(), c_known));
        offsets[i] = score_subspaces(frame, outs[i].f).offset();
    }
    const Vec z_final = use_calibration ? calibrate_unknown(z_u, offsets) : z_u;

    std::vector<Detection> dets;
    for (std::size_t i = 0; i < n; ++i) {
        Vec z = outs[i].z_cls;
        z[params.unknown_node()] = z_final[i];
        const double denom = logsumexp(z);
        const double obj = 1.0 / (1.0 + std::exp(-outs[i].z_obj));
        const Box box{clamp01(outs[i].z_bbox[0]), clamp01(outs[i].z_bbox[1]),
                      clamp01(outs[i].z_bbox[2]), clamp01(outs[i].z_bbox[3])};
        for (std::size_t c = 0; c < z.size(); ++c) {
            const double p = std::exp(z[c] - denom) * obj;
            const int cls = c == params.unknown_node() ? kUnknownClass : static_cast<int>(c);
            dets.push_back({scene.image_id, box, cls, p});
        }
    }
    dets = nms(std::move(dets), config.nms_iou);
    std::vector<Detection> final_dets;
    for (const Detection& d : dets)
        if (d.score >= config.score_threshold) final_dets.push_back(d);
    return final_dets;
}

double average_precision(std::vector<Detection> class_detections,
                         const std::map<int, std::vector<Box>>& gt_by_image,
                         double iou_threshold) {
    std::size_t total_gt = 0;
    for (const auto& [img, boxes] : gt_by_image) total_gt += boxes.size();
    if (total_gt == 0)
        throw std::invalid_argument("average_precision: undefined without ground truth");

    std::stable_sort(class_detections.begin(), class_detections.end(), score_order);
    std::map<int, std::vector<bool>> used;
    for (const auto& [img, boxes] : gt_by_image) used[img].assign(boxes.size(), false);

    std::vector<double> precision, recall;
    std::size_t tp = 0, fp = 0;
    for (const Detection& d : class_detections) {
        const auto it = gt_by_image.find(d.image_id);
        double best = -1.0;
        std::size_t best_j = 0;
        if (it != gt_by_image.end()) {
            for (std::size_t j = 0; j < it->second.size(); ++j) {
                const double v = iou(d.box, it->second[j]);
                if (v > best) {
                    best = v;
                    best_j = j;
                }
            }
        }
        if (best >= iou_threshold && !used[d.image_id][best_j]) {
            used[d.image_id][best_j] = true;
            ++tp;
        } else {
            ++fp;
        }
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    }

    // Area under the monotone envelope of the PR curve.
    for (std::size_t k = precision.size(); k-- > 1;)
        precision[k - 1] = std::max(precision[k - 1], precision[k]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < precision.size(); ++k) {
        ap += (recall[k] - prev_recall) * precision[k];
        prev_recall = recall[k];
    }
    return ap;
}

UnknownRecall unknown_recall(std::span<const Detection> detections,
                             const std::map<int, std::vector<Box>>& unknown_gt_by_image,
                             double iou_threshold) {
    std::size_t total_gt = 0;
    for (const auto& [img, boxes] : unknown_gt_by_image) total_gt += boxes.size();
    if (total_gt == 0) return {0.0, false};

    std::vector<Detection> unk;
    for (const Detection& d : detections)
        if (d.class_id == kUnknownClass) unk.push_back(d);
    std::stable_sort(unk.begin(), unk.end(), score_order);

    std::map<int, std::vector<bool>> used;
    for (const auto& [img, boxes] : unknown_gt_by_image) used[img].assign(boxes.size(), false);

    std::size_t matched = 0;
    for (const Detection& d : unk) {
        const auto it = unknown_gt_by_image.find(d.image_id);
        if (it == unknown_gt_by_image.end()) continue;
        double best = -1.0;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < it->second.size(); ++j) {
            if (used[d.image_id][j]) continue;
            const double v = iou(d.box, it->second[j]);
            if (v > best) {
                best = v;
                best_j = j;
            }
        }
        if (best >= iou_threshold) {
            used[d.image_id][best_j] = true;
            ++matched;
        }
    }
    return {100.0 * static_cast<double>(matched) / static_cast<double>(total_gt), true};
}

double h_score(double known_map, double u_recall) {
    const double s = known_map + u_recall;
    return s > 0.0 ? 2.0 * known_map * u_recall / s : 0.0;
}

Mat energy_heatmap(const HeadParams& params, const World& world,
                   const std::vector<std::vector<Scene>>& scenes_by_task, double iou_threshold) {
    const std::size_t t = scenes_by_task.size();
    const int cpt = world.config.classes_per_task;
    Mat heat(t, t);
    for (std::size_t i = 0; i < t; ++i) {
        Vec sums(t, 0.0);
        std::size_t count = 0;
        for (const Scene& scene : scenes_by_task[i]) {
            const std::vector<MatchStatus> statuses =
                match_gt(scene.proposals.boxes, scene.annotations, iou_threshold);
            for (std::size_t p = 0; p < statuses.size(); ++p) {
                if (!statuses[p].is_gt()) continue;
                const HeadOutputs o = forward(params, scene.proposals.raw[p]);
                for (std::size_t j = 0; j < t; ++j) {
                    const std::size_t lo = j * static_cast<std::size_t>(cpt);
                    sums[j] += head_score(
                        std::span<const double>(o.z_cls.data() + lo, static_cast<std::size_t>(cpt)));
                }
                ++count;
            }
        }
        for (std::size_t j = 0; j < t; ++j)
            heat(i, j) = count > 0 ? sums[j] / static_cast<double>(count) : 0.0;
    }
    return heat;
}

namespace {

// Dominant eigenvector of cov by power iteration; returns the eigenvalue and
// writes the unit vector (zero vector when the matrix is numerically null).
double power_iteration(const Mat& cov, Vec& v) {
    const std::size_t d = cov.rows;
    v.assign(d, 0.0);
    // Fixed, reproducible start direction.
    Rng rng(0x9D2C5680);
    Vec x(d);
    for (double& e : x) e = rng.normal();
    double len = norm(x);
    for (double& e : x) e /= len;

    double lambda = 0.0;
    for (int iter = 0; iter < 1000; ++iter) {
        Vec y = matvec(cov, x);
        len = norm(y);
        if (len < 1e-300) return 0.0;
        for (double& e : y) e /= len;
        double diff = 0.0;
        for (std::size_t j = 0; j < d; ++j) diff = std::max(diff, std::abs(y[j] - x[j]));
        x = std::move(y);
        if (diff < 1e-15) break;
    }
    const Vec cx = matvec(cov, x);
    lambda = dot(x, cx);
    v = x;
    return lambda;
}

void fix_sign(Vec& v) {
    for (double e : v) {
        if (std::abs(e) > 1e-12) {
            if (e < 0.0)
                for (double& x : v) x = -x;
            return;
        }
    }
}

}  // namespace

std::vector<ProjectedPoint> pca_project(const std::vector<Vec>& features,
                                        const std::vector<std::string>& labels) {
    if (features.size() < 2) throw std::invalid_argument("pca_project: need at least two points");
    if (!labels.empty() && labels.size() != features.size())
        throw std::invalid_argument("pca_project: label count mismatch");
    const std::size_t n = features.size();
    const std::size_t d = features[0].size();
    for (const Vec& f : features)
        if (f.size() != d) throw std::invalid_argument("pca_project: ragged features");

    Vec mean(d, 0.0);
    for (const Vec& f : features) axpy(mean, f, 1.0);
    for (double& m : mean) m /= static_cast<double>(n);

    Mat cov(d, d);
    Vec centered(d);
    std::vector<Vec> all_centered(n, Vec(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) centered[j] = features[i][j] - mean[j];
        all_centered[i] = centered;
        add_outer(cov, centered, centered, 1.0 / static_cast<double>(n));
    }

    Vec v1, v2;
    const double l1 = power_iteration(cov, v1);
    fix_sign(v1);
    if (l1 > 0.0) {
        Mat deflated = cov;
        add_outer(deflated, v1, v1, -l1);
        const double l2 = power_iteration(deflated, v2);
        if (l2 <= 1e-10 * std::max(l1, 1e-300))
            v2.assign(d, 0.0);  // rank-deficient: second component zeroed
        else
            fix_sign(v2);
    } else {
        v1.assign(d, 0.0);
        v2.assign(d, 0.0);
    }

    std::vector<ProjectedPoint> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].x = v1.empty() ? 0.0 : dot(all_centered[i], v1);
        out[i].y = v2.empty() ? 0.0 : dot(all_centered[i], v2);
        out[i].label = labels.empty() ? std::string{} : labels[i];
    }
    return out;
}

EvalReport evaluate_task(const World& world, int task, const HeadParams& params,
                         const EtfFrame& frame, const InferenceConfig& config,
                         bool use_calibration, std::vector<Detection>* out_detections,
                         std::vector<ProjectedPoint>* out_projection) {
    EvalReport report;
    report.task = task;
    const WorldConfig& wc = world.config;

    Rng rng(split_seed(wc.master_seed, 5000 + static_cast<std::uint64_t>(task)));
    std::vector<Scene> test_scenes;
    for (int i = 0; i < wc.test_scenes_per_task; ++i)
        test_scenes.push_back(
            generate_scene(world, task, SceneMode::Test, task * 1000000 + i, rng));

    std::vector<Detection> all_dets;
    std::map<int, std::map<int, std::vector<Box>>> known_gt;  // class -> image -> boxes
    std::map<int, std::vector<Box>> unknown_gt;               // image -> boxes
    for (const Scene& scene : test_scenes) {
        const std::vector<Detection> dets = infer_scene(params, frame, scene, config, use_calibration);
        all_dets.insert(all_dets.end(), dets.begin(), dets.end());
        for (const GtInstance& a : scene.annotations)
            known_gt[a.class_id][scene.image_id].push_back(a.box);
        for (const Box& b : scene.unknown_gt) unknown_gt[scene.image_id].push_back(b);
    }

    const int prev_end = world.known_before(task);
    const int known_end = world.known_through(task);
    double prev_sum = 0.0, curr_sum = 0.0, known_sum = 0.0;
    int prev_n = 0, curr_n = 0, known_n = 0;
    for (int cls = 0; cls < known_end; ++cls) {
        const auto it = known_gt.find(cls);
        if (it == known_gt.end()) continue;  // no gt for this class: AP undefined, excluded
        std::vector<Detection> cls_dets;
        for (const Detection& d : all_dets)
            if (d.class_id == cls) cls_dets.push_back(d);
        const double ap = 100.0 * average_precision(std::move(cls_dets), it->second);
        known_sum += ap;
        ++known_n;
        if (cls < prev_end) {
            prev_sum += ap;
            ++prev_n;
        } else {
            curr_sum += ap;
            ++curr_n;
        }
    }
    report.previous_map = prev_n > 0 ? prev_sum / prev_n : 0.0;
    report.current_map = curr_n > 0 ? curr_sum / curr_n : 0.0;
    report.known_map = known_n > 0 ? known_sum / known_n : 0.0;
    report.u_recall = unknown_recall(all_dets, unknown_gt);
    report.h = h_score(report.known_map, report.u_recall.value);
    report.h_defined = report.u_recall.defined;

    // Head-score heatmap over per-task scene groups.
    std::vector<std::vector<Scene>> by_task;
    for (int i = 1; i <= task; ++i) {
        std::vector<Scene> group;
        for (int s = 0; s < wc.heatmap_scenes_per_task; ++s)
            group.push_back(generate_scene_for_classes(
                world, task, {world.known_before(i), world.known_through(i)},
                task * 1000000 + 500000 + i * 1000 + s, rng));
        by_task.push_back(std::move(group));
    }
    report.heatmap = energy_heatmap(params, world, by_task);

    // Subspace score summaries over the test scenes, plus the optional
    // feature projection for every proposal.
    std::map<int, ScorePairSummary> per_class;
    auto accumulate = [](ScorePairSummary& s, const SubspaceScores& sc) {
        s.mean_s_known += sc.s_known;
        s.mean_s_unknown += sc.s_unknown;
        s.count += 1;
    };
    std::vector<Vec> proj_features;
    std::vector<std::string> proj_labels;
    for (const Scene& scene : test_scenes) {
        const std::vector<MatchStatus> known_match =
            match_gt(scene.proposals.boxes, scene.annotations, 0.5);
        std::vector<GtInstance> unk_instances;
        for (const Box& b : scene.unknown_gt) unk_instances.push_back({kUnknownClass, b});
        const std::vector<MatchStatus> unk_match =
            match_gt(scene.proposals.boxes, unk_instances, 0.5);
        for (std::size_t p = 0; p < scene.proposals.size(); ++p) {
            const bool want_scores = known_match[p].is_gt() || unk_match[p].is_gt();
            if (!want_scores && !out_projection) continue;
            const HeadOutputs o = forward(params, scene.proposals.raw[p]);
            if (out_projection) {
                proj_features.push_back(o.f);
                proj_labels.push_back(known_match[p].is_gt()  ? "known"
                                      : unk_match[p].is_gt() ? "unknown"
                                                             : "background");
            }
            if (!want_scores) continue;
            const SubspaceScores sc = score_subspaces(frame, o.f);
            if (known_match[p].is_gt()) {
                accumulate(per_class[known_match[p].class_id], sc);
                accumulate(report.known_scores, sc);
            } else {
                accumulate(report.unknown_scores, sc);
            }
        }
    }
    if (out_detections) *out_detections = all_dets;
    if (out_projection) *out_projection = pca_project(proj_features, proj_labels);
    auto finalize = [](ScorePairSummary& s) {
        if (s.count > 0) {
            s.mean_s_known /= s.count;
            s.mean_s_unknown /= s.count;
        }
    };
    finalize(report.known_scores);
    finalize(report.unknown_scores);
    for (auto& [cls, summary] : per_class) {
        finalize(summary);
        report.per_class_scores.push_back({cls, summary});
    }
    return report;
}

}  // namespace owd
