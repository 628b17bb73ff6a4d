#include "owd/sim.hpp"

#include <algorithm>
#include <cmath>

#include "owd/energy.hpp"

namespace owd {

namespace {

Box random_box(Rng& rng, double min_side, double max_side) {
    const double w = rng.uniform(min_side, max_side);
    const double h = rng.uniform(min_side, max_side);
    const double x1 = rng.uniform(0.0, 1.0 - w);
    const double y1 = rng.uniform(0.0, 1.0 - h);
    return {x1, y1, x1 + w, y1 + h};
}

// Corner jitter bounded by rel * min side; rel < 0.5 keeps the box valid.
Box jitter_box(const Box& b, double rel, Rng& rng) {
    const double m = rel * std::min(b.width(), b.height());
    Box out{b.x1 + m * rng.uniform(-1.0, 1.0), b.y1 + m * rng.uniform(-1.0, 1.0),
            b.x2 + m * rng.uniform(-1.0, 1.0), b.y2 + m * rng.uniform(-1.0, 1.0)};
    out.x1 = std::clamp(out.x1, 0.0, 1.0);
    out.y1 = std::clamp(out.y1, 0.0, 1.0);
    out.x2 = std::clamp(out.x2, 0.0, 1.0);
    out.y2 = std::clamp(out.y2, 0.0, 1.0);
    return out;
}

// feature_noise and background_sigma are expected vector norms, so the
// per-dimension std is scaled by 1/sqrt(sem); prototypes have unit norm.
// content_scale models how much of the object the proposal crop actually
// covers: badly localized proposals see weaker class content.
// The box enters the observation as centered center/size coordinates so the
// geometry block is roughly zero-mean across proposals.
void encode_box(const Box& box, int offset, Vec& raw) {
    raw[static_cast<std::size_t>(offset)] = 0.5 * (box.x1 + box.x2) - 0.5;
    raw[static_cast<std::size_t>(offset) + 1] = 0.5 * (box.y1 + box.y2) - 0.5;
    raw[static_cast<std::size_t>(offset) + 2] = box.width() - 0.5;
    raw[static_cast<std::size_t>(offset) + 3] = box.height() - 0.5;
}

Vec observation(const World& world, int class_id, double content_scale, const Box& box,
                Rng& rng) {
    const WorldConfig& c = world.config;
    Vec raw(static_cast<std::size_t>(c.input_dim), 0.0);
    const int sem = world.semantic_dim();
    const double noise = c.feature_noise / std::sqrt(static_cast<double>(sem));
    for (int j = 0; j < sem; ++j)
        raw[static_cast<std::size_t>(j)] =
            content_scale *
                world.prototypes(static_cast<std::size_t>(class_id), static_cast<std::size_t>(j)) +
            noise * rng.normal();
    encode_box(box, sem, raw);
    return raw;
}

Vec background_observation(const World& world, const Box& box, Rng& rng) {
    const WorldConfig& c = world.config;
    Vec raw(static_cast<std::size_t>(c.input_dim), 0.0);
    const int sem = world.semantic_dim();
    const double noise = c.background_sigma / std::sqrt(static_cast<double>(sem));
    for (int j = 0; j < sem; ++j) raw[static_cast<std::size_t>(j)] = noise * rng.normal();
    encode_box(box, sem, raw);
    return raw;
}

Scene make_scene(const World& world, int task, std::pair<int, int> known_range, int image_id,
                 Rng& rng) {
    const WorldConfig& c = world.config;
    Scene scene;
    scene.image_id = image_id;
    scene.origin_task = task;

    const int k_gt = rng.uniform_int(c.min_known_objects, c.max_known_objects);
    for (int i = 0; i < k_gt; ++i) {
        const int cls = known_range.first + rng.uniform_int(0, known_range.second - known_range.first - 1);
        const Box box = random_box(rng, c.min_box_side, c.max_box_side);
        scene.objects.push_back({cls, box, true});
        scene.annotations.push_back({cls, box});
    }

    const int first_unknown = world.known_through(task);
    const int unknown_classes = world.total_classes() - first_unknown;
    const int u_cnt =
        unknown_classes > 0 ? rng.uniform_int(c.min_unknown_objects, c.max_unknown_objects) : 0;
    for (int i = 0; i < u_cnt; ++i) {
        const int cls = first_unknown + rng.uniform_int(0, unknown_classes - 1);
        const Box box = random_box(rng, c.min_box_side, c.max_box_side);
        scene.objects.push_back({cls, box, false});
        scene.unknown_gt.push_back(box);
    }

    for (const SceneObject& obj : scene.objects) {
        for (int k = 0; k < c.proposals_per_object; ++k) {
            const double rel = k == 0 ? c.tight_jitter : c.loose_jitter;
            const Box pbox = jitter_box(obj.box, rel, rng);
            scene.proposals.add(
                observation(world, obj.class_id, iou(pbox, obj.box), pbox, rng), pbox);
        }
    }
    for (int i = 0; i < c.background_per_scene; ++i) {
        const Box box = random_box(rng, 0.05, 0.95);
        scene.proposals.add(background_observation(world, box, rng), box);
    }
    return scene;
}

}  // namespace

World generate_world(const WorldConfig& config) {
    if (config.num_tasks < 1 || config.classes_per_task < 1)
        throw std::invalid_argument("generate_world: need at least one task and class");
    if (config.input_dim < 5)
        throw std::invalid_argument("generate_world: input_dim must leave room for box geometry");

    World world;
    world.config = config;
    const int total = world.total_classes();
    const int sem = world.semantic_dim();
    world.prototypes = Mat(static_cast<std::size_t>(total), static_cast<std::size_t>(sem));

    // Unit prototypes with bounded pairwise similarity, by rejection.
    Rng rng(split_seed(config.master_seed, 1));
    constexpr double kMaxDot = 0.5;
    constexpr int kMaxAttempts = 500;
    for (int cidx = 0; cidx < total; ++cidx) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            Vec v(static_cast<std::size_t>(sem));
            for (double& x : v) x = rng.normal();
            const double len = norm(v);
            if (len < 1e-9) continue;
            for (double& x : v) x /= len;
            bool ok = true;
            for (int prev = 0; prev < cidx && ok; ++prev)
                if (dot(world.prototypes.row(static_cast<std::size_t>(prev)), v) > kMaxDot)
                    ok = false;
            if (!ok) continue;
            for (int j = 0; j < sem; ++j)
                world.prototypes(static_cast<std::size_t>(cidx), static_cast<std::size_t>(j)) =
                    v[static_cast<std::size_t>(j)];
            placed = true;
        }
        if (!placed)
            throw std::invalid_argument(
                "generate_world: prototype crowding, too many classes for input_dim");
    }
    return world;
}

Scene generate_scene(const World& world, int task, SceneMode mode, int image_id, Rng& rng) {
    if (task < 1 || task > world.config.num_tasks)
        throw std::invalid_argument("generate_scene: task out of range");
    const std::pair<int, int> range =
        mode == SceneMode::Fresh
            ? std::pair<int, int>{world.known_before(task), world.known_through(task)}
            : std::pair<int, int>{0, world.known_through(task)};
    return make_scene(world, task, range, image_id, rng);
}

Scene generate_scene_for_classes(const World& world, int task, std::pair<int, int> class_range,
                                 int image_id, Rng& rng) {
    return make_scene(world, task, class_range, image_id, rng);
}

std::vector<Scene> ExemplarStore::scenes() const {
    std::vector<Scene> out;
    std::vector<int> seen;
    for (const Entry& e : entries) {
        if (std::find(seen.begin(), seen.end(), e.scene.image_id) != seen.end()) continue;
        seen.push_back(e.scene.image_id);
        out.push_back(e.scene);
    }
    return out;
}

void update_exemplars(ExemplarStore& store, const std::vector<Scene>& task_scenes, int task,
                      int exemplars_per_class) {
    (void)task;
    if (task_scenes.empty()) return;
    // The task's class slice is whatever its fresh scenes annotate.
    std::vector<int> classes;
    for (const Scene& s : task_scenes)
        for (const GtInstance& a : s.annotations)
            if (std::find(classes.begin(), classes.end(), a.class_id) == classes.end())
                classes.push_back(a.class_id);
    std::sort(classes.begin(), classes.end());

    for (int cls : classes) {
        int stored = 0;
        for (const Scene& s : task_scenes) {
            if (stored >= exemplars_per_class) break;
            const bool has = std::any_of(s.annotations.begin(), s.annotations.end(),
                                         [cls](const GtInstance& a) { return a.class_id == cls; });
            if (!has) continue;
            store.entries.push_back({cls, s});
            ++stored;
        }
    }
}

void sgd_step(HeadParams& params, const Gradients& grads, double lr) {
    for (std::size_t i = 0; i < params.feat_w.data.size(); ++i)
        params.feat_w.data[i] -= lr * grads.feat_w.data[i];
    for (std::size_t i = 0; i < params.feat_b.size(); ++i) params.feat_b[i] -= lr * grads.feat_b[i];
    for (std::size_t i = 0; i < params.cls_w.data.size(); ++i)
        params.cls_w.data[i] -= lr * grads.cls_w.data[i];
    for (std::size_t i = 0; i < params.cls_b.size(); ++i) params.cls_b[i] -= lr * grads.cls_b[i];
    params.obj_w -= lr * grads.obj_w;
    params.obj_b -= lr * grads.obj_b;
    for (std::size_t i = 0; i < params.box_w.data.size(); ++i)
        params.box_w.data[i] -= lr * grads.box_w.data[i];
    for (std::size_t i = 0; i < params.box_b.size(); ++i) params.box_b[i] -= lr * grads.box_b[i];
}

StepResult compute_step(Scene& scene, int task, const World& world, const HeadParams& params,
                        const EtfFrame& frame, const LossWeights& weights,
                        const PseudoConfig& pseudo, const AblationFlags& flags,
                        bool replay_active, bool allow_pseudo) {
    ProposalBatch& batch = scene.proposals;
    const std::size_t n = batch.size();

    // Forward for pseudo-label selection (unknown logits + offsets per image).
    Vec z_u(n, 0.0), offsets(n, 0.0);
    const std::size_t c_known = params.known_classes();
    for (std::size_t i = 0; i < n; ++i) {
        const HeadOutputs o = forward(params, batch.raw[i]);
        z_u[i] = unknown_logit(std::span<const double>(o.z_cls.data(), c_known));
        offsets[i] = score_subspaces(frame, o.f).offset();
    }
    const Vec ranking = flags.separation && n > 0 ? calibrate_unknown(z_u, offsets) : z_u;

    std::vector<Box> gt_boxes;
    std::vector<MatchStatus> statuses =
        match_gt(batch.boxes, scene.annotations, pseudo.iou_match_threshold, &gt_boxes);
    if (allow_pseudo)
        select_pseudo_unknowns(statuses, batch.boxes, ranking,
                               static_cast<int>(scene.annotations.size()),
                               world.known_through(task), pseudo);
    batch.status = std::move(statuses);
    batch.gt_boxes = std::move(gt_boxes);
    const std::uint8_t prev_tag = scene.origin_task < task ? 1 : 0;
    batch.from_prev.assign(n, prev_tag);

    LossWeights eff = weights;
    if (!flags.separation) eff.separation = 0.0;
    if (!flags.distinction) eff.distinction = 0.0;

    StepResult result;
    result.losses = total_loss(batch, frame, params, eff, replay_active, &result.grads);
    if (!std::isfinite(result.losses.total))
        throw DivergenceError("training diverged: non-finite loss at task " + std::to_string(task));
    return result;
}

LossBreakdown train_step(Scene& scene, int task, const World& world, HeadParams& params,
                         const EtfFrame& frame, const LossWeights& weights,
                         const PseudoConfig& pseudo, const AblationFlags& flags,
                         bool replay_active, double learning_rate, bool allow_pseudo) {
    const StepResult r = compute_step(scene, task, world, params, frame, weights, pseudo, flags,
                                      replay_active, allow_pseudo);
    sgd_step(params, r.grads, learning_rate);
    return r.losses;
}

AdamState::AdamState(const HeadParams& params)
    : m_(Gradients::zeros_like(params)), v_(Gradients::zeros_like(params)) {}

void AdamState::update(HeadParams& params, const Gradients& grads, const TrainConfig& train) {
    ++step_;
    const double b1 = train.adam_beta1;
    const double b2 = train.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    const double lr = train.learning_rate;
    const double eps = train.adam_eps;

    auto apply = [&](double& p, double& m, double& v, double g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        p -= lr * (m / corr1) / (std::sqrt(v / corr2) + eps);
    };
    for (std::size_t i = 0; i < params.feat_w.data.size(); ++i)
        apply(params.feat_w.data[i], m_.feat_w.data[i], v_.feat_w.data[i], grads.feat_w.data[i]);
    for (std::size_t i = 0; i < params.feat_b.size(); ++i)
        apply(params.feat_b[i], m_.feat_b[i], v_.feat_b[i], grads.feat_b[i]);
    for (std::size_t i = 0; i < params.cls_w.data.size(); ++i)
        apply(params.cls_w.data[i], m_.cls_w.data[i], v_.cls_w.data[i], grads.cls_w.data[i]);
    for (std::size_t i = 0; i < params.cls_b.size(); ++i)
        apply(params.cls_b[i], m_.cls_b[i], v_.cls_b[i], grads.cls_b[i]);
    apply(params.obj_w, m_.obj_w, v_.obj_w, grads.obj_w);
    apply(params.obj_b, m_.obj_b, v_.obj_b, grads.obj_b);
    for (std::size_t i = 0; i < params.box_w.data.size(); ++i)
        apply(params.box_w.data[i], m_.box_w.data[i], v_.box_w.data[i], grads.box_w.data[i]);
    for (std::size_t i = 0; i < params.box_b.size(); ++i)
        apply(params.box_b[i], m_.box_b[i], v_.box_b[i], grads.box_b[i]);
}

void train_task(std::vector<Scene>& task_scenes, int task, const World& world, HeadParams& params,
                const EtfFrame& frame, const LossWeights& weights, const PseudoConfig& pseudo,
                const TrainConfig& train, const AblationFlags& flags, const ExemplarStore& store,
                std::vector<TrainLogRow>* log) {
    if (task_scenes.empty()) throw std::invalid_argument("train_task: no scenes");
    const bool use_adam = train.optimizer == "adam";
    if (!use_adam && train.optimizer != "sgd")
        throw std::invalid_argument("train_task: unknown optimizer " + train.optimizer);
    AdamState adam(params);

    for (int step = 0; step < train.steps_per_task; ++step) {
        Scene& scene = task_scenes[static_cast<std::size_t>(step) % task_scenes.size()];
        const StepResult r =
            compute_step(scene, task, world, params, frame, weights, pseudo, flags,
                         /*replay_active=*/false,
                         /*allow_pseudo=*/step >= train.pseudo_warmup_steps);
        if (use_adam)
            adam.update(params, r.grads, train);
        else
            sgd_step(params, r.grads, train.learning_rate);
        if (log && (step % train.log_every == 0 || step == train.steps_per_task - 1))
            log->push_back({task, step, false, r.losses});
    }

    if (task > 1 && train.replay_steps > 0) {
        std::vector<Scene> replay = store.scenes();
        for (const Scene& s : task_scenes) replay.push_back(s);
        Rng rng(split_seed(world.config.master_seed, 7000 + static_cast<std::uint64_t>(task)));
        for (std::size_t i = replay.size(); i > 1; --i)
            std::swap(replay[i - 1], replay[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

        for (int step = 0; step < train.replay_steps; ++step) {
            Scene& scene = replay[static_cast<std::size_t>(step) % replay.size()];
            const StepResult r = compute_step(scene, task, world, params, frame, weights, pseudo,
                                              flags, /*replay_active=*/true, /*allow_pseudo=*/true);
            if (use_adam)
                adam.update(params, r.grads, train);
            else
                sgd_step(params, r.grads, train.learning_rate);
            if (log && (step % train.log_every == 0 || step == train.replay_steps - 1))
                log->push_back({task, step, true, r.losses});
        }
    }
}

}  // namespace owd
