#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "owd/batch.hpp"
#include "owd/etf.hpp"
#include "owd/head.hpp"
#include "owd/losses.hpp"
#include "owd/matching.hpp"
#include "owd/rng.hpp"

namespace owd {

/// Synthetic open-world benchmark. Observations are class prototypes (unit
/// vectors) plus Gaussian noise in the first input_dim-4 dimensions; the last
/// 4 dimensions carry the proposal's box corners so the box branch has
/// something to regress from.
struct WorldConfig {
    int num_tasks = 4;
    int classes_per_task = 5;
    int input_dim = 32;
    double feature_noise = 0.4;
    double background_sigma = 0.5;
    int background_per_scene = 8;
    int scenes_per_task = 24;
    int test_scenes_per_task = 16;
    int heatmap_scenes_per_task = 6;
    int exemplars_per_class = 2;
    int min_known_objects = 2;
    int max_known_objects = 4;
    int min_unknown_objects = 1;
    int max_unknown_objects = 3;
    int proposals_per_object = 2;
    double tight_jitter = 0.08;
    double loose_jitter = 0.30;
    double min_box_side = 0.30;
    double max_box_side = 0.85;
    std::uint64_t master_seed = 1;
};

struct World {
    WorldConfig config;
    Mat prototypes;  // (num_tasks * classes_per_task) x (input_dim - 4)

    int total_classes() const { return config.num_tasks * config.classes_per_task; }
    int semantic_dim() const { return config.input_dim - 4; }
    /// Classes known before task t starts (1-based task ids).
    int known_before(int task) const { return (task - 1) * config.classes_per_task; }
    /// Classes known once task t is learned.
    int known_through(int task) const { return task * config.classes_per_task; }
    int task_of_class(int class_id) const { return class_id / config.classes_per_task + 1; }
};

struct SceneObject {
    int class_id = -1;
    Box box;
    bool annotated = false;
};

struct Scene {
    int image_id = 0;
    int origin_task = 0;
    std::vector<SceneObject> objects;
    std::vector<GtInstance> annotations;  // known objects only
    std::vector<Box> unknown_gt;          // oracle-only; never seen in training
    ProposalBatch proposals;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

World generate_world(const WorldConfig& config);

enum class SceneMode { Fresh, Test };

/// Fresh scenes draw known objects from task t's class slice; test scenes from
/// every class known at task t. Unknown objects always come from the not yet
/// learned classes and are absent from the annotations.
Scene generate_scene(const World& world, int task, SceneMode mode, int image_id, Rng& rng);

/// Scene whose known objects come from one specific class range (used for the
/// per-task head-score heatmap).
Scene generate_scene_for_classes(const World& world, int task, std::pair<int, int> class_range,
                                 int image_id, Rng& rng);

/// Per-class replay memory: scenes stored at task boundaries.
struct ExemplarStore {
    struct Entry {
        int class_id;
        Scene scene;
    };
    std::vector<Entry> entries;

    /// Stored scenes, de-duplicated by image id, in first-stored order.
    std::vector<Scene> scenes() const;
};

/// Stores the first n scenes containing each of task t's classes.
void update_exemplars(ExemplarStore& store, const std::vector<Scene>& task_scenes, int task,
                      int exemplars_per_class);

struct TrainConfig {
    double learning_rate = 1e-2;
    int steps_per_task = 2000;
    int replay_steps = 1000;
    // Pseudo-label selection starts only once the fresh phase has given the
    // ranking logit some signal; before that everything unmatched stays
    // background.
    int pseudo_warmup_steps = 400;
    // "adam" (default) or "sgd". The loss terms have very different gradient
    // scales; Adam's per-parameter normalization is what makes the focal
    // classification term trainable in a few thousand steps.
    std::string optimizer = "adam";
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int log_every = 10;
};

struct AblationFlags {
    bool separation = true;
    bool distinction = true;
};

struct TrainLogRow {
    int task = 0;
    int step = 0;
    bool replay = false;
    LossBreakdown losses;
};

/// params -= lr * grads
void sgd_step(HeadParams& params, const Gradients& grads, double lr);

/// Adam moment buffers, reset at every task boundary (the classifier grows).
class AdamState {
public:
    explicit AdamState(const HeadParams& params);
    void update(HeadParams& params, const Gradients& grads, const TrainConfig& train);

private:
    Gradients m_;
    Gradients v_;
    long step_ = 0;
};

/// Scoring, matching, pseudo-selection and the loss/gradient for one scene,
/// without a parameter update.
struct StepResult {
    LossBreakdown losses;
    Gradients grads;
};
StepResult compute_step(Scene& scene, int task, const World& world, const HeadParams& params,
                        const EtfFrame& frame, const LossWeights& weights,
                        const PseudoConfig& pseudo, const AblationFlags& flags,
                        bool replay_active, bool allow_pseudo);

/// One plain gradient-descent step on a scene: compute_step then
/// params -= lr * grads. Throws DivergenceError when the loss goes
/// non-finite.
LossBreakdown train_step(Scene& scene, int task, const World& world, HeadParams& params,
                         const EtfFrame& frame, const LossWeights& weights,
                         const PseudoConfig& pseudo, const AblationFlags& flags,
                         bool replay_active, double learning_rate, bool allow_pseudo = true);

/// Full training for one task: fresh phase over the task's scenes, then for
/// t > 1 a replay phase over stored exemplars mixed with the fresh scenes.
void train_task(std::vector<Scene>& task_scenes, int task, const World& world, HeadParams& params,
                const EtfFrame& frame, const LossWeights& weights, const PseudoConfig& pseudo,
                const TrainConfig& train, const AblationFlags& flags, const ExemplarStore& store,
                std::vector<TrainLogRow>* log);

}  // namespace owd
