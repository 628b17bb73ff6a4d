#include "owd/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace owd {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

int to_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for '" + key + "': " + v);
    }
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad unsigned for '" + key + "': " + v);
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for '" + key + "': " + v);
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean for '" + key + "': " + v);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig c;
    using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"world.tasks", [](auto& c, auto& v, auto& k) { c.world.num_tasks = to_int(v, k); }},
        {"world.classes_per_task",
         [](auto& c, auto& v, auto& k) { c.world.classes_per_task = to_int(v, k); }},
        {"world.input_dim", [](auto& c, auto& v, auto& k) { c.world.input_dim = to_int(v, k); }},
        {"world.feature_noise",
         [](auto& c, auto& v, auto& k) { c.world.feature_noise = to_double(v, k); }},
        {"world.background_sigma",
         [](auto& c, auto& v, auto& k) { c.world.background_sigma = to_double(v, k); }},
        {"world.background_per_scene",
         [](auto& c, auto& v, auto& k) { c.world.background_per_scene = to_int(v, k); }},
        {"world.scenes_per_task",
         [](auto& c, auto& v, auto& k) { c.world.scenes_per_task = to_int(v, k); }},
        {"world.test_scenes_per_task",
         [](auto& c, auto& v, auto& k) { c.world.test_scenes_per_task = to_int(v, k); }},
        {"world.heatmap_scenes_per_task",
         [](auto& c, auto& v, auto& k) { c.world.heatmap_scenes_per_task = to_int(v, k); }},
        {"world.exemplars_per_class",
         [](auto& c, auto& v, auto& k) { c.world.exemplars_per_class = to_int(v, k); }},
        {"world.min_known_objects",
         [](auto& c, auto& v, auto& k) { c.world.min_known_objects = to_int(v, k); }},
        {"world.max_known_objects",
         [](auto& c, auto& v, auto& k) { c.world.max_known_objects = to_int(v, k); }},
        {"world.min_unknown_objects",
         [](auto& c, auto& v, auto& k) { c.world.min_unknown_objects = to_int(v, k); }},
        {"world.max_unknown_objects",
         [](auto& c, auto& v, auto& k) { c.world.max_unknown_objects = to_int(v, k); }},
        {"world.proposals_per_object",
         [](auto& c, auto& v, auto& k) { c.world.proposals_per_object = to_int(v, k); }},
        {"world.tight_jitter",
         [](auto& c, auto& v, auto& k) { c.world.tight_jitter = to_double(v, k); }},
        {"world.loose_jitter",
         [](auto& c, auto& v, auto& k) { c.world.loose_jitter = to_double(v, k); }},
        {"world.min_box_side",
         [](auto& c, auto& v, auto& k) { c.world.min_box_side = to_double(v, k); }},
        {"world.max_box_side",
         [](auto& c, auto& v, auto& k) { c.world.max_box_side = to_double(v, k); }},
        {"world.seed", [](auto& c, auto& v, auto& k) { c.world.master_seed = to_u64(v, k); }},
        {"frame.k", [](auto& c, auto& v, auto& k) { c.frame.k = static_cast<std::size_t>(to_u64(v, k)); }},
        {"frame.d", [](auto& c, auto& v, auto& k) { c.frame.d = static_cast<std::size_t>(to_u64(v, k)); }},
        {"frame.seed", [](auto& c, auto& v, auto& k) { c.frame.seed = to_u64(v, k); }},
        {"losses.w_cls", [](auto& c, auto& v, auto& k) { c.weights.cls = to_double(v, k); }},
        {"losses.w_l1", [](auto& c, auto& v, auto& k) { c.weights.l1 = to_double(v, k); }},
        {"losses.w_giou", [](auto& c, auto& v, auto& k) { c.weights.giou = to_double(v, k); }},
        {"losses.w_separation",
         [](auto& c, auto& v, auto& k) { c.weights.separation = to_double(v, k); }},
        {"losses.w_distinction",
         [](auto& c, auto& v, auto& k) { c.weights.distinction = to_double(v, k); }},
        {"losses.margin", [](auto& c, auto& v, auto& k) { c.weights.margin = to_double(v, k); }},
        {"losses.alpha", [](auto& c, auto& v, auto& k) { c.weights.alpha = to_double(v, k); }},
        {"losses.gamma", [](auto& c, auto& v, auto& k) { c.weights.gamma = to_double(v, k); }},
        {"pseudo.tau", [](auto& c, auto& v, auto& k) { c.pseudo.tau = to_int(v, k); }},
        {"pseudo.size_ratio",
         [](auto& c, auto& v, auto& k) { c.pseudo.size_ratio = to_double(v, k); }},
        {"pseudo.logit_floor",
         [](auto& c, auto& v, auto& k) { c.pseudo.logit_floor = to_double(v, k); }},
        {"pseudo.iou_match_threshold",
         [](auto& c, auto& v, auto& k) { c.pseudo.iou_match_threshold = to_double(v, k); }},
        {"train.learning_rate",
         [](auto& c, auto& v, auto& k) { c.train.learning_rate = to_double(v, k); }},
        {"train.steps_per_task",
         [](auto& c, auto& v, auto& k) { c.train.steps_per_task = to_int(v, k); }},
        {"train.replay_steps",
         [](auto& c, auto& v, auto& k) { c.train.replay_steps = to_int(v, k); }},
        {"train.pseudo_warmup_steps",
         [](auto& c, auto& v, auto& k) { c.train.pseudo_warmup_steps = to_int(v, k); }},
        {"train.optimizer", [](auto& c, auto& v, auto&) { c.train.optimizer = v; }},
        {"train.adam_beta1",
         [](auto& c, auto& v, auto& k) { c.train.adam_beta1 = to_double(v, k); }},
        {"train.adam_beta2",
         [](auto& c, auto& v, auto& k) { c.train.adam_beta2 = to_double(v, k); }},
        {"train.adam_eps", [](auto& c, auto& v, auto& k) { c.train.adam_eps = to_double(v, k); }},
        {"train.log_every", [](auto& c, auto& v, auto& k) { c.train.log_every = to_int(v, k); }},
        {"inference.score_threshold",
         [](auto& c, auto& v, auto& k) { c.inference.score_threshold = to_double(v, k); }},
        {"inference.nms_iou",
         [](auto& c, auto& v, auto& k) { c.inference.nms_iou = to_double(v, k); }},
        {"ablation.separation",
         [](auto& c, auto& v, auto& k) { c.ablation.separation = to_bool(v, k); }},
        {"ablation.distinction",
         [](auto& c, auto& v, auto& k) { c.ablation.distinction = to_bool(v, k); }},
        {"output.dir", [](auto& c, auto& v, auto&) { c.out_dir = v; }},
    };

    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config: malformed section at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError("config: key '" + key + "' outside any section");
        const std::string full = section + "." + key;
        const auto it = setters.find(full);
        if (it == setters.end()) throw ConfigError("config: unknown key '" + full + "'");
        it->second(c, value, full);
    }

    if (c.frame.d < c.frame.k) throw ConfigError("config: frame.d must be >= frame.k");
    if (c.frame.k < 2 || c.frame.k % 2 != 0) throw ConfigError("config: frame.k must be even, >= 2");
    if (c.pseudo.tau < 1) throw ConfigError("config: pseudo.tau must be >= 1");
    if (c.pseudo.size_ratio <= 0.0 || c.pseudo.size_ratio > 1.0)
        throw ConfigError("config: pseudo.size_ratio must be in (0, 1]");
    if (c.pseudo.iou_match_threshold <= 0.0 || c.pseudo.iou_match_threshold >= 1.0)
        throw ConfigError("config: pseudo.iou_match_threshold must be in (0, 1)");
    if (c.world.num_tasks < 1 || c.world.classes_per_task < 1)
        throw ConfigError("config: world must have at least one task and class");
    if (c.train.optimizer != "adam" && c.train.optimizer != "sgd")
        throw ConfigError("config: train.optimizer must be adam or sgd");
    return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

namespace {
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

std::string config_to_text(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "[world]\n";
    o << "tasks = " << c.world.num_tasks << "\n";
    o << "classes_per_task = " << c.world.classes_per_task << "\n";
    o << "input_dim = " << c.world.input_dim << "\n";
    o << "feature_noise = " << fmt(c.world.feature_noise) << "\n";
    o << "background_sigma = " << fmt(c.world.background_sigma) << "\n";
    o << "background_per_scene = " << c.world.background_per_scene << "\n";
    o << "scenes_per_task = " << c.world.scenes_per_task << "\n";
    o << "test_scenes_per_task = " << c.world.test_scenes_per_task << "\n";
    o << "heatmap_scenes_per_task = " << c.world.heatmap_scenes_per_task << "\n";
    o << "exemplars_per_class = " << c.world.exemplars_per_class << "\n";
    o << "min_known_objects = " << c.world.min_known_objects << "\n";
    o << "max_known_objects = " << c.world.max_known_objects << "\n";
    o << "min_unknown_objects = " << c.world.min_unknown_objects << "\n";
    o << "max_unknown_objects = " << c.world.max_unknown_objects << "\n";
    o << "proposals_per_object = " << c.world.proposals_per_object << "\n";
    o << "tight_jitter = " << fmt(c.world.tight_jitter) << "\n";
    o << "loose_jitter = " << fmt(c.world.loose_jitter) << "\n";
    o << "min_box_side = " << fmt(c.world.min_box_side) << "\n";
    o << "max_box_side = " << fmt(c.world.max_box_side) << "\n";
    o << "seed = " << c.world.master_seed << "\n";
    o << "\n[frame]\n";
    o << "k = " << c.frame.k << "\n";
    o << "d = " << c.frame.d << "\n";
    o << "seed = " << c.frame.seed << "\n";
    o << "\n[losses]\n";
    o << "w_cls = " << fmt(c.weights.cls) << "\n";
    o << "w_l1 = " << fmt(c.weights.l1) << "\n";
    o << "w_giou = " << fmt(c.weights.giou) << "\n";
    o << "w_separation = " << fmt(c.weights.separation) << "\n";
    o << "w_distinction = " << fmt(c.weights.distinction) << "\n";
    o << "margin = " << fmt(c.weights.margin) << "\n";
    o << "alpha = " << fmt(c.weights.alpha) << "\n";
    o << "gamma = " << fmt(c.weights.gamma) << "\n";
    o << "\n[pseudo]\n";
    o << "tau = " << c.pseudo.tau << "\n";
    o << "size_ratio = " << fmt(c.pseudo.size_ratio) << "\n";
    o << "logit_floor = " << fmt(c.pseudo.logit_floor) << "\n";
    o << "iou_match_threshold = " << fmt(c.pseudo.iou_match_threshold) << "\n";
    o << "\n[train]\n";
    o << "learning_rate = " << fmt(c.train.learning_rate) << "\n";
    o << "steps_per_task = " << c.train.steps_per_task << "\n";
    o << "replay_steps = " << c.train.replay_steps << "\n";
    o << "pseudo_warmup_steps = " << c.train.pseudo_warmup_steps << "\n";
    o << "optimizer = " << c.train.optimizer << "\n";
    o << "adam_beta1 = " << fmt(c.train.adam_beta1) << "\n";
    o << "adam_beta2 = " << fmt(c.train.adam_beta2) << "\n";
    o << "adam_eps = " << fmt(c.train.adam_eps) << "\n";
    o << "log_every = " << c.train.log_every << "\n";
    o << "\n[inference]\n";
    o << "score_threshold = " << fmt(c.inference.score_threshold) << "\n";
    o << "nms_iou = " << fmt(c.inference.nms_iou) << "\n";
    o << "\n[ablation]\n";
    o << "separation = " << (c.ablation.separation ? "true" : "false") << "\n";
    o << "distinction = " << (c.ablation.distinction ? "true" : "false") << "\n";
    o << "\n[output]\n";
    o << "dir = " << c.out_dir << "\n";
    return o.str();
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string text = config_to_text(config);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace owd
