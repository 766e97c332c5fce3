#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffinet/loss.hpp"
#include "ffinet/metrics.hpp"
#include "ffinet/model_config.hpp"

namespace ffinet {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int epochs = 40;
    int batch_size = 64;  // scenes per optimization step
    double lr_initial = 1e-3;
    double lr_after = 1e-4;
    int lr_drop_epoch = 32;
    std::uint64_t seed = 0;
    double grad_clip = 0.0;     // global-norm clip, 0 disables
    double weight_decay = 0.0;  // 0 disables
};

struct Config {
    ModelConfig model;
    LossWeights loss;
    TrainConfig train;
    MetricOptions metrics;
};

namespace config_detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key " + key + ": expected boolean, got \"" + v + "\"");
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace config_detail

inline void apply_config_key(Config& c, const std::string& key, const std::string& value) {
    using config_detail::parse_bool;
    auto as_int = [&] {
        try {
            return std::stoi(value);
        } catch (...) {
            throw ConfigError("config key " + key + ": expected integer, got \"" + value + "\"");
        }
    };
    auto as_double = [&] {
        try {
            return std::stod(value);
        } catch (...) {
            throw ConfigError("config key " + key + ": expected number, got \"" + value + "\"");
        }
    };
    if (key == "model.hidden") c.model.hidden = as_int();
    else if (key == "model.K") c.model.K = as_int();
    else if (key == "model.obs_len") c.model.obs_len = as_int();
    else if (key == "model.pred_len") c.model.pred_len = as_int();
    else if (key == "model.lane_gcn_layers") c.model.lane_gcn_layers = as_int();
    else if (key == "model.init_seed") c.model.init_seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "model.current_frame") {
        if (value == "anchor") c.model.current_frame = FrameMode::anchor;
        else if (value == "absolute") c.model.current_frame = FrameMode::absolute;
        else throw ConfigError("config key model.current_frame: expected anchor|absolute, got \"" + value + "\"");
    }
    else if (key == "modules.current_fusion") c.model.current_fusion = parse_bool(value, key);
    else if (key == "modules.future_feedback") c.model.future_feedback = parse_bool(value, key);
    else if (key == "modules.global_fusion") c.model.global_fusion = parse_bool(value, key);
    else if (key == "feedback.back") c.model.feedback_back = parse_bool(value, key);
    else if (key == "feedback.future") c.model.feedback_future = parse_bool(value, key);
    else if (key == "feedback.forward") c.model.feedback_forward = parse_bool(value, key);
    else if (key == "graph.agent_to_lane") c.model.thresholds.a2l = as_double();
    else if (key == "graph.lane_to_agent") c.model.thresholds.l2a = as_double();
    else if (key == "graph.agent_to_agent") c.model.thresholds.a2a = as_double();
    else if (key == "loss.lambda") c.loss.lambda = as_double();
    else if (key == "loss.beta") c.loss.beta = as_double();
    else if (key == "loss.gamma") c.loss.gamma = as_double();
    else if (key == "loss.margin") c.loss.margin = as_double();
    else if (key == "loss.cls_distance_gate") c.loss.cls_distance_gate = as_double();
    else if (key == "loss.huber_delta") c.loss.huber_delta = as_double();
    else if (key == "train.epochs") c.train.epochs = as_int();
    else if (key == "train.batch_size") c.train.batch_size = as_int();
    else if (key == "train.lr_initial") c.train.lr_initial = as_double();
    else if (key == "train.lr_after") c.train.lr_after = as_double();
    else if (key == "train.lr_drop_epoch") c.train.lr_drop_epoch = as_int();
    else if (key == "train.seed") c.train.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "train.grad_clip") c.train.grad_clip = as_double();
    else if (key == "train.weight_decay") c.train.weight_decay = as_double();
    else if (key == "metrics.miss_threshold") c.metrics.miss_threshold = as_double();
    else if (key == "metrics.collision_radius") c.metrics.collision_radius = as_double();
    else throw ConfigError("unknown config key \"" + key + "\"");
}

// Flat dotted-key serialization; the inverse of apply_config_key.
inline std::vector<std::pair<std::string, std::string>> config_to_pairs(const Config& c) {
    auto b = [](bool v) { return v ? std::string("true") : std::string("false"); };
    auto d = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    return {
        {"model.hidden", std::to_string(c.model.hidden)},
        {"model.K", std::to_string(c.model.K)},
        {"model.obs_len", std::to_string(c.model.obs_len)},
        {"model.pred_len", std::to_string(c.model.pred_len)},
        {"model.lane_gcn_layers", std::to_string(c.model.lane_gcn_layers)},
        {"model.init_seed", std::to_string(c.model.init_seed)},
        {"model.current_frame", c.model.current_frame == FrameMode::anchor ? "anchor" : "absolute"},
        {"modules.current_fusion", b(c.model.current_fusion)},
        {"modules.future_feedback", b(c.model.future_feedback)},
        {"modules.global_fusion", b(c.model.global_fusion)},
        {"feedback.back", b(c.model.feedback_back)},
        {"feedback.future", b(c.model.feedback_future)},
        {"feedback.forward", b(c.model.feedback_forward)},
        {"graph.agent_to_lane", d(c.model.thresholds.a2l)},
        {"graph.lane_to_agent", d(c.model.thresholds.l2a)},
        {"graph.agent_to_agent", d(c.model.thresholds.a2a)},
        {"loss.lambda", d(c.loss.lambda)},
        {"loss.beta", d(c.loss.beta)},
        {"loss.gamma", d(c.loss.gamma)},
        {"loss.margin", d(c.loss.margin)},
        {"loss.cls_distance_gate", d(c.loss.cls_distance_gate)},
        {"loss.huber_delta", d(c.loss.huber_delta)},
        {"train.epochs", std::to_string(c.train.epochs)},
        {"train.batch_size", std::to_string(c.train.batch_size)},
        {"train.lr_initial", d(c.train.lr_initial)},
        {"train.lr_after", d(c.train.lr_after)},
        {"train.lr_drop_epoch", std::to_string(c.train.lr_drop_epoch)},
        {"train.seed", std::to_string(c.train.seed)},
        {"train.grad_clip", d(c.train.grad_clip)},
        {"train.weight_decay", d(c.train.weight_decay)},
        {"metrics.miss_threshold", d(c.metrics.miss_threshold)},
        {"metrics.collision_radius", d(c.metrics.collision_radius)},
    };
}

inline nlohmann::json config_to_json(const Config& c) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : config_to_pairs(c)) j[k] = v;
    return j;
}

inline Config config_from_json(const nlohmann::json& j) {
    Config c;
    for (auto it = j.begin(); it != j.end(); ++it) apply_config_key(c, it.key(), it.value().get<std::string>());
    return c;
}

// key = value per line; blank lines and #-comments ignored.
inline void load_config_file(Config& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = config_detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        apply_config_key(c, config_detail::trim(t.substr(0, eq)), config_detail::trim(t.substr(eq + 1)));
    }
}

// --set key=value override
inline void apply_override(Config& c, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value, got \"" + kv + "\"");
    apply_config_key(c, config_detail::trim(kv.substr(0, eq)), config_detail::trim(kv.substr(eq + 1)));
}

inline void validate(const Config& c) {
    if (c.train.lr_drop_epoch <= 0 || c.train.lr_drop_epoch > c.train.epochs)
        throw ConfigError("train.lr_drop_epoch must satisfy 0 < drop <= epochs");
    if (c.model.K <= 0) throw ConfigError("model.K must be positive");
    if (c.model.obs_len < 2 || c.model.pred_len < 1) throw ConfigError("horizon too short");
}

}  // namespace ffinet
