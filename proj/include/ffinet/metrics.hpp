#pragma once

#include <cmath>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffinet/model.hpp"
#include "ffinet/scene.hpp"

namespace ffinet {

struct MetricOptions {
    double miss_threshold = 2.0;    // meters, endpoint error; miss is strictly greater
    double collision_radius = 2.0;  // meters per agent; collision when centers are closer than 2*radius
};

namespace metric_detail {

inline int last_valid(const std::vector<int>& mask) {
    int last = -1;
    for (size_t t = 0; t < mask.size(); ++t)
        if (mask[t]) last = static_cast<int>(t);
    return last;
}

}  // namespace metric_detail

// modes: K trajectories of pred_len points; gt/mask cover the same horizon.
inline double min_ade(const std::vector<std::vector<Vec2>>& modes, const std::vector<Vec2>& gt,
                      const std::vector<int>& mask) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : modes) {
        double sum = 0.0;
        int n = 0;
        for (size_t t = 0; t < gt.size(); ++t) {
            if (!mask[t]) continue;
            sum += (m[t] - gt[t]).norm();
            ++n;
        }
        if (n > 0) best = std::min(best, sum / n);
    }
    return best;
}

inline double min_fde(const std::vector<std::vector<Vec2>>& modes, const std::vector<Vec2>& gt,
                      const std::vector<int>& mask) {
    const int t = metric_detail::last_valid(mask);
    if (t < 0) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : modes) best = std::min(best, (m[static_cast<size_t>(t)] - gt[static_cast<size_t>(t)]).norm());
    return best;
}

inline bool is_miss(const std::vector<std::vector<Vec2>>& modes, const std::vector<Vec2>& gt,
                    const std::vector<int>& mask, double threshold = 2.0) {
    return min_fde(modes, gt, mask) > threshold;
}

inline double brier_min_fde(const std::vector<std::vector<Vec2>>& modes,
                            const std::vector<double>& probabilities, const std::vector<Vec2>& gt,
                            const std::vector<int>& mask) {
    const int t = metric_detail::last_valid(mask);
    if (t < 0) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    size_t best_k = 0;
    for (size_t k = 0; k < modes.size(); ++k) {
        const double d = (modes[k][static_cast<size_t>(t)] - gt[static_cast<size_t>(t)]).norm();
        if (d < best) {
            best = d;
            best_k = k;
        }
    }
    const double p = probabilities[best_k];
    return best + (1.0 - p) * (1.0 - p);
}

struct MetricReport {
    double minADE = 0, minFDE = 0, MR = 0, brier_minFDE = 0;  // focal-agent means
    double avgMinADE = 0, avgMinFDE = 0, avgBrierMinFDE = 0;  // scored-agent scene aggregates
    double actorMR = 0, actorCR = 0;
    int n_scenes = 0, n_agents = 0;

    nlohmann::json to_json() const {
        return {{"minADE", minADE},
                {"minFDE", minFDE},
                {"MR", MR},
                {"brier_minFDE", brier_minFDE},
                {"avgMinADE", avgMinADE},
                {"avgMinFDE", avgMinFDE},
                {"avgBrierMinFDE", avgBrierMinFDE},
                {"actorMR", actorMR},
                {"actorCR", actorCR},
                {"n_scenes", n_scenes},
                {"n_agents", n_agents}};
    }

    std::string to_table() const {
        char buf[512];
        std::snprintf(buf, sizeof(buf),
                      "%-16s %10s\n"
                      "%-16s %10.4f\n%-16s %10.4f\n%-16s %10.4f\n%-16s %10.4f\n"
                      "%-16s %10.4f\n%-16s %10.4f\n%-16s %10.4f\n%-16s %10.4f\n%-16s %10.4f\n"
                      "%-16s %10d\n%-16s %10d\n",
                      "metric", "value", "minADE", minADE, "minFDE", minFDE, "MR", MR,
                      "brier-minFDE", brier_minFDE, "avgMinADE", avgMinADE, "avgMinFDE", avgMinFDE,
                      "avgBrierMinFDE", avgBrierMinFDE, "actorMR", actorMR, "actorCR", actorCR,
                      "scenes", n_scenes, "agents", n_agents);
        return buf;
    }
};

// Scene-level scoring: focal metrics are means over scenes; avg* metrics are
// per-scene means over scored agents, then means over scenes; actorMR is the
// fraction of all scored agents that miss; actorCR is the fraction of scenes
// where any scored pair's selected (highest-probability) trajectories come
// closer than 2*radius at a timestep where both ground truths are valid.
inline MetricReport evaluate_predictions(const std::vector<RawScene>& scenes,
                                         const std::vector<ScenePredictions>& preds,
                                         const MetricOptions& opt = {}) {
    if (scenes.size() != preds.size())
        throw ContractViolation("evaluate_predictions: scene/prediction count mismatch");
    MetricReport rep;
    double focal_ade = 0, focal_fde = 0, focal_mr = 0, focal_brier = 0;
    int focal_n = 0;
    double sum_scene_ade = 0, sum_scene_fde = 0, sum_scene_brier = 0;
    int scored_scenes = 0;
    int actor_total = 0, actor_miss = 0;
    int collision_scenes = 0;

    for (size_t s = 0; s < scenes.size(); ++s) {
        const RawScene& scene = scenes[s];
        const ScenePredictions& sp = preds[s];
        rep.n_scenes++;
        double sc_ade = 0, sc_fde = 0, sc_brier = 0;
        int sc_n = 0;
        std::vector<std::pair<const std::vector<Vec2>*, std::vector<int>>> selected;

        for (const auto& ap : sp.agents) {
            const int ai = scene.agent_index(ap.agent_id);
            if (ai < 0) throw ContractViolation("prediction for unknown agent " + ap.agent_id);
            const AgentTrack& track = scene.agents[static_cast<size_t>(ai)];
            std::vector<Vec2> gt(track.positions.begin() + scene.obs_len, track.positions.end());
            std::vector<int> mask(track.valid.begin() + scene.obs_len, track.valid.end());
            if (metric_detail::last_valid(mask) < 0) continue;
            rep.n_agents++;

            const double ade = min_ade(ap.modes, gt, mask);
            const double fde = min_fde(ap.modes, gt, mask);
            const double brier = brier_min_fde(ap.modes, ap.probabilities, gt, mask);
            const bool miss = fde > opt.miss_threshold;

            if (ap.is_focal) {
                focal_ade += ade;
                focal_fde += fde;
                focal_brier += brier;
                focal_mr += miss ? 1.0 : 0.0;
                ++focal_n;
            }
            if (ap.scored) {
                sc_ade += ade;
                sc_fde += fde;
                sc_brier += brier;
                ++sc_n;
                ++actor_total;
                if (miss) ++actor_miss;
                size_t top = 0;
                for (size_t k = 1; k < ap.probabilities.size(); ++k)
                    if (ap.probabilities[k] > ap.probabilities[top]) top = k;
                selected.emplace_back(&ap.modes[top], mask);
            }
        }

        if (sc_n > 0) {
            sum_scene_ade += sc_ade / sc_n;
            sum_scene_fde += sc_fde / sc_n;
            sum_scene_brier += sc_brier / sc_n;
            ++scored_scenes;
        } else {
            std::cerr << "warning: scene " << scene.scene_id << " has no scored agents with valid future\n";
        }

        bool collided = false;
        for (size_t i = 0; i < selected.size() && !collided; ++i)
            for (size_t j = i + 1; j < selected.size() && !collided; ++j)
                for (int t = 0; t < scene.pred_len; ++t) {
                    if (!selected[i].second[static_cast<size_t>(t)] ||
                        !selected[j].second[static_cast<size_t>(t)])
                        continue;
                    if (((*selected[i].first)[static_cast<size_t>(t)] -
                         (*selected[j].first)[static_cast<size_t>(t)]).norm() < 2.0 * opt.collision_radius) {
                        collided = true;
                        break;
                    }
                }
        if (collided) ++collision_scenes;
    }

    if (focal_n > 0) {
        rep.minADE = focal_ade / focal_n;
        rep.minFDE = focal_fde / focal_n;
        rep.MR = focal_mr / focal_n;
        rep.brier_minFDE = focal_brier / focal_n;
    }
    if (scored_scenes > 0) {
        rep.avgMinADE = sum_scene_ade / scored_scenes;
        rep.avgMinFDE = sum_scene_fde / scored_scenes;
        rep.avgBrierMinFDE = sum_scene_brier / scored_scenes;
    }
    if (actor_total > 0) rep.actorMR = static_cast<double>(actor_miss) / actor_total;
    if (rep.n_scenes > 0) rep.actorCR = static_cast<double>(collision_scenes) / rep.n_scenes;
    return rep;
}

}  // namespace ffinet
