#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffinet/geometry.hpp"

namespace ffinet {

struct ContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class AgentCategory { vehicle, pedestrian, cyclist, other };

inline const char* to_string(AgentCategory c) {
    switch (c) {
        case AgentCategory::vehicle: return "vehicle";
        case AgentCategory::pedestrian: return "pedestrian";
        case AgentCategory::cyclist: return "cyclist";
        default: return "other";
    }
}

inline AgentCategory agent_category_from_string(const std::string& s) {
    if (s == "vehicle") return AgentCategory::vehicle;
    if (s == "pedestrian") return AgentCategory::pedestrian;
    if (s == "cyclist") return AgentCategory::cyclist;
    return AgentCategory::other;
}

// One agent: full horizon of positions (observed + future ground truth) with
// a per-step validity mask.
struct AgentTrack {
    std::string agent_id;
    AgentCategory category = AgentCategory::vehicle;
    bool scored = false;
    std::vector<Vec2> positions;  // length T_obs + T_pred
    std::vector<int> valid;       // same length, 1 = observed/annotated
};

enum class TurnDirection { none, left, right };

struct LaneAttributes {
    TurnDirection turn = TurnDirection::none;
    bool in_intersection = false;
    bool traffic_control = false;
};

struct LaneSegment {
    std::string lane_id;
    std::vector<Vec2> points;  // N >= 2, consecutive points distinct
    std::vector<std::string> successors;
    std::vector<std::string> predecessors;
    std::optional<std::string> left_neighbor;
    std::optional<std::string> right_neighbor;
    LaneAttributes attributes;

    int n_vectors() const { return static_cast<int>(points.size()) - 1; }

    Vec2 vector_at(int k) const { return points[k + 1] - points[k]; }
    Vec2 center_at(int k) const { return (points[k + 1] + points[k]) * 0.5; }
};

struct RawScene {
    std::string scene_id;
    double timestep_hz = 10.0;
    int obs_len = 20;
    int pred_len = 30;
    std::vector<AgentTrack> agents;
    std::vector<LaneSegment> lanes;
    std::string focal_agent_id;

    int horizon() const { return obs_len + pred_len; }

    int agent_index(const std::string& id) const {
        for (size_t i = 0; i < agents.size(); ++i)
            if (agents[i].agent_id == id) return static_cast<int>(i);
        return -1;
    }

    int lane_index(const std::string& id) const {
        for (size_t i = 0; i < lanes.size(); ++i)
            if (lanes[i].lane_id == id) return static_cast<int>(i);
        return -1;
    }
};

// --- vectorization -----------------------------------------------------------

// Per-step displacements with a pairwise validity mask. Displacements with an
// invalid endpoint are zero-filled and masked out.
inline void vectorize_trajectory(const std::vector<Vec2>& positions, const std::vector<int>& valid,
                                 std::vector<Vec2>& vectors, std::vector<int>& mask) {
    if (positions.size() != valid.size())
        throw ContractViolation("vectorize_trajectory: positions/valid length mismatch");
    if (positions.size() < 2)
        throw ContractViolation("vectorize_trajectory: need at least 2 positions");
    const size_t n = positions.size() - 1;
    vectors.assign(n, Vec2{});
    mask.assign(n, 0);
    for (size_t t = 0; t < n; ++t) {
        if (valid[t] && valid[t + 1]) {
            vectors[t] = positions[t + 1] - positions[t];
            mask[t] = 1;
        }
    }
}

constexpr double kHeadingEps = 1e-4;  // meters; displacements below this carry no heading

// Index of the last valid observed step; the track invariant guarantees one.
inline int current_step(const AgentTrack& track, int obs_len) {
    for (int t = std::min<int>(obs_len, static_cast<int>(track.valid.size())) - 1; t >= 0; --t)
        if (track.valid[t]) return t;
    throw ContractViolation("agent " + track.agent_id + " has no valid observed step");
}

// Heading of the reference displacement p^T - p^{T-1}; falls back to the most
// recent valid nonzero displacement, then to 0.
inline double compute_heading(const AgentTrack& track, int obs_len) {
    const int cur = current_step(track, obs_len);
    for (int t = cur; t >= 1; --t) {
        if (!track.valid[t] || !track.valid[t - 1]) continue;
        const Vec2 d = track.positions[t] - track.positions[t - 1];
        if (d.norm() > kHeadingEps) return wrap_angle(std::atan2(d.y, d.x));
    }
    return 0.0;
}

inline AgentFrame agent_frame(const AgentTrack& track, int obs_len) {
    AgentFrame f;
    f.origin = track.positions[current_step(track, obs_len)];
    f.heading = compute_heading(track, obs_len);
    return f;
}

// --- lane frames -------------------------------------------------------------

// Representative point for distance gating: the segment center nearest the
// arc-length midpoint of the polyline. Ties go to the smaller index.
inline int lane_anchor_index(const LaneSegment& lane) {
    double total = 0.0;
    for (int k = 0; k < lane.n_vectors(); ++k) total += lane.vector_at(k).norm();
    const double half = 0.5 * total;
    // locate the arc-length midpoint
    Vec2 mid = lane.points.front();
    double acc = 0.0;
    for (int k = 0; k < lane.n_vectors(); ++k) {
        const double len = lane.vector_at(k).norm();
        if (acc + len >= half && len > 0.0) {
            const double s = (half - acc) / len;
            mid = lane.points[k] + lane.vector_at(k) * s;
            break;
        }
        acc += len;
    }
    int best = 0;
    double best_d = (lane.center_at(0) - mid).norm();
    for (int k = 1; k < lane.n_vectors(); ++k) {
        const double d = (lane.center_at(k) - mid).norm();
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

inline AgentFrame lane_frame(const LaneSegment& lane) {
    AgentFrame f;
    f.origin = lane.center_at(lane_anchor_index(lane));
    const Vec2 v0 = lane.vector_at(0);
    f.heading = wrap_angle(std::atan2(v0.y, v0.x));
    return f;
}

// --- decomposition -----------------------------------------------------------

struct AgentDecomposition {
    std::string agent_id;
    AgentCategory category = AgentCategory::vehicle;
    bool scored = false;
    std::vector<Vec2> vectors;  // horizon-1 displacements, zero-filled where invalid
    std::vector<int> vector_mask;
    std::vector<int> valid;  // copied step validity
    Vec2 current;            // p^T (last valid observed position)
    int current_index = 0;
    AgentFrame frame;
    // Explicit absolute anchors where chained displacement summation cannot
    // rebuild the position bit-exactly (run starts, rounding repairs).
    std::map<int, Vec2> anchors;
};

struct LaneDecomposition {
    std::string lane_id;
    std::vector<Vec2> vectors;  // N-1 segment vectors
    std::vector<Vec2> centers;  // N-1 segment centers p^{k,c}
    Vec2 first_point;
    std::map<int, Vec2> anchors;  // rounding repairs for point reconstruction
    AgentFrame frame;
    int anchor_index = 0;
    LaneAttributes attributes;
    std::vector<std::string> successors, predecessors;
    std::optional<std::string> left_neighbor, right_neighbor;
};

struct DecomposedScene {
    std::string scene_id;
    double timestep_hz = 10.0;
    int obs_len = 20;
    int pred_len = 30;
    std::string focal_agent_id;
    std::vector<AgentDecomposition> agents;
    std::vector<LaneDecomposition> lanes;
};

namespace detail {

// Walks the reconstruction exactly as reconstruct_scene will, recording an
// absolute anchor whenever a chained sum would not reproduce the stored
// coordinate bit-for-bit.
inline void plan_agent_anchors(const AgentTrack& track, AgentDecomposition& dec) {
    const int n = static_cast<int>(track.positions.size());
    const int cur = dec.current_index;
    std::vector<Vec2> rec(n);
    std::vector<int> known(n, 0);
    rec[cur] = track.positions[cur];
    known[cur] = 1;
    // forward from the current anchor
    for (int t = cur + 1; t < n; ++t) {
        if (!track.valid[t]) continue;
        if (known[t - 1] && dec.vector_mask[t - 1]) {
            const Vec2 cand = rec[t - 1] + dec.vectors[t - 1];
            if (cand == track.positions[t]) {
                rec[t] = cand;
                known[t] = 1;
                continue;
            }
        }
        dec.anchors[t] = track.positions[t];
        rec[t] = track.positions[t];
        known[t] = 1;
    }
    // backward from the current anchor
    for (int t = cur - 1; t >= 0; --t) {
        if (!track.valid[t]) continue;
        if (known[t + 1] && dec.vector_mask[t]) {
            const Vec2 cand = rec[t + 1] - dec.vectors[t];
            if (cand == track.positions[t]) {
                rec[t] = cand;
                known[t] = 1;
                continue;
            }
        }
        dec.anchors[t] = track.positions[t];
        rec[t] = track.positions[t];
        known[t] = 1;
    }
}

inline void plan_lane_anchors(const LaneSegment& lane, LaneDecomposition& dec) {
    Vec2 rec = dec.first_point;
    for (int k = 0; k < lane.n_vectors(); ++k) {
        const Vec2 cand = rec + dec.vectors[k];
        if (cand == lane.points[k + 1]) {
            rec = cand;
        } else {
            dec.anchors[k + 1] = lane.points[k + 1];
            rec = lane.points[k + 1];
        }
    }
}

}  // namespace detail

inline DecomposedScene decompose(const RawScene& scene) {
    DecomposedScene out;
    out.scene_id = scene.scene_id;
    out.timestep_hz = scene.timestep_hz;
    out.obs_len = scene.obs_len;
    out.pred_len = scene.pred_len;
    out.focal_agent_id = scene.focal_agent_id;
    out.agents.reserve(scene.agents.size());
    for (const auto& track : scene.agents) {
        AgentDecomposition dec;
        dec.agent_id = track.agent_id;
        dec.category = track.category;
        dec.scored = track.scored;
        dec.valid = track.valid;
        vectorize_trajectory(track.positions, track.valid, dec.vectors, dec.vector_mask);
        dec.current_index = current_step(track, scene.obs_len);
        dec.current = track.positions[dec.current_index];
        dec.frame = agent_frame(track, scene.obs_len);
        detail::plan_agent_anchors(track, dec);
        out.agents.push_back(std::move(dec));
    }
    out.lanes.reserve(scene.lanes.size());
    for (const auto& lane : scene.lanes) {
        LaneDecomposition dec;
        dec.lane_id = lane.lane_id;
        dec.vectors.resize(lane.n_vectors());
        dec.centers.resize(lane.n_vectors());
        for (int k = 0; k < lane.n_vectors(); ++k) {
            dec.vectors[k] = lane.vector_at(k);
            dec.centers[k] = lane.center_at(k);
        }
        dec.first_point = lane.points.front();
        dec.frame = lane_frame(lane);
        dec.anchor_index = lane_anchor_index(lane);
        dec.attributes = lane.attributes;
        dec.successors = lane.successors;
        dec.predecessors = lane.predecessors;
        dec.left_neighbor = lane.left_neighbor;
        dec.right_neighbor = lane.right_neighbor;
        detail::plan_lane_anchors(lane, dec);
        out.lanes.push_back(std::move(dec));
    }
    return out;
}

inline RawScene reconstruct_scene(const DecomposedScene& dec) {
    RawScene scene;
    scene.scene_id = dec.scene_id;
    scene.timestep_hz = dec.timestep_hz;
    scene.obs_len = dec.obs_len;
    scene.pred_len = dec.pred_len;
    scene.focal_agent_id = dec.focal_agent_id;
    for (const auto& a : dec.agents) {
        AgentTrack track;
        track.agent_id = a.agent_id;
        track.category = a.category;
        track.scored = a.scored;
        track.valid = a.valid;
        const int n = static_cast<int>(a.valid.size());
        track.positions.assign(n, Vec2{});
        std::vector<int> known(n, 0);
        track.positions[a.current_index] = a.current;
        known[a.current_index] = 1;
        for (const auto& [t, p] : a.anchors) {
            track.positions[t] = p;
            known[t] = 1;
        }
        for (int t = a.current_index + 1; t < n; ++t) {
            if (!a.valid[t] || known[t]) continue;
            if (known[t - 1] && a.vector_mask[t - 1]) {
                track.positions[t] = track.positions[t - 1] + a.vectors[t - 1];
                known[t] = 1;
            }
        }
        for (int t = a.current_index - 1; t >= 0; --t) {
            if (!a.valid[t] || known[t]) continue;
            if (known[t + 1] && a.vector_mask[t]) {
                track.positions[t] = track.positions[t + 1] - a.vectors[t];
                known[t] = 1;
            }
        }
        scene.agents.push_back(std::move(track));
    }
    for (const auto& l : dec.lanes) {
        LaneSegment lane;
        lane.lane_id = l.lane_id;
        lane.points.resize(l.vectors.size() + 1);
        lane.points[0] = l.first_point;
        for (size_t k = 0; k < l.vectors.size(); ++k) {
            auto it = l.anchors.find(static_cast<int>(k) + 1);
            lane.points[k + 1] = (it != l.anchors.end()) ? it->second : lane.points[k] + l.vectors[k];
        }
        lane.attributes = l.attributes;
        lane.successors = l.successors;
        lane.predecessors = l.predecessors;
        lane.left_neighbor = l.left_neighbor;
        lane.right_neighbor = l.right_neighbor;
        scene.lanes.push_back(std::move(lane));
    }
    return scene;
}

// --- frame normalization ------------------------------------------------------

// Rotates each agent's own displacement vectors into its own frame. Masked
// steps stay zero. Translation does not apply to displacements.
inline std::vector<Vec2> normalize_vectors(const std::vector<Vec2>& vectors, const AgentFrame& frame) {
    std::vector<Vec2> out(vectors.size());
    for (size_t t = 0; t < vectors.size(); ++t) out[t] = rotate_into(vectors[t], frame.heading);
    return out;
}

// Local K x T_p trajectories back to absolute coordinates: R_i then + p_i^T.
inline std::vector<std::vector<Vec2>> denormalize_predictions(
    const std::vector<std::vector<Vec2>>& local_modes, const AgentFrame& frame) {
    std::vector<std::vector<Vec2>> out(local_modes.size());
    for (size_t k = 0; k < local_modes.size(); ++k) {
        out[k].resize(local_modes[k].size());
        for (size_t t = 0; t < local_modes[k].size(); ++t) out[k][t] = frame.to_world(local_modes[k][t]);
    }
    return out;
}

// --- interaction graphs --------------------------------------------------------

struct GraphEdge {
    int receiver = 0;
    int sender = 0;
    RelativeGeometry rel;
};

enum class LaneEdgeType { successor, predecessor, left, right };

struct LaneEdge {
    int receiver = 0;
    int sender = 0;
    LaneEdgeType type = LaneEdgeType::successor;
    RelativeGeometry rel;
};

struct GraphThresholds {
    double a2l = 7.0;
    double l2a = 6.0;
    double a2a = 100.0;
};

struct InteractionGraphs {
    std::vector<GraphEdge> edges_a2l;  // receiver = lane, sender = agent
    std::vector<LaneEdge> edges_l2l;   // receiver/sender = lanes, by connectivity
    std::vector<GraphEdge> edges_l2a;  // receiver = agent, sender = lane
    std::vector<GraphEdge> edges_a2a;  // receiver/sender = agents, incl. self-edges
    GraphThresholds thresholds;
};

inline InteractionGraphs build_interaction_graphs(const DecomposedScene& dec,
                                                  const GraphThresholds& thresholds = {}) {
    InteractionGraphs g;
    g.thresholds = thresholds;
    const int n_agents = static_cast<int>(dec.agents.size());
    const int n_lanes = static_cast<int>(dec.lanes.size());

    for (int s = 0; s < n_lanes; ++s) {
        const auto& lane = dec.lanes[s];
        for (int i = 0; i < n_agents; ++i) {
            const double d = (dec.agents[i].current - lane.frame.origin).norm();
            if (d <= thresholds.a2l)
                g.edges_a2l.push_back({s, i, relative_geometry(lane.frame, dec.agents[i].frame)});
        }
    }
    for (int i = 0; i < n_agents; ++i) {
        const auto& agent = dec.agents[i];
        for (int s = 0; s < n_lanes; ++s) {
            const double d = (agent.current - dec.lanes[s].frame.origin).norm();
            if (d <= thresholds.l2a)
                g.edges_l2a.push_back({i, s, relative_geometry(agent.frame, dec.lanes[s].frame)});
        }
    }
    for (int i = 0; i < n_agents; ++i) {
        for (int j = 0; j < n_agents; ++j) {
            if (i == j) {
                g.edges_a2a.push_back({i, i, RelativeGeometry{}});
                continue;
            }
            const double d = (dec.agents[j].current - dec.agents[i].current).norm();
            if (d <= thresholds.a2a)
                g.edges_a2a.push_back({i, j, relative_geometry(dec.agents[i].frame, dec.agents[j].frame)});
        }
    }
    std::map<std::string, int> lane_by_id;
    for (int s = 0; s < n_lanes; ++s) lane_by_id[dec.lanes[s].lane_id] = s;
    auto add_lane_edge = [&](int recv, const std::string& sender_id, LaneEdgeType type) {
        auto it = lane_by_id.find(sender_id);
        if (it == lane_by_id.end()) return;
        const int send = it->second;
        g.edges_l2l.push_back(
            {recv, send, type, relative_geometry(dec.lanes[recv].frame, dec.lanes[send].frame)});
    };
    for (int s = 0; s < n_lanes; ++s) {
        const auto& lane = dec.lanes[s];
        for (const auto& id : lane.successors) add_lane_edge(s, id, LaneEdgeType::successor);
        for (const auto& id : lane.predecessors) add_lane_edge(s, id, LaneEdgeType::predecessor);
        if (lane.left_neighbor) add_lane_edge(s, *lane.left_neighbor, LaneEdgeType::left);
        if (lane.right_neighbor) add_lane_edge(s, *lane.right_neighbor, LaneEdgeType::right);
    }
    return g;
}

inline InteractionGraphs build_interaction_graphs(const RawScene& scene,
                                                  const GraphThresholds& thresholds = {}) {
    return build_interaction_graphs(decompose(scene), thresholds);
}

}  // namespace ffinet
