#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffinet/scene.hpp"

namespace ffinet {

enum class Archetype { follow, intersection_cross, merge, lane_change, oncoming };

inline const char* to_string(Archetype a) {
    switch (a) {
        case Archetype::follow: return "follow";
        case Archetype::intersection_cross: return "intersection_cross";
        case Archetype::merge: return "merge";
        case Archetype::lane_change: return "lane_change";
        default: return "oncoming";
    }
}

inline Archetype archetype_from_string(const std::string& s) {
    if (s == "follow") return Archetype::follow;
    if (s == "intersection_cross") return Archetype::intersection_cross;
    if (s == "merge") return Archetype::merge;
    if (s == "lane_change") return Archetype::lane_change;
    if (s == "oncoming") return Archetype::oncoming;
    throw std::invalid_argument("unknown archetype: " + s);
}

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
    Archetype archetype = Archetype::follow;
    int n_agents = 3;  // 2..8
    int obs_len = 20;
    int pred_len = 30;
    double speed_min = 2.0;  // m/s
    double speed_max = 12.0;
    double noise_std = 0.05;  // meters, observations only
    std::uint64_t seed = 0;
    double timestep_hz = 10.0;
};

namespace synth_detail {

constexpr int kPointsPerSegment = 10;
constexpr double kPointSpacing = 2.0;
constexpr double kLaneWidth = 3.5;
constexpr double kMinGap = 4.0;      // car-following target gap d_min
constexpr double kMaxAccel = 3.0;    // m/s^2 clamp

struct Polyline {
    std::vector<Vec2> points;
    std::vector<double> cumlen;

    void finalize() {
        cumlen.assign(points.size(), 0.0);
        for (size_t i = 1; i < points.size(); ++i)
            cumlen[i] = cumlen[i - 1] + (points[i] - points[i - 1]).norm();
    }

    double length() const { return cumlen.empty() ? 0.0 : cumlen.back(); }

    // Position at arc length s with a signed lateral offset (left positive).
    // Extrapolates along the end directions beyond either end.
    Vec2 at(double s, double lateral = 0.0) const {
        size_t i = 1;
        while (i + 1 < points.size() && cumlen[i] < s) ++i;
        const Vec2 a = points[i - 1], b = points[i];
        const double seg = cumlen[i] - cumlen[i - 1];
        const double u = seg > 0.0 ? (s - cumlen[i - 1]) / seg : 0.0;
        const Vec2 dir = (b - a) * (1.0 / std::max(seg, 1e-12));
        const Vec2 normal{-dir.y, dir.x};
        return a + dir * (u * seg) + normal * lateral;
    }
};

// A drivable path through the lane graph, possibly sharing a downstream
// section with other routes (merge / crossing).
struct Route {
    std::vector<std::string> lane_ids;
    Polyline path;
    double conflict_s = -1.0;  // arc length of the conflict point, <0 if none
    int conflict_group = -1;   // routes in the same group share the conflict point
};

struct LaneBuild {
    std::vector<LaneSegment> lanes;
    std::vector<Route> routes;
};

// Chains straight segments along `dir` starting at `start`, linking
// successor/predecessor ids. Returns the generated lane ids.
inline std::vector<std::string> add_corridor(std::vector<LaneSegment>& lanes, const std::string& prefix,
                                             Vec2 start, Vec2 dir, int n_segments,
                                             const LaneAttributes& attrs = {}) {
    const double n = dir.norm();
    dir = dir * (1.0 / n);
    std::vector<std::string> ids;
    Vec2 p = start;
    for (int s = 0; s < n_segments; ++s) {
        LaneSegment lane;
        lane.lane_id = prefix + "_" + std::to_string(s);
        lane.attributes = attrs;
        for (int k = 0; k < kPointsPerSegment; ++k) {
            lane.points.push_back(p);
            p = p + dir * kPointSpacing;
        }
        if (s > 0) {
            lane.predecessors.push_back(ids.back());
            lanes[lanes.size() - 1].successors.push_back(lane.lane_id);
        }
        ids.push_back(lane.lane_id);
        lanes.push_back(std::move(lane));
        p = p - dir * kPointSpacing;  // segments share an endpoint
    }
    return ids;
}

inline Polyline corridor_polyline(const std::vector<LaneSegment>& lanes, const std::vector<std::string>& ids) {
    Polyline pl;
    for (const auto& id : ids) {
        for (const auto& lane : lanes) {
            if (lane.lane_id != id) continue;
            for (size_t k = pl.points.empty() ? 0 : 1; k < lane.points.size(); ++k)
                pl.points.push_back(lane.points[k]);
        }
    }
    pl.finalize();
    return pl;
}

inline LaneBuild build_lanes(Archetype archetype) {
    LaneBuild out;
    switch (archetype) {
        case Archetype::follow: {
            auto ids = add_corridor(out.lanes, "main", {-70.0, 0.0}, {1.0, 0.0}, 8);
            Route r;
            r.lane_ids = ids;
            r.path = corridor_polyline(out.lanes, ids);
            out.routes.push_back(r);
            break;
        }
        case Archetype::oncoming: {
            auto a = add_corridor(out.lanes, "east", {-70.0, 0.0}, {1.0, 0.0}, 8);
            auto b = add_corridor(out.lanes, "west", {74.0, kLaneWidth}, {-1.0, 0.0}, 8);
            Route ra, rb;
            ra.lane_ids = a;
            rb.lane_ids = b;
            ra.path = corridor_polyline(out.lanes, a);
            rb.path = corridor_polyline(out.lanes, b);
            out.routes.push_back(ra);
            out.routes.push_back(rb);
            break;
        }
        case Archetype::intersection_cross: {
            LaneAttributes mid;
            mid.in_intersection = true;
            mid.traffic_control = true;
            auto ew = add_corridor(out.lanes, "ew", {-72.0, 0.0}, {1.0, 0.0}, 8);
            auto ns = add_corridor(out.lanes, "ns", {0.0, -72.0}, {0.0, 1.0}, 8);
            for (auto& lane : out.lanes) {
                // segments straddling the origin are in the intersection box
                const Vec2 c = lane.center_at(lane.n_vectors() / 2);
                if (std::abs(c.x) < 12.0 && std::abs(c.y) < 12.0) lane.attributes = mid;
            }
            Route re, rn;
            re.lane_ids = ew;
            rn.lane_ids = ns;
            re.path = corridor_polyline(out.lanes, ew);
            rn.path = corridor_polyline(out.lanes, ns);
            re.conflict_s = 72.0;  // both corridors pass through the origin
            rn.conflict_s = 72.0;
            re.conflict_group = 0;
            rn.conflict_group = 0;
            out.routes.push_back(re);
            out.routes.push_back(rn);
            break;
        }
        case Archetype::merge: {
            auto trunk = add_corridor(out.lanes, "trunk", {0.0, 0.0}, {1.0, 0.0}, 5);
            auto a = add_corridor(out.lanes, "in_a", {-72.0, 0.0}, {1.0, 0.0}, 4);
            // branch at 30 degrees toward the junction; same length as branch a
            const double ang = std::numbers::pi / 6.0;
            const Vec2 dir{std::cos(ang), std::sin(ang)};
            const double blen = 72.0;
            auto b = add_corridor(out.lanes, "in_b", {-blen * dir.x, -blen * dir.y}, dir, 4);
            // link both branch tails into the trunk head
            for (auto& lane : out.lanes) {
                if (lane.lane_id == a.back() || lane.lane_id == b.back())
                    lane.successors.push_back(trunk.front());
                if (lane.lane_id == trunk.front()) {
                    lane.predecessors.push_back(a.back());
                    lane.predecessors.push_back(b.back());
                }
            }
            auto route_a_ids = a;
            route_a_ids.insert(route_a_ids.end(), trunk.begin(), trunk.end());
            auto route_b_ids = b;
            route_b_ids.insert(route_b_ids.end(), trunk.begin(), trunk.end());
            Route ra, rb;
            ra.lane_ids = route_a_ids;
            rb.lane_ids = route_b_ids;
            ra.path = corridor_polyline(out.lanes, route_a_ids);
            rb.path = corridor_polyline(out.lanes, route_b_ids);
            ra.conflict_s = 72.0;  // both approaches have equal arc length to the junction
            rb.conflict_s = 72.0;
            ra.conflict_group = 0;
            rb.conflict_group = 0;
            out.routes.push_back(ra);
            out.routes.push_back(rb);
            break;
        }
        case Archetype::lane_change: {
            auto lo = add_corridor(out.lanes, "lane0", {-70.0, 0.0}, {1.0, 0.0}, 8);
            auto hi = add_corridor(out.lanes, "lane1", {-70.0, kLaneWidth}, {1.0, 0.0}, 8);
            for (size_t s = 0; s < lo.size(); ++s) {
                // lane1 lies to the left of lane0 (both head +x)
                for (auto& lane : out.lanes) {
                    if (lane.lane_id == lo[s]) lane.left_neighbor = hi[s];
                    if (lane.lane_id == hi[s]) lane.right_neighbor = lo[s];
                }
            }
            Route r0, r1;
            r0.lane_ids = lo;
            r1.lane_ids = hi;
            r0.path = corridor_polyline(out.lanes, lo);
            r1.path = corridor_polyline(out.lanes, hi);
            out.routes.push_back(r0);
            out.routes.push_back(r1);
            break;
        }
    }
    return out;
}

}  // namespace synth_detail

inline std::vector<LaneSegment> generate_lanes(Archetype archetype, std::uint64_t /*seed*/) {
    return synth_detail::build_lanes(archetype).lanes;
}

namespace synth_detail {

struct SimAgent {
    int route = 0;
    double s = 0.0;        // arc position along the route
    double v = 0.0;        // speed
    double v_des = 0.0;    // desired speed
    double lateral = 0.0;  // current signed lateral offset
    bool yields = false;
    AgentCategory category = AgentCategory::vehicle;
    // lane change plan
    bool changes_lane = false;
    double lat_from = 0.0, lat_to = 0.0;
    int change_start = 0, change_len = 0;
    std::vector<double> s_hist, lat_hist;
};

inline double lateral_at(const SimAgent& a, int step) {
    if (!a.changes_lane) return a.lat_from;
    const double u = std::clamp((step - a.change_start) / static_cast<double>(a.change_len), 0.0, 1.0);
    const double blend = u * u * (3.0 - 2.0 * u);  // smoothstep
    return a.lat_from + (a.lat_to - a.lat_from) * blend;
}

}  // namespace synth_detail

// Lane-following agents under a damped gap-feedback controller with seeded
// yield/go decisions at conflict points. Observation noise only perturbs the
// observed steps; ground-truth futures stay on the clean dynamics.
inline std::vector<AgentTrack> simulate_agents(const std::vector<LaneSegment>& lanes,
                                               const ScenarioConfig& config, bool yield_enabled = true) {
    using namespace synth_detail;
    if (config.n_agents < 2 || config.n_agents > 8)
        throw GenerationError("simulate_agents: n_agents must be in 2..8");
    LaneBuild build = build_lanes(config.archetype);
    build.lanes = lanes;
    for (auto& r : build.routes) r.path = corridor_polyline(lanes, r.lane_ids);

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const int horizon = config.obs_len + config.pred_len;
    const double dt = 1.0 / config.timestep_hz;
    const int n_routes = static_cast<int>(build.routes.size());

    std::vector<SimAgent> sims(config.n_agents);
    std::vector<int> per_route_count(n_routes, 0);
    for (int i = 0; i < config.n_agents; ++i) {
        auto& a = sims[i];
        a.route = i % n_routes;
        const Route& r = build.routes[a.route];
        const int rank = per_route_count[a.route]++;
        if (config.archetype == Archetype::follow) {
            // platoon: leader slowest, trailing agents progressively faster
            const double f = config.n_agents > 1 ? static_cast<double>(i) / (config.n_agents - 1) : 0.0;
            a.v_des = config.speed_min + f * (config.speed_max - config.speed_min);
        } else {
            a.v_des = config.speed_min + uni(rng) * (config.speed_max - config.speed_min);
        }
        a.v = a.v_des;
        a.yields = yield_enabled && uni(rng) < 0.5;
        const double r_cat = uni(rng);
        if (i >= 2 && r_cat < 0.10) {
            a.category = AgentCategory::pedestrian;
            a.v_des *= 0.15;
            a.v = a.v_des;
        } else if (i >= 2 && r_cat < 0.22) {
            a.category = AgentCategory::cyclist;
            a.v_des *= 0.5;
            a.v = a.v_des;
        }
        if (r.conflict_s > 0.0) {
            // time the approach so conflicting agents meet inside the future window
            const double t_conf = config.obs_len * dt + 1.5 + 0.6 * uni(rng);
            a.s = std::max(2.0, r.conflict_s - a.v_des * t_conf) - 6.0 * rank;
        } else {
            a.s = 30.0 - 1.0 * uni(rng);
        }
        if (config.archetype == Archetype::lane_change && i == 0 && n_routes == 2) {
            a.changes_lane = true;
            a.lat_from = 0.0;
            a.lat_to = (a.route == 0) ? kLaneWidth : -kLaneWidth;
            a.change_start = config.obs_len / 2 + static_cast<int>(uni(rng) * config.obs_len);
            a.change_len = 20;
        }
    }
    // stack same-route agents behind each other with safe gaps
    for (int r = 0; r < n_routes; ++r) {
        std::vector<int> idx;
        for (int i = 0; i < config.n_agents; ++i)
            if (sims[i].route == r) idx.push_back(i);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return sims[a].s > sims[b].s; });
        for (size_t k = 1; k < idx.size(); ++k) {
            double limit = sims[idx[k - 1]].s - (kMinGap + 4.0);
            if (sims[idx[k]].s > limit) sims[idx[k]].s = limit;
        }
        for (int i : idx)
            if (sims[i].s < -(0.25 * build.routes[r].path.length() + 6.0)) {
                throw GenerationError(std::string("infeasible placement for archetype ") +
                                      to_string(config.archetype) + ": too many agents for lane length");
            }
    }

    // roll dynamics over the full horizon
    for (int step = 0; step < horizon; ++step) {
        for (auto& a : sims) {
            a.s_hist.push_back(a.s);
            a.lat_hist.push_back(lateral_at(a, step));
        }
        for (size_t i = 0; i < sims.size(); ++i) {
            auto& a = sims[i];
            const Route& ra = build.routes[a.route];
            double accel = 1.0 * (a.v_des - a.v);
            double gap = std::numeric_limits<double>::infinity();
            double v_lead = 0.0;
            // leader on the same route (or merged downstream section)
            for (size_t j = 0; j < sims.size(); ++j) {
                if (i == j) continue;
                const auto& b = sims[j];
                double g = std::numeric_limits<double>::infinity();
                if (b.route == a.route) {
                    g = b.s - a.s;
                } else if (ra.conflict_group >= 0 &&
                           build.routes[b.route].conflict_group == ra.conflict_group &&
                           config.archetype == Archetype::merge) {
                    const double sa = a.s - ra.conflict_s;
                    const double sb = b.s - build.routes[b.route].conflict_s;
                    if (sb > -1.0 && sa > -40.0) g = sb - sa;
                }
                if (g > 0.0 && g < gap) {
                    gap = g;
                    v_lead = b.v;
                }
            }
            // yield: treat the conflict point as a stop line while crossing
            // traffic has not cleared it
            if (a.yields && ra.conflict_s > 0.0 && a.s < ra.conflict_s - 1.0) {
                for (size_t j = 0; j < sims.size(); ++j) {
                    if (i == j || sims[j].route == a.route) continue;
                    const Route& rb = build.routes[sims[j].route];
                    if (rb.conflict_group != ra.conflict_group || rb.conflict_s <= 0.0) continue;
                    const double rel = sims[j].s - rb.conflict_s;
                    if (rel > -35.0 && rel < 6.0) {
                        const double g = (ra.conflict_s - 3.0) - a.s;
                        if (g < gap) {
                            gap = g;
                            v_lead = 0.0;
                        }
                        break;
                    }
                }
            }
            if (std::isfinite(gap)) {
                const double follow = 0.5 * (gap - kMinGap) + 1.5 * (v_lead - a.v);
                accel = std::min(accel, follow);
                // hard no-overshoot bound on the approach speed
                const double v_safe = v_lead + std::sqrt(2.0 * kMaxAccel * std::max(gap - kMinGap, 0.0));
                if (a.v > v_safe) a.v = v_safe;
            }
            accel = std::clamp(accel, -kMaxAccel, kMaxAccel);
            a.v = std::clamp(a.v + accel * dt, 0.0, config.speed_max);
            // keep the total step displacement within speed_max * dt
            const double lat_next = lateral_at(a, step + 1);
            const double vlat = std::abs(lat_next - lateral_at(a, step)) / dt;
            const double v_long_max = std::sqrt(std::max(config.speed_max * config.speed_max - vlat * vlat, 0.0));
            a.s += std::min(a.v, v_long_max) * dt;
        }
    }

    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<AgentTrack> tracks(config.n_agents);
    for (int i = 0; i < config.n_agents; ++i) {
        const auto& a = sims[i];
        auto& t = tracks[i];
        t.agent_id = "agent_" + std::to_string(i);
        t.category = a.category;
        t.scored = a.category == AgentCategory::vehicle;
        t.valid.assign(horizon, 1);
        t.positions.resize(horizon);
        for (int step = 0; step < horizon; ++step)
            t.positions[step] = build.routes[a.route].path.at(a.s_hist[step], a.lat_hist[step]);
        if (config.noise_std > 0.0) {
            for (int step = 0; step < config.obs_len; ++step) {
                t.positions[step].x += config.noise_std * noise(rng);
                t.positions[step].y += config.noise_std * noise(rng);
            }
        }
        // occasional late appearance: the first few observed steps are unannotated
        if (i >= 1 && uni(rng) < 0.12) {
            const int missing = 1 + static_cast<int>(uni(rng) * 12);
            for (int step = 0; step < std::min(missing, config.obs_len - 1); ++step) t.valid[step] = 0;
        }
    }
    return tracks;
}

inline RawScene generate_scene(const ScenarioConfig& config, const std::string& scene_id) {
    RawScene scene;
    scene.scene_id = scene_id;
    scene.timestep_hz = config.timestep_hz;
    scene.obs_len = config.obs_len;
    scene.pred_len = config.pred_len;
    scene.lanes = generate_lanes(config.archetype, config.seed);
    scene.agents = simulate_agents(scene.lanes, config);
    for (const auto& a : scene.agents) {
        if (a.scored) {
            scene.focal_agent_id = a.agent_id;
            break;
        }
    }
    if (scene.focal_agent_id.empty()) scene.focal_agent_id = scene.agents.front().agent_id;
    return scene;
}

struct DatasetMix {
    std::vector<std::pair<Archetype, double>> proportions;  // must sum to 1

    static DatasetMix uniform() {
        return {{{Archetype::follow, 0.2},
                 {Archetype::intersection_cross, 0.2},
                 {Archetype::merge, 0.2},
                 {Archetype::lane_change, 0.2},
                 {Archetype::oncoming, 0.2}}};
    }
};

inline std::vector<RawScene> generate_dataset(int n_scenes, const DatasetMix& mix, std::uint64_t seed,
                                              const ScenarioConfig& base = {}) {
    double total = 0.0;
    for (const auto& [a, p] : mix.proportions) total += p;
    if (std::abs(total - 1.0) > 1e-9)
        throw GenerationError("generate_dataset: archetype proportions must sum to 1");
    // largest-remainder rounding of per-archetype counts
    std::vector<int> counts(mix.proportions.size(), 0);
    std::vector<std::pair<double, size_t>> remainders;
    int assigned = 0;
    for (size_t k = 0; k < mix.proportions.size(); ++k) {
        const double exact = mix.proportions[k].second * n_scenes;
        counts[k] = static_cast<int>(std::floor(exact));
        assigned += counts[k];
        remainders.push_back({exact - counts[k], k});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; assigned < n_scenes; ++k, ++assigned) counts[remainders[k % remainders.size()].second]++;

    std::vector<RawScene> scenes;
    scenes.reserve(n_scenes);
    int index = 0;
    for (size_t k = 0; k < mix.proportions.size(); ++k) {
        for (int c = 0; c < counts[k]; ++c, ++index) {
            ScenarioConfig cfg = base;
            cfg.archetype = mix.proportions[k].first;
            cfg.seed = seed ^ static_cast<std::uint64_t>(index);
            // vary agent count deterministically with the scene seed
            std::mt19937_64 r(cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
            cfg.n_agents = 2 + static_cast<int>(r() % 7);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "scene_%06d_%s", index, to_string(cfg.archetype));
            scenes.push_back(generate_scene(cfg, buf));
        }
    }
    return scenes;
}

}  // namespace ffinet
