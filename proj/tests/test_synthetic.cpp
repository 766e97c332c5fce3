#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "ffinet/synthetic.hpp"

using namespace ffinet;

namespace {

bool same_scene(const RawScene& a, const RawScene& b) {
    if (a.agents.size() != b.agents.size() || a.lanes.size() != b.lanes.size()) return false;
    for (size_t i = 0; i < a.agents.size(); ++i) {
        if (a.agents[i].valid != b.agents[i].valid) return false;
        for (size_t t = 0; t < a.agents[i].positions.size(); ++t)
            if (!(a.agents[i].positions[t] == b.agents[i].positions[t])) return false;
    }
    for (size_t l = 0; l < a.lanes.size(); ++l)
        for (size_t k = 0; k < a.lanes[l].points.size(); ++k)
            if (!(a.lanes[l].points[k] == b.lanes[l].points[k])) return false;
    return true;
}

double min_pair_distance(const RawScene& scene) {
    double best = std::numeric_limits<double>::infinity();
    const int horizon = scene.horizon();
    for (int t = 0; t < horizon; ++t)
        for (size_t i = 0; i < scene.agents.size(); ++i)
            for (size_t j = i + 1; j < scene.agents.size(); ++j) {
                if (!scene.agents[i].valid[t] || !scene.agents[j].valid[t]) continue;
                best = std::min(best,
                                (scene.agents[i].positions[t] - scene.agents[j].positions[t]).norm());
            }
    return best;
}

}  // namespace

TEST_CASE("lane graphs are connected chains with matching forward/backward links") {
    for (Archetype arch : {Archetype::follow, Archetype::intersection_cross, Archetype::merge,
                           Archetype::lane_change, Archetype::oncoming}) {
        const auto lanes = generate_lanes(arch, 7);
        REQUIRE(lanes.size() >= 3);
        std::map<std::string, const LaneSegment*> by_id;
        for (const auto& l : lanes) by_id[l.lane_id] = &l;
        int chained = 0;
        for (const auto& l : lanes) {
            for (const auto& s : l.successors) {
                REQUIRE(by_id.count(s) == 1);
                const auto& succ = *by_id.at(s);
                // successor lists this lane as a predecessor and shares the endpoint
                CHECK(std::find(succ.predecessors.begin(), succ.predecessors.end(), l.lane_id) !=
                      succ.predecessors.end());
                CHECK((succ.points.front() - l.points.back()).norm() < 1e-6);
                ++chained;
            }
            for (size_t k = 1; k < l.points.size(); ++k)
                CHECK((l.points[k] - l.points[k - 1]).norm() > 0.0);
        }
        CHECK(chained >= 3);
    }
}

TEST_CASE("lane generation is deterministic and lane_change has neighbor links") {
    const auto a = generate_lanes(Archetype::merge, 5);
    const auto b = generate_lanes(Archetype::merge, 5);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].lane_id == b[i].lane_id);
        for (size_t k = 0; k < a[i].points.size(); ++k) CHECK(a[i].points[k] == b[i].points[k]);
    }

    const auto lc = generate_lanes(Archetype::lane_change, 1);
    int left = 0, right = 0;
    std::map<std::string, const LaneSegment*> by_id;
    for (const auto& l : lc) by_id[l.lane_id] = &l;
    for (const auto& l : lc) {
        if (l.left_neighbor) {
            ++left;
            REQUIRE(by_id.count(*l.left_neighbor) == 1);
            CHECK(by_id.at(*l.left_neighbor)->right_neighbor == l.lane_id);
        }
        if (l.right_neighbor) ++right;
    }
    CHECK(left >= 3);
    CHECK(right >= 3);
}

TEST_CASE("a follower behind a stopped leader brakes instead of overlapping") {
    ScenarioConfig cfg;
    cfg.archetype = Archetype::follow;
    cfg.n_agents = 2;
    cfg.speed_min = 0.0;  // leader gets the minimum desired speed
    cfg.speed_max = 12.0;
    cfg.noise_std = 0.0;
    cfg.seed = 0;  // this seed places the fast agent behind the stationary one
    const auto lanes = generate_lanes(cfg.archetype, cfg.seed);
    const auto tracks = simulate_agents(lanes, cfg);
    REQUIRE(tracks.size() == 2);
    const int horizon = cfg.obs_len + cfg.pred_len;
    const double dt = 1.0 / cfg.timestep_hz;
    // follower's final speed is near zero and the pair never overlaps
    const auto& f = tracks[1];
    const double v_end = (f.positions[horizon - 1] - f.positions[horizon - 2]).norm() / dt;
    CHECK(v_end < 0.5);
    for (int t = 0; t < horizon; ++t)
        CHECK((tracks[0].positions[t] - tracks[1].positions[t]).norm() > 1.0);
}

TEST_CASE("observation noise never touches the ground-truth future") {
    ScenarioConfig clean, noisy;
    clean.archetype = noisy.archetype = Archetype::oncoming;
    clean.n_agents = noisy.n_agents = 4;
    clean.seed = noisy.seed = 17;
    clean.noise_std = 0.0;
    noisy.noise_std = 0.25;
    const RawScene s0 = generate_scene(clean, "s");
    const RawScene s1 = generate_scene(noisy, "s");
    bool any_obs_differs = false;
    for (size_t i = 0; i < s0.agents.size(); ++i) {
        for (int t = 0; t < s0.obs_len; ++t)
            if (!(s0.agents[i].positions[t] == s1.agents[i].positions[t])) any_obs_differs = true;
        for (int t = s0.obs_len; t < s0.horizon(); ++t) {
            CHECK(s0.agents[i].positions[t].x == s1.agents[i].positions[t].x);
            CHECK(s0.agents[i].positions[t].y == s1.agents[i].positions[t].y);
        }
    }
    CHECK(any_obs_differs);
}

TEST_CASE("scene generation is bit-identical for a fixed seed") {
    for (int arch = 0; arch < 5; ++arch) {
        ScenarioConfig cfg;
        cfg.archetype = static_cast<Archetype>(arch);
        cfg.n_agents = 5;
        cfg.seed = 99 + arch;
        CHECK(same_scene(generate_scene(cfg, "x"), generate_scene(cfg, "x")));
    }
}

TEST_CASE("dataset mix counts follow the requested proportions") {
    DatasetMix all_follow{{{Archetype::follow, 1.0}}};
    const auto scenes = generate_dataset(8, all_follow, 1);
    REQUIRE(scenes.size() == 8);
    std::set<std::string> ids;
    for (const auto& s : scenes) {
        CHECK(s.scene_id.find("_follow") != std::string::npos);
        ids.insert(s.scene_id);
    }
    CHECK(ids.size() == 8);  // unique ids

    DatasetMix half{{{Archetype::follow, 0.5}, {Archetype::merge, 0.5}}};
    const auto mixed = generate_dataset(10, half, 2);
    int follow = 0, merge = 0;
    for (const auto& s : mixed) {
        if (s.scene_id.find("_follow") != std::string::npos) ++follow;
        if (s.scene_id.find("_merge") != std::string::npos) ++merge;
    }
    CHECK(follow == 5);
    CHECK(merge == 5);

    const auto again = generate_dataset(10, half, 2);
    for (size_t i = 0; i < mixed.size(); ++i) CHECK(same_scene(mixed[i], again[i]));

    DatasetMix bad{{{Archetype::follow, 0.4}}};
    CHECK_THROWS_AS(generate_dataset(4, bad, 0), GenerationError);
}

TEST_CASE("ground-truth steps respect the speed limit") {
    DatasetMix mix = DatasetMix::uniform();
    const auto scenes = generate_dataset(25, mix, 5);
    for (const auto& s : scenes) {
        const double dt = 1.0 / s.timestep_hz;
        for (const auto& a : s.agents)
            for (int t = s.obs_len; t + 1 < s.horizon(); ++t) {
                if (!a.valid[t] || !a.valid[t + 1]) continue;
                CHECK((a.positions[t + 1] - a.positions[t]).norm() <= 12.0 * dt + 1e-6);
            }
    }
}

TEST_CASE("crossing scenarios without yielding produce frequent near-collisions") {
    int close = 0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        ScenarioConfig cfg;
        cfg.archetype = Archetype::intersection_cross;
        cfg.n_agents = 2;
        cfg.noise_std = 0.0;
        cfg.seed = 1000 + i;
        const auto lanes = generate_lanes(cfg.archetype, cfg.seed);
        const auto tracks = simulate_agents(lanes, cfg, /*yield_enabled=*/false);
        RawScene scene;
        scene.obs_len = cfg.obs_len;
        scene.pred_len = cfg.pred_len;
        scene.agents = tracks;
        if (min_pair_distance(scene) < 3.0) ++close;
    }
    CHECK(close >= n / 2);
}

TEST_CASE("overfilled lanes raise a generation error naming the archetype") {
    ScenarioConfig cfg;
    cfg.archetype = Archetype::follow;
    cfg.n_agents = 8;
    cfg.seed = 4;
    auto lanes = generate_lanes(cfg.archetype, cfg.seed);
    lanes.resize(1);  // a single 18 m segment cannot hold 8 spaced vehicles
    try {
        simulate_agents(lanes, cfg);
        FAIL("expected GenerationError");
    } catch (const GenerationError& e) {
        CHECK(std::string(e.what()).find("follow") != std::string::npos);
    }
    CHECK_THROWS_AS(simulate_agents(generate_lanes(cfg.archetype, 0),
                                    ScenarioConfig{Archetype::follow, 1}),
                    GenerationError);
}
