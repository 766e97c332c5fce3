#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ffinet/scene.hpp"
#include "ffinet/synthetic.hpp"

using namespace ffinet;

namespace {

AgentTrack straight_track(std::vector<Vec2> pos, std::vector<int> valid) {
    AgentTrack t;
    t.agent_id = "a";
    t.positions = std::move(pos);
    t.valid = std::move(valid);
    return t;
}

RawScene rotated_translated(const RawScene& s, double angle, Vec2 shift) {
    RawScene out = s;
    auto xf = [&](Vec2 p) { return rotate(p, angle) + shift; };
    for (auto& a : out.agents)
        for (auto& p : a.positions) p = xf(p);
    for (auto& l : out.lanes)
        for (auto& p : l.points) p = xf(p);
    return out;
}

}  // namespace

TEST_CASE("angle wrapping lands in (-pi, pi] and is idempotent") {
    CHECK(wrap_angle(-6.0) == Catch::Approx(2.0 * std::numbers::pi - 6.0));
    CHECK(wrap_angle(std::numbers::pi) == Catch::Approx(std::numbers::pi));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> dist(-50.0, 50.0);
    for (int i = 0; i < 1000; ++i) {
        const double w = wrap_angle(dist(rng));
        CHECK(w > -std::numbers::pi - 1e-15);
        CHECK(w <= std::numbers::pi + 1e-15);
        CHECK(wrap_angle(w) == Catch::Approx(w).margin(1e-12));
    }
}

TEST_CASE("trajectory vectorization differences and pairwise masking") {
    std::vector<Vec2> vectors;
    std::vector<int> mask;

    vectorize_trajectory({{0, 0}, {1, 0}, {2, 1}}, {1, 1, 1}, vectors, mask);
    CHECK(vectors == std::vector<Vec2>{{1, 0}, {1, 1}});
    CHECK(mask == std::vector<int>{1, 1});

    vectorize_trajectory({{0, 0}, {0, 0}}, {1, 1}, vectors, mask);
    CHECK(vectors == std::vector<Vec2>{{0, 0}});
    CHECK(mask == std::vector<int>{1});

    // an invalid middle step invalidates both adjacent displacements
    vectorize_trajectory({{0, 0}, {9, 9}, {2, 0}}, {1, 0, 1}, vectors, mask);
    CHECK(vectors == std::vector<Vec2>{{0, 0}, {0, 0}});
    CHECK(mask == std::vector<int>{0, 0});

    CHECK_THROWS_AS(vectorize_trajectory({{0, 0}}, {1, 1}, vectors, mask), ContractViolation);
}

TEST_CASE("heading from the reference displacement with stationary fallback") {
    CHECK(compute_heading(straight_track({{0, 0}, {1, 1}}, {1, 1}), 2) ==
          Catch::Approx(std::numbers::pi / 4));
    CHECK(compute_heading(straight_track({{0, 0}, {1, 0}}, {1, 1}), 2) == 0.0);
    CHECK(compute_heading(straight_track({{3, 3}, {3, 3}, {3, 3}}, {1, 1, 1}), 3) == 0.0);
    // falls back past a stationary tail to the last moving displacement
    CHECK(compute_heading(straight_track({{0, 0}, {0, 1}, {0, 1}}, {1, 1, 1}), 3) ==
          Catch::Approx(std::numbers::pi / 2));
}

TEST_CASE("relative geometry in the receiver frame") {
    AgentFrame recv{{0, 0}, 0.0}, send{{3, 4}, 0.0};
    RelativeGeometry rel = relative_geometry(recv, send);
    CHECK(rel.delta_p.x == Catch::Approx(3.0));
    CHECK(rel.delta_p.y == Catch::Approx(4.0));
    CHECK(rel.distance == Catch::Approx(5.0));
    CHECK(rel.delta_theta == 0.0);

    recv.heading = std::numbers::pi / 2;
    rel = relative_geometry(recv, send);
    CHECK(rel.delta_p.x == Catch::Approx(4.0));
    CHECK(rel.delta_p.y == Catch::Approx(-3.0));

    recv.heading = 3.0;
    send.heading = -3.0;
    rel = relative_geometry(recv, send);
    CHECK(rel.delta_theta == Catch::Approx(2.0 * std::numbers::pi - 6.0));
}

TEST_CASE("displacements rotate into the agent frame without translation") {
    CHECK(normalize_vectors({{1, 0}}, {{100, 100}, 0.0})[0] == Vec2{1, 0});
    const Vec2 z = normalize_vectors({{0, 1}}, {{0, 0}, std::numbers::pi / 2})[0];
    CHECK(z.x == Catch::Approx(1.0));
    CHECK(z.y == Catch::Approx(0.0).margin(1e-12));
    const Vec2 z2 = normalize_vectors({{1, 1}}, {{0, 0}, std::numbers::pi / 4})[0];
    CHECK(z2.x == Catch::Approx(std::sqrt(2.0)));
    CHECK(z2.y == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("prediction denormalization inverts the local mapping") {
    AgentFrame f{{5, 5}, 0.0};
    CHECK(denormalize_predictions({{{1, 0}}}, f)[0][0] == Vec2{6, 5});
    AgentFrame g{{0, 0}, std::numbers::pi / 2};
    const Vec2 w = denormalize_predictions({{{1, 0}}}, g)[0][0];
    CHECK(w.x == Catch::Approx(0.0).margin(1e-12));
    CHECK(w.y == Catch::Approx(1.0));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> dist(-20.0, 20.0);
    for (int i = 0; i < 200; ++i) {
        AgentFrame frame{{dist(rng), dist(rng)}, wrap_angle(dist(rng))};
        const Vec2 p{dist(rng), dist(rng)};
        const Vec2 round = frame.to_local(frame.to_world(p));
        CHECK(std::abs(round.x - p.x) < 1e-9);
        CHECK(std::abs(round.y - p.y) < 1e-9);
    }
}

TEST_CASE("interaction graph gating, self-edges and connectivity edges") {
    RawScene scene;
    scene.obs_len = 2;
    scene.pred_len = 1;
    AgentTrack a = straight_track({{0, 0}, {1, 0}, {2, 0}}, {1, 1, 1});
    a.agent_id = "a0";
    AgentTrack b = straight_track({{49, 0}, {51, 0}, {52, 0}}, {1, 1, 1});
    b.agent_id = "a1";
    scene.agents = {a, b};
    scene.focal_agent_id = "a0";
    LaneSegment l0, l1;
    l0.lane_id = "l0";
    l0.points = {{0, 10}, {2, 10}, {4, 10}};  // anchor well above both agents
    l0.successors = {"l1"};
    l1.lane_id = "l1";
    l1.points = {{4, 10}, {6, 10}, {8, 10}};
    l1.predecessors = {"l0"};
    scene.lanes = {l0, l1};

    const InteractionGraphs g = build_interaction_graphs(scene);

    // 50 m apart: mirrored pair plus both self-edges
    REQUIRE(g.edges_a2a.size() == 4);
    int self = 0, cross = 0;
    for (const auto& e : g.edges_a2a) {
        if (e.receiver == e.sender) {
            ++self;
            CHECK(e.rel.distance == 0.0);
        } else {
            ++cross;
        }
    }
    CHECK(self == 2);
    CHECK(cross == 2);

    // lane anchors are ~10 m from agent a0 and ~43+ m from a1: no a2l/l2a edges
    CHECK(g.edges_a2l.empty());
    CHECK(g.edges_l2a.empty());

    // one successor edge l0->?, one predecessor edge back
    int succ = 0, pred = 0;
    for (const auto& e : g.edges_l2l) {
        if (e.type == LaneEdgeType::successor) ++succ;
        if (e.type == LaneEdgeType::predecessor) ++pred;
    }
    CHECK(succ == 1);
    CHECK(pred == 1);

    // distance-gated edges respect their thresholds on random scenes
    const RawScene synth = generate_scene({Archetype::merge, 5, 20, 30, 2.0, 12.0, 0.05, 11}, "s");
    const DecomposedScene dec = decompose(synth);
    const InteractionGraphs gs = build_interaction_graphs(dec);
    for (const auto& e : gs.edges_a2a) {
        if (e.receiver != e.sender)
            CHECK((dec.agents[e.sender].current - dec.agents[e.receiver].current).norm() <=
                  gs.thresholds.a2a);
    }
    for (const auto& e : gs.edges_a2l)
        CHECK((dec.agents[e.sender].current - dec.lanes[e.receiver].frame.origin).norm() <=
              gs.thresholds.a2l);
    for (const auto& e : gs.edges_l2a)
        CHECK((dec.agents[e.receiver].current - dec.lanes[e.sender].frame.origin).norm() <=
              gs.thresholds.l2a);
    // a2a closed under edge reversal
    for (const auto& e : gs.edges_a2a) {
        bool mirrored = false;
        for (const auto& m : gs.edges_a2a)
            if (m.receiver == e.sender && m.sender == e.receiver) mirrored = true;
        CHECK(mirrored);
    }
}

TEST_CASE("decompose/reconstruct round trip is exact on valid coordinates") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        ScenarioConfig cfg;
        cfg.archetype = static_cast<Archetype>(i % 5);
        cfg.n_agents = 2 + static_cast<int>(rng() % 7);
        cfg.seed = rng();
        const RawScene scene = generate_scene(cfg, "s" + std::to_string(i));
        const RawScene back = reconstruct_scene(decompose(scene));
        REQUIRE(back.agents.size() == scene.agents.size());
        for (size_t a = 0; a < scene.agents.size(); ++a) {
            REQUIRE(back.agents[a].valid == scene.agents[a].valid);
            for (size_t t = 0; t < scene.agents[a].positions.size(); ++t)
                if (scene.agents[a].valid[t]) {
                    CHECK(back.agents[a].positions[t].x == scene.agents[a].positions[t].x);
                    CHECK(back.agents[a].positions[t].y == scene.agents[a].positions[t].y);
                }
        }
        REQUIRE(back.lanes.size() == scene.lanes.size());
        for (size_t l = 0; l < scene.lanes.size(); ++l)
            for (size_t k = 0; k < scene.lanes[l].points.size(); ++k) {
                CHECK(back.lanes[l].points[k].x == scene.lanes[l].points[k].x);
                CHECK(back.lanes[l].points[k].y == scene.lanes[l].points[k].y);
            }
    }
}

TEST_CASE("round trip handles gaps and single-point tracks") {
    RawScene scene;
    scene.obs_len = 5;
    scene.pred_len = 3;
    scene.focal_agent_id = "a";
    AgentTrack a = straight_track({{0.1, 0.2}, {1.1, 0.2}, {0, 0}, {3.1, 0.7}, {4.1, 0.9},
                                   {5.0, 1.0}, {0, 0}, {7.3, 1.4}},
                                  {1, 1, 0, 1, 1, 1, 0, 1});
    scene.agents = {a};
    AgentTrack single;
    single.agent_id = "b";
    single.positions.assign(8, Vec2{});
    single.valid.assign(8, 0);
    single.positions[2] = {9.5, -3.25};
    single.valid[2] = 1;
    scene.agents.push_back(single);

    const RawScene back = reconstruct_scene(decompose(scene));
    for (size_t t = 0; t < 8; ++t)
        if (a.valid[t]) {
            CHECK(back.agents[0].positions[t].x == a.positions[t].x);
            CHECK(back.agents[0].positions[t].y == a.positions[t].y);
        }
    CHECK(back.agents[1].positions[2] == Vec2{9.5, -3.25});
    CHECK(back.agents[1].valid == single.valid);
}

TEST_CASE("relative geometry, normalized vectors and graphs are rigid-motion invariant") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ang(-3.0, 3.0), shift(-200.0, 200.0);
    for (int i = 0; i < 10; ++i) {
        ScenarioConfig cfg;
        cfg.archetype = static_cast<Archetype>(i % 5);
        cfg.n_agents = 4;
        cfg.seed = 100 + i;
        const RawScene scene = generate_scene(cfg, "s");
        const RawScene moved = rotated_translated(scene, ang(rng), {shift(rng), shift(rng)});
        const DecomposedScene d1 = decompose(scene), d2 = decompose(moved);
        const InteractionGraphs g1 = build_interaction_graphs(d1), g2 = build_interaction_graphs(d2);

        REQUIRE(g1.edges_a2a.size() == g2.edges_a2a.size());
        REQUIRE(g1.edges_a2l.size() == g2.edges_a2l.size());
        REQUIRE(g1.edges_l2a.size() == g2.edges_l2a.size());
        for (size_t e = 0; e < g1.edges_a2a.size(); ++e) {
            CHECK(g1.edges_a2a[e].receiver == g2.edges_a2a[e].receiver);
            CHECK(g1.edges_a2a[e].sender == g2.edges_a2a[e].sender);
            CHECK(g1.edges_a2a[e].rel.delta_p.x ==
                  Catch::Approx(g2.edges_a2a[e].rel.delta_p.x).margin(1e-8));
            CHECK(g1.edges_a2a[e].rel.delta_p.y ==
                  Catch::Approx(g2.edges_a2a[e].rel.delta_p.y).margin(1e-8));
            CHECK(wrap_angle(g1.edges_a2a[e].rel.delta_theta - g2.edges_a2a[e].rel.delta_theta) ==
                  Catch::Approx(0.0).margin(1e-8));
        }
        for (size_t a = 0; a < d1.agents.size(); ++a) {
            const auto z1 = normalize_vectors(d1.agents[a].vectors, d1.agents[a].frame);
            const auto z2 = normalize_vectors(d2.agents[a].vectors, d2.agents[a].frame);
            for (size_t t = 0; t < z1.size(); ++t)
                if (d1.agents[a].vector_mask[t]) {
                    CHECK(z1[t].x == Catch::Approx(z2[t].x).margin(1e-8));
                    CHECK(z1[t].y == Catch::Approx(z2[t].y).margin(1e-8));
                }
        }
    }
}

TEST_CASE("lane anchor sits at the segment center nearest the arc-length midpoint") {
    LaneSegment lane;
    lane.lane_id = "l";
    lane.points = {{0, 0}, {2, 0}, {4, 0}, {6, 0}};
    CHECK(lane_anchor_index(lane) == 1);  // midpoint at (3,0), centers at 1,3,5
    CHECK(lane_frame(lane).origin == Vec2{3, 0});
    CHECK(lane_frame(lane).heading == 0.0);
}
