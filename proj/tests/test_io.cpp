#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ffinet/batch.hpp"
#include "ffinet/io.hpp"
#include "ffinet/synthetic.hpp"

using namespace ffinet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "ffinet_io_test";
    fs::create_directories(dir);
    return dir;
}

RawScene sample_scene(std::uint64_t seed, int n_agents = 3) {
    ScenarioConfig cfg;
    cfg.archetype = static_cast<Archetype>(seed % 5);
    cfg.n_agents = n_agents;
    cfg.seed = seed;
    return generate_scene(cfg, "sample_" + std::to_string(seed));
}

}  // namespace

TEST_CASE("scene json round trip is bit-exact") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        const RawScene scene = sample_scene(seed);
        const fs::path path = temp_dir() / "scene.json";
        write_scene(scene, path);
        const RawScene back = read_scene(path);

        CHECK(scene_to_json(back) == scene_to_json(scene));
        REQUIRE(back.agents.size() == scene.agents.size());
        for (size_t i = 0; i < scene.agents.size(); ++i) {
            CHECK(back.agents[i].agent_id == scene.agents[i].agent_id);
            CHECK(back.agents[i].scored == scene.agents[i].scored);
            CHECK(back.agents[i].valid == scene.agents[i].valid);
            for (size_t t = 0; t < scene.agents[i].positions.size(); ++t) {
                CHECK(back.agents[i].positions[t].x == scene.agents[i].positions[t].x);
                CHECK(back.agents[i].positions[t].y == scene.agents[i].positions[t].y);
            }
        }
        REQUIRE(back.lanes.size() == scene.lanes.size());
        for (size_t l = 0; l < scene.lanes.size(); ++l) {
            CHECK(back.lanes[l].lane_id == scene.lanes[l].lane_id);
            CHECK(back.lanes[l].successors == scene.lanes[l].successors);
            CHECK(back.lanes[l].left_neighbor == scene.lanes[l].left_neighbor);
            for (size_t k = 0; k < scene.lanes[l].points.size(); ++k) {
                CHECK(back.lanes[l].points[k].x == scene.lanes[l].points[k].x);
                CHECK(back.lanes[l].points[k].y == scene.lanes[l].points[k].y);
            }
        }
        // writing the re-read scene reproduces the file byte for byte
        const fs::path path2 = temp_dir() / "scene2.json";
        write_scene(back, path2);
        std::ifstream f1(path), f2(path2);
        const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(b1 == b2);
    }
}

TEST_CASE("malformed trajectories are rejected with the field name") {
    nlohmann::json j = scene_to_json(sample_scene(7));
    j["agents"][0]["xy"].erase(0);  // now one coordinate short
    try {
        scene_from_json(j);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("\"xy\"") != std::string::npos);
    }

    nlohmann::json bad_pair = scene_to_json(sample_scene(7));
    bad_pair["agents"][0]["xy"][0] = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(scene_from_json(bad_pair), IoError);
}

TEST_CASE("unknown fields produce warnings, version mismatch an error") {
    nlohmann::json j = scene_to_json(sample_scene(8));
    j["extra_field"] = 42;
    j["agents"][0]["speed"] = 3.0;
    std::vector<std::string> warnings;
    const RawScene scene = scene_from_json(j, &warnings);
    REQUIRE(warnings.size() == 2);
    CHECK(warnings[0].find("extra_field") != std::string::npos);
    CHECK(warnings[1].find("speed") != std::string::npos);
    CHECK(scene.agents.size() == sample_scene(8).agents.size());

    nlohmann::json wrong = scene_to_json(sample_scene(8));
    wrong["format_version"] = "ffinet/999";
    try {
        scene_from_json(wrong);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("ffinet/999") != std::string::npos);
    }
    wrong.erase("format_version");
    CHECK_THROWS_AS(scene_from_json(wrong), IoError);
}

TEST_CASE("syntax errors report the file and line number") {
    const fs::path path = temp_dir() / "broken.json";
    {
        std::ofstream out(path);
        out << "{\n \"format_version\": \"ffinet/1\",\n \"scene_id\": oops\n}\n";
    }
    try {
        read_scene(path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("broken.json") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(read_scene(temp_dir() / "does_not_exist.json"), IoError);
}

TEST_CASE("split assignment is deterministic and matches the 70/15/15 target") {
    CHECK(split_of("scene_000000_follow") == split_of("scene_000000_follow"));
    int counts[3] = {0, 0, 0};
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "scene_%06d_merge", i);
        counts[static_cast<int>(split_of(buf))]++;
    }
    CHECK(counts[0] > 0.67 * n);
    CHECK(counts[0] < 0.73 * n);
    CHECK(counts[1] > 0.12 * n);
    CHECK(counts[1] < 0.18 * n);
    CHECK(counts[2] > 0.12 * n);
    CHECK(counts[2] < 0.18 * n);
}

TEST_CASE("scene directories are read in sorted order") {
    const fs::path dir = temp_dir() / "scenes";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_scene(sample_scene(11), dir / "b.json");
    write_scene(sample_scene(12), dir / "a.json");
    std::ofstream(dir / "notes.txt") << "ignored";
    const auto scenes = read_scene_dir(dir);
    REQUIRE(scenes.size() == 2);
    CHECK(scenes[0].scene_id == "sample_12");
    CHECK(scenes[1].scene_id == "sample_11");
    CHECK_THROWS_AS(read_scene_dir(dir / "missing"), IoError);
}

TEST_CASE("batches concatenate scenes without cross-scene edges") {
    const RawScene s1 = sample_scene(21, 3);
    const RawScene s2 = sample_scene(22, 3);
    ModelConfig mc;
    const std::vector<RawScene> scenes{s1, s2};
    const auto batches = batch_scenes(scenes, 10, mc);
    REQUIRE(batches.size() == 1);
    const SceneBatch& b = batches[0];
    REQUIRE(b.agents.size() == 6);
    CHECK(b.agent_offset == std::vector<int>{0, 3, 6});
    for (size_t i = 0; i < b.agents.size(); ++i) CHECK(b.agents[i].scene == (i < 3 ? 0 : 1));
    auto scene_of = [](const std::vector<int>& offsets, int idx) {
        for (size_t s = 0; s + 1 < offsets.size(); ++s)
            if (idx >= offsets[s] && idx < offsets[s + 1]) return static_cast<int>(s);
        return -1;
    };
    for (size_t e = 0; e < b.a2a.recv.size(); ++e)
        CHECK(b.agents[b.a2a.recv[e]].scene == b.agents[b.a2a.send[e]].scene);
    for (size_t e = 0; e < b.a2l.recv.size(); ++e)
        CHECK(scene_of(b.lane_offset, static_cast<int>(b.a2l.recv[e])) ==
              scene_of(b.agent_offset, static_cast<int>(b.a2l.send[e])));
    for (size_t e = 0; e < b.l2a.recv.size(); ++e)
        CHECK(scene_of(b.agent_offset, static_cast<int>(b.l2a.recv[e])) ==
              scene_of(b.lane_offset, static_cast<int>(b.l2a.send[e])));

    // a 4-agent budget forces one scene per batch
    const auto split = batch_scenes(scenes, 4, mc);
    CHECK(split.size() == 2);

    CHECK(batch_scenes({}, 8, mc).empty());

    RawScene wrong = s1;
    wrong.pred_len = 5;
    CHECK_THROWS_AS(make_batch(std::vector<RawScene>{wrong}, mc), ContractViolation);
}
