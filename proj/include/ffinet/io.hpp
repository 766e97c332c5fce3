#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffinet/scene.hpp"

namespace ffinet {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kFormatVersion = "ffinet/1";

namespace io_detail {

inline nlohmann::json point_to_json(const Vec2& p) { return nlohmann::json::array({p.x, p.y}); }

inline Vec2 point_from_json(const nlohmann::json& j, const char* field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw IoError(std::string("parse error in field \"") + field + "\": expected [x, y] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline void warn_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& known,
                              const std::string& context, std::vector<std::string>* warnings) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            const std::string msg = "ignoring unknown field \"" + it.key() + "\" in " + context;
            if (warnings)
                warnings->push_back(msg);
            else
                std::cerr << "warning: " << msg << "\n";
        }
    }
}

}  // namespace io_detail

inline nlohmann::json scene_to_json(const RawScene& scene) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["scene_id"] = scene.scene_id;
    j["timestep_hz"] = scene.timestep_hz;
    j["obs_len"] = scene.obs_len;
    j["pred_len"] = scene.pred_len;
    j["focal_agent_id"] = scene.focal_agent_id;
    j["agents"] = nlohmann::json::array();
    for (const auto& a : scene.agents) {
        nlohmann::json ja;
        ja["id"] = a.agent_id;
        ja["category"] = to_string(a.category);
        ja["scored"] = a.scored;
        ja["xy"] = nlohmann::json::array();
        for (const auto& p : a.positions) ja["xy"].push_back(io_detail::point_to_json(p));
        ja["valid"] = a.valid;
        j["agents"].push_back(std::move(ja));
    }
    j["lanes"] = nlohmann::json::array();
    for (const auto& l : scene.lanes) {
        nlohmann::json jl;
        jl["id"] = l.lane_id;
        jl["points"] = nlohmann::json::array();
        for (const auto& p : l.points) jl["points"].push_back(io_detail::point_to_json(p));
        jl["successors"] = l.successors;
        jl["predecessors"] = l.predecessors;
        jl["left"] = l.left_neighbor ? nlohmann::json(*l.left_neighbor) : nlohmann::json(nullptr);
        jl["right"] = l.right_neighbor ? nlohmann::json(*l.right_neighbor) : nlohmann::json(nullptr);
        jl["attributes"] = {{"turn", l.attributes.turn == TurnDirection::none
                                         ? "none"
                                         : (l.attributes.turn == TurnDirection::left ? "left" : "right")},
                            {"in_intersection", l.attributes.in_intersection},
                            {"traffic_control", l.attributes.traffic_control}};
        j["lanes"].push_back(std::move(jl));
    }
    return j;
}

inline RawScene scene_from_json(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr) {
    using io_detail::point_from_json;
    if (!j.contains("format_version"))
        throw IoError("parse error: missing field \"format_version\"");
    if (j.at("format_version").get<std::string>() != kFormatVersion)
        throw IoError("unsupported format version \"" + j.at("format_version").get<std::string>() +
                      "\" (expected \"" + kFormatVersion + "\")");
    io_detail::warn_unknown_keys(j,
                                 {"format_version", "scene_id", "timestep_hz", "obs_len", "pred_len",
                                  "focal_agent_id", "agents", "lanes"},
                                 "scene", warnings);
    RawScene scene;
    try {
        scene.scene_id = j.at("scene_id").get<std::string>();
        scene.timestep_hz = j.at("timestep_hz").get<double>();
        scene.obs_len = j.at("obs_len").get<int>();
        scene.pred_len = j.at("pred_len").get<int>();
        scene.focal_agent_id = j.at("focal_agent_id").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("parse error in scene header: ") + e.what());
    }
    for (const auto& ja : j.at("agents")) {
        io_detail::warn_unknown_keys(ja, {"id", "category", "scored", "xy", "valid"},
                                     "agent record", warnings);
        AgentTrack a;
        try {
            a.agent_id = ja.at("id").get<std::string>();
            a.category = agent_category_from_string(ja.at("category").get<std::string>());
            a.scored = ja.at("scored").get<bool>();
            a.valid = ja.at("valid").get<std::vector<int>>();
        } catch (const nlohmann::json::exception& e) {
            throw IoError(std::string("parse error in agent record: ") + e.what());
        }
        for (const auto& jp : ja.at("xy")) a.positions.push_back(point_from_json(jp, "xy"));
        if (a.positions.size() != a.valid.size() ||
            static_cast<int>(a.positions.size()) != scene.obs_len + scene.pred_len)
            throw IoError("parse error in field \"xy\" of agent " + a.agent_id +
                          ": expected " + std::to_string(scene.obs_len + scene.pred_len) +
                          " entries, got " + std::to_string(a.positions.size()));
        scene.agents.push_back(std::move(a));
    }
    for (const auto& jl : j.at("lanes")) {
        io_detail::warn_unknown_keys(
            jl, {"id", "points", "successors", "predecessors", "left", "right", "attributes"},
            "lane record", warnings);
        LaneSegment l;
        try {
            l.lane_id = jl.at("id").get<std::string>();
            l.successors = jl.at("successors").get<std::vector<std::string>>();
            l.predecessors = jl.at("predecessors").get<std::vector<std::string>>();
            if (!jl.at("left").is_null()) l.left_neighbor = jl.at("left").get<std::string>();
            if (!jl.at("right").is_null()) l.right_neighbor = jl.at("right").get<std::string>();
            const auto& attrs = jl.at("attributes");
            const std::string turn = attrs.at("turn").get<std::string>();
            l.attributes.turn = turn == "left" ? TurnDirection::left
                                               : (turn == "right" ? TurnDirection::right : TurnDirection::none);
            l.attributes.in_intersection = attrs.at("in_intersection").get<bool>();
            l.attributes.traffic_control = attrs.at("traffic_control").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw IoError(std::string("parse error in lane record: ") + e.what());
        }
        for (const auto& jp : jl.at("points")) l.points.push_back(point_from_json(jp, "points"));
        if (l.points.size() < 2)
            throw IoError("parse error in field \"points\" of lane " + l.lane_id + ": need >= 2 points");
        scene.lanes.push_back(std::move(l));
    }
    if (scene.agent_index(scene.focal_agent_id) < 0)
        throw IoError("focal_agent_id \"" + scene.focal_agent_id + "\" does not resolve to an agent");
    return scene;
}

inline void write_scene(const RawScene& scene, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << scene_to_json(scene).dump(1) << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

inline RawScene read_scene(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        // recover a line number from the byte offset for the error message
        std::ifstream again(path);
        std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
        size_t line = 1;
        for (size_t i = 0; i < std::min(text.size(), e.byte); ++i)
            if (text[i] == '\n') ++line;
        throw IoError("parse error in " + path.string() + " at line " + std::to_string(line) + ": " +
                      e.what());
    }
    return scene_from_json(j, warnings);
}

// --- dataset splits ------------------------------------------------------------

enum class Split { train, val, test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

// Seed-stable FNV-1a hash of the scene id, mapped to a split by proportion.
inline Split split_of(const std::string& scene_id, double train_frac = 0.7, double val_frac = 0.15) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : scene_id) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    const double u = static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
    if (u < train_frac) return Split::train;
    if (u < train_frac + val_frac) return Split::val;
    return Split::test;
}

inline std::vector<RawScene> read_scene_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<RawScene> scenes;
    scenes.reserve(files.size());
    for (const auto& f : files) scenes.push_back(read_scene(f));
    return scenes;
}

}  // namespace ffinet
