#pragma once

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ffinet/io.hpp"
#include "ffinet/model.hpp"

namespace ffinet {

inline nlohmann::json predictions_to_json(const std::vector<ScenePredictions>& preds) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& sp : preds) {
        nlohmann::json js{{"scene_id", sp.scene_id}, {"agents", nlohmann::json::array()}};
        for (const auto& ap : sp.agents) {
            nlohmann::json ja{{"id", ap.agent_id},
                              {"scored", ap.scored},
                              {"is_focal", ap.is_focal},
                              {"probabilities", ap.probabilities}};
            ja["initial"] = nlohmann::json::array();
            for (const auto& p : ap.initial) ja["initial"].push_back({p.x, p.y});
            ja["modes"] = nlohmann::json::array();
            for (const auto& mode : ap.modes) {
                nlohmann::json jm = nlohmann::json::array();
                for (const auto& p : mode) jm.push_back({p.x, p.y});
                ja["modes"].push_back(std::move(jm));
            }
            js["agents"].push_back(std::move(ja));
        }
        out.push_back(std::move(js));
    }
    return out;
}

inline std::vector<ScenePredictions> predictions_from_json(const nlohmann::json& j) {
    std::vector<ScenePredictions> out;
    for (const auto& js : j) {
        ScenePredictions sp;
        sp.scene_id = js.at("scene_id").get<std::string>();
        for (const auto& ja : js.at("agents")) {
            AgentPrediction ap;
            ap.agent_id = ja.at("id").get<std::string>();
            ap.scored = ja.at("scored").get<bool>();
            ap.is_focal = ja.at("is_focal").get<bool>();
            ap.probabilities = ja.at("probabilities").get<std::vector<double>>();
            for (const auto& jp : ja.at("initial")) ap.initial.push_back({jp[0].get<double>(), jp[1].get<double>()});
            for (const auto& jm : ja.at("modes")) {
                std::vector<Vec2> mode;
                for (const auto& jp : jm) mode.push_back({jp[0].get<double>(), jp[1].get<double>()});
                ap.modes.push_back(std::move(mode));
            }
            sp.agents.push_back(std::move(ap));
        }
        out.push_back(std::move(sp));
    }
    return out;
}

inline void write_predictions(const std::vector<ScenePredictions>& preds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << predictions_to_json(preds).dump(1) << "\n";
}

inline std::vector<ScenePredictions> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return predictions_from_json(nlohmann::json::parse(in));
}

}  // namespace ffinet
