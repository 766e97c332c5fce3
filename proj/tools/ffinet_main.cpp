// Command-line entry point: data generation, training, evaluation,
// prediction, ablation grids, plotting, and model statistics.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ffinet/config.hpp"
#include "ffinet/io.hpp"
#include "ffinet/loss.hpp"
#include "ffinet/metrics.hpp"
#include "ffinet/model.hpp"
#include "ffinet/plot.hpp"
#include "ffinet/predictions_io.hpp"
#include "ffinet/synthetic.hpp"
#include "ffinet/training.hpp"

namespace fs = std::filesystem;
using namespace ffinet;

namespace {

std::string default_data_root() {
    const char* env = std::getenv("FFINET_DATA_DIR");
    return env ? env : "data";
}

Config make_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    Config cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (const auto& kv : overrides) apply_override(cfg, kv);
    validate(cfg);
    return cfg;
}

DatasetMix parse_mix(const std::string& spec) {
    if (spec.empty()) return DatasetMix::uniform();
    DatasetMix mix;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--mix entries must be archetype=weight, got \"" + part + "\"");
        mix.proportions.push_back(
            {archetype_from_string(part.substr(0, eq)), std::stod(part.substr(eq + 1))});
    }
    return mix;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) seeds.push_back(std::stoull(part));
    if (seeds.empty()) throw ConfigError("--seeds must list at least one seed");
    return seeds;
}

std::vector<RawScene> read_split(const fs::path& root, const char* split, bool required) {
    const fs::path dir = root / split;
    if (!fs::is_directory(dir)) {
        if (required) throw IoError("missing dataset split directory: " + dir.string());
        return {};
    }
    return read_scene_dir(dir);
}

int cmd_gen_data(const fs::path& out, int n, std::uint64_t seed, const std::string& mix_spec, bool force) {
    const DatasetMix mix = parse_mix(mix_spec);
    bool nonempty = false;
    for (const char* split : {"train", "val", "test"}) {
        const fs::path dir = out / split;
        if (fs::is_directory(dir) && !fs::is_empty(dir)) nonempty = true;
    }
    if (nonempty && !force) {
        std::cerr << "error: " << out.string() << " already contains data; use --force to overwrite\n";
        return 2;
    }
    for (const char* split : {"train", "val", "test"}) {
        const fs::path dir = out / split;
        if (force && fs::is_directory(dir)) fs::remove_all(dir);
        fs::create_directories(dir);
    }
    if (n == 0) std::cerr << "warning: --n 0 produces empty splits\n";
    const std::vector<RawScene> scenes = generate_dataset(n, mix, seed);
    int counts[3] = {0, 0, 0};
    for (const auto& scene : scenes) {
        const Split split = split_of(scene.scene_id);
        write_scene(scene, out / to_string(split) / (scene.scene_id + ".json"));
        counts[static_cast<int>(split)]++;
    }
    std::cout << "wrote " << counts[0] << " train, " << counts[1] << " val, " << counts[2]
              << " test scenes to " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FFINet motion forecasting toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "flat dotted-key config file")->expected(1);
    app.add_option("--set", overrides, "override config key=value (repeatable)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset with train/val/test splits");
    std::string gen_out = default_data_root();
    int gen_n = 1000;
    std::uint64_t gen_seed = 0;
    std::string gen_mix;
    bool gen_force = false;
    gen->add_option("--out", gen_out, "output dataset root");
    gen->add_option("--n", gen_n, "number of scenes");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--mix", gen_mix, "archetype mix, e.g. follow=0.5,merge=0.5");
    gen->add_flag("--force", gen_force, "overwrite existing splits");

    // train
    auto* tr = app.add_subcommand("train", "train a model");
    std::string tr_data = default_data_root(), tr_out = "runs/default";
    tr->add_option("--data", tr_data, "dataset root (train/ and optional val/)");
    tr->add_option("--out", tr_out, "output directory for checkpoints and log");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a scene directory");
    std::string ev_ckpt, ev_data = default_data_root() + "/val", ev_out;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint directory")->required();
    ev->add_option("--data", ev_data, "directory of scene json files");
    ev->add_option("--out", ev_out, "metric report json path");

    // predict
    auto* pr = app.add_subcommand("predict", "write predictions for scenes");
    std::string pr_ckpt, pr_scene, pr_data, pr_out = "predictions.json";
    pr->add_option("--checkpoint", pr_ckpt, "checkpoint directory")->required();
    pr->add_option("--scene", pr_scene, "single scene json file");
    pr->add_option("--data", pr_data, "directory of scene json files");
    pr->add_option("--out", pr_out, "output predictions json");

    // ablate
    auto* ab = app.add_subcommand("ablate", "run an ablation grid");
    std::string ab_data = default_data_root(), ab_preset = "table5", ab_seeds = "0,1,2",
                ab_out = "ablation";
    ab->add_option("--data", ab_data, "dataset root (train/ and val/)");
    ab->add_option("--preset", ab_preset, "grid preset: table5|table8|table9");
    ab->add_option("--seeds", ab_seeds, "comma-separated seeds");
    ab->add_option("--out", ab_out, "output path prefix (.json/.txt appended)");

    // plot
    auto* pl = app.add_subcommand("plot", "render a scene (optionally with predictions) to an image");
    std::string pl_scene, pl_preds, pl_out = "scene.png";
    bool pl_no_initial = false;
    pl->add_option("--scene", pl_scene, "scene json file")->required();
    pl->add_option("--predictions", pl_preds, "predictions json file");
    pl->add_option("--out", pl_out, "output image (.png or .ppm)");
    pl->add_flag("--no-initial", pl_no_initial, "skip the initial-prediction polyline");

    // model-info
    auto* mi = app.add_subcommand("model-info", "print parameter counts and compute estimate");

    // let --config/--set appear after the subcommand name
    for (CLI::App* sub : {gen, tr, ev, pr, ab, pl, mi}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const Config cfg = make_config(config_path, overrides);

        if (gen->parsed()) return cmd_gen_data(gen_out, gen_n, gen_seed, gen_mix, gen_force);

        if (tr->parsed()) {
            const auto train_scenes = read_split(tr_data, "train", true);
            const auto val_scenes = read_split(tr_data, "val", false);
            fs::create_directories(tr_out);
            std::ofstream log(fs::path(tr_out) / "train_log.jsonl");
            FFINet model(cfg.model);
            const TrainResult res = train(model, cfg, train_scenes, val_scenes, tr_out, &log);
            if (res.best_epoch >= 0)
                std::cout << "best val brier-minFDE " << res.best_val_brier << " at epoch "
                          << res.best_epoch << "\n";
            std::cout << "checkpoints written to " << tr_out << "\n";
            return 0;
        }

        if (ev->parsed()) {
            LoadedCheckpoint lc = load_checkpoint(ev_ckpt);
            for (const auto& kv : overrides) apply_override(lc.config, kv);
            const auto scenes = read_scene_dir(ev_data);
            const MetricReport rep =
                evaluate(*lc.model, scenes, lc.config.metrics, lc.config.train.batch_size);
            std::cout << rep.to_table();
            if (!ev_out.empty()) {
                std::ofstream out(ev_out);
                out << rep.to_json().dump(1) << "\n";
            }
            return 0;
        }

        if (pr->parsed()) {
            LoadedCheckpoint lc = load_checkpoint(pr_ckpt);
            std::vector<RawScene> scenes;
            if (!pr_scene.empty()) scenes.push_back(read_scene(pr_scene));
            else if (!pr_data.empty()) scenes = read_scene_dir(pr_data);
            else throw ConfigError("predict needs --scene or --data");
            write_predictions(predict_scenes(*lc.model, scenes), pr_out);
            std::cout << "wrote predictions for " << scenes.size() << " scenes to " << pr_out << "\n";
            return 0;
        }

        if (ab->parsed()) {
            const auto train_scenes = read_split(ab_data, "train", true);
            const auto val_scenes = read_split(ab_data, "val", true);
            const AblationReport rep = run_ablation(cfg, ab_preset, train_scenes, val_scenes,
                                                    parse_seeds(ab_seeds), &std::cerr);
            std::cout << rep.to_table();
            std::ofstream jout(ab_out + ".json");
            jout << rep.to_json().dump(1) << "\n";
            std::ofstream tout(ab_out + ".txt");
            tout << rep.to_table();
            return 0;
        }

        if (pl->parsed()) {
            const RawScene scene = read_scene(pl_scene);
            PlotOptions opt;
            opt.draw_initial = !pl_no_initial;
            if (!pl_preds.empty()) {
                const auto preds = read_predictions(pl_preds);
                const ScenePredictions* match = nullptr;
                std::string available;
                for (const auto& sp : preds) {
                    available += (available.empty() ? "" : ", ") + sp.scene_id;
                    if (sp.scene_id == scene.scene_id) match = &sp;
                }
                if (!match)
                    throw PlotError("no predictions for scene \"" + scene.scene_id +
                                    "\" (file contains: " + available + ")");
                render_scene(scene, match, opt).write(pl_out);
            } else {
                render_scene(scene, nullptr, opt).write(pl_out);
            }
            std::cout << "wrote " << pl_out << "\n";
            return 0;
        }

        if (mi->parsed()) {
            std::cout << model_info(cfg.model).to_table();
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
