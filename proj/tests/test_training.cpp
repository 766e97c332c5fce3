#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "ffinet/training.hpp"

using namespace ffinet;
using ad::Matrix;
namespace fs = std::filesystem;

namespace {

Config tiny_config(int epochs, std::uint64_t seed = 0) {
    Config c;
    c.model.hidden = 12;
    c.model.K = 3;
    c.model.init_seed = seed;
    c.train.epochs = epochs;
    c.train.lr_drop_epoch = std::max(1, epochs / 2);
    c.train.batch_size = 4;
    c.train.seed = seed;
    return c;
}

std::vector<RawScene> tiny_dataset(int n, std::uint64_t seed) {
    return generate_dataset(n, DatasetMix::uniform(), seed);
}

bool params_equal(const FFINet& a, const FFINet& b) {
    const auto& ea = a.params().entries();
    const auto& eb = b.params().entries();
    if (ea.size() != eb.size()) return false;
    for (size_t i = 0; i < ea.size(); ++i) {
        if (ea[i].first != eb[i].first) return false;
        if (ea[i].second->value != eb[i].second->value) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("learning rate steps from 1e-3 to 1e-4 at epoch 32") {
    TrainConfig c;  // defaults: 40 epochs, drop at 32
    CHECK(lr_schedule(0, c) == 1e-3);
    CHECK(lr_schedule(31, c) == 1e-3);
    CHECK(lr_schedule(32, c) == 1e-4);
    CHECK(lr_schedule(39, c) == 1e-4);
    CHECK_THROWS_AS(lr_schedule(40, c), TrainingError);
    CHECK_THROWS_AS(lr_schedule(-1, c), TrainingError);
}

TEST_CASE("adam minimizes a quadratic and honors gradient clipping") {
    ParamStore ps(1);
    ad::Var x = ps.weight("x", 1, 4);
    Adam opt;
    for (int step = 0; step < 400; ++step) {
        ps.zero_grad();
        ad::backward(ad::sum_all(ad::mul_elem(x, x)));
        opt.step(ps, 0.05);
    }
    CHECK(x->value.cwiseAbs().maxCoeff() < 1e-3);
    CHECK(opt.steps() == 400);

    // a harsh clip bounds the effective gradient, so one step moves little
    ParamStore ps2(1);
    ad::Var y = ps2.weight("y", 1, 4);
    y->value.setConstant(100.0);
    const Matrix before = y->value;
    Adam opt2;
    ps2.zero_grad();
    ad::backward(ad::sum_all(ad::mul_elem(y, y)));
    opt2.step(ps2, 0.01, 0.0, /*grad_clip=*/1e-8);
    // adam normalizes by the gradient magnitude, so the step stays ~lr-sized
    CHECK((y->value - before).cwiseAbs().maxCoeff() < 0.011);
}

TEST_CASE("training is bit-identical for a fixed seed") {
    const Config c = tiny_config(2, 7);
    const auto scenes = tiny_dataset(6, 3);
    FFINet m1(c.model), m2(c.model);
    REQUIRE(params_equal(m1, m2));
    train(m1, c, scenes, {});
    train(m2, c, scenes, {});
    CHECK(params_equal(m1, m2));

    // a different training seed shuffles differently and lands elsewhere
    Config c2 = tiny_config(2, 7);
    c2.train.seed = 8;
    FFINet m3(c.model);
    train(m3, c2, scenes, {});
    CHECK_FALSE(params_equal(m1, m3));
}

TEST_CASE("average training loss drops on a small set") {
    const Config c = tiny_config(10, 1);
    const auto scenes = tiny_dataset(8, 9);
    FFINet model(c.model);
    const TrainResult res = train(model, c, scenes, {});
    REQUIRE(res.history.size() == 10);
    CHECK(res.history.back().train_loss < res.history.front().train_loss);
    for (const auto& rec : res.history) CHECK(std::isfinite(rec.train_loss));
}

TEST_CASE("checkpoints restore the exact model and its config") {
    const fs::path dir = fs::temp_directory_path() / "ffinet_ckpt_test";
    fs::remove_all(dir);
    Config c = tiny_config(2, 4);
    c.loss.gamma = 0.7;
    const auto scenes = tiny_dataset(6, 5);
    FFINet model(c.model);
    train(model, c, scenes, {});
    Adam opt;
    save_checkpoint(dir, model, c, 1, nlohmann::json::array(), &opt);

    LoadedCheckpoint lc = load_checkpoint(dir);
    CHECK(lc.config.model.hidden == 12);
    CHECK(lc.config.loss.gamma == 0.7);
    CHECK(lc.manifest.at("epoch").get<int>() == 1);
    CHECK(params_equal(model, *lc.model));
    const MetricReport a = evaluate(model, scenes, c.metrics);
    const MetricReport b = evaluate(*lc.model, scenes, c.metrics);
    CHECK(a.brier_minFDE == b.brier_minFDE);
    CHECK(a.minADE == b.minADE);

    // a mismatched architecture in the manifest is rejected up front
    LoadedCheckpoint broken = load_checkpoint(dir);
    nlohmann::json manifest = broken.manifest;
    manifest["config"]["model.hidden"] = "16";
    {
        std::ofstream out(dir / "manifest.json");
        out << manifest.dump(1) << "\n";
    }
    CHECK_THROWS_AS(load_checkpoint(dir), TrainingError);
    CHECK_THROWS_AS(load_checkpoint(dir / "nowhere"), TrainingError);
}

TEST_CASE("training fails loudly on empty data, bad horizons and non-finite loss") {
    Config c = tiny_config(1, 0);
    FFINet model(c.model);
    CHECK_THROWS_AS(train(model, c, {}, {}), TrainingError);
    CHECK_THROWS_AS(evaluate(model, {}), TrainingError);

    auto scenes = tiny_dataset(2, 1);
    RawScene bad = scenes[0];
    bad.obs_len = 5;
    try {
        make_batch(std::span<const RawScene>(&bad, 1), c.model);
        FAIL("expected ContractViolation");
    } catch (const ContractViolation& e) {
        CHECK(std::string(e.what()).find(bad.scene_id) != std::string::npos);
    }

    // poison one weight: the forward pass goes non-finite and training stops,
    // naming the scenes in the failing batch
    model.params().entries().front().second->value.setConstant(
        std::numeric_limits<double>::quiet_NaN());
    try {
        train(model, c, scenes, {});
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("non-finite") != std::string::npos);
        CHECK(msg.find(scenes[0].scene_id) != std::string::npos);
    }
}

TEST_CASE("validation tracking logs epochs and keeps the best checkpoint") {
    const fs::path dir = fs::temp_directory_path() / "ffinet_train_test";
    fs::remove_all(dir);
    const Config c = tiny_config(3, 2);
    const auto train_scenes = tiny_dataset(6, 11);
    const auto val_scenes = tiny_dataset(3, 12);
    FFINet model(c.model);
    std::ostringstream log;
    const TrainResult res = train(model, c, train_scenes, val_scenes, dir, &log);
    CHECK(res.best_epoch >= 0);
    CHECK(std::isfinite(res.best_val_brier));
    CHECK(fs::exists(dir / "best" / "params.bin"));
    CHECK(fs::exists(dir / "final" / "manifest.json"));

    // one well-formed json record per epoch, with validation metrics attached
    std::istringstream lines(log.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const nlohmann::json j = nlohmann::json::parse(line);
        CHECK(j.at("epoch").get<int>() == n);
        CHECK(j.contains("val"));
        ++n;
    }
    CHECK(n == 3);

    // the final checkpoint reproduces the trained model's metrics
    LoadedCheckpoint final = load_checkpoint(dir / "final");
    CHECK(evaluate(*final.model, val_scenes).brier_minFDE ==
          evaluate(model, val_scenes).brier_minFDE);
}

TEST_CASE("ablation presets have the documented shapes") {
    const auto t5 = ablation_preset("table5");
    REQUIRE(t5.size() == 5);
    CHECK(t5[0].name == "none");
    CHECK(t5[2].name == "no_future");
    CHECK(t5[4].name == "full");
    CHECK(t5[4].overrides.empty());

    const auto t8 = ablation_preset("table8");
    REQUIRE(t8.size() == 6);
    CHECK(t8[0].name == "gamma=0.0");
    CHECK(t8[5].name == "gamma=1.0");
    for (const auto& cell : t8) CHECK(cell.overrides[0].first == "loss.gamma");

    const auto t9 = ablation_preset("table9");
    REQUIRE(t9.size() == 6);
    CHECK(t9[3].name == "lambda=0.5");

    CHECK_THROWS_AS(ablation_preset("table42"), ConfigError);
}

TEST_CASE("the ablation harness fills every row and checks the direction") {
    Config c = tiny_config(1, 0);
    c.model.hidden = 8;
    const auto train_scenes = tiny_dataset(4, 21);
    const auto eval_scenes = tiny_dataset(2, 22);
    const AblationReport rep = run_ablation(c, "table5", train_scenes, eval_scenes, {0}, nullptr);
    REQUIRE(rep.rows.size() == 5);
    for (const auto& row : rep.rows) {
        REQUIRE(row.per_seed.size() == 1);
        CHECK(std::isfinite(row.brier));
    }
    CHECK(rep.direction_checked);
    CHECK(!rep.note.empty());
    const nlohmann::json j = rep.to_json();
    CHECK(j.at("rows").size() == 5);
    CHECK(rep.to_table().find("b-minFDE") != std::string::npos);

    const AblationReport loss_grid =
        run_ablation(c, "table8", train_scenes, eval_scenes, {0}, nullptr);
    CHECK(loss_grid.rows.size() == 6);
    CHECK_FALSE(loss_grid.direction_checked);
}

TEST_CASE("model info sums module parameters and counts multiply-adds") {
    ModelConfig mc;
    mc.hidden = 16;
    const ModelInfo info = model_info(mc);
    std::int64_t sum = 0;
    for (const auto& [name, n] : info.module_params) sum += n;
    CHECK(sum == info.total_params);
    CHECK(info.multiply_adds > 0);
    CHECK(info.ref_agents == 6);

    // widening the model grows the interaction stacks roughly quadratically
    ModelConfig wide = mc;
    wide.hidden = 32;
    const ModelInfo big = model_info(wide);
    auto module = [](const ModelInfo& i, const std::string& name) {
        for (const auto& [n, v] : i.module_params)
            if (n == name) return v;
        return std::int64_t{0};
    };
    const double ratio = static_cast<double>(module(big, "obs")) / module(info, "obs");
    CHECK(ratio > 3.0);
    CHECK(ratio < 4.5);
    CHECK(big.multiply_adds > info.multiply_adds);
    CHECK(big.to_table().find("total") != std::string::npos);
}
