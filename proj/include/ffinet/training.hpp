#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ffinet/config.hpp"
#include "ffinet/io.hpp"
#include "ffinet/loss.hpp"
#include "ffinet/metrics.hpp"
#include "ffinet/model.hpp"
#include "ffinet/synthetic.hpp"

namespace ffinet {

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Step schedule: lr_initial until lr_drop_epoch, lr_after from there on.
inline double lr_schedule(int epoch, const TrainConfig& c) {
    if (epoch < 0 || epoch >= c.epochs) throw TrainingError("epoch out of range for lr_schedule");
    return epoch < c.lr_drop_epoch ? c.lr_initial : c.lr_after;
}

// Adam with bias correction; state is kept per parameter in creation order.
class Adam {
  public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& params, double lr, double weight_decay = 0.0, double grad_clip = 0.0) {
        const auto& entries = params.entries();
        if (m_.empty()) {
            for (const auto& [name, p] : entries) {
                m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
                v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
            }
        }
        if (m_.size() != entries.size()) throw TrainingError("optimizer state does not match parameter set");
        double clip_scale = 1.0;
        if (grad_clip > 0.0) {
            double sq = 0.0;
            for (const auto& [name, p] : entries)
                if (p->grad.size() != 0) sq += p->grad.squaredNorm();
            const double norm = std::sqrt(sq);
            if (norm > grad_clip) clip_scale = grad_clip / norm;
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < entries.size(); ++i) {
            auto& p = entries[i].second;
            ad::Matrix g = p->grad.size() != 0 ? (p->grad * clip_scale).eval()
                                               : ad::Matrix::Zero(p->value.rows(), p->value.cols());
            if (weight_decay > 0.0) g += weight_decay * p->value;
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
            p->value -= lr * ((m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + eps_)).matrix();
        }
    }

    long long steps() const { return t_; }
    const std::vector<ad::Matrix>& m() const { return m_; }
    const std::vector<ad::Matrix>& v() const { return v_; }
    void restore(long long t, std::vector<ad::Matrix> m, std::vector<ad::Matrix> v) {
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

  private:
    double beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<ad::Matrix> m_, v_;
};

// --- checkpointing --------------------------------------------------------------
// A checkpoint is a directory: params.bin (named tensors), manifest.json
// (config snapshot, epoch, metric history), optionally opt.bin (Adam state).

namespace ckpt_detail {

inline void write_matrix(std::ofstream& out, const ad::Matrix& m) {
    const std::int64_t rows = m.rows(), cols = m.cols();
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        out.write(reinterpret_cast<const char*>(m.row(r).eval().data()),
                  static_cast<std::streamsize>(sizeof(double)) * m.cols());
}

inline ad::Matrix read_matrix(std::ifstream& in) {
    std::int64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!in || rows < 0 || cols < 0) throw TrainingError("corrupt tensor header in checkpoint");
    ad::Matrix m(rows, cols);
    std::vector<double> buf(static_cast<size_t>(cols));
    for (std::int64_t r = 0; r < rows; ++r) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(sizeof(double)) * cols);
        for (std::int64_t c = 0; c < cols; ++c) m(r, c) = buf[static_cast<size_t>(c)];
    }
    if (!in) throw TrainingError("truncated tensor data in checkpoint");
    return m;
}

inline void write_string(std::ofstream& out, const std::string& s) {
    const std::uint32_t len = static_cast<std::uint32_t>(s.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::ifstream& in) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in) throw TrainingError("corrupt name in checkpoint");
    std::string s(len, '\0');
    in.read(s.data(), len);
    return s;
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::filesystem::path& dir, const FFINet& model, const Config& config,
                            int epoch, const nlohmann::json& metric_history, const Adam* opt = nullptr) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "params.bin", std::ios::binary);
        if (!out) throw TrainingError("cannot write " + (dir / "params.bin").string());
        const auto& entries = model.params().entries();
        const std::uint64_t n = entries.size();
        out.write(reinterpret_cast<const char*>(&n), sizeof(n));
        for (const auto& [name, p] : entries) {
            ckpt_detail::write_string(out, name);
            ckpt_detail::write_matrix(out, p->value);
        }
    }
    if (opt) {
        std::ofstream out(dir / "opt.bin", std::ios::binary);
        const std::int64_t t = opt->steps();
        out.write(reinterpret_cast<const char*>(&t), sizeof(t));
        const std::uint64_t n = opt->m().size();
        out.write(reinterpret_cast<const char*>(&n), sizeof(n));
        for (std::uint64_t i = 0; i < n; ++i) {
            ckpt_detail::write_matrix(out, opt->m()[i]);
            ckpt_detail::write_matrix(out, opt->v()[i]);
        }
    }
    nlohmann::json manifest;
    manifest["config"] = config_to_json(config);
    manifest["epoch"] = epoch;
    manifest["metrics"] = metric_history;
    std::ofstream mout(dir / "manifest.json");
    mout << manifest.dump(1) << "\n";
}

struct LoadedCheckpoint {
    Config config;
    std::unique_ptr<FFINet> model;
    nlohmann::json manifest;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream min(manifest_path);
    if (!min) throw TrainingError("cannot open checkpoint manifest: " + manifest_path.string());
    LoadedCheckpoint lc;
    lc.manifest = nlohmann::json::parse(min);
    lc.config = config_from_json(lc.manifest.at("config"));
    lc.model = std::make_unique<FFINet>(lc.config.model);

    std::ifstream in(dir / "params.bin", std::ios::binary);
    if (!in) throw TrainingError("cannot open checkpoint params: " + (dir / "params.bin").string());
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (n != lc.model->params().entries().size())
        throw TrainingError("checkpoint parameter count does not match the config snapshot");
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::string name = ckpt_detail::read_string(in);
        ad::Matrix m = ckpt_detail::read_matrix(in);
        ad::Var p = lc.model->params().find(name);
        if (!p) throw TrainingError("checkpoint names unknown parameter \"" + name + "\"");
        if (p->value.rows() != m.rows() || p->value.cols() != m.cols())
            throw TrainingError("checkpoint shape mismatch for \"" + name + "\"");
        p->value = std::move(m);
    }
    return lc;
}

// --- evaluation -----------------------------------------------------------------

inline std::vector<ScenePredictions> predict_scenes(const FFINet& model, const std::vector<RawScene>& scenes,
                                                    int batch_scenes = 16) {
    std::vector<ScenePredictions> out;
    for (size_t start = 0; start < scenes.size(); start += static_cast<size_t>(batch_scenes)) {
        const size_t len = std::min(static_cast<size_t>(batch_scenes), scenes.size() - start);
        SceneBatch b = make_batch(std::span<const RawScene>(scenes.data() + start, len), model.config());
        for (auto& sp : extract_predictions(model.forward(b), b)) out.push_back(std::move(sp));
    }
    return out;
}

inline MetricReport evaluate(const FFINet& model, const std::vector<RawScene>& scenes,
                             const MetricOptions& opt = {}, int batch_scenes = 16) {
    if (scenes.empty()) throw TrainingError("evaluate: empty dataset");
    return evaluate_predictions(scenes, predict_scenes(model, scenes, batch_scenes), opt);
}

// --- training loop --------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;
    double lr = 0;
    double train_loss = 0, reg = 0, end = 0, cls = 0, initial = 0;
    MetricReport val;
    bool has_val = false;

    nlohmann::json to_json() const {
        nlohmann::json j{{"epoch", epoch},      {"lr", lr},   {"train_loss", train_loss},
                         {"reg", reg},          {"end", end}, {"cls", cls},
                         {"initial", initial}};
        if (has_val) j["val"] = val.to_json();
        return j;
    }
};

struct TrainResult {
    std::vector<EpochRecord> history;
    double best_val_brier = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
};

// Deterministic single-process loop: per-epoch shuffle keyed on (seed, epoch),
// fixed-size scene chunks, one Adam step per chunk. Non-finite loss aborts
// with the offending scene ids. If checkpoint_dir is given, "best" tracks the
// lowest validation brier-minFDE and "final" is written after the last epoch.
inline TrainResult train(FFINet& model, const Config& config, const std::vector<RawScene>& train_scenes,
                         const std::vector<RawScene>& val_scenes,
                         const std::filesystem::path& checkpoint_dir = {}, std::ostream* log = nullptr) {
    validate(config);
    if (train_scenes.empty()) throw TrainingError("train: empty training set");
    Adam opt;
    TrainResult result;
    nlohmann::json history = nlohmann::json::array();
    std::vector<size_t> order(train_scenes.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, config.train);
        std::mt19937_64 rng(config.train.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        int n_batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.train.batch_size)) {
            const size_t len =
                std::min(static_cast<size_t>(config.train.batch_size), order.size() - start);
            std::vector<RawScene> chunk;
            chunk.reserve(len);
            for (size_t i = 0; i < len; ++i) chunk.push_back(train_scenes[order[start + i]]);
            SceneBatch b = make_batch(chunk, config.model);
            ForwardResult fr = model.forward(b);
            LossReport lr_rep = total_loss(fr, b, config.loss);
            if (lr_rep.n_contributing == 0) continue;
            if (!std::isfinite(lr_rep.total)) {
                std::string ids;
                for (const auto& id : b.scene_ids) ids += (ids.empty() ? "" : ", ") + id;
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                                    " on scenes: " + ids);
            }
            model.params().zero_grad();
            ad::backward(lr_rep.total_var);
            opt.step(model.params(), lr, config.train.weight_decay, config.train.grad_clip);
            rec.train_loss += lr_rep.total;
            rec.reg += lr_rep.reg;
            rec.end += lr_rep.end;
            rec.cls += lr_rep.cls;
            rec.initial += lr_rep.initial_reg;
            ++n_batches;
        }
        if (n_batches > 0) {
            rec.train_loss /= n_batches;
            rec.reg /= n_batches;
            rec.end /= n_batches;
            rec.cls /= n_batches;
            rec.initial /= n_batches;
        }
        if (!val_scenes.empty()) {
            rec.val = evaluate(model, val_scenes, config.metrics, config.train.batch_size);
            rec.has_val = true;
            if (rec.val.brier_minFDE < result.best_val_brier) {
                result.best_val_brier = rec.val.brier_minFDE;
                result.best_epoch = epoch;
                if (!checkpoint_dir.empty())
                    save_checkpoint(checkpoint_dir / "best", model, config, epoch, history, &opt);
            }
        }
        history.push_back(rec.to_json());
        if (log) *log << rec.to_json().dump() << "\n";
        result.history.push_back(std::move(rec));
    }
    if (!checkpoint_dir.empty())
        save_checkpoint(checkpoint_dir / "final", model, config, config.train.epochs - 1, history, &opt);
    return result;
}

// --- ablation harness -----------------------------------------------------------

struct AblationCell {
    std::string name;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// Grids shaped like the component table (five toggle rows) and the loss-weight
// sweeps (six gamma values, six lambda values).
inline std::vector<AblationCell> ablation_preset(const std::string& name) {
    if (name == "table5")
        return {
            {"none", {{"modules.current_fusion", "false"}, {"modules.future_feedback", "false"}, {"modules.global_fusion", "false"}}},
            {"no_current", {{"modules.current_fusion", "false"}}},
            {"no_future", {{"modules.future_feedback", "false"}}},
            {"no_global", {{"modules.global_fusion", "false"}}},
            {"full", {}},
        };
    if (name == "table8") {
        std::vector<AblationCell> cells;
        for (double g : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.1f", g);
            cells.push_back({std::string("gamma=") + buf, {{"loss.gamma", buf}}});
        }
        return cells;
    }
    if (name == "table9") {
        std::vector<AblationCell> cells;
        for (double l : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9}) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.1f", l);
            cells.push_back({std::string("lambda=") + buf, {{"loss.lambda", buf}}});
        }
        return cells;
    }
    throw ConfigError("unknown ablation preset \"" + name + "\" (expected table5|table8|table9)");
}

struct AblationRow {
    std::string name;
    std::vector<MetricReport> per_seed;
    double brier = 0, minADE = 0, minFDE = 0, MR = 0;  // means over seeds
};

struct AblationReport {
    std::string preset;
    std::vector<AblationRow> rows;
    bool direction_checked = false;
    bool direction_ok = true;  // full <= no_future on mean brier-minFDE
    std::string note;

    nlohmann::json to_json() const {
        nlohmann::json j{{"preset", preset},
                         {"direction_checked", direction_checked},
                         {"direction_ok", direction_ok},
                         {"note", note},
                         {"rows", nlohmann::json::array()}};
        for (const auto& r : rows) {
            nlohmann::json seeds = nlohmann::json::array();
            for (const auto& m : r.per_seed) seeds.push_back(m.to_json());
            j["rows"].push_back({{"name", r.name},
                                 {"b_minFDE", r.brier},
                                 {"minADE", r.minADE},
                                 {"minFDE", r.minFDE},
                                 {"MR", r.MR},
                                 {"seeds", seeds}});
        }
        return j;
    }

    std::string to_table() const {
        std::string out;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-14s %10s %10s %10s %10s\n", "config", "b-minFDE", "minADE",
                      "minFDE", "MR");
        out += buf;
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%-14s %10.4f %10.4f %10.4f %10.4f\n", r.name.c_str(),
                          r.brier, r.minADE, r.minFDE, r.MR);
            out += buf;
        }
        if (!note.empty()) out += note + "\n";
        return out;
    }
};

// Trains and evaluates each cell with the same seeds; for the component grid
// the report flags whether the full model beats the no-future-feedback row.
inline AblationReport run_ablation(const Config& base, const std::string& preset,
                                   const std::vector<RawScene>& train_scenes,
                                   const std::vector<RawScene>& eval_scenes,
                                   const std::vector<std::uint64_t>& seeds, std::ostream* progress = nullptr) {
    AblationReport report;
    report.preset = preset;
    for (const auto& cell : ablation_preset(preset)) {
        AblationRow row;
        row.name = cell.name;
        for (std::uint64_t seed : seeds) {
            Config c = base;
            for (const auto& [k, v] : cell.overrides) apply_config_key(c, k, v);
            c.train.seed = seed;
            c.model.init_seed = seed;
            FFINet model(c.model);
            train(model, c, train_scenes, {}, {}, nullptr);
            MetricReport m = evaluate(model, eval_scenes, c.metrics, c.train.batch_size);
            row.brier += m.brier_minFDE;
            row.minADE += m.minADE;
            row.minFDE += m.minFDE;
            row.MR += m.MR;
            row.per_seed.push_back(std::move(m));
            if (progress)
                *progress << "ablate " << cell.name << " seed " << seed << " b-minFDE "
                          << row.per_seed.back().brier_minFDE << "\n";
        }
        const double n = static_cast<double>(seeds.size());
        row.brier /= n;
        row.minADE /= n;
        row.minFDE /= n;
        row.MR /= n;
        report.rows.push_back(std::move(row));
    }
    const AblationRow* full = nullptr;
    const AblationRow* no_fut = nullptr;
    for (const auto& r : report.rows) {
        if (r.name == "full") full = &r;
        if (r.name == "no_future") no_fut = &r;
    }
    if (full && no_fut) {
        report.direction_checked = true;
        report.direction_ok = full->brier <= no_fut->brier;
        report.note = report.direction_ok
                          ? "direction holds: full mean b-minFDE <= no_future mean b-minFDE"
                          : "DIRECTION FAILED: full mean b-minFDE > no_future mean b-minFDE";
    }
    return report;
}

// --- model info -----------------------------------------------------------------

struct ModelInfo {
    std::vector<std::pair<std::string, std::int64_t>> module_params;  // per module prefix
    std::int64_t total_params = 0;
    long long multiply_adds = 0;  // one forward pass on the reference scene
    int ref_agents = 0, ref_lanes = 0;

    std::string to_table() const {
        std::string out;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-16s %12s\n", "module", "params");
        out += buf;
        for (const auto& [name, n] : module_params) {
            std::snprintf(buf, sizeof(buf), "%-16s %12lld\n", name.c_str(), static_cast<long long>(n));
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), "%-16s %12lld\n", "total", static_cast<long long>(total_params));
        out += buf;
        std::snprintf(buf, sizeof(buf), "multiply-adds per reference scene (%d agents, %d lanes): %lld\n",
                      ref_agents, ref_lanes, multiply_adds);
        out += buf;
        return out;
    }
};

inline ModelInfo model_info(const ModelConfig& config) {
    FFINet model(config);
    ModelInfo info;
    const std::vector<std::string> prefixes{"enc.traj", "enc.lane",   "enc.cur_agent", "enc.cur_lane",
                                            "fusion",   "obs",        "init",          "fut",
                                            "glob",     "head"};
    for (const auto& p : prefixes) {
        const std::int64_t n = model.params().parameter_count(p);
        if (n > 0) info.module_params.push_back({p, n});
    }
    info.total_params = model.params().parameter_count();

    ScenarioConfig sc;
    sc.archetype = Archetype::intersection_cross;
    sc.n_agents = 6;
    sc.obs_len = config.obs_len;
    sc.pred_len = config.pred_len;
    sc.seed = 1;
    const RawScene scene = generate_scene(sc, "reference_scene");
    SceneBatch b = make_batch(std::span<const RawScene>(&scene, 1), config);
    info.ref_agents = b.n_agents();
    info.ref_lanes = b.n_lanes();
    ad::mac_count = 0;
    (void)model.forward(b);
    info.multiply_adds = ad::mac_count;
    return info;
}

}  // namespace ffinet
