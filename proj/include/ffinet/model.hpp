#pragma once

#include <array>
#include <string>
#include <vector>

#include "ffinet/batch.hpp"
#include "ffinet/model_config.hpp"
#include "ffinet/nn.hpp"

namespace ffinet {

// One interaction stack: agent-to-lane, lane-to-lane, lane-to-agent,
// agent-to-agent, each stage with its own parameters.
struct InteractionStack {
    RelBlock a2l, l2a, a2a;
    LaneGcnStack l2l;

    InteractionStack() = default;
    InteractionStack(ParamStore& ps, const std::string& name, Eigen::Index dim, int gcn_layers,
                     size_t n_dilations)
        : a2l(ps, name + ".a2l", dim),
          l2a(ps, name + ".l2a", dim),
          a2a(ps, name + ".a2a", dim),
          l2l(ps, name + ".l2l", dim, gcn_layers, n_dilations, true) {}

    // order entries: 0 = a2l, 1 = l2l, 2 = l2a, 3 = a2a
    std::pair<ad::Var, ad::Var> operator()(ad::Var agents, ad::Var lanes, const SceneBatch& b,
                                           const std::array<int, 4>& order = {0, 1, 2, 3}) const {
        for (int stage : order) {
            switch (stage) {
                case 0: lanes = a2l(lanes, agents, b.a2l); break;
                case 1: lanes = l2l(lanes, b.l2l_graph); break;
                case 2: agents = l2a(agents, lanes, b.l2a); break;
                case 3: agents = a2a(agents, agents, b.a2a); break;
                default: throw std::invalid_argument("bad interaction stage id");
            }
        }
        return {agents, lanes};
    }
};

struct ForwardHooks {
    // Replaces the feedback branch output with zeros before the residual add,
    // so f = o + 0 can be checked bitwise against o.
    bool zero_feedback_branch = false;
    // Stage order of the observation stack (tests shuffle it to show the
    // wiring matters; the canonical order is a2l, l2l, l2a, a2a).
    std::array<int, 4> obs_stage_order{0, 1, 2, 3};
};

struct ForwardResult {
    ad::Var traj_feats;            // e^v, A x D
    ad::Var enc_agents, enc_lanes; // inputs to the observation stack
    ad::Var obs_agents, obs_lanes; // o
    ad::Var initial;               // A x (pred_len*2), agent-frame positions
    ad::Var fused_agents;          // f = o + feedback branch
    ad::Var global_agents;         // g
    std::vector<ad::Var> modes;    // K entries, A x (pred_len*2)
    ad::Var scores;                // A x K, pre-softmax
};

class FFINet {
  public:
    explicit FFINet(const ModelConfig& config) : config_(config), params_(config.init_seed) {
        const Eigen::Index D = config.hidden;
        const size_t nd = config.dilations.size();
        traj_enc_ = TrajectoryEncoder(params_, "enc.traj", 3, D, config.obs_len - 1);
        lane_pt_embed_ = Linear(params_, "enc.lane.embed", 7, D);
        lane_gcn_ = LaneGcnStack(params_, "enc.lane.gcn", D, config.lane_gcn_layers, nd, false);
        if (config.current_fusion) {
            cur_agent_enc_ = Mlp1(params_, "enc.cur_agent", 2, D, D);
            cur_lane_enc_ = Mlp1(params_, "enc.cur_lane", 2, D, D);
            fus_agent_pair_ = Mlp1(params_, "fusion.agent.pair", 2 * D, D, D);
            fus_agent_inner_ = Mlp1(params_, "fusion.agent.inner", D, D, D);
            fus_agent_outer_ = Mlp1(params_, "fusion.agent.outer", 2 * D, D, D);
            fus_lane_pair_ = Mlp1(params_, "fusion.lane.pair", 2 * D, D, D);
            fus_lane_inner_ = Mlp1(params_, "fusion.lane.inner", D, D, D);
            fus_lane_outer_ = Mlp1(params_, "fusion.lane.outer", 2 * D, D, D);
            null_lane_partner_ = params_.zeros("fusion.agent.null", 1, D);
            null_agent_partner_ = params_.zeros("fusion.lane.null", 1, D);
        }
        obs_ = InteractionStack(params_, "obs", D, config.lane_gcn_layers, nd);
        init_block_ = Mlp1(params_, "init.block", D, D, D);
        init_out_ = Linear(params_, "init.out", D, config.pred_len * 2, /*zero_init=*/true);
        if (config.future_feedback) {
            future_enc_ = TrajectoryEncoder(params_, "fut.future_enc", 3, D, config.pred_len);
            if (config.feedback_back) fb_back_ = RelBlock(params_, "fut.I1", D);
            if (config.feedback_future) fb_future_ = RelBlock(params_, "fut.I2", D);
            if (config.feedback_forward) fb_forward_ = RelBlock(params_, "fut.I3", D);
        }
        if (config.global_fusion)
            glob_ = InteractionStack(params_, "glob", D, config.lane_gcn_layers, nd);
        for (int k = 0; k < config.K; ++k)
            reg_heads_.emplace_back(params_, "head.reg" + std::to_string(k), D, D, config.pred_len * 2);
        endpoint_embed_ = Mlp2(params_, "head.endpoint", 2, D, D);
        score_head_ = Mlp3(params_, "head.score", 2 * D, D, 1);
    }

    const ModelConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    ForwardResult forward(const SceneBatch& b, const ForwardHooks& hooks = {}) const {
        const Eigen::Index A = b.n_agents();
        const Eigen::Index D = config_.hidden;
        ForwardResult r;

        r.traj_feats = traj_enc_(ad::constant(b.agent_inputs));
        ad::Var lane_pts = lane_gcn_(lane_pt_embed_(ad::constant(b.lane_point_inputs)), b.lane_encoder_graph);
        ad::Var lane_feats = ad::scatter_sum_rows(ad::scale_rows(lane_pts, b.lane_pt_pool_weight),
                                                  b.lane_pt_group, b.n_lanes());

        if (config_.current_fusion) {
            ad::Var z_agent = cur_agent_enc_(ad::constant(b.agent_current));
            ad::Var z_lane = cur_lane_enc_(ad::constant(b.lane_current));
            auto fuse = [D](const ad::Var& own, const ad::Var& other,
                            const std::vector<Eigen::Index>& partner, const ad::Var& null_vec,
                            const Mlp1& pair, const Mlp1& inner, const Mlp1& outer) {
                const Eigen::Index n = own->value.rows();
                ad::Matrix missing = ad::Matrix::Zero(n, 1);
                for (Eigen::Index i = 0; i < n; ++i)
                    if (partner[static_cast<size_t>(i)] < 0) missing(i, 0) = 1.0;
                ad::Var nearest = ad::add(ad::gather_rows(other, partner),
                                          ad::matmul(ad::constant(missing), null_vec));
                ad::Var p1 = pair(ad::concat_cols({own, nearest}));
                return outer(ad::concat_cols({p1, inner(p1)}));
            };
            ad::Var ep_agent = fuse(z_agent, z_lane, b.agent_partner_lane, null_lane_partner_,
                                    fus_agent_pair_, fus_agent_inner_, fus_agent_outer_);
            ad::Var ep_lane = fuse(z_lane, z_agent, b.lane_partner_agent, null_agent_partner_,
                                   fus_lane_pair_, fus_lane_inner_, fus_lane_outer_);
            r.enc_agents = ad::add(r.traj_feats, ep_agent);
            r.enc_lanes = ad::add(lane_feats, ep_lane);
        } else {
            r.enc_agents = r.traj_feats;
            r.enc_lanes = lane_feats;
        }

        std::tie(r.obs_agents, r.obs_lanes) = obs_(r.enc_agents, r.enc_lanes, b, hooks.obs_stage_order);

        r.initial = init_out_(init_block_(r.traj_feats));

        if (config_.future_feedback) {
            // vectorize the initial prediction (origin prepended), encode it
            // with a dedicated temporal encoder, then run the feedback chain
            ad::Var shifted = ad::concat_cols(
                {ad::constant(ad::Matrix::Zero(A, 2)),
                 ad::slice_cols(r.initial, 0, (config_.pred_len - 1) * 2)});
            ad::Var disp = ad::split_rows(ad::sub(r.initial, shifted), config_.pred_len);
            ad::Var e_f = future_enc_(
                ad::concat_cols({disp, ad::constant(ad::Matrix::Ones(A * config_.pred_len, 1))}));

            ad::Var h = r.obs_agents;
            bool any_stage = false;
            if (config_.feedback_back) {
                h = fb_back_(h, e_f, b.a2a);
                any_stage = true;
            }
            if (config_.feedback_future) {
                h = fb_future_(h, h, b.a2a);
                any_stage = true;
            }
            if (config_.feedback_forward) {
                h = fb_forward_(h, r.obs_agents, b.a2a);
                any_stage = true;
            }
            if (hooks.zero_feedback_branch)
                r.fused_agents = ad::add(r.obs_agents, ad::constant(ad::Matrix::Zero(A, D)));
            else if (any_stage)
                r.fused_agents = ad::add(r.obs_agents, h);
            else
                r.fused_agents = r.obs_agents;  // all stages off = module bypassed
        } else {
            r.fused_agents = r.obs_agents;
        }

        r.global_agents = config_.global_fusion
                              ? glob_(r.fused_agents, r.obs_lanes, b).first
                              : r.fused_agents;

        std::vector<ad::Var> score_cols;
        for (int k = 0; k < config_.K; ++k) {
            r.modes.push_back(reg_heads_[static_cast<size_t>(k)](r.global_agents));
            ad::Var endpoint = ad::slice_cols(r.modes.back(), (config_.pred_len - 1) * 2, 2);
            score_cols.push_back(
                score_head_(ad::concat_cols({endpoint_embed_(endpoint), r.global_agents})));
        }
        r.scores = ad::concat_cols(score_cols);
        return r;
    }

  private:
    ModelConfig config_;
    ParamStore params_;
    TrajectoryEncoder traj_enc_;
    Linear lane_pt_embed_;
    LaneGcnStack lane_gcn_;
    Mlp1 cur_agent_enc_, cur_lane_enc_;
    Mlp1 fus_agent_pair_, fus_agent_inner_, fus_agent_outer_;
    Mlp1 fus_lane_pair_, fus_lane_inner_, fus_lane_outer_;
    ad::Var null_lane_partner_, null_agent_partner_;
    InteractionStack obs_;
    Mlp1 init_block_;
    Linear init_out_;
    TrajectoryEncoder future_enc_;
    RelBlock fb_back_, fb_future_, fb_forward_;
    InteractionStack glob_;
    std::vector<Mlp3> reg_heads_;
    Mlp2 endpoint_embed_;
    Mlp3 score_head_;
};

// --- prediction extraction -----------------------------------------------------

struct AgentPrediction {
    std::string agent_id;
    bool scored = false;
    bool is_focal = false;
    std::vector<std::vector<Vec2>> modes;  // K x pred_len, world coordinates
    std::vector<Vec2> initial;             // pred_len, world coordinates
    std::vector<double> probabilities;     // K, softmax of scores
};

struct ScenePredictions {
    std::string scene_id;
    std::vector<AgentPrediction> agents;
};

inline std::vector<ScenePredictions> extract_predictions(const ForwardResult& r, const SceneBatch& b) {
    const int K = static_cast<int>(r.modes.size());
    std::vector<ScenePredictions> out(static_cast<size_t>(b.n_scenes()));
    for (int s = 0; s < b.n_scenes(); ++s) out[static_cast<size_t>(s)].scene_id = b.scene_ids[static_cast<size_t>(s)];
    for (int a = 0; a < b.n_agents(); ++a) {
        const BatchAgent& ba = b.agents[static_cast<size_t>(a)];
        AgentPrediction p;
        p.agent_id = ba.agent_id;
        p.scored = ba.scored;
        p.is_focal = ba.is_focal;
        auto to_world = [&](const ad::Matrix& row_src, int row) {
            std::vector<Vec2> traj(static_cast<size_t>(b.pred_len));
            for (int t = 0; t < b.pred_len; ++t)
                traj[static_cast<size_t>(t)] =
                    ba.frame.to_world({row_src(row, 2 * t), row_src(row, 2 * t + 1)});
            return traj;
        };
        for (int k = 0; k < K; ++k)
            p.modes.push_back(to_world(r.modes[static_cast<size_t>(k)]->value, a));
        p.initial = to_world(r.initial->value, a);
        double max_s = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) max_s = std::max(max_s, r.scores->value(a, k));
        double z = 0.0;
        p.probabilities.resize(static_cast<size_t>(K));
        for (int k = 0; k < K; ++k) {
            p.probabilities[static_cast<size_t>(k)] = std::exp(r.scores->value(a, k) - max_s);
            z += p.probabilities[static_cast<size_t>(k)];
        }
        for (double& v : p.probabilities) v /= z;
        out[static_cast<size_t>(ba.scene)].agents.push_back(std::move(p));
    }
    return out;
}

}  // namespace ffinet
