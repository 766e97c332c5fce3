#pragma once

#include <iostream>
#include <vector>

#include "ffinet/model.hpp"

namespace ffinet {

struct LossWeights {
    double lambda = 0.5;       // endpoint term
    double beta = 2.0;         // classification term
    double gamma = 0.5;        // initial-trajectory term
    double margin = 0.2;       // max-margin offset
    double cls_distance_gate = 2.0;  // competitors closer than this to the best endpoint are skipped
    double huber_delta = 1.0;  // smooth-l1 transition point, meters
};

struct LossReport {
    double total = 0, reg = 0, end = 0, cls = 0, initial_reg = 0;
    int n_contributing = 0;
    std::vector<int> best_k;  // per agent; -1 where the agent is excluded
    // graph roots; reg/end share subgraphs with total, all empty when no agent contributes
    ad::Var total_var, reg_var, end_var, cls_var, initial_var, reg_end_var;
};

// Winner-takes-all selection: per agent, the mode whose endpoint at the last
// valid future step is closest to ground truth; ties go to the smaller index.
inline std::vector<int> wta_select(const std::vector<ad::Var>& modes, const SceneBatch& b) {
    const int K = static_cast<int>(modes.size());
    std::vector<int> best(static_cast<size_t>(b.n_agents()), -1);
    for (int a = 0; a < b.n_agents(); ++a) {
        const int t = b.agents[static_cast<size_t>(a)].last_valid_future;
        if (t < 0) continue;
        const Vec2 gt{b.gt_local(a, 2 * t), b.gt_local(a, 2 * t + 1)};
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
            const auto& m = modes[static_cast<size_t>(k)]->value;
            const double d = (Vec2{m(a, 2 * t), m(a, 2 * t + 1)} - gt).norm();
            if (d < best_d) {
                best_d = d;
                best[static_cast<size_t>(a)] = k;
            }
        }
    }
    return best;
}

// Four-term loss. Per agent, the regression terms are coordinate-wise
// smooth-l1 summed over x/y and averaged over valid future steps; the
// endpoint term takes only the last valid step; the classification term is
// max-margin over competitors whose endpoints lie at least the distance gate
// away from the best endpoint. Every term is a mean over contributing agents
// (agents with at least ceil(0.8 * horizon) valid timestamps and a valid
// future step). Mode selection happens outside the graph, so the non-best
// regression heads receive exactly zero gradient from reg and end.
inline LossReport total_loss(const ForwardResult& r, const SceneBatch& b, const LossWeights& w = {}) {
    const Eigen::Index A = b.n_agents();
    const int K = static_cast<int>(r.modes.size());
    const Eigen::Index C = static_cast<Eigen::Index>(b.pred_len) * 2;

    LossReport rep;
    rep.best_k = wta_select(r.modes, b);
    for (const auto& a : b.agents) rep.n_contributing += a.loss_contributes ? 1 : 0;
    if (rep.n_contributing == 0) {
        std::cerr << "warning: batch has no loss-contributing agents; skipping\n";
        return rep;
    }
    const double inv_n = 1.0 / rep.n_contributing;

    // per-agent weights: 1/(valid steps * n_contributing), 0 for excluded agents
    Eigen::VectorXd step_w = Eigen::VectorXd::Zero(A);
    Eigen::VectorXd agent_w = Eigen::VectorXd::Zero(A);
    ad::Matrix end_mask = ad::Matrix::Zero(A, C);
    for (Eigen::Index a = 0; a < A; ++a) {
        const auto& ba = b.agents[static_cast<size_t>(a)];
        if (!ba.loss_contributes) continue;
        const double n_steps = b.gt_coord_mask.row(a).sum() / 2.0;
        step_w[a] = inv_n / n_steps;
        agent_w[a] = inv_n;
        end_mask(a, 2 * ba.last_valid_future) = 1.0;
        end_mask(a, 2 * ba.last_valid_future + 1) = 1.0;
    }

    // select the best mode per agent with one-hot row masks
    ad::Var selected;
    for (int k = 0; k < K; ++k) {
        ad::Matrix pick = ad::Matrix::Zero(A, C);
        for (Eigen::Index a = 0; a < A; ++a)
            if (rep.best_k[static_cast<size_t>(a)] == k) pick.row(a).setOnes();
        ad::Var part = ad::mul_const(r.modes[static_cast<size_t>(k)], std::move(pick));
        selected = k == 0 ? part : ad::add(selected, part);
    }

    ad::Var gt = ad::constant(b.gt_local);
    ad::Var diff = ad::mul_const(ad::sub(selected, gt), b.gt_coord_mask);
    ad::Var huber = ad::smooth_l1(diff, w.huber_delta);
    rep.reg_var = ad::sum_all(ad::scale_rows(huber, step_w));
    rep.end_var = ad::sum_all(ad::scale_rows(ad::mul_const(huber, end_mask), agent_w));

    ad::Var init_diff = ad::mul_const(ad::sub(r.initial, gt), b.gt_coord_mask);
    rep.initial_var = ad::sum_all(ad::scale_rows(ad::smooth_l1(init_diff, w.huber_delta), step_w));

    // max-margin over distance-gated competitors; gate and normalization are
    // data-dependent constants
    ad::Matrix best_pick = ad::Matrix::Zero(A, K);
    ad::Matrix gate = ad::Matrix::Zero(A, K);
    for (Eigen::Index a = 0; a < A; ++a) {
        const auto& ba = b.agents[static_cast<size_t>(a)];
        const int bk = rep.best_k[static_cast<size_t>(a)];
        if (!ba.loss_contributes || bk < 0) continue;
        best_pick(a, bk) = 1.0;
        const int t = ba.last_valid_future;
        const auto& bm = r.modes[static_cast<size_t>(bk)]->value;
        const Vec2 best_end{bm(a, 2 * t), bm(a, 2 * t + 1)};
        int n_gated = 0;
        for (int k = 0; k < K; ++k) {
            if (k == bk) continue;
            const auto& m = r.modes[static_cast<size_t>(k)]->value;
            if ((Vec2{m(a, 2 * t), m(a, 2 * t + 1)} - best_end).norm() >= w.cls_distance_gate) {
                gate(a, k) = 1.0;
                ++n_gated;
            }
        }
        if (n_gated > 0) gate.row(a) *= inv_n / n_gated;
    }
    ad::Var s_best = ad::matmul(ad::mul_const(r.scores, best_pick),
                                ad::constant(ad::Matrix::Ones(K, 1)));
    ad::Var s_best_bcast = ad::matmul(s_best, ad::constant(ad::Matrix::Ones(1, K)));
    ad::Var hinge = ad::relu(ad::add(ad::sub(r.scores, s_best_bcast),
                                     ad::constant(ad::Matrix::Constant(A, K, w.margin))));
    rep.cls_var = ad::sum_all(ad::mul_const(hinge, gate));

    rep.reg_end_var = ad::add(rep.reg_var, ad::scale(rep.end_var, w.lambda));
    rep.total_var = ad::add(ad::add(rep.reg_end_var, ad::scale(rep.cls_var, w.beta)),
                            ad::scale(rep.initial_var, w.gamma));

    rep.reg = rep.reg_var->value(0, 0);
    rep.end = rep.end_var->value(0, 0);
    rep.cls = rep.cls_var->value(0, 0);
    rep.initial_reg = rep.initial_var->value(0, 0);
    rep.total = rep.total_var->value(0, 0);
    return rep;
}

}  // namespace ffinet
