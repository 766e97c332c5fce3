#pragma once

#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "ffinet/model_config.hpp"
#include "ffinet/nn.hpp"
#include "ffinet/scene.hpp"

namespace ffinet {

struct BatchAgent {
    int scene = 0;
    std::string agent_id;
    AgentFrame frame;
    bool scored = false;
    bool is_focal = false;
    bool loss_contributes = false;
    int last_valid_future = -1;  // index into the future window, -1 if none
};

// Several decomposed scenes packed into one forward pass: node arrays are
// concatenated and edge indices offset, with no cross-scene edges.
struct SceneBatch {
    std::vector<std::string> scene_ids;
    int obs_len = 20, pred_len = 30;
    std::vector<int> agent_offset;  // size n_scenes + 1
    std::vector<int> lane_offset;

    std::vector<BatchAgent> agents;
    ad::Matrix agent_inputs;   // (A * (obs_len-1)) x 3: normalized displacement + mask channel
    ad::Matrix agent_current;  // A x 2, frame-mode coordinates
    ad::Matrix gt_local;       // A x (pred_len*2), agent-frame future positions, 0 where invalid
    ad::Matrix gt_coord_mask;  // A x (pred_len*2)

    std::vector<AgentFrame> lane_frames;
    ad::Matrix lane_point_inputs;  // P x 7: normalized vector + turn one-hot + flags
    std::vector<Eigen::Index> lane_pt_group;
    Eigen::VectorXd lane_pt_pool_weight;  // 1 / points-in-segment, per point row
    ad::Matrix lane_current;              // S x 2

    std::vector<Eigen::Index> agent_partner_lane;  // nearest-lane index, -1 if none
    std::vector<Eigen::Index> lane_partner_agent;

    EdgeTensors a2l, l2a, a2a;
    LaneGraph lane_encoder_graph;  // point-level rows, no geometry
    LaneGraph l2l_graph;           // segment-level rows, with geometry

    int n_agents() const { return static_cast<int>(agents.size()); }
    int n_lanes() const { return static_cast<int>(lane_frames.size()); }
    int n_scenes() const { return static_cast<int>(scene_ids.size()); }
};

namespace batch_detail {

inline void append_edge(EdgeTensors& e, Eigen::Index recv, Eigen::Index send, const RelativeGeometry& rel,
                        std::vector<double>& dp_buf, std::vector<double>& ang_buf) {
    e.recv.push_back(recv);
    e.send.push_back(send);
    dp_buf.push_back(rel.delta_p.x);
    dp_buf.push_back(rel.delta_p.y);
    ang_buf.push_back(std::cos(rel.delta_theta));
    ang_buf.push_back(std::sin(rel.delta_theta));
}

inline ad::Matrix rows2(const std::vector<double>& buf) {
    ad::Matrix m(static_cast<Eigen::Index>(buf.size() / 2), 2);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        m(r, 0) = buf[2 * r];
        m(r, 1) = buf[2 * r + 1];
    }
    return m;
}

struct EdgeBuffers {
    std::vector<double> dp, ang;
};

// d-hop successor pairs at segment level (local scene indices).
inline std::vector<std::pair<int, int>> dilated_successors(const std::vector<std::vector<int>>& succ, int hops) {
    std::vector<std::pair<int, int>> pairs;
    const int n = static_cast<int>(succ.size());
    for (int s = 0; s < n; ++s) {
        std::vector<int> frontier{s};
        for (int h = 0; h < hops; ++h) {
            std::vector<int> next;
            for (int f : frontier)
                for (int t : succ[f]) next.push_back(t);
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
            frontier = std::move(next);
        }
        for (int t : frontier) pairs.push_back({s, t});
    }
    return pairs;
}

}  // namespace batch_detail

// Builds model inputs for a group of scenes. All coordinates entering the
// network are frame-normalized; in anchor mode the current positions are
// expressed in the focal agent's frame, in absolute mode they are raw.
inline SceneBatch make_batch(std::span<const RawScene> scenes, const ModelConfig& config) {
    SceneBatch b;
    if (scenes.empty()) return b;
    b.obs_len = config.obs_len;
    b.pred_len = config.pred_len;
    const int t_vec = b.obs_len - 1;
    const int horizon = b.obs_len + b.pred_len;
    const int loss_min_valid = static_cast<int>(std::ceil(0.8 * horizon));

    b.agent_offset.push_back(0);
    b.lane_offset.push_back(0);

    std::vector<double> agent_in_buf, cur_buf, gt_buf, gtmask_buf;
    std::vector<double> lane_pt_buf, lane_cur_buf;
    batch_detail::EdgeBuffers a2l_buf, l2a_buf, a2a_buf, l2l_buf;
    std::vector<std::vector<std::pair<Eigen::Index, Eigen::Index>>> enc_succ_pts(config.dilations.size());
    std::vector<std::pair<Eigen::Index, Eigen::Index>> enc_pred_pts, enc_left_pts, enc_right_pts;
    std::vector<std::vector<Eigen::Index>> l2l_succ_recv(config.dilations.size()),
        l2l_succ_send(config.dilations.size());
    std::vector<batch_detail::EdgeBuffers> l2l_succ_buf(config.dilations.size());
    LaneRelation l2l_pred, l2l_left, l2l_right;
    batch_detail::EdgeBuffers l2l_pred_buf, l2l_left_buf, l2l_right_buf;

    Eigen::Index pt_row = 0;
    std::vector<Eigen::Index> lane_pt_offset;  // per global lane index

    for (const auto& scene : scenes) {
        if (scene.obs_len != b.obs_len || scene.pred_len != b.pred_len)
            throw ContractViolation("scene " + scene.scene_id + " horizon does not match the model config");
        b.scene_ids.push_back(scene.scene_id);
        const DecomposedScene dec = decompose(scene);
        const InteractionGraphs graphs = build_interaction_graphs(dec, config.thresholds);
        const int agent_base = b.agent_offset.back();
        const int lane_base = b.lane_offset.back();

        AgentFrame anchor_frame;  // focal agent frame for this scene
        for (const auto& a : dec.agents)
            if (a.agent_id == scene.focal_agent_id) anchor_frame = a.frame;
        const bool anchored = config.current_frame == FrameMode::anchor;

        for (size_t ai = 0; ai < dec.agents.size(); ++ai) {
            const auto& a = dec.agents[ai];
            BatchAgent ba;
            ba.scene = b.n_scenes() - 1;
            ba.agent_id = a.agent_id;
            ba.frame = a.frame;
            ba.scored = a.scored;
            ba.is_focal = a.agent_id == scene.focal_agent_id;
            int n_valid = 0;
            for (int v : a.valid) n_valid += v;
            for (int t = 0; t < b.pred_len; ++t)
                if (a.valid[b.obs_len + t]) ba.last_valid_future = t;
            ba.loss_contributes = n_valid >= loss_min_valid && ba.last_valid_future >= 0;
            b.agents.push_back(ba);

            // observed displacement channels, rotated into the agent's frame
            for (int t = 0; t < t_vec; ++t) {
                const bool on = a.vector_mask[t] != 0;
                const Vec2 z = on ? rotate_into(a.vectors[t], a.frame.heading) : Vec2{};
                agent_in_buf.push_back(z.x);
                agent_in_buf.push_back(z.y);
                agent_in_buf.push_back(on ? 1.0 : 0.0);
            }
            const Vec2 cur = anchored ? anchor_frame.to_local(a.current) : a.current;
            cur_buf.push_back(cur.x);
            cur_buf.push_back(cur.y);
            const auto& track = scene.agents[ai];
            for (int t = 0; t < b.pred_len; ++t) {
                const bool on = track.valid[b.obs_len + t] != 0;
                const Vec2 local = on ? a.frame.to_local(track.positions[b.obs_len + t]) : Vec2{};
                gt_buf.push_back(local.x);
                gt_buf.push_back(local.y);
                gtmask_buf.push_back(on ? 1.0 : 0.0);
                gtmask_buf.push_back(on ? 1.0 : 0.0);
            }
        }

        std::vector<std::vector<int>> succ_local(dec.lanes.size());
        for (size_t li = 0; li < dec.lanes.size(); ++li) {
            const auto& l = dec.lanes[li];
            b.lane_frames.push_back(l.frame);
            lane_pt_offset.push_back(pt_row);
            const int n_vec = static_cast<int>(l.vectors.size());
            for (int k = 0; k < n_vec; ++k) {
                const Vec2 z = rotate_into(l.vectors[k], l.frame.heading);
                lane_pt_buf.push_back(z.x);
                lane_pt_buf.push_back(z.y);
                lane_pt_buf.push_back(l.attributes.turn == TurnDirection::none ? 1.0 : 0.0);
                lane_pt_buf.push_back(l.attributes.turn == TurnDirection::left ? 1.0 : 0.0);
                lane_pt_buf.push_back(l.attributes.turn == TurnDirection::right ? 1.0 : 0.0);
                lane_pt_buf.push_back(l.attributes.in_intersection ? 1.0 : 0.0);
                lane_pt_buf.push_back(l.attributes.traffic_control ? 1.0 : 0.0);
                b.lane_pt_group.push_back(lane_base + static_cast<Eigen::Index>(li));
            }
            pt_row += n_vec;
            const Vec2 cur = anchored ? anchor_frame.to_local(l.frame.origin) : l.frame.origin;
            lane_cur_buf.push_back(cur.x);
            lane_cur_buf.push_back(cur.y);
        }

        for (const auto& e : graphs.edges_a2l)
            batch_detail::append_edge(b.a2l, lane_base + e.receiver, agent_base + e.sender, e.rel,
                                      a2l_buf.dp, a2l_buf.ang);
        for (const auto& e : graphs.edges_l2a)
            batch_detail::append_edge(b.l2a, agent_base + e.receiver, lane_base + e.sender, e.rel,
                                      l2a_buf.dp, l2a_buf.ang);
        for (const auto& e : graphs.edges_a2a)
            batch_detail::append_edge(b.a2a, agent_base + e.receiver, agent_base + e.sender, e.rel,
                                      a2a_buf.dp, a2a_buf.ang);

        for (const auto& e : graphs.edges_l2l) {
            if (e.type == LaneEdgeType::successor) succ_local[e.receiver].push_back(e.sender);
        }
        auto point_pairs = [&](int recv_lane, int send_lane,
                               std::vector<std::pair<Eigen::Index, Eigen::Index>>& out) {
            const int n = std::min(dec.lanes[recv_lane].vectors.size(), dec.lanes[send_lane].vectors.size());
            const Eigen::Index ro = lane_pt_offset[lane_base + recv_lane];
            const Eigen::Index so = lane_pt_offset[lane_base + send_lane];
            for (int k = 0; k < n; ++k) out.push_back({ro + k, so + k});
        };
        // dilated successor relations, at both point and segment granularity
        for (size_t d = 0; d < config.dilations.size(); ++d) {
            for (const auto& [recv, send] : batch_detail::dilated_successors(succ_local, config.dilations[d])) {
                point_pairs(recv, send, enc_succ_pts[d]);
                l2l_succ_recv[d].push_back(lane_base + recv);
                l2l_succ_send[d].push_back(lane_base + send);
                const RelativeGeometry rel =
                    relative_geometry(dec.lanes[recv].frame, dec.lanes[send].frame);
                l2l_succ_buf[d].dp.push_back(rel.delta_p.x);
                l2l_succ_buf[d].dp.push_back(rel.delta_p.y);
                l2l_succ_buf[d].ang.push_back(std::cos(rel.delta_theta));
                l2l_succ_buf[d].ang.push_back(std::sin(rel.delta_theta));
            }
        }
        for (const auto& e : graphs.edges_l2l) {
            if (e.type == LaneEdgeType::successor) continue;
            LaneRelation* rel = e.type == LaneEdgeType::predecessor ? &l2l_pred
                                : e.type == LaneEdgeType::left      ? &l2l_left
                                                                    : &l2l_right;
            batch_detail::EdgeBuffers* buf = e.type == LaneEdgeType::predecessor ? &l2l_pred_buf
                                             : e.type == LaneEdgeType::left      ? &l2l_left_buf
                                                                                 : &l2l_right_buf;
            rel->recv.push_back(lane_base + e.receiver);
            rel->send.push_back(lane_base + e.sender);
            buf->dp.push_back(e.rel.delta_p.x);
            buf->dp.push_back(e.rel.delta_p.y);
            buf->ang.push_back(std::cos(e.rel.delta_theta));
            buf->ang.push_back(std::sin(e.rel.delta_theta));
            auto* pts = e.type == LaneEdgeType::predecessor ? &enc_pred_pts
                        : e.type == LaneEdgeType::left      ? &enc_left_pts
                                                            : &enc_right_pts;
            point_pairs(e.receiver, e.sender, *pts);
        }

        // nearest agent-lane partners for current fusion (ties to smaller id)
        for (size_t ai = 0; ai < dec.agents.size(); ++ai) {
            Eigen::Index best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            for (size_t li = 0; li < dec.lanes.size(); ++li) {
                const double d = (dec.agents[ai].current - dec.lanes[li].frame.origin).norm();
                if (d < best_d ||
                    (d == best_d && best >= 0 &&
                     dec.lanes[li].lane_id < dec.lanes[best - lane_base].lane_id)) {
                    best_d = d;
                    best = lane_base + static_cast<Eigen::Index>(li);
                }
            }
            b.agent_partner_lane.push_back(best);
        }
        for (size_t li = 0; li < dec.lanes.size(); ++li) {
            Eigen::Index best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            for (size_t ai = 0; ai < dec.agents.size(); ++ai) {
                const double d = (dec.agents[ai].current - dec.lanes[li].frame.origin).norm();
                if (d < best_d ||
                    (d == best_d && best >= 0 &&
                     dec.agents[ai].agent_id < dec.agents[best - agent_base].agent_id)) {
                    best_d = d;
                    best = agent_base + static_cast<Eigen::Index>(ai);
                }
            }
            b.lane_partner_agent.push_back(best);
        }

        b.agent_offset.push_back(agent_base + static_cast<int>(dec.agents.size()));
        b.lane_offset.push_back(lane_base + static_cast<int>(dec.lanes.size()));
    }

    const int n_agents = b.n_agents();
    b.agent_inputs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        agent_in_buf.data(), n_agents * t_vec, 3);
    b.agent_current = batch_detail::rows2(cur_buf);
    b.gt_local = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        gt_buf.data(), n_agents, b.pred_len * 2);
    b.gt_coord_mask = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        gtmask_buf.data(), n_agents, b.pred_len * 2);
    b.lane_point_inputs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        lane_pt_buf.data(), pt_row, 7);
    b.lane_current = batch_detail::rows2(lane_cur_buf);
    b.lane_pt_pool_weight.resize(pt_row);
    {
        std::vector<int> counts(b.n_lanes(), 0);
        for (Eigen::Index r = 0; r < pt_row; ++r) counts[b.lane_pt_group[r]]++;
        for (Eigen::Index r = 0; r < pt_row; ++r)
            b.lane_pt_pool_weight[r] = 1.0 / static_cast<double>(counts[b.lane_pt_group[r]]);
    }
    b.a2l.delta_p = batch_detail::rows2(a2l_buf.dp);
    b.a2l.angle = batch_detail::rows2(a2l_buf.ang);
    b.l2a.delta_p = batch_detail::rows2(l2a_buf.dp);
    b.l2a.angle = batch_detail::rows2(l2a_buf.ang);
    b.a2a.delta_p = batch_detail::rows2(a2a_buf.dp);
    b.a2a.angle = batch_detail::rows2(a2a_buf.ang);

    b.lane_encoder_graph.n_rows = pt_row;
    b.lane_encoder_graph.successor_dilated.resize(config.dilations.size());
    auto fill_pts = [](const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs, LaneRelation& rel) {
        for (const auto& [r, s] : pairs) {
            rel.recv.push_back(r);
            rel.send.push_back(s);
        }
    };
    for (size_t d = 0; d < config.dilations.size(); ++d)
        fill_pts(enc_succ_pts[d], b.lane_encoder_graph.successor_dilated[d]);
    fill_pts(enc_pred_pts, b.lane_encoder_graph.predecessor);
    fill_pts(enc_left_pts, b.lane_encoder_graph.left);
    fill_pts(enc_right_pts, b.lane_encoder_graph.right);

    b.l2l_graph.n_rows = b.n_lanes();
    b.l2l_graph.successor_dilated.resize(config.dilations.size());
    for (size_t d = 0; d < config.dilations.size(); ++d) {
        auto& rel = b.l2l_graph.successor_dilated[d];
        rel.recv = std::move(l2l_succ_recv[d]);
        rel.send = std::move(l2l_succ_send[d]);
        rel.delta_p = batch_detail::rows2(l2l_succ_buf[d].dp);
        rel.angle = batch_detail::rows2(l2l_succ_buf[d].ang);
    }
    auto fill_seg = [](LaneRelation& rel, const batch_detail::EdgeBuffers& buf) {
        rel.delta_p = batch_detail::rows2(buf.dp);
        rel.angle = batch_detail::rows2(buf.ang);
    };
    b.l2l_graph.predecessor = std::move(l2l_pred);
    fill_seg(b.l2l_graph.predecessor, l2l_pred_buf);
    b.l2l_graph.left = std::move(l2l_left);
    fill_seg(b.l2l_graph.left, l2l_left_buf);
    b.l2l_graph.right = std::move(l2l_right);
    fill_seg(b.l2l_graph.right, l2l_right_buf);
    return b;
}

// Greedy packing by agent count; an oversized scene gets its own batch.
inline std::vector<std::vector<RawScene>> group_scenes(const std::vector<RawScene>& scenes,
                                                       int max_agents_per_batch) {
    std::vector<std::vector<RawScene>> groups;
    std::vector<RawScene> current;
    int agents = 0;
    for (const auto& s : scenes) {
        const int n = static_cast<int>(s.agents.size());
        if (n > max_agents_per_batch && current.empty())
            std::cerr << "warning: scene " << s.scene_id << " alone exceeds max_agents_per_batch\n";
        if (!current.empty() && agents + n > max_agents_per_batch) {
            groups.push_back(std::move(current));
            current.clear();
            agents = 0;
        }
        current.push_back(s);
        agents += n;
    }
    if (!current.empty()) groups.push_back(std::move(current));
    return groups;
}

inline std::vector<SceneBatch> batch_scenes(const std::vector<RawScene>& scenes, int max_agents_per_batch,
                                            const ModelConfig& config) {
    std::vector<SceneBatch> out;
    for (const auto& g : group_scenes(scenes, max_agents_per_batch))
        out.push_back(make_batch(std::span<const RawScene>(g.data(), g.size()), config));
    return out;
}

}  // namespace ffinet
