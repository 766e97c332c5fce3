#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ffinet/autodiff.hpp"

namespace ffinet {

// Named parameter registry. Creation order is fixed by model construction,
// which makes seeded initialization and checkpoints deterministic.
class ParamStore {
  public:
    explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

    ad::Var weight(const std::string& name, Eigen::Index in, Eigen::Index out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        ad::Matrix m(in, out);
        for (Eigen::Index i = 0; i < in; ++i)
            for (Eigen::Index j = 0; j < out; ++j) m(i, j) = dist(rng_);
        return insert(name, std::move(m));
    }

    ad::Var zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        return insert(name, ad::Matrix::Zero(rows, cols));
    }

    ad::Var ones(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        return insert(name, ad::Matrix::Ones(rows, cols));
    }

    const std::vector<std::pair<std::string, ad::Var>>& entries() const { return entries_; }

    ad::Var find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : it->second;
    }

    std::int64_t parameter_count(const std::string& prefix = "") const {
        std::int64_t n = 0;
        for (const auto& [name, v] : entries_)
            if (name.rfind(prefix, 0) == 0) n += v->value.size();
        return n;
    }

    std::vector<std::string> names(const std::string& prefix = "") const {
        std::vector<std::string> out;
        for (const auto& [name, v] : entries_)
            if (name.rfind(prefix, 0) == 0) out.push_back(name);
        return out;
    }

    void zero_grad() {
        for (auto& [name, v] : entries_) v->grad.resize(0, 0);
    }

  private:
    ad::Var insert(const std::string& name, ad::Matrix m) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
        ad::Var v = ad::leaf(std::move(m));
        entries_.push_back({name, v});
        index_[name] = v;
        return v;
    }

    std::vector<std::pair<std::string, ad::Var>> entries_;
    std::map<std::string, ad::Var> index_;
    std::mt19937_64 rng_;
};

struct Linear {
    ad::Var w, b;

    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out, bool zero_init = false) {
        w = zero_init ? ps.zeros(name + ".w", in, out) : ps.weight(name + ".w", in, out);
        b = ps.zeros(name + ".b", 1, out);
    }

    ad::Var operator()(const ad::Var& x) const { return ad::add_bias(ad::matmul(x, w), b); }
};

struct LayerNorm {
    ad::Var gain, bias;

    LayerNorm() = default;
    LayerNorm(ParamStore& ps, const std::string& name, Eigen::Index dim) {
        gain = ps.ones(name + ".gain", 1, dim);
        bias = ps.zeros(name + ".bias", 1, dim);
    }

    ad::Var operator()(const ad::Var& x) const { return ad::layer_norm(x, gain, bias); }
};

// Two stacked [affine -> LayerNorm -> ReLU] blocks (the MLP Block).
struct Mlp1 {
    Linear l1, l2;
    LayerNorm n1, n2;

    Mlp1() = default;
    Mlp1(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden, Eigen::Index out)
        : l1(ps, name + ".l1", in, hidden),
          l2(ps, name + ".l2", hidden, out),
          n1(ps, name + ".n1", hidden),
          n2(ps, name + ".n2", out) {}

    ad::Var operator()(const ad::Var& x) const { return ad::relu(n2(l2(ad::relu(n1(l1(x)))))); }
};

// affine -> ReLU -> affine (also used for the MLP^4 head).
struct Mlp2 {
    Linear l1, l2;

    Mlp2() = default;
    Mlp2(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden, Eigen::Index out)
        : l1(ps, name + ".l1", in, hidden), l2(ps, name + ".l2", hidden, out) {}

    ad::Var operator()(const ad::Var& x) const { return l2(ad::relu(l1(x))); }
};

// MLP Block followed by a linear layer.
struct Mlp3 {
    Mlp1 block;
    Linear out;

    Mlp3() = default;
    Mlp3(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden, Eigen::Index out_dim,
         bool zero_init_out = false)
        : block(ps, name + ".block", in, hidden, hidden), out(ps, name + ".out", hidden, out_dim, zero_init_out) {}

    ad::Var operator()(const ad::Var& x) const { return out(block(x)); }
};

// Directed edge set between two node arrays, with receiver-frame relative
// geometry per edge.
struct EdgeTensors {
    std::vector<Eigen::Index> recv, send;
    ad::Matrix delta_p;    // E x 2, receiver frame
    ad::Matrix angle;      // E x 2, (cos dtheta, sin dtheta)

    size_t size() const { return recv.size(); }
};

// Relative interaction block: embeds per-edge geometry, concatenates
// center/neighbor features, sum-aggregates messages per receiver.
struct RelBlock {
    Mlp2 dp_embed, ang_embed, center_proj;
    Mlp1 edge_mlp, node_mlp;

    RelBlock() = default;
    RelBlock(ParamStore& ps, const std::string& name, Eigen::Index dim)
        : dp_embed(ps, name + ".dp", 2, dim, dim),
          ang_embed(ps, name + ".ang", 2, dim, dim),
          center_proj(ps, name + ".ctr", dim, dim, dim),
          edge_mlp(ps, name + ".edge", 3 * dim, dim, dim),
          node_mlp(ps, name + ".node", dim, dim, dim) {}

    ad::Var operator()(const ad::Var& center, const ad::Var& neighbor, const EdgeTensors& edges) const {
        const Eigen::Index n_center = center->value.rows();
        ad::Var ctr = center_proj(center);
        ad::Var msg_sum;
        if (!edges.recv.empty()) {
            ad::Var geom = ad::relu(ad::add(dp_embed(ad::constant(edges.delta_p)),
                                            ang_embed(ad::constant(edges.angle))));
            ad::Var per_edge = edge_mlp(ad::concat_cols(
                {geom, ad::gather_rows(ctr, edges.recv), ad::gather_rows(neighbor, edges.send)}));
            msg_sum = ad::scatter_sum_rows(per_edge, edges.recv, n_center);
        } else {
            msg_sum = ad::constant(ad::Matrix::Zero(n_center, ctr->value.cols()));
        }
        return node_mlp(ad::add(ctr, msg_sum));
    }
};

// One lane-graph relation: (receiver row, sender row) index pairs, with
// optional relative-pose geometry used by the interaction-stage variant.
struct LaneRelation {
    std::vector<Eigen::Index> recv, send;
    ad::Matrix delta_p;  // E x 2, empty when unused
    ad::Matrix angle;    // E x 2

    bool has_geometry() const { return delta_p.rows() == static_cast<Eigen::Index>(recv.size()) && delta_p.rows() > 0; }
};

// Relations feeding one lane graph convolution stack, in a fixed order:
// one per successor dilation, then predecessor, left, right.
struct LaneGraph {
    std::vector<LaneRelation> successor_dilated;  // index d -> succ^{dilations[d]}
    LaneRelation predecessor, left, right;
    Eigen::Index n_rows = 0;
};

struct LaneGcnLayer {
    Linear self_lin;
    std::vector<Linear> succ_lin;
    Linear pred_lin, left_lin, right_lin;
    LayerNorm norm;

    LaneGcnLayer() = default;
    LaneGcnLayer(ParamStore& ps, const std::string& name, Eigen::Index dim, size_t n_dilations)
        : self_lin(ps, name + ".self", dim, dim),
          pred_lin(ps, name + ".pred", dim, dim),
          left_lin(ps, name + ".left", dim, dim),
          right_lin(ps, name + ".right", dim, dim),
          norm(ps, name + ".norm", dim) {
        for (size_t d = 0; d < n_dilations; ++d)
            succ_lin.emplace_back(ps, name + ".succ" + std::to_string(d), dim, dim);
    }
};

// Lane graph convolution with dilated successor hops, used both by the lane
// vector encoder (per-point rows, no geometry) and the L2L interaction stage
// (per-segment rows, relative-pose embedding added to sender features).
struct LaneGcnStack {
    std::vector<LaneGcnLayer> layers;
    Mlp2 dp_embed, ang_embed;  // only constructed when with_geometry
    bool with_geometry = false;

    LaneGcnStack() = default;
    LaneGcnStack(ParamStore& ps, const std::string& name, Eigen::Index dim, int n_layers, size_t n_dilations,
                 bool geometry)
        : with_geometry(geometry) {
        for (int l = 0; l < n_layers; ++l)
            layers.emplace_back(ps, name + ".layer" + std::to_string(l), dim, n_dilations);
        if (geometry) {
            dp_embed = Mlp2(ps, name + ".dp", 2, dim, dim);
            ang_embed = Mlp2(ps, name + ".ang", 2, dim, dim);
        }
    }

    ad::Var operator()(const ad::Var& h0, const LaneGraph& graph) const {
        ad::Var h = h0;
        for (const auto& layer : layers) {
            ad::Var acc = layer.self_lin(h);
            auto relate = [&](const LaneRelation& rel, const Linear& lin) {
                if (rel.recv.empty()) return;
                ad::Var msg = ad::gather_rows(h, rel.send);
                if (with_geometry && rel.has_geometry())
                    msg = ad::add(msg, ad::relu(ad::add(dp_embed(ad::constant(rel.delta_p)),
                                                        ang_embed(ad::constant(rel.angle)))));
                acc = ad::add(acc, ad::scatter_sum_rows(lin(msg), rel.recv, graph.n_rows));
            };
            for (size_t d = 0; d < graph.successor_dilated.size() && d < layer.succ_lin.size(); ++d)
                relate(graph.successor_dilated[d], layer.succ_lin[d]);
            relate(graph.predecessor, layer.pred_lin);
            relate(graph.left, layer.left_lin);
            relate(graph.right, layer.right_lin);
            h = ad::add(ad::relu(layer.norm(acc)), h);
        }
        return h;
    }
};

// Same-padded 1D convolution over fixed-length temporal blocks of rows,
// expressed as shifted gathers plus per-tap affine maps.
struct TemporalConv {
    std::vector<Linear> taps;  // one per kernel offset; bias lives on taps[0]
    int kernel = 3;

    TemporalConv() = default;
    TemporalConv(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out, int kernel_size)
        : kernel(kernel_size) {
        for (int k = 0; k < kernel_size; ++k) taps.emplace_back(ps, name + ".k" + std::to_string(k), in, out);
    }

    ad::Var operator()(const ad::Var& x, Eigen::Index block_len) const {
        const Eigen::Index rows = x->value.rows();
        const int radius = kernel / 2;
        ad::Var acc;
        for (int k = 0; k < kernel; ++k) {
            const int offset = k - radius;
            std::vector<Eigen::Index> idx(rows);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const Eigen::Index t = r % block_len;
                const Eigen::Index shifted = t + offset;
                idx[r] = (shifted >= 0 && shifted < block_len) ? r + offset : -1;
            }
            ad::Var term = k == 0 ? taps[k](ad::gather_rows(x, idx))
                                  : ad::matmul(ad::gather_rows(x, idx), taps[k].w);
            acc = k == 0 ? term : ad::add(acc, term);
        }
        return acc;
    }
};

// Multi-scale temporal encoder: two conv blocks with kernels {3,5,7} fused by
// a 1x1 map, then one affine collapsing the time axis to a single vector.
struct TrajectoryEncoder {
    std::vector<TemporalConv> convs1, convs2;
    Linear fuse1, fuse2;
    LayerNorm norm1, norm2;
    Linear collapse;
    Eigen::Index block_len = 0;

    TrajectoryEncoder() = default;
    TrajectoryEncoder(ParamStore& ps, const std::string& name, Eigen::Index in_channels, Eigen::Index dim,
                      Eigen::Index steps)
        : block_len(steps) {
        const std::vector<int> kernels{3, 5, 7};
        for (size_t i = 0; i < kernels.size(); ++i) {
            convs1.emplace_back(ps, name + ".c1k" + std::to_string(kernels[i]), in_channels, dim, kernels[i]);
            convs2.emplace_back(ps, name + ".c2k" + std::to_string(kernels[i]), dim, dim, kernels[i]);
        }
        fuse1 = Linear(ps, name + ".fuse1", dim * static_cast<Eigen::Index>(kernels.size()), dim);
        fuse2 = Linear(ps, name + ".fuse2", dim * static_cast<Eigen::Index>(kernels.size()), dim);
        norm1 = LayerNorm(ps, name + ".norm1", dim);
        norm2 = LayerNorm(ps, name + ".norm2", dim);
        collapse = Linear(ps, name + ".collapse", steps * dim, dim);
    }

    // x: (n_blocks * block_len) x in_channels -> n_blocks x dim
    ad::Var operator()(const ad::Var& x) const {
        auto block = [&](const ad::Var& input, const std::vector<TemporalConv>& convs, const Linear& fuse,
                         const LayerNorm& norm) {
            std::vector<ad::Var> branches;
            for (const auto& c : convs) branches.push_back(c(input, block_len));
            return ad::relu(norm(fuse(ad::concat_cols(branches))));
        };
        ad::Var h = block(x, convs1, fuse1, norm1);
        h = block(h, convs2, fuse2, norm2);
        return collapse(ad::reshape_rows(h, block_len));
    }
};

}  // namespace ffinet
