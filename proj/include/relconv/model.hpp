#pragma once

#include <string>
#include <utility>
#include <vector>

#include "relconv/conv.hpp"
#include "relconv/graph.hpp"
#include "relconv/pooling.hpp"
#include "relconv/tensor.hpp"

namespace relconv {

struct ModelDims {
    std::size_t k = 2;        // pooling size
    std::size_t window = 2;   // convolution window s
    std::size_t filters = 64;
    std::size_t hidden = 256;
    std::size_t depth = 3;
    std::size_t classes = 0;
    bool ablation = false;      // mean-over-rows variant instead of convolution
    bool self_feature = false;  // concatenate the node's own features before the MLP
};

struct LayerParams {
    PoolingParams pooling;
    FilterBank bank;  // unused (1x1x1x1 placeholder is never created; kernels undefined) in ablation mode
    MlpParams mlp;
    bool ablation = false;
    bool self_feature = false;
};

/// All trainable state plus the structural echo needed to rebuild it.
struct ModelParams {
    ModelDims dims;
    std::vector<RelationId> relations;
    std::vector<std::size_t> input_dims;  // raw feature width per node type
    std::vector<Tensor> input_proj;       // per-type projections, only when widths differ
    std::size_t layer_input_dim = 0;      // width seen by the first layer
    std::vector<LayerParams> layers;
    Tensor head_w, head_b;

    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        std::vector<std::pair<std::string, Tensor>> out;
        for (std::size_t t = 0; t < input_proj.size(); ++t)
            out.emplace_back("input_proj." + std::to_string(t), input_proj[t]);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string prefix = "layer" + std::to_string(l) + ".";
            for (std::size_t r = 0; r < layers[l].pooling.projections.size(); ++r)
                out.emplace_back(prefix + "v_t." + std::to_string(r), layers[l].pooling.projections[r]);
            if (!layers[l].ablation && layers[l].bank.kernels.defined())
                out.emplace_back(prefix + "kernels", layers[l].bank.kernels);
            out.emplace_back(prefix + "mlp.w1", layers[l].mlp.w1);
            out.emplace_back(prefix + "mlp.b1", layers[l].mlp.b1);
            out.emplace_back(prefix + "mlp.w2", layers[l].mlp.w2);
            out.emplace_back(prefix + "mlp.b2", layers[l].mlp.b2);
        }
        out.emplace_back("head.w", head_w);
        out.emplace_back("head.b", head_b);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [name, t] : named_parameters()) n += t.numel();
        return n;
    }

    ModelParams clone() const {
        ModelParams c = *this;
        auto copy = [](const Tensor& t) {
            return t.defined() ? Tensor::from_data(t.shape(), t.data(), t.requires_grad()) : Tensor();
        };
        for (auto& t : c.input_proj) t = copy(t);
        for (auto& l : c.layers) {
            for (auto& v : l.pooling.projections) v = copy(v);
            l.bank.kernels = copy(l.bank.kernels);
            l.mlp.w1 = copy(l.mlp.w1);
            l.mlp.b1 = copy(l.mlp.b1);
            l.mlp.w2 = copy(l.mlp.w2);
            l.mlp.b2 = copy(l.mlp.b2);
        }
        c.head_w = copy(head_w);
        c.head_b = copy(head_b);
        return c;
    }
};

/// Xavier-uniform draw: bound sqrt(6 / (fan_in + fan_out)).
inline Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    if (fan_in == 0 || fan_out == 0) throw std::invalid_argument("xavier: zero fan");
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-a, a);
    return Tensor::from_data(std::move(shape), std::move(v), true);
}

/// Builds all parameters for the given graph shape. Weights are Xavier
/// initialized, biases zero, projection vectors use fan_out 1. The draw order
/// (projections first per layer) keeps pooling initialization identical
/// between the full and ablation variants under one seed.
inline ModelParams init_params(const ModelDims& dims, const HeteroGraph& g, std::uint64_t seed) {
    if (dims.classes == 0) throw std::invalid_argument("init_params: class count must be positive");
    if (dims.window == 0 || dims.window > dims.k)
        throw std::invalid_argument("init_params: need 1 <= window <= k");
    Rng rng(seed);
    ModelParams p;
    p.dims = dims;
    p.relations = g.relations;
    p.input_dims = g.type_feature_dim;

    std::size_t d_in;
    if (g.uniform_features()) {
        d_in = g.feature_dim();
    } else {
        // per-type trainable projections into a shared width
        d_in = *std::max_element(g.type_feature_dim.begin(), g.type_feature_dim.end());
        for (std::size_t t = 0; t < g.type_feature_dim.size(); ++t)
            p.input_proj.push_back(xavier({g.type_feature_dim[t], d_in}, g.type_feature_dim[t], d_in, rng));
    }
    p.layer_input_dim = d_in;

    const std::size_t rels = g.relations.size();
    const std::size_t len = dims.k - dims.window + 1;
    for (std::size_t l = 0; l < dims.depth; ++l) {
        const std::size_t d = l == 0 ? d_in : dims.hidden;
        LayerParams layer;
        layer.ablation = dims.ablation;
        layer.self_feature = dims.self_feature;
        layer.pooling.k = dims.k;
        for (std::size_t r = 0; r < rels; ++r)
            layer.pooling.projections.push_back(xavier({d}, d, 1, rng));
        std::size_t mlp_in;
        if (dims.ablation) {
            mlp_in = rels * d;
        } else {
            layer.bank.kernels = xavier({dims.filters, rels, dims.window, d},
                                        rels * dims.window * d, dims.filters, rng);
            mlp_in = dims.filters * len;
        }
        if (dims.self_feature) mlp_in += d;
        if (mlp_in == 0) throw std::invalid_argument("init_params: empty MLP input (no relations)");
        layer.mlp.w1 = xavier({mlp_in, dims.hidden}, mlp_in, dims.hidden, rng);
        layer.mlp.b1 = Tensor::zeros({dims.hidden}, true);
        layer.mlp.w2 = xavier({dims.hidden, dims.hidden}, dims.hidden, dims.hidden, rng);
        layer.mlp.b2 = Tensor::zeros({dims.hidden}, true);
        p.layers.push_back(std::move(layer));
    }
    p.head_w = xavier({dims.hidden, dims.classes}, dims.hidden, dims.classes, rng);
    p.head_b = Tensor::zeros({dims.classes}, true);
    return p;
}

namespace detail {

inline Tensor mlp_batch(const Tensor& rows, const MlpParams& mlp, Tape* tape) {
    Tensor hidden = relu(add_rows(matmul(rows, mlp.w1, tape), mlp.b1, tape), tape);
    return add_rows(matmul(hidden, mlp.w2, tape), mlp.b2, tape);
}

template <typename RowFn>
Tensor assemble_rows(const HeteroGraph& g, const Tensor& features, const LayerParams& layer, Tape* tape,
                     RowFn row_of) {
    const std::size_t n = features.extent(0);
    std::vector<Tensor> rows;
    rows.reserve(n);
    for (std::size_t v = 0; v < n; ++v) {
        PooledNeighborhood pooled = pool_all(g, features, v, layer.pooling, tape);
        rows.push_back(row_of(pooled));
    }
    Tensor all = n == 1 ? rows[0] : concat(rows, 0, tape);
    if (layer.self_feature) all = concat({all, features}, 1, tape);
    return all;
}

}  // namespace detail

/// One pooling + convolution + MLP layer over every node; output (N, H).
inline Tensor layer_forward(const HeteroGraph& g, const Tensor& features, const LayerParams& layer,
                            Tape* tape = nullptr) {
    if (features.rank() != 2 || features.extent(0) != g.node_count)
        throw std::invalid_argument("layer_forward: features must be (N,D)");
    const std::size_t len = layer.pooling.k - layer.bank.window() + 1;
    const std::size_t width = layer.bank.filters() * len;
    Tensor rows = detail::assemble_rows(g, features, layer, tape, [&](const PooledNeighborhood& pooled) {
        if (pooled.x.extent(0) == 0) return Tensor::zeros({1, width});
        return reshape(conv_all(pooled, layer.bank, tape), {1, width}, tape);
    });
    return detail::mlp_batch(rows, layer.mlp, tape);
}

/// Table-2 style variant: the convolution is replaced by a per-relation mean
/// over the k pooled rows, stacked across relations; pooling and the MLP stay
/// as in layer_forward.
inline Tensor ablation_forward(const HeteroGraph& g, const Tensor& features, const LayerParams& layer,
                               Tape* tape = nullptr) {
    if (features.rank() != 2 || features.extent(0) != g.node_count)
        throw std::invalid_argument("ablation_forward: features must be (N,D)");
    const std::size_t d = features.extent(1);
    const std::size_t width = g.relations.size() * d;
    Tensor rows = detail::assemble_rows(g, features, layer, tape, [&](const PooledNeighborhood& pooled) {
        if (pooled.x.extent(0) == 0) return Tensor::zeros({1, width});
        return reshape(reduce_mean(pooled.x, 1, tape), {1, width}, tape);
    });
    return detail::mlp_batch(rows, layer.mlp, tape);
}

/// Raw per-type features mapped to the first layer's input width; identity
/// when the dataset already has one uniform width.
inline Tensor input_features(const HeteroGraph& g, const ModelParams& p, Tape* tape = nullptr) {
    if (p.input_proj.empty()) return g.features();
    // project each type block, then reassemble rows in node order
    std::vector<std::vector<std::size_t>> by_type(g.node_type_names.size());
    for (std::size_t v = 0; v < g.node_count; ++v) by_type[g.node_type[v]].push_back(v);
    std::vector<Tensor> blocks;
    std::vector<std::size_t> position(g.node_count);
    std::size_t offset = 0;
    for (std::size_t t = 0; t < by_type.size(); ++t) {
        if (by_type[t].empty()) continue;
        std::vector<double> flat;
        flat.reserve(by_type[t].size() * g.type_feature_dim[t]);
        for (std::size_t v : by_type[t]) {
            flat.insert(flat.end(), g.raw_features[v].begin(), g.raw_features[v].end());
            position[v] = offset++;
        }
        Tensor raw = Tensor::from_data({by_type[t].size(), g.type_feature_dim[t]}, std::move(flat));
        blocks.push_back(matmul(raw, p.input_proj[t], tape));
    }
    Tensor grouped = blocks.size() == 1 ? blocks[0] : concat(blocks, 0, tape);
    return gather_rows(grouped, position, tape);
}

/// Stacked layers; each layer's embeddings become the next layer's feature
/// matrix. Output (N, H).
inline Tensor model_hidden(const HeteroGraph& g, const ModelParams& p, Tape* tape = nullptr) {
    Tensor h = input_features(g, p, tape);
    for (const LayerParams& layer : p.layers)
        h = layer.ablation ? ablation_forward(g, h, layer, tape) : layer_forward(g, h, layer, tape);
    return h;
}

/// Classification head on top of the last layer's embeddings; (N, C) logits.
inline Tensor model_logits(const HeteroGraph& g, const ModelParams& p, Tape* tape = nullptr) {
    return add_rows(matmul(model_hidden(g, p, tape), p.head_w, tape), p.head_b, tape);
}

}  // namespace relconv
