#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "relconv/graph.hpp"
#include "relconv/tensor.hpp"

namespace relconv {

/// Trainable per-relation projection directions plus the pooling size k.
struct PoolingParams {
    std::vector<Tensor> projections;  // one [D] vector per relation, graph order
    std::size_t k = 2;
};

enum class PaddingKind { none, mean_padded, zero_relation };

struct RelationPoolInfo {
    std::vector<std::size_t> selected;  // neighbor node ids, descending-score order
    std::vector<double> gates;          // sigmoid(score) per selected row
    PaddingKind padding = PaddingKind::none;
    std::size_t real_rows = 0;  // rows backed by actual neighbors (= |selected|)
};

/// The (R, k, D) pooled tensor for one node, slices in canonical relation
/// order, with per-relation provenance.
struct PooledNeighborhood {
    Tensor x;  // shape (R, k, D); every slice of an absent relation is exactly zero
    std::vector<RelationPoolInfo> relations;
};

/// Projection scores s_i = <x_i, v> / ||v||.
inline Tensor score(const Tensor& features, const Tensor& v, Tape* tape = nullptr) {
    if (features.rank() != 2 || v.rank() != 1 || features.extent(1) != v.extent(0)) {
        throw std::invalid_argument("score: need (n,d) features and (d) projection, got " +
                                    shape_str(features.shape()) + " and " + shape_str(v.shape()));
    }
    double sq = 0.0;
    for (double x : v.data()) sq += x * x;
    if (std::sqrt(sq) == 0.0) throw numeric_error("score: degenerate projection vector (zero norm)");
    const std::size_t d = v.extent(0);
    Tensor norm = sqrt(reduce_sum(mul(v, v, tape), 0, tape), tape);
    Tensor raw = matmul(features, reshape(v, {d, 1}, tape), tape);
    return reshape(div(raw, norm, tape), {features.extent(0)}, tape);
}

/// Positions of the min(k, n) largest scores, emitted in descending-score
/// order with ties broken by ascending position. Not differentiable; the
/// learning signal flows through the gate values instead.
inline std::vector<std::size_t> rank_topk(const Tensor& s, std::size_t k) {
    if (k == 0) throw std::invalid_argument("rank_topk: k must be positive");
    if (s.rank() != 1) throw std::invalid_argument("rank_topk: scores must be rank 1");
    const auto& d = s.data();
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (d[a] != d[b]) return d[a] > d[b];
        return a < b;
    });
    order.resize(std::min(k, d.size()));
    return order;
}

/// One relation slice of Eq-style pooling: select top-k neighbors by
/// projection score, gate the selected rows with sigmoid(score), and when
/// fewer than k neighbors exist pad with the mean of the gated rows. A
/// relation absent at v yields an all-zero slice.
inline std::pair<Tensor, RelationPoolInfo> pool_relation(const HeteroGraph& g, const Tensor& features,
                                                         std::size_t v, std::size_t r,
                                                         const PoolingParams& params, Tape* tape = nullptr) {
    const std::size_t d = features.extent(1);
    const std::size_t k = params.k;
    auto nb = g.neighbors(v, r);
    if (nb.empty()) {
        RelationPoolInfo info;
        info.padding = PaddingKind::zero_relation;
        return {Tensor::zeros({k, d}), info};
    }
    std::vector<std::size_t> ids(nb.begin(), nb.end());
    Tensor rows = gather_rows(features, ids, tape);
    Tensor s = score(rows, params.projections.at(r), tape);
    const std::vector<std::size_t> idx = rank_topk(s, k);

    Tensor gates = sigmoid(gather_rows(s, idx, tape), tape);
    Tensor gated = scale_rows(gather_rows(rows, idx, tape), gates, tape);

    RelationPoolInfo info;
    info.real_rows = idx.size();
    for (std::size_t i : idx) info.selected.push_back(ids[i]);
    info.gates = gates.data();

    Tensor slice = gated;
    if (idx.size() < k) {
        info.padding = PaddingKind::mean_padded;
        Tensor mean_row = reshape(reduce_mean(gated, 0, tape), {1, d}, tape);
        Tensor pad = gather_rows(mean_row, std::vector<std::size_t>(k - idx.size(), 0), tape);
        slice = concat({gated, pad}, 0, tape);
    }
    return {slice, std::move(info)};
}

inline std::pair<Tensor, RelationPoolInfo> pool_relation(const HeteroGraph& g, std::size_t v, std::size_t r,
                                                         const PoolingParams& params, Tape* tape = nullptr) {
    return pool_relation(g, g.features(), v, r, params, tape);
}

/// Stacks pool_relation over every relation in canonical order into the
/// (R, k, D) tensor. Total: never fails for a valid node, padding rules keep
/// the shape fixed regardless of neighbor availability.
inline PooledNeighborhood pool_all(const HeteroGraph& g, const Tensor& features, std::size_t v,
                                   const PoolingParams& params, Tape* tape = nullptr) {
    const std::size_t d = features.extent(1);
    const std::size_t rcount = g.relations.size();
    PooledNeighborhood out;
    if (rcount == 0) {
        out.x = Tensor::zeros({0, params.k, d});
        return out;
    }
    std::vector<Tensor> parts;
    parts.reserve(rcount);
    for (std::size_t r = 0; r < rcount; ++r) {
        auto [slice, info] = pool_relation(g, features, v, r, params, tape);
        parts.push_back(reshape(slice, {1, params.k, d}, tape));
        out.relations.push_back(std::move(info));
    }
    out.x = rcount == 1 ? parts[0] : concat(parts, 0, tape);
    return out;
}

inline PooledNeighborhood pool_all(const HeteroGraph& g, std::size_t v, const PoolingParams& params,
                                   Tape* tape = nullptr) {
    return pool_all(g, g.features(), v, params, tape);
}

}  // namespace relconv
