#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relconv/common.hpp"
#include "relconv/graph.hpp"

namespace relconv {

/// Synthetic benchmark generator.
///
/// Two node types: labeled "entity" nodes and "tag" context nodes. Tags come
/// in pairs built around shared carrier vectors: pair (j, c) has features
/// u_j + delta * e_c and u_j - delta * e_c, so the pair's class c lives only
/// in the difference between the two rows while the sum is the class-free
/// carrier. Every carrier u_j appears once per class, which keeps the carrier
/// itself uninformative. Each entity is wired, per relation, to both members
/// of one pair; the label is the class wired under the first relation, so it
/// is a deterministic function of the per-relation neighbor-class histogram
/// and requires relation-aware, row-resolved aggregation to read cleanly.
/// `label_noise` resamples labels uniformly with that probability. Self-loop
/// edges let stacked layers carry a node's own embedding forward.
struct SynthSpec {
    std::size_t entities = 182;
    std::size_t carriers = 3;  // pairs per (relation draw): tags = 2 * classes * carriers
    std::size_t classes = 3;
    std::size_t feature_dim = 8;
    std::size_t wiring_relations = 2;  // tag->entity edge types; the first carries the label
    double label_noise = 0.0;
    double extra_edge_prob = 0.0;  // chance per further tag of an extra edge (makes m > k)
    double pair_delta = 1.0;       // class-difference magnitude per pair member
    double pair_marker = 0.5;      // order marker on the last dim, same sign as the delta
    double carrier_scale = 0.7;    // per-dim range of the carrier vectors
    double feature_jitter = 0.02;  // per-tag uniform noise; entities carry zero features
    bool self_loops = true;

    std::size_t tag_count() const { return 2 * classes * carriers; }
};

inline HeteroGraph synth_graph(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.entities == 0) throw data_error("synth: zero nodes of the labeled type");
    if (spec.classes < 2) throw data_error("synth: need at least 2 classes");
    if (spec.carriers == 0) throw data_error("synth: need at least one carrier pair per class");
    if (spec.feature_dim < spec.classes + 1)
        throw data_error("synth: feature_dim must exceed the class count (one dim is the order marker)");
    if (spec.wiring_relations == 0) throw data_error("synth: need at least one wiring relation");

    Rng rng(seed);
    const std::size_t c = spec.classes;
    const std::size_t tags = spec.tag_count();
    const std::size_t n = spec.entities + tags;

    HeteroGraph g;
    g.node_count = n;
    g.node_type_names = {"entity", "tag"};
    g.node_type.assign(n, 0);
    for (std::size_t t = 0; t < tags; ++t) g.node_type[spec.entities + t] = 1;
    g.type_feature_dim = {spec.feature_dim, spec.feature_dim};
    g.labels.assign(n, -1);
    g.class_count = c;

    // tag (j, cls, side) sits at entities + (j*classes + cls)*2 + side
    auto tag_id = [&](std::size_t j, std::size_t cls, std::size_t side) {
        return static_cast<std::uint32_t>(spec.entities + (j * c + cls) * 2 + side);
    };

    std::vector<std::vector<double>> carriers(spec.carriers);
    for (auto& u : carriers) {
        u.resize(spec.feature_dim);
        for (double& x : u) x = rng.uniform(-spec.carrier_scale, spec.carrier_scale);
    }

    g.raw_features.assign(n, std::vector<double>(spec.feature_dim, 0.0));
    for (std::size_t t = 0; t < tags; ++t) {
        auto& row = g.raw_features[spec.entities + t];
        for (double& x : row) x = spec.feature_jitter * rng.uniform(-1.0, 1.0);
    }
    for (std::size_t j = 0; j < spec.carriers; ++j) {
        for (std::size_t cls = 0; cls < c; ++cls) {
            for (std::size_t side = 0; side < 2; ++side) {
                auto& row = g.raw_features[tag_id(j, cls, side)];
                const double sign = side == 0 ? 1.0 : -1.0;
                for (std::size_t d = 0; d < spec.feature_dim; ++d) row[d] += carriers[j][d];
                row[cls] += sign * spec.pair_delta;
                row[spec.feature_dim - 1] += sign * spec.pair_marker;
            }
        }
    }

    auto edge_type_name = [&](std::size_t r) { return "r" + std::to_string(r); };
    std::vector<std::string> etypes;
    for (std::size_t r = 0; r < spec.wiring_relations; ++r) etypes.push_back(edge_type_name(r));
    if (spec.self_loops) etypes.push_back("self");
    std::sort(etypes.begin(), etypes.end());
    g.edge_type_names = etypes;
    auto etype_index = [&](const std::string& name) {
        return static_cast<std::uint32_t>(
            std::lower_bound(g.edge_type_names.begin(), g.edge_type_names.end(), name) -
            g.edge_type_names.begin());
    };

    for (std::size_t a = 0; a < spec.entities; ++a) {
        const std::uint32_t av = static_cast<std::uint32_t>(a);
        for (std::size_t r = 0; r < spec.wiring_relations; ++r) {
            // stratify the label-bearing class; distractor relations draw uniformly
            const std::size_t cls = r == 0 ? a % c : static_cast<std::size_t>(rng.below(c));
            if (r == 0) g.labels[a] = static_cast<int>(cls);
            const std::size_t j = static_cast<std::size_t>(rng.below(spec.carriers));
            const std::uint32_t et = etype_index(edge_type_name(r));
            g.edges.push_back({tag_id(j, cls, 0), av, et});
            g.edges.push_back({tag_id(j, cls, 1), av, et});
            if (spec.extra_edge_prob > 0.0) {
                for (std::size_t t = 0; t < tags; ++t) {
                    const std::uint32_t b = static_cast<std::uint32_t>(spec.entities + t);
                    if (b == tag_id(j, cls, 0) || b == tag_id(j, cls, 1)) continue;
                    if (rng.real01() < spec.extra_edge_prob) g.edges.push_back({b, av, et});
                }
            }
        }
        if (spec.self_loops) g.edges.push_back({av, av, etype_index("self")});
    }
    if (spec.label_noise > 0.0) {
        for (std::size_t a = 0; a < spec.entities; ++a) {
            if (rng.real01() < spec.label_noise) g.labels[a] = static_cast<int>(rng.below(c));
        }
    }

    g.build_index();
    return g;
}

}  // namespace relconv
