#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "relconv/common.hpp"
#include "relconv/tensor.hpp"

namespace relconv {

/// A relation is the ordered triple <source node type, edge type, target node
/// type>. The sorted enumeration of distinct triples fixes the relation axis
/// of every (R, k, D) tensor downstream.
struct RelationId {
    std::string src_type;
    std::string edge_type;
    std::string dst_type;

    auto tie() const { return std::tie(src_type, edge_type, dst_type); }
    bool operator==(const RelationId& o) const { return tie() == o.tie(); }
    bool operator<(const RelationId& o) const { return tie() < o.tie(); }

    std::string str() const { return "<" + src_type + "," + edge_type + "," + dst_type + ">"; }
};

struct Edge {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::uint32_t type = 0;  // index into edge_type_names
};

/// Typed node/edge store with per-relation CSR neighbor indexing. Immutable
/// after construction; safe for concurrent reads.
class HeteroGraph {
public:
    std::size_t node_count = 0;
    std::vector<std::string> node_type_names;  // sorted, ids are positions
    std::vector<std::uint32_t> node_type;      // per node
    std::vector<std::string> edge_type_names;  // sorted
    std::vector<Edge> edges;

    /// Raw per-node feature rows; row widths are consistent within each node
    /// type but may differ across types.
    std::vector<std::vector<double>> raw_features;
    std::vector<std::size_t> type_feature_dim;  // per node type

    std::vector<int> labels;  // -1 for unlabeled
    std::size_t class_count = 0;

    std::vector<RelationId> relations;  // sorted lexicographically

    bool uniform_features() const {
        for (std::size_t d : type_feature_dim)
            if (d != type_feature_dim.front()) return false;
        return !type_feature_dim.empty();
    }

    std::size_t feature_dim() const {
        if (!uniform_features())
            throw data_error("graph: feature dimensions differ across node types; no single feature matrix");
        return type_feature_dim.front();
    }

    /// Dense N x D feature matrix (requires uniform feature widths).
    const Tensor& features() const {
        if (!features_.defined()) throw std::logic_error("graph: index not built");
        return features_;
    }

    /// Ordered (ascending id) sources u of edges u->v whose triple matches
    /// relation r. Empty when the relation does not occur at v.
    std::span<const std::uint32_t> neighbors(std::size_t v, std::size_t r) const {
        if (v >= node_count) throw std::out_of_range("neighbors: node " + std::to_string(v) + " out of range");
        if (r >= relations.size())
            throw std::out_of_range("neighbors: unknown relation id " + std::to_string(r));
        const auto& off = rel_offsets_[r];
        return {rel_neighbors_[r].data() + off[v], off[v + 1] - off[v]};
    }

    std::optional<std::size_t> relation_index(const RelationId& id) const {
        auto it = std::lower_bound(relations.begin(), relations.end(), id);
        if (it == relations.end() || !(*it == id)) return std::nullopt;
        return static_cast<std::size_t>(it - relations.begin());
    }

    std::vector<std::size_t> labeled_ids() const {
        std::vector<std::size_t> out;
        for (std::size_t v = 0; v < node_count; ++v)
            if (labels[v] >= 0) out.push_back(v);
        return out;
    }

    std::size_t total_neighbor_entries() const {
        std::size_t n = 0;
        for (const auto& nb : rel_neighbors_) n += nb.size();
        return n;
    }

    /// Derives the relation enumeration and per-relation CSR index from the
    /// edge list, and materializes the dense feature matrix when widths agree.
    void build_index() {
        validate();
        std::set<RelationId> rel_set;
        for (const Edge& e : edges) rel_set.insert(triple(e));
        relations.assign(rel_set.begin(), rel_set.end());

        rel_offsets_.assign(relations.size(), std::vector<std::size_t>(node_count + 1, 0));
        rel_neighbors_.assign(relations.size(), {});
        std::vector<std::vector<std::uint32_t>> counts(relations.size(),
                                                       std::vector<std::uint32_t>(node_count, 0));
        std::vector<std::size_t> edge_rel(edges.size());
        for (std::size_t i = 0; i < edges.size(); ++i) {
            edge_rel[i] = *relation_index(triple(edges[i]));
            counts[edge_rel[i]][edges[i].dst]++;
        }
        for (std::size_t r = 0; r < relations.size(); ++r) {
            auto& off = rel_offsets_[r];
            for (std::size_t v = 0; v < node_count; ++v) off[v + 1] = off[v] + counts[r][v];
            rel_neighbors_[r].resize(off[node_count]);
        }
        std::vector<std::vector<std::size_t>> cursor(relations.size(),
                                                     std::vector<std::size_t>(node_count, 0));
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const std::size_t r = edge_rel[i];
            const std::uint32_t v = edges[i].dst;
            rel_neighbors_[r][rel_offsets_[r][v] + cursor[r][v]++] = edges[i].src;
        }
        for (std::size_t r = 0; r < relations.size(); ++r) {
            for (std::size_t v = 0; v < node_count; ++v) {
                auto* b = rel_neighbors_[r].data();
                std::sort(b + rel_offsets_[r][v], b + rel_offsets_[r][v + 1]);
            }
        }

        if (uniform_features()) {
            const std::size_t d = type_feature_dim.front();
            std::vector<double> flat;
            flat.reserve(node_count * d);
            for (const auto& row : raw_features) flat.insert(flat.end(), row.begin(), row.end());
            features_ = Tensor::from_data({node_count, d}, std::move(flat));
        } else {
            features_ = Tensor();
        }
    }

    RelationId triple(const Edge& e) const {
        return {node_type_names[node_type[e.src]], edge_type_names[e.type], node_type_names[node_type[e.dst]]};
    }

private:
    void validate() const {
        if (node_type.size() != node_count || labels.size() != node_count ||
            raw_features.size() != node_count) {
            throw data_error("graph: per-node arrays do not match node count");
        }
        for (const Edge& e : edges) {
            if (e.src >= node_count || e.dst >= node_count) {
                throw data_error("graph: edge endpoint out of range (" + std::to_string(e.src) + "->" +
                                 std::to_string(e.dst) + ")");
            }
        }
        for (std::size_t v = 0; v < node_count; ++v) {
            if (raw_features[v].size() != type_feature_dim[node_type[v]]) {
                throw data_error("graph: node " + std::to_string(v) + " feature width " +
                                 std::to_string(raw_features[v].size()) + " does not match its type");
            }
        }
    }

    Tensor features_;
    std::vector<std::vector<std::size_t>> rel_offsets_;
    std::vector<std::vector<std::uint32_t>> rel_neighbors_;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline bool is_comment_or_blank(const std::string& line) {
    for (char c : line) {
        if (c == ' ' || c == '\t' || c == '\r') continue;
        return c == '#';
    }
    return true;
}

inline std::string chomp(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
    return s;
}

template <typename T>
T parse_int(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size() || v < 0) throw std::invalid_argument(s);
        return static_cast<T>(v);
    } catch (const std::exception&) {
        throw data_error(where + ": malformed integer '" + s + "'");
    }
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw data_error(where + ": malformed number '" + s + "'");
    }
}

}  // namespace detail

/// Loads the tab-separated dataset directory (nodes.tsv, edges.tsv,
/// features.tsv). Node ids must be dense 0..N-1. Emits warnings (single edge
/// type, empty edge list) through `warnings` when given, otherwise to stderr.
inline HeteroGraph load_dataset(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr) {
    auto warn = [&](const std::string& msg) {
        if (warnings)
            warnings->push_back(msg);
        else
            std::fprintf(stderr, "warning: %s\n", msg.c_str());
    };
    auto open = [&](const char* name) {
        const auto path = dir / name;
        std::ifstream in(path);
        if (!in) throw data_error("missing or unreadable file: " + path.string());
        return in;
    };

    struct NodeRow {
        std::size_t id;
        std::string type;
        int label;
    };
    std::vector<NodeRow> rows;
    {
        std::ifstream in = open("nodes.tsv");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = detail::chomp(line);
            if (detail::is_comment_or_blank(line)) continue;
            const auto where = "nodes.tsv:" + std::to_string(lineno);
            auto f = detail::split_tabs(line);
            if (f.size() != 3) throw data_error(where + ": expected 3 tab-separated fields");
            NodeRow r;
            r.id = detail::parse_int<std::size_t>(f[0], where);
            r.type = f[1];
            if (r.type.empty()) throw data_error(where + ": empty node type");
            r.label = f[2].empty() ? -1 : static_cast<int>(detail::parse_int<std::size_t>(f[2], where));
            rows.push_back(std::move(r));
        }
    }
    if (rows.empty()) throw data_error("nodes.tsv: no nodes");

    HeteroGraph g;
    g.node_count = rows.size();
    {
        std::vector<bool> seen(g.node_count, false);
        for (const auto& r : rows) {
            if (r.id >= g.node_count)
                throw data_error("nodes.tsv: node ids must be dense 0.." + std::to_string(g.node_count - 1) +
                                 ", got " + std::to_string(r.id));
            if (seen[r.id]) throw data_error("nodes.tsv: duplicate node id " + std::to_string(r.id));
            seen[r.id] = true;
        }
    }
    {
        std::set<std::string> types;
        for (const auto& r : rows) types.insert(r.type);
        g.node_type_names.assign(types.begin(), types.end());
    }
    g.node_type.resize(g.node_count);
    g.labels.assign(g.node_count, -1);
    for (const auto& r : rows) {
        const auto it = std::lower_bound(g.node_type_names.begin(), g.node_type_names.end(), r.type);
        g.node_type[r.id] = static_cast<std::uint32_t>(it - g.node_type_names.begin());
        g.labels[r.id] = r.label;
        if (r.label >= 0) g.class_count = std::max(g.class_count, static_cast<std::size_t>(r.label) + 1);
    }

    struct EdgeRow {
        std::size_t src, dst;
        std::string type;
    };
    std::vector<EdgeRow> edge_rows;
    {
        std::ifstream in = open("edges.tsv");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = detail::chomp(line);
            if (detail::is_comment_or_blank(line)) continue;
            const auto where = "edges.tsv:" + std::to_string(lineno);
            auto f = detail::split_tabs(line);
            if (f.size() != 3) throw data_error(where + ": expected 3 tab-separated fields");
            EdgeRow e;
            e.src = detail::parse_int<std::size_t>(f[0], where);
            e.dst = detail::parse_int<std::size_t>(f[1], where);
            if (f[2].empty()) throw data_error(where + ": empty edge type");
            if (e.src >= g.node_count || e.dst >= g.node_count) {
                throw data_error(where + ": edge references unknown node id " +
                                 std::to_string(std::max(e.src, e.dst)));
            }
            e.type = f[2];
            edge_rows.push_back(std::move(e));
        }
    }
    {
        std::set<std::string> types;
        for (const auto& e : edge_rows) types.insert(e.type);
        g.edge_type_names.assign(types.begin(), types.end());
    }
    for (const auto& e : edge_rows) {
        const auto it = std::lower_bound(g.edge_type_names.begin(), g.edge_type_names.end(), e.type);
        g.edges.push_back({static_cast<std::uint32_t>(e.src), static_cast<std::uint32_t>(e.dst),
                           static_cast<std::uint32_t>(it - g.edge_type_names.begin())});
    }
    if (edge_rows.empty())
        warn("edges.tsv is empty: graph has no relations");
    else if (g.edge_type_names.size() <= 1)
        warn("graph has a single edge type; heterogeneous pooling expects more than one");

    g.raw_features.assign(g.node_count, {});
    {
        std::ifstream in = open("features.tsv");
        std::string line;
        std::size_t lineno = 0;
        std::vector<bool> seen(g.node_count, false);
        while (std::getline(in, line)) {
            ++lineno;
            line = detail::chomp(line);
            if (detail::is_comment_or_blank(line)) continue;
            const auto where = "features.tsv:" + std::to_string(lineno);
            auto f = detail::split_tabs(line);
            if (f.size() != 2) throw data_error(where + ": expected node_id<TAB>values");
            const std::size_t id = detail::parse_int<std::size_t>(f[0], where);
            if (id >= g.node_count) throw data_error(where + ": unknown node id " + std::to_string(id));
            if (seen[id]) throw data_error(where + ": duplicate feature row for node " + std::to_string(id));
            seen[id] = true;
            std::istringstream vs(f[1]);
            std::string tok;
            while (vs >> tok) g.raw_features[id].push_back(detail::parse_double(tok, where));
            if (g.raw_features[id].empty()) throw data_error(where + ": no feature values");
        }
        for (std::size_t v = 0; v < g.node_count; ++v)
            if (!seen[v]) throw data_error("features.tsv: missing feature row for node " + std::to_string(v));
    }
    g.type_feature_dim.assign(g.node_type_names.size(), 0);
    for (std::size_t v = 0; v < g.node_count; ++v) {
        auto& d = g.type_feature_dim[g.node_type[v]];
        if (d == 0)
            d = g.raw_features[v].size();
        else if (d != g.raw_features[v].size())
            throw data_error("features.tsv: inconsistent width for node type '" +
                             g.node_type_names[g.node_type[v]] + "' at node " + std::to_string(v));
    }

    g.build_index();
    return g;
}

/// Writes the canonical dataset form; load(save(g)) reproduces g exactly and
/// saving again is byte-identical.
inline void save_dataset(const HeteroGraph& g, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw data_error("cannot write " + (dir / name).string());
        return out;
    };
    char buf[64];
    {
        std::ofstream out = open("nodes.tsv");
        out << "# node_id\tnode_type\tlabel\n";
        for (std::size_t v = 0; v < g.node_count; ++v) {
            out << v << '\t' << g.node_type_names[g.node_type[v]] << '\t';
            if (g.labels[v] >= 0) out << g.labels[v];
            out << '\n';
        }
    }
    {
        std::ofstream out = open("edges.tsv");
        out << "# src_id\tdst_id\tedge_type\n";
        for (const Edge& e : g.edges)
            out << e.src << '\t' << e.dst << '\t' << g.edge_type_names[e.type] << '\n';
    }
    {
        std::ofstream out = open("features.tsv");
        out << "# node_id\tspace-separated values\n";
        for (std::size_t v = 0; v < g.node_count; ++v) {
            out << v << '\t';
            for (std::size_t j = 0; j < g.raw_features[v].size(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", g.raw_features[v][j]);
                out << (j ? " " : "") << buf;
            }
            out << '\n';
        }
    }
}

struct Splits {
    std::vector<std::size_t> train, val, test;
};

/// Shuffles labeled node ids by seed and cuts floor(train), floor(val) with
/// the remainder as test. The three sets cover the labeled nodes disjointly.
inline Splits split(const HeteroGraph& g, double train_ratio, double val_ratio, double test_ratio,
                    std::uint64_t seed) {
    if (train_ratio <= 0 || val_ratio <= 0 || test_ratio <= 0 ||
        std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
        throw std::invalid_argument("split: ratios must be positive and sum to 1");
    }
    std::vector<std::size_t> ids = g.labeled_ids();
    if (ids.size() < 3) throw data_error("split: need at least 3 labeled nodes, have " +
                                         std::to_string(ids.size()));
    Rng rng(seed);
    rng.shuffle(ids);
    const std::size_t n = ids.size();
    const std::size_t n_train = static_cast<std::size_t>(train_ratio * static_cast<double>(n));
    const std::size_t n_val = static_cast<std::size_t>(val_ratio * static_cast<double>(n));
    Splits s;
    s.train.assign(ids.begin(), ids.begin() + n_train);
    s.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    s.test.assign(ids.begin() + n_train + n_val, ids.end());
    return s;
}

}  // namespace relconv
