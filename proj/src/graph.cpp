#include "grcl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <unordered_set>

#include "grcl/rng.hpp"
#include "grcl/threading.hpp"

namespace grcl {

namespace {

std::uint64_t edge_key(std::int64_t a, std::int64_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

void check_edge_range(const Edge& e, std::int64_t n_u, std::int64_t n_i, const char* split) {
    if (e.first < 0 || e.first >= n_u)
        throw std::invalid_argument(std::string("InteractionGraph: user index out of range in ") +
                                    split + " split: " + std::to_string(e.first));
    if (e.second < 0 || e.second >= n_i)
        throw std::invalid_argument(std::string("InteractionGraph: item index out of range in ") +
                                    split + " split: " + std::to_string(e.second));
}

}  // namespace

bool InteractionGraph::has_edge(std::int64_t u, std::int32_t item) const {
    const auto items = items_of(u);
    return std::binary_search(items.begin(), items.end(), item);
}

InteractionGraph InteractionGraph::build(std::int64_t n_u, std::int64_t n_i,
                                         std::vector<Edge> train_edges,
                                         std::vector<Edge> test_edges,
                                         std::vector<std::string> user_ids,
                                         std::vector<std::string> item_ids) {
    if (n_u < 0 || n_i < 0) throw std::invalid_argument("InteractionGraph: negative node count");
    InteractionGraph g;
    g.n_u = n_u;
    g.n_i = n_i;
    g.edges = std::move(train_edges);
    g.test_edges = std::move(test_edges);
    g.user_ids = std::move(user_ids);
    g.item_ids = std::move(item_ids);

    std::unordered_set<std::uint64_t> seen;
    seen.reserve(g.edges.size() + g.test_edges.size());
    for (const Edge& e : g.edges) {
        check_edge_range(e, n_u, n_i, "train");
        if (!seen.insert(edge_key(e.first, e.second)).second)
            throw std::invalid_argument("InteractionGraph: duplicate train edge (" +
                                        std::to_string(e.first) + ", " + std::to_string(e.second) + ")");
    }
    for (const Edge& e : g.test_edges) {
        check_edge_range(e, n_u, n_i, "test");
        if (!seen.insert(edge_key(e.first, e.second)).second)
            throw std::invalid_argument("InteractionGraph: test edge duplicates or overlaps train (" +
                                        std::to_string(e.first) + ", " + std::to_string(e.second) + ")");
    }

    g.m = static_cast<std::int64_t>(g.edges.size());
    g.degrees.assign(static_cast<std::size_t>(g.n()), 0);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(n_u), 0);
    for (const Edge& e : g.edges) {
        ++g.degrees[static_cast<std::size_t>(e.first)];
        ++g.degrees[static_cast<std::size_t>(n_u + e.second)];
        ++counts[static_cast<std::size_t>(e.first)];
    }

    g.user_ptr.assign(static_cast<std::size_t>(n_u + 1), 0);
    for (std::int64_t u = 0; u < n_u; ++u) g.user_ptr[u + 1] = g.user_ptr[u] + counts[u];
    g.user_items.resize(g.edges.size());
    std::vector<std::int64_t> cursor(g.user_ptr.begin(), g.user_ptr.end() - 1);
    for (const Edge& e : g.edges) g.user_items[cursor[e.first]++] = e.second;
    for (std::int64_t u = 0; u < n_u; ++u)
        std::sort(g.user_items.begin() + g.user_ptr[u], g.user_items.begin() + g.user_ptr[u + 1]);
    return g;
}

bool PlainGraph::has_edge(std::int64_t a, std::int32_t b) const {
    return std::binary_search(adj[a].begin(), adj[a].end(), b);
}

PlainGraph PlainGraph::build(std::int64_t n, std::vector<Edge> edges,
                             std::optional<Matrix> features,
                             std::vector<std::int32_t> labels,
                             std::vector<std::string> node_ids) {
    PlainGraph g;
    g.n = n;
    g.adj.resize(static_cast<std::size_t>(n));
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(edges.size());
    for (Edge& e : edges) {
        if (e.first < 0 || e.first >= n || e.second < 0 || e.second >= n)
            throw std::invalid_argument("PlainGraph: node index out of range");
        if (e.first == e.second)
            throw std::invalid_argument("PlainGraph: self loop at node " + std::to_string(e.first));
        if (e.first > e.second) std::swap(e.first, e.second);
        if (!seen.insert(edge_key(e.first, e.second)).second)
            throw std::invalid_argument("PlainGraph: duplicate edge (" + std::to_string(e.first) +
                                        ", " + std::to_string(e.second) + ")");
        g.adj[e.first].push_back(e.second);
        g.adj[e.second].push_back(e.first);
    }
    g.edges = std::move(edges);
    for (auto& nbrs : g.adj) std::sort(nbrs.begin(), nbrs.end());
    if (features) {
        if (features->rows != n)
            throw std::invalid_argument("PlainGraph: feature row count does not match node count");
        g.features = std::move(features);
    }
    if (!labels.empty() && static_cast<std::int64_t>(labels.size()) != n)
        throw std::invalid_argument("PlainGraph: label count does not match node count");
    g.labels = std::move(labels);
    g.node_ids = std::move(node_ids);
    return g;
}

const char* to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::raw: return "raw";
        case OperatorKind::sym_norm: return "sym_norm";
        case OperatorKind::sym_norm_selfloop: return "sym_norm_selfloop";
        case OperatorKind::laplacian: return "laplacian";
        case OperatorKind::neg_laplacian: return "neg_laplacian";
    }
    return "?";
}

double SparseOperator::entry(std::int64_t i, std::int64_t j) const {
    for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
        if (col[p] == j) return val[p];
    return 0.0;
}

Matrix SparseOperator::apply(const Matrix& x, int threads) const {
    if (x.rows != n) throw std::invalid_argument("SparseOperator::apply: row count mismatch");
    Matrix y(n, x.cols);
    parallel_for(n, threads, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
            auto out = y.row(i);
            for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
                axpy(val[p], x.row(col[p]), out);
        }
    });
    return y;
}

SparseOperator SparseOperator::from_triplets(
    std::int64_t n, std::vector<std::tuple<std::int32_t, std::int32_t, double>> t,
    OperatorKind kind) {
    std::sort(t.begin(), t.end());
    SparseOperator op;
    op.n = n;
    op.kind = kind;
    op.row_ptr.assign(static_cast<std::size_t>(n + 1), 0);
    op.col.reserve(t.size());
    op.val.reserve(t.size());
    for (std::size_t k = 0; k < t.size();) {
        const auto [i, j, v] = t[k];
        double acc = v;
        std::size_t k2 = k + 1;
        while (k2 < t.size() && std::get<0>(t[k2]) == i && std::get<1>(t[k2]) == j)
            acc += std::get<2>(t[k2++]);
        op.col.push_back(j);
        op.val.push_back(acc);
        ++op.row_ptr[i + 1];
        k = k2;
    }
    for (std::int64_t i = 0; i < n; ++i) op.row_ptr[i + 1] += op.row_ptr[i];

    // structural symmetry
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t p = op.row_ptr[i]; p < op.row_ptr[i + 1]; ++p) {
            const std::int64_t j = op.col[p];
            if (op.entry(j, i) != op.val[p])
                throw std::invalid_argument("SparseOperator: asymmetric entry at (" +
                                            std::to_string(i) + ", " + std::to_string(j) + ")");
        }
    if (kind == OperatorKind::laplacian || kind == OperatorKind::neg_laplacian) {
        for (std::int64_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::int64_t p = op.row_ptr[i]; p < op.row_ptr[i + 1]; ++p) s += op.val[p];
            if (std::abs(s) > 1e-12)
                throw std::invalid_argument("SparseOperator: Laplacian row " + std::to_string(i) +
                                            " sums to " + std::to_string(s));
        }
    }
    if (kind == OperatorKind::sym_norm || kind == OperatorKind::sym_norm_selfloop) {
        for (double v : op.val)
            if (v < 0.0) throw std::invalid_argument("SparseOperator: negative normalized entry");
    }
    return op;
}

SparseOperator build_adjacency(const InteractionGraph& g) {
    std::vector<std::tuple<std::int32_t, std::int32_t, double>> t;
    t.reserve(2 * g.edges.size());
    for (const Edge& e : g.edges) {
        const auto u = e.first;
        const auto i = static_cast<std::int32_t>(g.n_u + e.second);
        t.emplace_back(u, i, 1.0);
        t.emplace_back(i, u, 1.0);
    }
    return SparseOperator::from_triplets(g.n(), std::move(t), OperatorKind::raw);
}

SparseOperator build_adjacency(const PlainGraph& g) {
    std::vector<std::tuple<std::int32_t, std::int32_t, double>> t;
    t.reserve(2 * g.edges.size());
    for (const Edge& e : g.edges) {
        t.emplace_back(e.first, e.second, 1.0);
        t.emplace_back(e.second, e.first, 1.0);
    }
    return SparseOperator::from_triplets(g.n, std::move(t), OperatorKind::raw);
}

SparseOperator normalize_sym(const SparseOperator& a, bool self_loop) {
    if (a.kind != OperatorKind::raw)
        throw std::invalid_argument("normalize_sym: expected a raw adjacency");
    std::vector<double> deg(static_cast<std::size_t>(a.n), self_loop ? 1.0 : 0.0);
    for (std::int64_t i = 0; i < a.n; ++i)
        for (std::int64_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p)
            deg[i] += a.val[p];

    if (!self_loop)
        for (std::int64_t i = 0; i < a.n; ++i)
            if (deg[i] == 0.0)
                throw std::runtime_error("normalize_sym: node " + std::to_string(i) +
                                         " is isolated (division by zero degree)");

    std::vector<std::tuple<std::int32_t, std::int32_t, double>> t;
    t.reserve(a.col.size() + (self_loop ? a.n : 0));
    for (std::int64_t i = 0; i < a.n; ++i) {
        for (std::int64_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
            const std::int64_t j = a.col[p];
            t.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j),
                           a.val[p] / std::sqrt(deg[i] * deg[j]));
        }
        if (self_loop)
            t.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i), 1.0 / deg[i]);
    }
    return SparseOperator::from_triplets(
        a.n, std::move(t), self_loop ? OperatorKind::sym_norm_selfloop : OperatorKind::sym_norm);
}

SparseOperator laplacian(const SparseOperator& a) {
    if (a.kind != OperatorKind::raw)
        throw std::invalid_argument("laplacian: expected a raw adjacency");
    std::vector<double> deg(static_cast<std::size_t>(a.n), 0.0);
    std::vector<std::tuple<std::int32_t, std::int32_t, double>> t;
    t.reserve(a.col.size() + a.n);
    for (std::int64_t i = 0; i < a.n; ++i)
        for (std::int64_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
            deg[i] += a.val[p];
            t.emplace_back(static_cast<std::int32_t>(i), a.col[p], -a.val[p]);
        }
    for (std::int64_t i = 0; i < a.n; ++i)
        if (deg[i] != 0.0)
            t.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i), deg[i]);
    return SparseOperator::from_triplets(a.n, std::move(t), OperatorKind::laplacian);
}

SparseOperator add_self_loops(const SparseOperator& a) {
    if (a.kind != OperatorKind::raw)
        throw std::invalid_argument("add_self_loops: expected a raw adjacency");
    std::vector<std::tuple<std::int32_t, std::int32_t, double>> t;
    t.reserve(a.col.size() + a.n);
    for (std::int64_t i = 0; i < a.n; ++i)
        for (std::int64_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p)
            t.emplace_back(static_cast<std::int32_t>(i), a.col[p], a.val[p]);
    for (std::int64_t i = 0; i < a.n; ++i)
        t.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i), 1.0);
    return SparseOperator::from_triplets(a.n, std::move(t), OperatorKind::raw);
}

namespace {

/// K distinct draws from {0..pool_size-1} \ excluded (sorted). Rejection
/// sampling with an enumeration fallback when the complement is tight.
std::vector<std::int32_t> draw_negatives(std::span<const std::int32_t> excluded,
                                         std::int64_t pool_size, int K, Rng& rng,
                                         std::int64_t anchor_for_error) {
    const std::int64_t legal = pool_size - static_cast<std::int64_t>(excluded.size());
    if (legal < K)
        throw std::runtime_error("negative sampling: anchor " + std::to_string(anchor_for_error) +
                                 " has only " + std::to_string(legal) +
                                 " non-neighbors but K=" + std::to_string(K));
    std::vector<std::int32_t> out;
    out.reserve(static_cast<std::size_t>(K));
    if (legal <= 4 * static_cast<std::int64_t>(K)) {
        std::vector<std::int32_t> pool;
        pool.reserve(static_cast<std::size_t>(legal));
        std::size_t e = 0;
        for (std::int32_t v = 0; v < pool_size; ++v) {
            while (e < excluded.size() && excluded[e] < v) ++e;
            if (e < excluded.size() && excluded[e] == v) continue;
            pool.push_back(v);
        }
        for (int k = 0; k < K; ++k) {
            const auto pick = rng.uniform_below(static_cast<std::int64_t>(pool.size()) - k) + k;
            std::swap(pool[k], pool[pick]);
            out.push_back(pool[k]);
        }
    } else {
        while (static_cast<int>(out.size()) < K) {
            const auto v = static_cast<std::int32_t>(rng.uniform_below(pool_size));
            if (std::binary_search(excluded.begin(), excluded.end(), v)) continue;
            if (std::find(out.begin(), out.end(), v) != out.end()) continue;
            out.push_back(v);
        }
    }
    return out;
}

}  // namespace

NegativePairs sample_negative_pairs(const InteractionGraph& g, int K, std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("sample_negative_pairs: K must be >= 1");
    Rng rng(seed);
    NegativePairs np;
    np.pairs.reserve(static_cast<std::size_t>(g.n_u) * K);
    for (std::int64_t u = 0; u < g.n_u; ++u) {
        const auto negs = draw_negatives(g.items_of(u), g.n_i, K, rng, u);
        for (auto j : negs)
            np.pairs.emplace_back(static_cast<std::int32_t>(u),
                                  static_cast<std::int32_t>(g.n_u + j));
    }
    return np;
}

NegativePairs sample_negative_pairs(const PlainGraph& g, int K, std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("sample_negative_pairs: K must be >= 1");
    Rng rng(seed);
    NegativePairs np;
    np.pairs.reserve(static_cast<std::size_t>(g.n) * K);
    std::vector<std::int32_t> excluded;
    for (std::int64_t v = 0; v < g.n; ++v) {
        excluded.assign(g.adj[v].begin(), g.adj[v].end());
        excluded.push_back(static_cast<std::int32_t>(v));  // no self pairs
        std::sort(excluded.begin(), excluded.end());
        const auto negs = draw_negatives(excluded, g.n, K, rng, v);
        for (auto j : negs) np.pairs.emplace_back(static_cast<std::int32_t>(v), j);
    }
    return np;
}

SparseOperator negative_laplacian(std::int64_t n, const NegativePairs& pairs) {
    std::vector<std::tuple<std::int32_t, std::int32_t, double>> t;
    t.reserve(4 * pairs.pairs.size());
    for (const Edge& e : pairs.pairs) {
        t.emplace_back(e.first, e.second, -1.0);
        t.emplace_back(e.second, e.first, -1.0);
        t.emplace_back(e.first, e.first, 1.0);
        t.emplace_back(e.second, e.second, 1.0);
    }
    return SparseOperator::from_triplets(n, std::move(t), OperatorKind::neg_laplacian);
}

SparseOperator sample_negative_laplacian(const InteractionGraph& g, int K, std::uint64_t seed) {
    return negative_laplacian(g.n(), sample_negative_pairs(g, K, seed));
}

SparseOperator sample_negative_laplacian(const PlainGraph& g, int K, std::uint64_t seed) {
    return negative_laplacian(g.n, sample_negative_pairs(g, K, seed));
}

std::vector<std::int64_t> walk_counts(const SparseOperator& a, int k) {
    if (a.kind != OperatorKind::raw)
        throw std::invalid_argument("walk_counts: expected a raw adjacency");
    if (a.n > kDenseOracleMaxNodes)
        throw std::runtime_error("walk_counts: n = " + std::to_string(a.n) +
                                 " exceeds the dense oracle guard (" +
                                 std::to_string(kDenseOracleMaxNodes) +
                                 "); use the sparse operators instead");
    if (k < 0) throw std::invalid_argument("walk_counts: negative length");
    const auto n = static_cast<std::size_t>(a.n);
    std::vector<std::int64_t> result(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) result[i * n + i] = 1;  // A^0 = I
    std::vector<std::int64_t> next(n * n);
    for (int step = 0; step < k; ++step) {
        std::fill(next.begin(), next.end(), 0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::int64_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
                const auto j = static_cast<std::size_t>(a.col[p]);
                const auto w = static_cast<std::int64_t>(a.val[p]);
                // next = A * result accumulated row-wise
                const std::int64_t* src = result.data() + j * n;
                std::int64_t* dst = next.data() + i * n;
                for (std::size_t c = 0; c < n; ++c) dst[c] += w * src[c];
            }
        result.swap(next);
    }
    return result;
}

std::vector<Edge> interaction_block(const SparseOperator& a, std::int64_t n_u) {
    std::vector<Edge> r;
    for (std::int64_t u = 0; u < n_u; ++u)
        for (std::int64_t p = a.row_ptr[u]; p < a.row_ptr[u + 1]; ++p)
            if (a.val[p] != 0.0)
                r.emplace_back(static_cast<std::int32_t>(u),
                               static_cast<std::int32_t>(a.col[p] - n_u));
    return r;
}

}  // namespace grcl
