#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "grcl/matrix.hpp"

namespace grcl {

using Edge = std::pair<std::int32_t, std::int32_t>;

/// Bipartite user-item interaction graph. Users occupy node rows [0, n_u)
/// and items rows [n_u, n_u + n_i). `edges` is the training split;
/// `test_edges` is held out for ranking evaluation. Degrees are counted over
/// the training split only.
struct InteractionGraph {
    std::int64_t n_u = 0;
    std::int64_t n_i = 0;
    std::vector<Edge> edges;       // (user, item), item in [0, n_i)
    std::vector<Edge> test_edges;  // disjoint from edges
    std::vector<std::int64_t> degrees;  // size n_u + n_i, training degrees
    std::int64_t m = 0;                 // training edge count

    // id maps, index order; persisted alongside any trained model
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;

    // CSR over training edges: items of user u, sorted ascending
    std::vector<std::int64_t> user_ptr;
    std::vector<std::int32_t> user_items;

    std::int64_t n() const { return n_u + n_i; }

    std::span<const std::int32_t> items_of(std::int64_t u) const {
        return {user_items.data() + user_ptr[u],
                static_cast<std::size_t>(user_ptr[u + 1] - user_ptr[u])};
    }
    bool has_edge(std::int64_t u, std::int32_t item) const;

    /// Validates invariants (index ranges, duplicate-free splits, split
    /// disjointness) and fills degrees/m/CSR. Throws on violation.
    static InteractionGraph build(std::int64_t n_u, std::int64_t n_i,
                                  std::vector<Edge> train_edges,
                                  std::vector<Edge> test_edges = {},
                                  std::vector<std::string> user_ids = {},
                                  std::vector<std::string> item_ids = {});
};

/// Undirected plain graph for the node-level contrastive path. Optional
/// per-node features and integer labels (-1 = unlabeled).
struct PlainGraph {
    std::int64_t n = 0;
    std::vector<Edge> edges;  // each undirected edge stored once, a < b
    std::vector<std::vector<std::int32_t>> adj;  // sorted neighbor lists
    std::optional<Matrix> features;
    std::vector<std::int32_t> labels;  // empty or size n
    std::vector<std::string> node_ids;

    std::int64_t degree(std::int64_t v) const { return static_cast<std::int64_t>(adj[v].size()); }
    bool has_edge(std::int64_t a, std::int32_t b) const;

    static PlainGraph build(std::int64_t n, std::vector<Edge> edges,
                            std::optional<Matrix> features = std::nullopt,
                            std::vector<std::int32_t> labels = {},
                            std::vector<std::string> node_ids = {});
};

enum class OperatorKind {
    raw,                  // A
    sym_norm,             // D^{-1/2} A D^{-1/2}
    sym_norm_selfloop,    // (D+I)^{-1/2} (A+I) (D+I)^{-1/2}
    laplacian,            // D - A
    neg_laplacian,        // Laplacian of a sampled negative-pair graph
};

const char* to_string(OperatorKind k);

/// Symmetric sparse matrix in CSR form with sorted column indices, applied
/// to dense embedding matrices. Values are stored at 64-bit precision.
/// Immutable after construction; `apply` may run row-parallel and its result
/// does not depend on the worker count.
struct SparseOperator {
    std::int64_t n = 0;
    std::vector<std::int64_t> row_ptr;  // size n + 1
    std::vector<std::int32_t> col;
    std::vector<double> val;
    OperatorKind kind = OperatorKind::raw;

    std::int64_t nnz() const { return static_cast<std::int64_t>(col.size()); }
    double entry(std::int64_t i, std::int64_t j) const;

    /// y = M x for dense x (n rows). Row-parallel, deterministic.
    Matrix apply(const Matrix& x, int threads = 1) const;

    /// Builds from (i, j, v) triplets, accumulating duplicates. Checks
    /// structural symmetry and the kind's row-sum / sign invariants.
    static SparseOperator from_triplets(std::int64_t n,
                                        std::vector<std::tuple<std::int32_t, std::int32_t, double>> t,
                                        OperatorKind kind);
};

/// n x n symmetric 0/1 adjacency of the bipartite interaction graph: user
/// block rows [0, n_u), item block columns [n_u, n); 2m nonzeros.
SparseOperator build_adjacency(const InteractionGraph& g);

/// Adjacency of a plain graph (no self loops).
SparseOperator build_adjacency(const PlainGraph& g);

/// Symmetric normalization. Without self loops every touched node needs
/// degree >= 1; violations throw an error naming the node.
SparseOperator normalize_sym(const SparseOperator& a, bool self_loop);

/// L = D - A.
SparseOperator laplacian(const SparseOperator& a);

/// A + I (raw kind), used by the walk-count oracle for the self-loop encoder.
SparseOperator add_self_loops(const SparseOperator& a);

/// One sampled negative pair: anchor node row and negative node row
/// (already in global node coordinates).
struct NegativePairs {
    std::vector<Edge> pairs;  // (anchor, negative), global node indices
};

/// Samples K negative items per anchor user, uniformly without replacement
/// from the items outside N_u. Deterministic given the seed. Throws naming
/// the user when fewer than K legal negatives exist.
NegativePairs sample_negative_pairs(const InteractionGraph& g, int K, std::uint64_t seed);

/// Node-anchored variant for the contrastive path: every node is an anchor
/// and negatives are uniform over non-neighbors (self excluded).
NegativePairs sample_negative_pairs(const PlainGraph& g, int K, std::uint64_t seed);

/// Laplacian of the sampled negative-pair multigraph (parallel pairs
/// accumulate weight).
SparseOperator negative_laplacian(std::int64_t n, const NegativePairs& pairs);

SparseOperator sample_negative_laplacian(const InteractionGraph& g, int K, std::uint64_t seed);
SparseOperator sample_negative_laplacian(const PlainGraph& g, int K, std::uint64_t seed);

inline constexpr std::int64_t kDenseOracleMaxNodes = 2000;

/// Exact A^k over the integers by repeated dense multiplication. Dense
/// oracle for small graphs only (n <= 2000 enforced).
std::vector<std::int64_t> walk_counts(const SparseOperator& a, int k);

/// Extracts the user-item block R back out of a bipartite adjacency
/// (round-trip check support).
std::vector<Edge> interaction_block(const SparseOperator& a, std::int64_t n_u);

}  // namespace grcl
