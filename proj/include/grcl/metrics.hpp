#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "grcl/graph.hpp"
#include "grcl/matrix.hpp"

namespace grcl {

/// Macro-averaged ranking metrics over the users that have at least one
/// held-out test item. Users with empty test sets are excluded from both
/// the per-user vectors and the averages.
struct RankingResult {
    std::vector<std::int32_t> users;  // evaluated users, ascending
    std::vector<double> recall;       // aligned with `users`
    std::vector<double> ndcg;
    double mean_recall = 0.0;
    double mean_ndcg = 0.0;
    std::int64_t k = 0;
    std::int64_t num_users = 0;  // == users.size()
};

/// Scores every item against `user` by inner product of embedding rows,
/// drops the `exclude` items (the user's training interactions), and returns
/// the remaining item indices sorted by descending score. Ties break toward
/// the lower item index so the ordering is deterministic.
/// `e` holds user rows [0, n_u) followed by item rows [n_u, n_u + n_i).
std::vector<std::int32_t> rank_items(const Matrix& e, std::int64_t n_u, std::int64_t n_i,
                                     std::int32_t user,
                                     std::span<const std::int32_t> exclude);

/// |top-k of ranked ∩ test_items| / |test_items|. Requires k >= 1 and a
/// non-empty test set (callers skip users without test items).
double recall_at_k(std::span<const std::int32_t> ranked,
                   std::span<const std::int32_t> test_items, std::int64_t k);

/// Binary-relevance NDCG: DCG sums 1/log2(r+1) over the ranks r <= k that
/// hit a test item; IDCG places all test items at the top ranks.
double ndcg_at_k(std::span<const std::int32_t> ranked,
                 std::span<const std::int32_t> test_items, std::int64_t k);

/// Fraction of masked positions where pred == truth. Throws if the spans
/// disagree in length or the mask selects nothing.
double accuracy(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                std::span<const std::uint8_t> mask);

/// Full-catalog evaluation of an embedding table against the graph's test
/// split. Per-user work is parallel; aggregation runs in user index order so
/// the result is independent of the thread count.
RankingResult evaluate_ranking(const Matrix& e, const InteractionGraph& g, std::int64_t k,
                               int threads = 1);

}  // namespace grcl
