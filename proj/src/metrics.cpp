#include "grcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "grcl/threading.hpp"

namespace grcl {

std::vector<std::int32_t> rank_items(const Matrix& e, std::int64_t n_u, std::int64_t n_i,
                                     std::int32_t user,
                                     std::span<const std::int32_t> exclude) {
    if (e.rows < n_u + n_i) {
        throw std::invalid_argument("rank_items: embedding table has " +
                                    std::to_string(e.rows) + " rows, need " +
                                    std::to_string(n_u + n_i));
    }
    if (user < 0 || user >= n_u) {
        throw std::invalid_argument("rank_items: user " + std::to_string(user) +
                                    " out of range");
    }
    std::vector<char> drop(static_cast<std::size_t>(n_i), 0);
    for (std::int32_t item : exclude) {
        if (item < 0 || item >= n_i) {
            throw std::invalid_argument("rank_items: excluded item " + std::to_string(item) +
                                        " out of range");
        }
        drop[static_cast<std::size_t>(item)] = 1;
    }

    std::vector<double> score(static_cast<std::size_t>(n_i));
    const auto eu = e.row(user);
    for (std::int64_t i = 0; i < n_i; ++i) {
        score[static_cast<std::size_t>(i)] = dot(eu, e.row(n_u + i));
    }

    std::vector<std::int32_t> order;
    order.reserve(static_cast<std::size_t>(n_i));
    for (std::int64_t i = 0; i < n_i; ++i) {
        if (!drop[static_cast<std::size_t>(i)]) order.push_back(static_cast<std::int32_t>(i));
    }
    std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        double sa = score[static_cast<std::size_t>(a)];
        double sb = score[static_cast<std::size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    return order;
}

namespace {

void check_topk_args(std::span<const std::int32_t> test_items, std::int64_t k,
                     const char* who) {
    if (k < 1) throw std::invalid_argument(std::string(who) + ": k must be >= 1");
    if (test_items.empty()) {
        throw std::invalid_argument(std::string(who) + ": empty test set");
    }
}

}  // namespace

double recall_at_k(std::span<const std::int32_t> ranked,
                   std::span<const std::int32_t> test_items, std::int64_t k) {
    check_topk_args(test_items, k, "recall_at_k");
    std::unordered_set<std::int32_t> test(test_items.begin(), test_items.end());
    std::int64_t top = std::min<std::int64_t>(k, static_cast<std::int64_t>(ranked.size()));
    std::int64_t hits = 0;
    for (std::int64_t r = 0; r < top; ++r) {
        if (test.count(ranked[static_cast<std::size_t>(r)])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

double ndcg_at_k(std::span<const std::int32_t> ranked,
                 std::span<const std::int32_t> test_items, std::int64_t k) {
    check_topk_args(test_items, k, "ndcg_at_k");
    std::unordered_set<std::int32_t> test(test_items.begin(), test_items.end());
    std::int64_t top = std::min<std::int64_t>(k, static_cast<std::int64_t>(ranked.size()));
    double dcg = 0.0;
    for (std::int64_t r = 1; r <= top; ++r) {
        if (test.count(ranked[static_cast<std::size_t>(r - 1)])) {
            dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
        }
    }
    std::int64_t ideal = std::min<std::int64_t>(k, static_cast<std::int64_t>(test.size()));
    double idcg = 0.0;
    for (std::int64_t r = 1; r <= ideal; ++r) {
        idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
    return dcg / idcg;
}

double accuracy(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                std::span<const std::uint8_t> mask) {
    if (pred.size() != truth.size() || pred.size() != mask.size()) {
        throw std::invalid_argument("accuracy: pred/truth/mask lengths disagree");
    }
    std::int64_t total = 0;
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        ++total;
        if (pred[i] == truth[i]) ++correct;
    }
    if (total == 0) throw std::invalid_argument("accuracy: empty mask");
    return static_cast<double>(correct) / static_cast<double>(total);
}

RankingResult evaluate_ranking(const Matrix& e, const InteractionGraph& g, std::int64_t k,
                               int threads) {
    if (k < 1) throw std::invalid_argument("evaluate_ranking: k must be >= 1");
    if (e.rows < g.n()) {
        throw std::invalid_argument("evaluate_ranking: embedding table smaller than graph");
    }

    std::vector<std::vector<std::int32_t>> test_of(static_cast<std::size_t>(g.n_u));
    for (const auto& [u, i] : g.test_edges) {
        test_of[static_cast<std::size_t>(u)].push_back(i);
    }

    RankingResult out;
    out.k = k;
    for (std::int32_t u = 0; u < g.n_u; ++u) {
        if (!test_of[static_cast<std::size_t>(u)].empty()) out.users.push_back(u);
    }
    out.num_users = static_cast<std::int64_t>(out.users.size());
    out.recall.assign(out.users.size(), 0.0);
    out.ndcg.assign(out.users.size(), 0.0);
    if (out.users.empty()) return out;

    parallel_for(static_cast<std::int64_t>(out.users.size()), threads,
                 [&](std::int64_t begin, std::int64_t end) {
                     for (std::int64_t idx = begin; idx < end; ++idx) {
                         std::int32_t u = out.users[static_cast<std::size_t>(idx)];
                         auto ranked = rank_items(e, g.n_u, g.n_i, u, g.items_of(u));
                         const auto& test = test_of[static_cast<std::size_t>(u)];
                         out.recall[static_cast<std::size_t>(idx)] = recall_at_k(ranked, test, k);
                         out.ndcg[static_cast<std::size_t>(idx)] = ndcg_at_k(ranked, test, k);
                     }
                 });

    // Index-order summation keeps the averages bit-identical across thread counts.
    out.mean_recall = std::accumulate(out.recall.begin(), out.recall.end(), 0.0) /
                      static_cast<double>(out.num_users);
    out.mean_ndcg = std::accumulate(out.ndcg.begin(), out.ndcg.end(), 0.0) /
                    static_cast<double>(out.num_users);
    return out;
}

}  // namespace grcl
