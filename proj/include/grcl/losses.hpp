#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "grcl/graph.hpp"
#include "grcl/matrix.hpp"

namespace grcl {

/// One mini-batch of ranking triples: row r pairs anchor users[r] with
/// positive item pos_items[r] and K negatives neg_items[r*K .. r*K+K).
/// Items are item-space indices; n_u is the offset into global node rows.
/// The contrastive node path reuses this with n_u = 0 and node indices.
struct TrainingBatch {
    std::vector<std::int32_t> users;
    std::vector<std::int32_t> pos_items;
    std::vector<std::int32_t> neg_items;  // row-major, K per row
    int K = 1;
    std::int64_t n_u = 0;

    std::int64_t size() const { return static_cast<std::int64_t>(users.size()); }
    std::int64_t user_node(std::int64_t r) const { return users[r]; }
    std::int64_t pos_node(std::int64_t r) const { return n_u + pos_items[r]; }
    std::int64_t neg_node(std::int64_t r, int k) const { return n_u + neg_items[r * K + k]; }

    /// Checks ranges, positives in N_u, negatives outside N_u, K >= 1.
    void validate(const InteractionGraph& g) const;

    /// (user, n_u + item) pairs in global node indices.
    std::vector<Edge> positive_pairs() const;
    std::vector<Edge> negative_pairs() const;

    /// Sorted unique anchor nodes / item nodes (positives and negatives).
    std::vector<std::int32_t> unique_user_nodes() const;
    std::vector<std::int32_t> unique_item_nodes() const;
};

/// Loss value with named sub-terms and a dense gradient whose untouched
/// rows are exactly zero; `touched` lists the rows that may be nonzero.
struct LossOutput {
    double value = 0.0;
    std::map<std::string, double> parts;
    Matrix grad;
    std::vector<std::int32_t> touched;
};

/// Inner-product score of two node rows.
inline double score(const Matrix& e, std::int64_t u, std::int64_t i) {
    return dot(e.row(u), e.row(i));
}

/// Numerically stable ln(1 + e^x).
double softplus(double x);

/// Stable ln(e^a + e^b).
double log_sum_exp2(double a, double b);

/// Pairwise ranking loss over the batch triples plus lambda * |E0|^2. The
/// gradient covers only the score terms; the quadratic term's gradient is
/// applied by the optimizer against the base table directly.
LossOutput bpr_loss(const Matrix& e, const TrainingBatch& b, double lambda = 0.0,
                    double e0_sq_norm = 0.0);

/// Split form of the ranking loss: (-K sum of positive scores,
/// sum of ln(e^pos + e^neg)). The two parts sum to bpr_loss at lambda=0.
std::pair<double, double> bpr_split(const Matrix& e, const TrainingBatch& b);

/// Sum of squared row distances over the listed node pairs.
double coles_smoothness(const Matrix& e, const std::vector<Edge>& pairs);

/// Tr(E^T L_pos E) - beta Tr(E^T L_neg E) with gradient 2 (L_pos - beta L_neg) E.
LossOutput coles_loss(const Matrix& e, const SparseOperator& l_pos,
                      const SparseOperator& l_neg, double beta);

/// Sum of Gaussian potentials exp(-t |e_x - e_y|^2) over all ordered pairs
/// (self-pairs included) within the user set plus within the item set.
/// Node indices are global rows. Guarded against accidentally quadratic
/// full-graph evaluation.
LossOutput hom_reg(const Matrix& e, std::span<const std::int32_t> user_set,
                   std::span<const std::int32_t> item_set, double t);

/// Sum of exp(-t |e_i - e_j|^2) over the batch's (positive, negative) item
/// pairs.
LossOutput het_reg(const Matrix& e, const TrainingBatch& b, double t);

/// Combined objective: batch COLES plus both debias regularizers, parts
/// exposed individually.
LossOutput gr_coles_loss(const Matrix& e, const TrainingBatch& b,
                         const SparseOperator& l_pos_batch,
                         const SparseOperator& l_neg_batch, double beta, double t);

/// Laplacians of the batch's positive and negative pair graphs on n nodes.
std::pair<SparseOperator, SparseOperator> batch_laplacians(const TrainingBatch& b,
                                                           std::int64_t n);

}  // namespace grcl
