#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "grcl/graph.hpp"
#include "grcl/losses.hpp"
#include "grcl/matrix.hpp"

namespace grcl {

/// Constants of the sandwich theorem, computed at runtime in extended
/// precision (never hard-coded decimals): chord = ln(2e^2/(e^2+1)),
/// ln2e = ln(2e), ln_e_plus_inv_e = ln(e + 1/e).
struct BoundConstants {
    double chord;
    double ln2e;
    double ln_e_plus_inv_e;
};

BoundConstants bound_constants();

/// Everything audited for one batch: the ranking loss and its split, the
/// smoothness terms, the sandwich, the negative-term coefficients, and the
/// per-part inequality checks.
struct BoundReport {
    double bpr = 0.0;
    double bpr_pos = 0.0;
    double bpr_neg = 0.0;
    double coles_pos = 0.0;
    double coles_neg = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double beta_l = 0.0;  // d_min
    double beta_u = 0.0;  // (d_max/2) ln(2e^2/(e^2+1))
    double ratio = 0.0;   // beta_u / beta_l
    std::int64_t d_min = 0;
    std::int64_t d_max = 0;
    int K = 0;
    std::int64_t n_u_batch = 0;
    std::int64_t m_batch = 0;
    double eq19_residual = 0.0;  // relative
    bool eq20_ok = false;
    bool eq21_ok = false;
    bool sandwich_ok = false;
};

/// Sandwich endpoints for given smoothness terms and batch counts.
/// lower = (K/2) c_pos - (d_min/2) c_neg + d_min K n_u - m K
/// upper = (K/2) c_pos - (d_max/4) chord c_neg + d_max K n_u ln(2e) - m K
std::pair<double, double> theorem_bounds(double coles_pos, double coles_neg,
                                         std::int64_t d_min, std::int64_t d_max, int K,
                                         std::int64_t n_u, std::int64_t m);

/// Audits one batch against the sandwich and its per-part inequalities.
/// anchor_degrees[u] is user u's full training degree; extrema are taken
/// over the batch's distinct anchors. Rows of e must be unit norm within
/// 1e-6 (the theory presupposes normalized embeddings).
BoundReport audit_batch(const Matrix& e, const TrainingBatch& b,
                        std::span<const std::int64_t> anchor_degrees);

/// Per-batch coefficient ratios beta_u / beta_l plus a fixed-bin histogram.
struct RatioHistogram {
    std::vector<double> ratios;  // one per batch, in batch order
    std::vector<double> bin_left;
    std::vector<double> bin_right;
    std::vector<std::int64_t> counts;
};

/// Samples num_batches random edge batches of size batch_size and computes
/// each batch's ratio from its anchor-degree extrema. The embeddings play
/// no role in the ratio, so none are taken.
RatioHistogram beta_ratio_distribution(const InteractionGraph& g, std::int64_t num_batches,
                                       std::int64_t batch_size, int num_bins,
                                       std::uint64_t seed);

}  // namespace grcl
