#include "grcl/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include "grcl/rng.hpp"

namespace grcl {

BoundConstants bound_constants() {
    const long double e1 = expl(1.0L);
    const long double e2 = expl(2.0L);
    BoundConstants c;
    c.chord = static_cast<double>(logl(2.0L * e2 / (e2 + 1.0L)));
    c.ln2e = static_cast<double>(logl(2.0L * e1));
    c.ln_e_plus_inv_e = static_cast<double>(logl(e1 + 1.0L / e1));
    return c;
}

std::pair<double, double> theorem_bounds(double coles_pos, double coles_neg,
                                         std::int64_t d_min, std::int64_t d_max, int K,
                                         std::int64_t n_u, std::int64_t m) {
    if (d_min < 1) throw std::invalid_argument("theorem_bounds: d_min must be >= 1");
    if (K < 1) throw std::invalid_argument("theorem_bounds: K must be >= 1");
    if (d_max < d_min) throw std::invalid_argument("theorem_bounds: d_max < d_min");
    const auto c = bound_constants();
    const double dK = static_cast<double>(K);
    const double lower = 0.5 * dK * coles_pos - 0.5 * static_cast<double>(d_min) * coles_neg +
                         static_cast<double>(d_min) * dK * static_cast<double>(n_u) -
                         static_cast<double>(m) * dK;
    const double upper = 0.5 * dK * coles_pos -
                         0.25 * static_cast<double>(d_max) * c.chord * coles_neg +
                         static_cast<double>(d_max) * dK * static_cast<double>(n_u) * c.ln2e -
                         static_cast<double>(m) * dK;
    return {lower, upper};
}

BoundReport audit_batch(const Matrix& e, const TrainingBatch& b,
                        std::span<const std::int64_t> anchor_degrees) {
    if (b.size() == 0) throw std::invalid_argument("audit_batch: empty batch");
    for (std::int64_t r = 0; r < e.rows; ++r) {
        const double nrm = std::sqrt(squared_norm(e.row(r)));
        if (std::abs(nrm - 1.0) > 1e-6)
            throw std::runtime_error("audit_batch: row " + std::to_string(r) +
                                     " has norm " + std::to_string(nrm) +
                                     "; the sandwich assumes unit-norm embeddings");
    }

    BoundReport rep;
    rep.K = b.K;
    rep.m_batch = b.size();

    // Theory counts each user's negative set once, weighted by the user's
    // edge multiplicity inside the loss. Audit on that structure: every row
    // of a user shares the user's first-row negatives, and the negative
    // smoothness runs over the distinct (user, negative) pairs.
    TrainingBatch shared = b;
    std::unordered_map<std::int32_t, std::int64_t> first_row;
    std::vector<Edge> distinct_neg;
    for (std::int64_t r = 0; r < b.size(); ++r) {
        const auto u = b.users[static_cast<std::size_t>(r)];
        auto [it, fresh] = first_row.try_emplace(u, r);
        if (fresh) {
            for (int k = 0; k < b.K; ++k)
                distinct_neg.emplace_back(u, static_cast<std::int32_t>(b.neg_node(r, k)));
        } else {
            for (int k = 0; k < b.K; ++k)
                shared.neg_items[static_cast<std::size_t>(r * b.K + k)] =
                    b.neg_items[static_cast<std::size_t>(it->second * b.K + k)];
        }
    }

    const auto anchors = b.unique_user_nodes();
    rep.n_u_batch = static_cast<std::int64_t>(anchors.size());
    rep.d_min = std::numeric_limits<std::int64_t>::max();
    rep.d_max = 0;
    for (auto u : anchors) {
        if (u < 0 || static_cast<std::size_t>(u) >= anchor_degrees.size())
            throw std::invalid_argument("audit_batch: anchor outside the degree table");
        const auto d = anchor_degrees[static_cast<std::size_t>(u)];
        rep.d_min = std::min(rep.d_min, d);
        rep.d_max = std::max(rep.d_max, d);
    }

    rep.bpr = bpr_loss(e, shared).value;
    std::tie(rep.bpr_pos, rep.bpr_neg) = bpr_split(e, shared);
    rep.coles_pos = coles_smoothness(e, shared.positive_pairs());
    rep.coles_neg = coles_smoothness(e, distinct_neg);
    std::tie(rep.lower, rep.upper) =
        theorem_bounds(rep.coles_pos, rep.coles_neg, rep.d_min, rep.d_max, rep.K,
                       rep.n_u_batch, rep.m_batch);

    const auto c = bound_constants();
    rep.beta_l = static_cast<double>(rep.d_min);
    rep.beta_u = 0.5 * static_cast<double>(rep.d_max) * c.chord;
    rep.ratio = rep.beta_u / rep.beta_l;

    const double dK = static_cast<double>(rep.K);
    const double n_u = static_cast<double>(rep.n_u_batch);
    const double m = static_cast<double>(rep.m_batch);

    const double eq19 = 0.5 * dK * rep.coles_pos - m * dK;
    rep.eq19_residual = std::abs(rep.bpr_pos - eq19) / std::max(1.0, std::abs(rep.bpr_pos));

    const double eq20_rhs = -0.5 * static_cast<double>(rep.d_min) * rep.coles_neg +
                            static_cast<double>(rep.d_min) * dK * n_u;
    const double eq21_rhs =
        0.5 * static_cast<double>(rep.d_max) * c.chord * (2.0 * dK * n_u - 0.5 * rep.coles_neg) +
        static_cast<double>(rep.d_max) * dK * n_u * c.ln_e_plus_inv_e;
    const double tol20 = 1e-9 * std::max(1.0, std::abs(rep.bpr_neg));
    rep.eq20_ok = rep.bpr_neg >= eq20_rhs - tol20;
    rep.eq21_ok = rep.bpr_neg <= eq21_rhs + tol20;

    rep.sandwich_ok = rep.lower - 1e-9 <= rep.bpr && rep.bpr <= rep.upper + 1e-9;
    return rep;
}

RatioHistogram beta_ratio_distribution(const InteractionGraph& g, std::int64_t num_batches,
                                       std::int64_t batch_size, int num_bins,
                                       std::uint64_t seed) {
    if (num_batches < 1) throw std::invalid_argument("beta_ratio_distribution: need >= 1 batch");
    if (batch_size < 1) throw std::invalid_argument("beta_ratio_distribution: empty batch");
    if (batch_size > g.m)
        throw std::invalid_argument("beta_ratio_distribution: batch larger than the edge set");
    if (num_bins < 1) throw std::invalid_argument("beta_ratio_distribution: need >= 1 bin");

    const auto c = bound_constants();
    Rng rng(seed);
    RatioHistogram h;
    h.ratios.reserve(static_cast<std::size_t>(num_batches));

    std::vector<std::int64_t> index(static_cast<std::size_t>(g.m));
    for (std::int64_t i = 0; i < g.m; ++i) index[static_cast<std::size_t>(i)] = i;

    for (std::int64_t bi = 0; bi < num_batches; ++bi) {
        // partial Fisher-Yates: first batch_size entries are the sample
        for (std::int64_t k = 0; k < batch_size; ++k) {
            const auto pick = k + rng.uniform_below(g.m - k);
            std::swap(index[static_cast<std::size_t>(k)], index[static_cast<std::size_t>(pick)]);
        }
        std::int64_t d_min = std::numeric_limits<std::int64_t>::max();
        std::int64_t d_max = 0;
        for (std::int64_t k = 0; k < batch_size; ++k) {
            const auto u = g.edges[static_cast<std::size_t>(index[static_cast<std::size_t>(k)])].first;
            const auto d = g.degrees[static_cast<std::size_t>(u)];
            d_min = std::min(d_min, d);
            d_max = std::max(d_max, d);
        }
        h.ratios.push_back(0.5 * static_cast<double>(d_max) / static_cast<double>(d_min) *
                           c.chord);
    }

    const auto [lo_it, hi_it] = std::minmax_element(h.ratios.begin(), h.ratios.end());
    const double lo = *lo_it;
    const double span = std::max(*hi_it - lo, 1e-12);
    h.bin_left.resize(static_cast<std::size_t>(num_bins));
    h.bin_right.resize(static_cast<std::size_t>(num_bins));
    h.counts.assign(static_cast<std::size_t>(num_bins), 0);
    for (int bin = 0; bin < num_bins; ++bin) {
        h.bin_left[static_cast<std::size_t>(bin)] = lo + span * bin / num_bins;
        h.bin_right[static_cast<std::size_t>(bin)] = lo + span * (bin + 1) / num_bins;
    }
    for (double r : h.ratios) {
        auto bin = static_cast<std::int64_t>((r - lo) / span * num_bins);
        bin = std::clamp<std::int64_t>(bin, 0, num_bins - 1);
        ++h.counts[static_cast<std::size_t>(bin)];
    }
    return h;
}

}  // namespace grcl
