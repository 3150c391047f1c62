#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "grcl/bounds.hpp"
#include "grcl/rng.hpp"

using namespace grcl;

namespace {

Matrix random_unit_rows(std::int64_t n, std::int64_t d, Rng& rng) {
    Matrix e(n, d);
    for (double& v : e.data) v = rng.gaussian(0.0, 1.0);
    normalize_rows(e);
    return e;
}

/// Batch covering every (user, item) edge of a random degree profile, with
/// one shared K-negative set per user; degrees[u] = multiplicity of u.
struct AuditInstance {
    TrainingBatch batch;
    std::vector<std::int64_t> degrees;
    std::int64_t n = 0;
};

AuditInstance random_audit_instance(Rng& rng) {
    const auto n_u = 2 + rng.uniform_below(19);       // <= 20
    const auto n_i = 8 + rng.uniform_below(20);
    const int K = 1 + static_cast<int>(rng.uniform_below(3));
    AuditInstance inst;
    inst.batch.K = K;
    inst.batch.n_u = n_u;
    inst.degrees.assign(static_cast<std::size_t>(n_u), 0);
    for (std::int64_t u = 0; u < n_u; ++u) {
        const auto d_u = 1 + rng.uniform_below(5);
        inst.degrees[static_cast<std::size_t>(u)] = d_u;
        // d_u distinct positives, then one shared negative set disjoint
        // from those positives
        std::vector<std::int32_t> items(static_cast<std::size_t>(n_i));
        for (std::int32_t i = 0; i < n_i; ++i) items[static_cast<std::size_t>(i)] = i;
        rng.shuffle(items);
        std::vector<std::int32_t> negs(items.begin() + d_u, items.begin() + d_u + K);
        for (std::int64_t r = 0; r < d_u; ++r) {
            inst.batch.users.push_back(static_cast<std::int32_t>(u));
            inst.batch.pos_items.push_back(items[static_cast<std::size_t>(r)]);
            for (auto j : negs) inst.batch.neg_items.push_back(j);
        }
    }
    inst.n = n_u + n_i;
    return inst;
}

}  // namespace

TEST_CASE("theorem constants match the frozen oracle and each other") {
    const auto c = bound_constants();
    CHECK(c.chord == doctest::Approx(0.566219169516972813).epsilon(1e-14));
    CHECK(c.ln2e == doctest::Approx(1.693147180559945309).epsilon(1e-14));
    CHECK(c.ln_e_plus_inv_e == doctest::Approx(1.126928011042972496).epsilon(1e-14));

    // route 2: ln 2 + 2 - ln(e^2 + 1)
    const double route2 = std::log(2.0) + 2.0 - std::log(std::exp(2.0) + 1.0);
    CHECK(std::abs(c.chord - route2) <= 1e-12);
    // route 3: chord endpoints ln(2e) - ln(e + 1/e)
    CHECK(std::abs(c.chord - (c.ln2e - c.ln_e_plus_inv_e)) <= 1e-12);
    // the constant in the theorem statement collapses: ln((2e^3+2e)/(e^2+1)) = ln(2e)
    const double folded =
        std::log((2.0 * std::exp(3.0) + 2.0 * std::exp(1.0)) / (std::exp(2.0) + 1.0));
    CHECK(std::abs(c.ln2e - folded) <= 1e-12);
    CHECK(std::abs(c.ln2e - (1.0 + std::log(2.0))) <= 1e-12);
}

TEST_CASE("plug-in endpoints") {
    const auto [lower, upper] = theorem_bounds(2.0, 2.0, 1, 1, 1, 1, 1);
    CHECK(lower == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(upper == doctest::Approx(1.410037595801458903).epsilon(1e-12));
}

TEST_CASE("endpoint preconditions") {
    CHECK_THROWS(theorem_bounds(1.0, 1.0, 0, 1, 1, 1, 1));
    CHECK_THROWS(theorem_bounds(1.0, 1.0, 1, 1, 0, 1, 1));
    CHECK_THROWS(theorem_bounds(1.0, 1.0, 3, 2, 1, 1, 1));
}

TEST_CASE("widening the degree spread never tightens the sandwich") {
    const double c_pos = 3.0, c_neg = 5.0;
    double prev_width = -1.0;
    for (std::int64_t d_max = 2; d_max <= 40; d_max += 2) {
        const auto [lo, up] = theorem_bounds(c_pos, c_neg, 2, d_max, 2, 7, 11);
        const double width = up - lo;
        CHECK(width >= prev_width);
        prev_width = width;
    }
}

TEST_CASE("audit rejects unnormalized rows") {
    Rng rng(3);
    auto inst = random_audit_instance(rng);
    Matrix e(inst.n, 4, 0.5);  // rows of norm 1 only if d*0.25 == 1
    e.at(0, 0) = 3.0;
    CHECK_THROWS_WITH(audit_batch(e, inst.batch, inst.degrees), doctest::Contains("norm"));
}

TEST_CASE("audit reports batch degree extrema") {
    Rng rng(5);
    TrainingBatch b;
    b.K = 1;
    b.n_u = 3;
    b.users = {0, 1, 2};
    b.pos_items = {0, 1, 2};
    b.neg_items = {3, 3, 3};
    std::vector<std::int64_t> degrees{2, 5, 7};
    auto e = random_unit_rows(3 + 4, 4, rng);
    auto rep = audit_batch(e, b, degrees);
    CHECK(rep.d_min == 2);
    CHECK(rep.d_max == 7);
    CHECK(rep.n_u_batch == 3);
    CHECK(rep.m_batch == 3);
    CHECK(rep.beta_l == 2.0);
    CHECK(rep.beta_u == doctest::Approx(3.5 * 0.566219169516972813).epsilon(1e-12));
    CHECK(rep.ratio == doctest::Approx(rep.beta_u / rep.beta_l));
}

TEST_CASE("degenerate identical embeddings satisfy the exact identity") {
    TrainingBatch b;
    b.K = 2;
    b.n_u = 2;
    b.users = {0, 0, 1};
    b.pos_items = {0, 1, 0};
    b.neg_items = {2, 3, 2, 3, 2, 3};
    std::vector<std::int64_t> degrees{2, 1};
    Matrix e(2 + 4, 2);
    for (std::int64_t r = 0; r < e.rows; ++r) {
        e.at(r, 0) = 0.6;
        e.at(r, 1) = 0.8;
    }
    auto rep = audit_batch(e, b, degrees);
    CHECK(rep.coles_pos == 0.0);
    CHECK(rep.bpr_pos == doctest::Approx(-2.0 * 3.0).epsilon(1e-12));  // -K m
    CHECK(rep.eq19_residual <= 1e-12);
    CHECK(rep.sandwich_ok);
}

TEST_CASE("sandwich and per-part inequalities hold on random instances") {
    Rng rng(424242);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto inst = random_audit_instance(rng);
        const auto d = 3 + rng.uniform_below(6);
        auto e = random_unit_rows(inst.n, d, rng);
        auto rep = audit_batch(e, inst.batch, inst.degrees);
        CHECK(rep.eq19_residual <= 1e-9);
        CHECK(rep.eq20_ok);
        CHECK(rep.eq21_ok);
        CHECK(rep.sandwich_ok);
        CHECK(rep.lower - 1e-9 <= rep.bpr);
        CHECK(rep.bpr <= rep.upper + 1e-9);
        // consistency between the split and the total
        CHECK(rep.bpr_pos + rep.bpr_neg == doctest::Approx(rep.bpr).epsilon(1e-10));
        ++checked;
    }
    CHECK(checked == 200);
}

TEST_CASE("audit shares one negative set per user") {
    // two rows of the same user with different negative lists: the second
    // list is replaced by the first, so both rows score the same negatives
    Rng rng(8);
    TrainingBatch b;
    b.K = 1;
    b.n_u = 1;
    b.users = {0, 0};
    b.pos_items = {0, 1};
    b.neg_items = {2, 3};  // second row differs
    std::vector<std::int64_t> degrees{2};
    auto e = random_unit_rows(1 + 4, 3, rng);

    auto rep = audit_batch(e, b, degrees);
    // distinct negative pairs: only (u0, item 2): coles_neg uses one pair
    const double d2 = squared_distance(e.row(0), e.row(1 + 2));
    CHECK(rep.coles_neg == doctest::Approx(d2).epsilon(1e-12));
}

TEST_CASE("ratio distribution on an equal-degree graph is a point mass") {
    // every user has the same degree, so every batch ratio equals chord/2
    std::vector<Edge> edges;
    for (std::int32_t u = 0; u < 6; ++u)
        for (std::int32_t i = 0; i < 3; ++i) edges.emplace_back(u, (u + i) % 9);
    auto g = InteractionGraph::build(6, 9, std::move(edges));
    auto h = beta_ratio_distribution(g, 40, 4, 10, 77);
    REQUIRE(h.ratios.size() == 40);
    for (double r : h.ratios)
        CHECK(r == doctest::Approx(0.283109584758486406).epsilon(1e-12));
    std::int64_t total = 0;
    for (auto c : h.counts) total += c;
    CHECK(total == 40);
}

TEST_CASE("ratio distribution is deterministic in the seed") {
    const int profile[8] = {1, 2, 3, 4, 5, 6, 2, 3};
    std::vector<Edge> edges;
    for (std::int32_t u = 0; u < 8; ++u)
        for (int k = 0; k < profile[u]; ++k) edges.emplace_back(u, (u * 3 + k) % 12);
    auto g = InteractionGraph::build(8, 12, std::move(edges));
    auto a = beta_ratio_distribution(g, 25, 5, 8, 5);
    auto b = beta_ratio_distribution(g, 25, 5, 8, 5);
    CHECK(a.ratios == b.ratios);
    CHECK(a.counts == b.counts);
    auto c = beta_ratio_distribution(g, 25, 5, 8, 6);
    CHECK(a.ratios != c.ratios);

    // the documented spread: ratio reaches 1 when d_max/d_min ~ 3.5318
    for (double r : a.ratios) CHECK(r > 0.0);
    REQUIRE(a.bin_left.size() == 8);
    CHECK(a.bin_left.front() == doctest::Approx(*std::min_element(a.ratios.begin(),
                                                                  a.ratios.end())));
}

TEST_CASE("ratio distribution input validation") {
    auto g = InteractionGraph::build(2, 3, {{0, 0}, {1, 1}});
    CHECK_THROWS(beta_ratio_distribution(g, 0, 1, 10, 1));
    CHECK_THROWS(beta_ratio_distribution(g, 1, 0, 10, 1));
    CHECK_THROWS(beta_ratio_distribution(g, 1, 3, 10, 1));  // batch > edges
    CHECK_THROWS(beta_ratio_distribution(g, 1, 1, 0, 1));
}

TEST_CASE("ratio crosses one near the documented degree spread") {
    const auto c = bound_constants();
    // 0.5 * (d_max/d_min) * chord = 1  =>  d_max/d_min = 2/chord
    const double crossing = 2.0 / c.chord;
    CHECK(crossing == doctest::Approx(3.5318).epsilon(1e-4));
}
