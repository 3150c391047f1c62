#include "grcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace grcl {

namespace {

void check_finite(const char* op, double value) {
    if (!std::isfinite(value))
        throw std::runtime_error(std::string(op) + ": non-finite loss value");
}

std::vector<std::int32_t> sorted_unique(std::vector<std::int32_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

void TrainingBatch::validate(const InteractionGraph& g) const {
    if (K < 1) throw std::invalid_argument("TrainingBatch: K must be >= 1");
    if (n_u != g.n_u) throw std::invalid_argument("TrainingBatch: user offset mismatch");
    if (pos_items.size() != users.size() ||
        neg_items.size() != users.size() * static_cast<std::size_t>(K))
        throw std::invalid_argument("TrainingBatch: ragged batch arrays");
    for (std::int64_t r = 0; r < size(); ++r) {
        const auto u = users[r];
        if (u < 0 || u >= g.n_u) throw std::invalid_argument("TrainingBatch: user out of range");
        const auto i = pos_items[r];
        if (i < 0 || i >= g.n_i) throw std::invalid_argument("TrainingBatch: item out of range");
        if (!g.has_edge(u, i))
            throw std::invalid_argument("TrainingBatch: positive (" + std::to_string(u) + ", " +
                                        std::to_string(i) + ") is not a training edge");
        for (int k = 0; k < K; ++k) {
            const auto j = neg_items[r * K + k];
            if (j < 0 || j >= g.n_i)
                throw std::invalid_argument("TrainingBatch: negative out of range");
            if (g.has_edge(u, j))
                throw std::invalid_argument("TrainingBatch: negative (" + std::to_string(u) +
                                            ", " + std::to_string(j) + ") is a training edge");
        }
    }
}

std::vector<Edge> TrainingBatch::positive_pairs() const {
    std::vector<Edge> p;
    p.reserve(users.size());
    for (std::int64_t r = 0; r < size(); ++r)
        p.emplace_back(users[r], static_cast<std::int32_t>(pos_node(r)));
    return p;
}

std::vector<Edge> TrainingBatch::negative_pairs() const {
    std::vector<Edge> p;
    p.reserve(users.size() * static_cast<std::size_t>(K));
    for (std::int64_t r = 0; r < size(); ++r)
        for (int k = 0; k < K; ++k)
            p.emplace_back(users[r], static_cast<std::int32_t>(neg_node(r, k)));
    return p;
}

std::vector<std::int32_t> TrainingBatch::unique_user_nodes() const {
    return sorted_unique(users);
}

std::vector<std::int32_t> TrainingBatch::unique_item_nodes() const {
    std::vector<std::int32_t> v;
    v.reserve(users.size() * (1 + static_cast<std::size_t>(K)));
    for (std::int64_t r = 0; r < size(); ++r) {
        v.push_back(static_cast<std::int32_t>(pos_node(r)));
        for (int k = 0; k < K; ++k) v.push_back(static_cast<std::int32_t>(neg_node(r, k)));
    }
    return sorted_unique(std::move(v));
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double log_sum_exp2(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

LossOutput bpr_loss(const Matrix& e, const TrainingBatch& b, double lambda,
                    double e0_sq_norm) {
    LossOutput out;
    out.grad = Matrix(e.rows, e.cols);
    double raw = 0.0;
    for (std::int64_t r = 0; r < b.size(); ++r) {
        const auto u = b.user_node(r);
        const auto i = b.pos_node(r);
        const double y_ui = score(e, u, i);
        for (int k = 0; k < b.K; ++k) {
            const auto j = b.neg_node(r, k);
            const double z = y_ui - score(e, u, j);
            raw += softplus(-z);
            // d softplus(-z)/dz = sigmoid(z) - 1
            const double c = 1.0 / (1.0 + std::exp(-z)) - 1.0;
            auto gu = out.grad.row(u);
            for (std::int64_t q = 0; q < e.cols; ++q)
                gu[q] += c * (e.at(i, q) - e.at(j, q));
            axpy(c, e.row(u), out.grad.row(i));
            axpy(-c, e.row(u), out.grad.row(j));
        }
    }
    out.parts["bpr"] = raw;
    out.parts["l2"] = lambda * e0_sq_norm;
    out.value = raw + lambda * e0_sq_norm;
    check_finite("bpr_loss", out.value);
    std::vector<std::int32_t> touched = b.unique_user_nodes();
    const auto items = b.unique_item_nodes();
    touched.insert(touched.end(), items.begin(), items.end());
    out.touched = sorted_unique(std::move(touched));
    return out;
}

std::pair<double, double> bpr_split(const Matrix& e, const TrainingBatch& b) {
    double pos = 0.0, neg = 0.0;
    for (std::int64_t r = 0; r < b.size(); ++r) {
        const auto u = b.user_node(r);
        const double y_ui = score(e, u, b.pos_node(r));
        pos -= b.K * y_ui;
        for (int k = 0; k < b.K; ++k)
            neg += log_sum_exp2(y_ui, score(e, u, b.neg_node(r, k)));
    }
    return {pos, neg};
}

double coles_smoothness(const Matrix& e, const std::vector<Edge>& pairs) {
    double s = 0.0;
    for (const auto& [a, b] : pairs) s += squared_distance(e.row(a), e.row(b));
    return s;
}

namespace {

/// trace(E^T M E) and grad += 2 c M E for a sparse symmetric M.
double trace_quadratic(const Matrix& e, const SparseOperator& m, double c, Matrix& grad) {
    double tr = 0.0;
    for (std::int64_t i = 0; i < m.n; ++i) {
        if (m.row_ptr[i] == m.row_ptr[i + 1]) continue;
        auto gi = grad.row(i);
        const auto ei = e.row(i);
        for (std::int64_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p) {
            const auto ej = e.row(m.col[p]);
            const double v = m.val[p];
            tr += v * dot(ei, ej);
            axpy(2.0 * c * v, ej, gi);
        }
    }
    return tr;
}

}  // namespace

LossOutput coles_loss(const Matrix& e, const SparseOperator& l_pos,
                      const SparseOperator& l_neg, double beta) {
    if (l_pos.kind != OperatorKind::laplacian && l_pos.kind != OperatorKind::neg_laplacian)
        throw std::invalid_argument("coles_loss: positive operator is not a Laplacian");
    if (l_neg.kind != OperatorKind::laplacian && l_neg.kind != OperatorKind::neg_laplacian)
        throw std::invalid_argument("coles_loss: negative operator is not a Laplacian");
    if (l_pos.n != e.rows || l_neg.n != e.rows)
        throw std::invalid_argument("coles_loss: operator size does not match embeddings");

    LossOutput out;
    out.grad = Matrix(e.rows, e.cols);
    const double tr_pos = trace_quadratic(e, l_pos, 1.0, out.grad);
    const double tr_neg = trace_quadratic(e, l_neg, -beta, out.grad);
    out.parts["coles_pos"] = tr_pos;
    out.parts["coles_neg"] = tr_neg;
    out.value = tr_pos - beta * tr_neg;
    check_finite("coles_loss", out.value);
    for (std::int64_t i = 0; i < e.rows; ++i)
        if (l_pos.row_ptr[i] != l_pos.row_ptr[i + 1] || l_neg.row_ptr[i] != l_neg.row_ptr[i + 1])
            out.touched.push_back(static_cast<std::int32_t>(i));
    return out;
}

namespace {

constexpr std::int64_t kPairSetGuard = 8192;

/// Adds the ordered-pair Gaussian potential sum over one node set.
double potential_sum(const Matrix& e, std::span<const std::int32_t> set, double t,
                     Matrix& grad) {
    double s = 0.0;
    for (std::size_t a = 0; a < set.size(); ++a) {
        for (std::size_t b = 0; b < set.size(); ++b) {
            const auto x = set[a];
            const auto y = set[b];
            const double d2 = squared_distance(e.row(x), e.row(y));
            const double w = std::exp(-t * d2);
            s += w;
            if (x == y) continue;
            // d w / d e_x = -2 t w (e_x - e_y); ordered pair (y,x) adds the mirror
            const double c = -2.0 * t * w;
            auto gx = grad.row(x);
            auto gy = grad.row(y);
            for (std::int64_t q = 0; q < e.cols; ++q) {
                const double diff = e.at(x, q) - e.at(y, q);
                gx[q] += c * diff;
                gy[q] -= c * diff;
            }
        }
    }
    return s;
}

}  // namespace

LossOutput hom_reg(const Matrix& e, std::span<const std::int32_t> user_set,
                   std::span<const std::int32_t> item_set, double t) {
    if (t <= 0.0) throw std::invalid_argument("hom_reg: t must be positive");
    if (static_cast<std::int64_t>(user_set.size()) > kPairSetGuard ||
        static_cast<std::int64_t>(item_set.size()) > kPairSetGuard)
        throw std::runtime_error(
            "hom_reg: node set exceeds the quadratic-cost guard; restrict to a batch");
    LossOutput out;
    out.grad = Matrix(e.rows, e.cols);
    const double hu = potential_sum(e, user_set, t, out.grad);
    const double hi = potential_sum(e, item_set, t, out.grad);
    out.parts["hom_user"] = hu;
    out.parts["hom_item"] = hi;
    out.value = hu + hi;
    check_finite("hom_reg", out.value);
    std::vector<std::int32_t> touched(user_set.begin(), user_set.end());
    touched.insert(touched.end(), item_set.begin(), item_set.end());
    out.touched = sorted_unique(std::move(touched));
    return out;
}

LossOutput het_reg(const Matrix& e, const TrainingBatch& b, double t) {
    if (t <= 0.0) throw std::invalid_argument("het_reg: t must be positive");
    LossOutput out;
    out.grad = Matrix(e.rows, e.cols);
    double s = 0.0;
    for (std::int64_t r = 0; r < b.size(); ++r) {
        const auto i = b.pos_node(r);
        for (int k = 0; k < b.K; ++k) {
            const auto j = b.neg_node(r, k);
            const double w = std::exp(-t * squared_distance(e.row(i), e.row(j)));
            s += w;
            const double c = -2.0 * t * w;
            auto gi = out.grad.row(i);
            auto gj = out.grad.row(j);
            for (std::int64_t q = 0; q < e.cols; ++q) {
                const double diff = e.at(i, q) - e.at(j, q);
                gi[q] += c * diff;
                gj[q] -= c * diff;
            }
        }
    }
    out.value = s;
    out.parts["het"] = s;
    check_finite("het_reg", out.value);
    out.touched = b.unique_item_nodes();
    return out;
}

LossOutput gr_coles_loss(const Matrix& e, const TrainingBatch& b,
                         const SparseOperator& l_pos_batch,
                         const SparseOperator& l_neg_batch, double beta, double t) {
    auto out = coles_loss(e, l_pos_batch, l_neg_batch, beta);
    const auto users = b.unique_user_nodes();
    const auto items = b.unique_item_nodes();
    const auto hom = hom_reg(e, users, items, t);
    const auto het = het_reg(e, b, t);

    out.value += hom.value + het.value;
    for (const auto& [k, v] : hom.parts) out.parts[k] = v;
    for (const auto& [k, v] : het.parts) out.parts[k] = v;
    for (std::size_t q = 0; q < out.grad.data.size(); ++q)
        out.grad.data[q] += hom.grad.data[q] + het.grad.data[q];
    std::vector<std::int32_t> touched = out.touched;
    touched.insert(touched.end(), hom.touched.begin(), hom.touched.end());
    touched.insert(touched.end(), het.touched.begin(), het.touched.end());
    out.touched = sorted_unique(std::move(touched));
    check_finite("gr_coles_loss", out.value);
    return out;
}

std::pair<SparseOperator, SparseOperator> batch_laplacians(const TrainingBatch& b,
                                                           std::int64_t n) {
    NegativePairs pos{b.positive_pairs()};
    NegativePairs neg{b.negative_pairs()};
    auto l_pos = negative_laplacian(n, pos);
    auto l_neg = negative_laplacian(n, neg);
    l_pos.kind = OperatorKind::laplacian;
    return {std::move(l_pos), std::move(l_neg)};
}

}  // namespace grcl
