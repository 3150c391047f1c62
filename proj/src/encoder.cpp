#include "grcl/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "grcl/rng.hpp"

namespace grcl {

EmbeddingTable EmbeddingTable::init(std::int64_t n, std::int64_t d, std::uint64_t seed) {
    EmbeddingTable t;
    t.e0 = Matrix(n, d);
    Rng rng(seed);
    for (double& v : t.e0.data) v = rng.gaussian(0.0, 0.1);
    t.adam_m = Matrix(n, d);
    t.adam_v = Matrix(n, d);
    t.adam_t = 0;
    return t;
}

const char* to_string(Variant v) {
    return v == Variant::layer_average ? "layer_average" : "selfloop_last";
}

Variant variant_from_string(const std::string& s) {
    if (s == "layer-average" || s == "layer_average") return Variant::layer_average;
    if (s == "selfloop-last" || s == "selfloop_last") return Variant::selfloop_last;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

PropagationConfig PropagationConfig::uniform(int L, Variant v, bool normalize) {
    PropagationConfig cfg;
    cfg.num_layers = L;
    cfg.variant = v;
    cfg.normalize_output = normalize;
    if (v == Variant::layer_average)
        cfg.layer_weights.assign(static_cast<std::size_t>(L) + 1, 1.0 / (L + 1));
    return cfg;
}

void PropagationConfig::validate() const {
    if (num_layers < 0) throw std::invalid_argument("PropagationConfig: negative layer count");
    if (variant == Variant::selfloop_last && layer_weights.empty()) return;
    if (layer_weights.size() != static_cast<std::size_t>(num_layers) + 1)
        throw std::invalid_argument("PropagationConfig: expected " +
                                    std::to_string(num_layers + 1) + " layer weights, got " +
                                    std::to_string(layer_weights.size()));
    double sum = 0.0;
    for (double w : layer_weights) {
        if (w < 0.0) throw std::invalid_argument("PropagationConfig: negative layer weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("PropagationConfig: layer weights sum to " +
                                    std::to_string(sum) + ", expected 1");
}

namespace {

void check_kind(const SparseOperator& op, Variant v) {
    const auto want = v == Variant::layer_average ? OperatorKind::sym_norm
                                                  : OperatorKind::sym_norm_selfloop;
    if (op.kind != want)
        throw std::invalid_argument(std::string("propagate: operator kind ") +
                                    to_string(op.kind) + " does not match variant " +
                                    to_string(v));
}

/// out += c * x
void accumulate(Matrix& out, double c, const Matrix& x) {
    if (c == 0.0) return;
    for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += c * x.data[k];
}

}  // namespace

Matrix propagate(const EmbeddingTable& table, const SparseOperator& op,
                 const PropagationConfig& cfg, PropagationCache* cache, int threads) {
    cfg.validate();
    check_kind(op, cfg.variant);
    if (op.n != table.n())
        throw std::invalid_argument("propagate: operator and embedding sizes differ");

    Matrix z;
    if (cfg.variant == Variant::layer_average) {
        Matrix layer = table.e0;
        z = Matrix(table.n(), table.d());
        accumulate(z, cfg.layer_weights[0], layer);
        for (int l = 1; l <= cfg.num_layers; ++l) {
            layer = op.apply(layer, threads);
            accumulate(z, cfg.layer_weights[static_cast<std::size_t>(l)], layer);
        }
    } else {
        z = table.e0;
        for (int l = 0; l < cfg.num_layers; ++l) z = op.apply(z, threads);
    }

    Matrix e = z;
    std::vector<double> norms;
    if (cfg.normalize_output) norms = normalize_rows(e);
    if (cache) {
        cache->pre_norm = std::move(z);
        cache->norms = std::move(norms);
        cache->num_layers = cfg.num_layers;
        cache->variant = cfg.variant;
        cache->normalize_output = cfg.normalize_output;
    }
    return e;
}

Matrix propagate_backward(const Matrix& grad_e, const PropagationCache& cache,
                          const SparseOperator& op, const PropagationConfig& cfg,
                          int threads) {
    cfg.validate();
    check_kind(op, cfg.variant);
    if (cache.num_layers != cfg.num_layers || cache.variant != cfg.variant ||
        cache.normalize_output != cfg.normalize_output ||
        !grad_e.same_shape(cache.pre_norm))
        throw std::invalid_argument("propagate_backward: cache does not match this call");

    Matrix g = grad_e;
    if (cfg.normalize_output) {
        for (std::int64_t r = 0; r < g.rows; ++r) {
            auto grow = g.row(r);
            const auto zrow = cache.pre_norm.row(r);
            const double nrm = cache.norms[static_cast<std::size_t>(r)];
            // e = z / |z|; adjoint g -> (g - (e.g) e) / |z|
            double eg = 0.0;
            for (std::size_t k = 0; k < grow.size(); ++k) eg += grow[k] * zrow[k] / nrm;
            for (std::size_t k = 0; k < grow.size(); ++k)
                grow[k] = (grow[k] - eg * zrow[k] / nrm) / nrm;
        }
    }

    if (cfg.variant == Variant::selfloop_last) {
        for (int l = 0; l < cfg.num_layers; ++l) g = op.apply(g, threads);
        return g;
    }
    Matrix out(g.rows, g.cols);
    accumulate(out, cfg.layer_weights[0], g);
    for (int l = 1; l <= cfg.num_layers; ++l) {
        g = op.apply(g, threads);
        accumulate(out, cfg.layer_weights[static_cast<std::size_t>(l)], g);
    }
    return out;
}

Matrix gcn_linear_onehot(const EmbeddingTable& table, const SparseOperator& op, int L) {
    if (op.kind != OperatorKind::sym_norm)
        throw std::invalid_argument("gcn_linear_onehot: expected a sym_norm operator");
    if (op.n > kDenseOracleMaxNodes)
        throw std::runtime_error("gcn_linear_onehot: n = " + std::to_string(op.n) +
                                 " exceeds the dense one-hot guard (" +
                                 std::to_string(kDenseOracleMaxNodes) + ")");
    if (L < 0) throw std::invalid_argument("gcn_linear_onehot: negative layer count");
    if (op.n != table.n())
        throw std::invalid_argument("gcn_linear_onehot: operator and embedding sizes differ");

    const std::int64_t n = op.n;
    Matrix x(n, n);
    for (std::int64_t i = 0; i < n; ++i) x.at(i, i) = 1.0;  // one-hot inputs
    for (int l = 0; l < L; ++l) x = op.apply(x);

    // dense (T^L X) W with W the base embeddings
    Matrix e(n, table.d());
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t k = 0; k < n; ++k) {
            const double xik = x.at(i, k);
            if (xik != 0.0) axpy(xik, table.e0.row(k), e.row(i));
        }
    return e;
}

std::int64_t two_hop_count(const SparseOperator& a, std::int64_t u) {
    std::unordered_set<std::int64_t> one_hop;
    for (std::int64_t p = a.row_ptr[u]; p < a.row_ptr[u + 1]; ++p) one_hop.insert(a.col[p]);
    std::unordered_set<std::int64_t> two_hop;
    for (std::int64_t v : one_hop)
        for (std::int64_t p = a.row_ptr[v]; p < a.row_ptr[v + 1]; ++p) {
            const std::int64_t w = a.col[p];
            if (w != u && !one_hop.count(w)) two_hop.insert(w);
        }
    return static_cast<std::int64_t>(two_hop.size());
}

double relative_influence(const SparseOperator& a_raw, std::int64_t u, Variant variant, int L) {
    if (a_raw.kind != OperatorKind::raw)
        throw std::invalid_argument("relative_influence: expected a raw adjacency");
    if (L < 1) throw std::invalid_argument("relative_influence: L must be >= 1");
    if (u < 0 || u >= a_raw.n)
        throw std::invalid_argument("relative_influence: node out of range");
    const auto n = static_cast<std::size_t>(a_raw.n);

    if (variant == Variant::selfloop_last) {
        const auto w = walk_counts(add_self_loops(a_raw), L);
        std::int64_t colsum = 0;
        for (std::size_t i = 0; i < n; ++i) colsum += w[i * n + u];
        return static_cast<double>(w[static_cast<std::size_t>(u) * n + u]) /
               static_cast<double>(colsum);
    }

    double total = 0.0;
    for (int l = 0; l <= L; ++l) {
        const auto w = walk_counts(a_raw, l);
        std::int64_t colsum = 0;
        for (std::size_t i = 0; i < n; ++i) colsum += w[i * n + u];
        if (colsum == 0) continue;  // no depth-l walks reach u
        total += static_cast<double>(w[static_cast<std::size_t>(u) * n + u]) /
                 static_cast<double>(colsum);
    }
    return total;
}

double relative_influence(const InteractionGraph& g, std::int64_t u, Variant variant, int L) {
    return relative_influence(build_adjacency(g), u, variant, L);
}

double relative_influence(const PlainGraph& g, std::int64_t u, Variant variant, int L) {
    return relative_influence(build_adjacency(g), u, variant, L);
}

double influence_closed_form(Variant variant, std::int64_t degree, std::int64_t two_hop) {
    if (variant == Variant::selfloop_last)
        return static_cast<double>(1 + degree) / static_cast<double>(1 + 3 * degree + two_hop);
    return 1.0 + static_cast<double>(degree) / static_cast<double>(degree + two_hop);
}

}  // namespace grcl
