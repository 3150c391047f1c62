#include "grcl/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include "grcl/data.hpp"
#include "grcl/metrics.hpp"
#include "grcl/rng.hpp"

namespace grcl {

namespace {

// rng stream tags; one fixed stream per purpose keeps runs reproducible
// independent of loop structure
constexpr std::uint64_t kTagInit = 11;
constexpr std::uint64_t kTagShuffle = 12;
constexpr std::uint64_t kTagNegatives = 13;
constexpr std::uint64_t kTagGclNeg = 1000;
constexpr std::uint64_t kTagGclPos = 2000;

void check_positive(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("TrainConfig: ") + what);
}

std::string batch_label(std::int64_t epoch, std::int64_t batch) {
    return "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch);
}

/// K distinct items outside N_u, written to out[0..K). Rejection sampling
/// with an exact enumeration fallback so tight item sets still terminate.
void draw_row_negatives(const InteractionGraph& g, Rng& rng, std::int32_t u, int K,
                        std::int32_t* out) {
    const auto items = g.items_of(u);
    const std::int64_t legal = g.n_i - static_cast<std::int64_t>(items.size());
    if (legal < K)
        throw std::runtime_error("negative sampling: user " + std::to_string(u) + " has only " +
                                 std::to_string(legal) + " legal negatives, need " +
                                 std::to_string(K));
    const auto taken = [&](std::int32_t c, int got) {
        for (int j = 0; j < got; ++j)
            if (out[j] == c) return true;
        return false;
    };
    int got = 0;
    for (int attempts = 0; got < K && attempts < 64 * K; ++attempts) {
        const auto c = static_cast<std::int32_t>(rng.uniform_below(g.n_i));
        if (g.has_edge(u, c) || taken(c, got)) continue;
        out[got++] = c;
    }
    if (got == K) return;
    std::vector<std::int32_t> pool;
    pool.reserve(static_cast<std::size_t>(legal - got));
    for (std::int32_t c = 0; c < g.n_i; ++c)
        if (!g.has_edge(u, c) && !taken(c, got)) pool.push_back(c);
    for (; got < K; ++got) {
        const auto pick = static_cast<std::size_t>(rng.uniform_below(static_cast<std::int64_t>(pool.size())));
        out[got] = pool[pick];
        pool[pick] = pool.back();
        pool.pop_back();
    }
}

std::vector<std::int32_t> sorted_unique(std::vector<std::int32_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

void add_scaled(LossOutput& acc, const LossOutput& term, double scale) {
    acc.value += scale * term.value;
    for (const auto& [k, v] : term.parts) acc.parts[k] += scale * v;
    for (std::size_t q = 0; q < acc.grad.data.size(); ++q)
        acc.grad.data[q] += scale * term.grad.data[q];
    acc.touched.insert(acc.touched.end(), term.touched.begin(), term.touched.end());
}

/// Combined objective with ablation scales on the contrastive and debias
/// terms; reduces to gr_coles_loss at scales (1, 1).
LossOutput gr_objective(const Matrix& e, const TrainingBatch& b, const SparseOperator& l_pos,
                        const SparseOperator& l_neg, double beta, double t, double coles_scale,
                        double reg_scale) {
    if (coles_scale == 1.0 && reg_scale == 1.0)
        return gr_coles_loss(e, b, l_pos, l_neg, beta, t);
    LossOutput out;
    out.grad = Matrix(e.rows, e.cols, 0.0);
    add_scaled(out, coles_loss(e, l_pos, l_neg, beta), coles_scale);
    const auto users = b.unique_user_nodes();
    const auto items = b.unique_item_nodes();
    add_scaled(out, hom_reg(e, users, items, t), reg_scale);
    add_scaled(out, het_reg(e, b, t), reg_scale);
    out.touched = sorted_unique(std::move(out.touched));
    return out;
}

/// Ranking loss over explicit node triples (anchor, positive, negative);
/// the node-level counterpart of the bipartite ranking loss.
LossOutput triple_bpr_loss(const Matrix& e, const std::vector<std::array<std::int32_t, 3>>& triples) {
    LossOutput out;
    out.grad = Matrix(e.rows, e.cols, 0.0);
    std::vector<std::int32_t> touched;
    touched.reserve(triples.size() * 3);
    for (const auto& tr : triples) {
        const auto a = tr[0], v = tr[1], w = tr[2];
        const double y = score(e, a, v) - score(e, a, w);
        out.value += softplus(-y);
        const double c = -1.0 / (1.0 + std::exp(y));  // d softplus(-y) / d y
        const auto ea = e.row(a);
        const auto ev = e.row(v);
        const auto ew = e.row(w);
        auto ga = out.grad.row(a);
        auto gv = out.grad.row(v);
        auto gw = out.grad.row(w);
        for (std::size_t k = 0; k < ea.size(); ++k) {
            ga[k] += c * (ev[k] - ew[k]);
            gv[k] += c * ea[k];
            gw[k] -= c * ea[k];
        }
        touched.push_back(a);
        touched.push_back(v);
        touched.push_back(w);
    }
    out.parts["bpr"] = out.value;
    out.touched = sorted_unique(std::move(touched));
    return out;
}

void add_l2_part(LossOutput& out, const EmbeddingTable& table, double lambda) {
    if (lambda <= 0.0) return;
    const double l2 = lambda * frobenius_sq(table.e0);
    out.value += l2;
    out.parts["l2"] = l2;
}

}  // namespace

const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::bpr: return "bpr";
        case LossKind::coles: return "coles";
        case LossKind::gr_coles: return "gr-coles";
    }
    return "?";
}

LossKind loss_from_string(const std::string& s) {
    if (s == "bpr") return LossKind::bpr;
    if (s == "coles") return LossKind::coles;
    if (s == "gr-coles" || s == "gr_coles") return LossKind::gr_coles;
    throw std::invalid_argument("unknown loss '" + s + "' (expected bpr, coles, or gr-coles)");
}

const char* to_string(NormalizeMode m) {
    switch (m) {
        case NormalizeMode::off: return "off";
        case NormalizeMode::on: return "on";
        case NormalizeMode::auto_select: return "auto";
    }
    return "?";
}

NormalizeMode normalize_from_string(const std::string& s) {
    if (s == "off") return NormalizeMode::off;
    if (s == "on") return NormalizeMode::on;
    if (s == "auto") return NormalizeMode::auto_select;
    throw std::invalid_argument("unknown normalize mode '" + s + "' (expected on, off, or auto)");
}

void adam_step(EmbeddingTable& table, const Matrix& grad, OptimizerState& state, double lambda,
               const std::string& batch_label) {
    if (!grad.same_shape(table.e0)) throw std::logic_error("adam_step: gradient shape mismatch");
    if (!table.adam_m.same_shape(table.e0) || !table.adam_v.same_shape(table.e0))
        throw std::logic_error("adam_step: moment shape mismatch");
    if (state.step != table.adam_t)
        throw std::logic_error("adam_step: optimizer state out of sync with table");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("adam_step: lambda must be finite and >= 0");
    const std::string& label = batch_label.empty() ? "unlabeled batch" : batch_label;

    ++state.step;
    table.adam_t = state.step;
    const auto t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::int64_t r = 0; r < grad.rows; ++r) {
        const auto gr = grad.row(r);
        bool active = lambda > 0.0;
        for (const double gk : gr) {
            if (!std::isfinite(gk))
                throw std::runtime_error("adam_step: non-finite gradient at row " +
                                         std::to_string(r) + " in " + label);
            if (gk != 0.0) active = true;
        }
        if (!active) continue;
        auto er = table.e0.row(r);
        auto mr = table.adam_m.row(r);
        auto vr = table.adam_v.row(r);
        for (std::size_t k = 0; k < gr.size(); ++k) {
            const double gk = gr[k] + 2.0 * lambda * er[k];
            mr[k] = state.beta1 * mr[k] + (1.0 - state.beta1) * gk;
            vr[k] = state.beta2 * vr[k] + (1.0 - state.beta2) * gk * gk;
            er[k] -= state.lr * (mr[k] / bc1) / (std::sqrt(vr[k] / bc2) + state.eps);
        }
    }
}

TrainConfig TrainConfig::node_defaults() {
    TrainConfig cfg;
    cfg.loss = LossKind::coles;
    cfg.layers = 2;
    cfg.dim = 512;
    return cfg;
}

void TrainConfig::validate() const {
    check_positive(epochs >= 0, "epochs must be >= 0");
    check_positive(batch_size >= 1, "batch_size must be >= 1");
    check_positive(K >= 1, "K must be >= 1");
    check_positive(std::isfinite(lr) && lr > 0.0, "lr must be positive");
    check_positive(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
    check_positive(std::isfinite(t) && t > 0.0, "t must be positive");
    check_positive(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0");
    check_positive(layers >= 0 && layers <= 64, "layers must be in [0, 64]");
    check_positive(dim >= 1, "dim must be >= 1");
    check_positive(eval_every >= 1, "eval_every must be >= 1");
    check_positive(patience >= 1, "patience must be >= 1");
    check_positive(eval_k >= 1, "eval_k must be >= 1");
    check_positive(std::isfinite(coles_scale) && coles_scale >= 0.0, "coles_scale must be >= 0");
    check_positive(std::isfinite(reg_scale) && reg_scale >= 0.0, "reg_scale must be >= 0");
    check_positive(threads >= 1, "threads must be >= 1");
}

bool TrainConfig::resolved_normalize() const {
    switch (normalize) {
        case NormalizeMode::on: return true;
        case NormalizeMode::off:
            if (loss == LossKind::gr_coles)
                throw std::invalid_argument("gr-coles requires normalized embeddings");
            return false;
        case NormalizeMode::auto_select: return loss != LossKind::bpr;
    }
    return false;
}

SparseOperator build_propagation_operator(const InteractionGraph& g, Variant v) {
    return normalize_sym(build_adjacency(g), v == Variant::selfloop_last);
}

SparseOperator build_propagation_operator(const PlainGraph& g, Variant v) {
    return normalize_sym(build_adjacency(g), v == Variant::selfloop_last);
}

Matrix encode(const TrainedModel& m, const SparseOperator& op, int threads) {
    const auto prop =
        PropagationConfig::uniform(static_cast<int>(m.layers), m.variant, m.normalized);
    return propagate(m.table, op, prop, nullptr, threads);
}

TrainedModel train_gr(const InteractionGraph& g, const TrainConfig& cfg) {
    cfg.validate();
    const bool normalized = cfg.resolved_normalize();
    if (g.m == 0) throw std::invalid_argument("train_gr: graph has no training edges");
    for (const auto& [u, i] : g.test_edges)
        if (g.degrees[u] == 0)
            throw std::invalid_argument("train_gr: user " + std::to_string(u) +
                                        " has test interactions but no training interactions");

    const auto op = build_propagation_operator(g, cfg.variant);
    const auto prop =
        PropagationConfig::uniform(static_cast<int>(cfg.layers), cfg.variant, normalized);
    auto table = EmbeddingTable::init(g.n(), cfg.dim, mix_seed(cfg.seed, kTagInit));
    OptimizerState state;
    state.lr = cfg.lr;

    TrainedModel model;
    model.n_u = g.n_u;
    model.layers = cfg.layers;
    model.variant = cfg.variant;
    model.normalized = normalized;

    const bool has_test = !g.test_edges.empty();
    if (!has_test) {
        std::fprintf(stderr, "warning: empty test split; ranking metrics omitted\n");
        model.history.metrics_omitted = true;
    }

    auto edges = g.edges;
    Rng shuffle_rng(mix_seed(cfg.seed, kTagShuffle));
    Rng neg_rng(mix_seed(cfg.seed, kTagNegatives));

    EmbeddingTable best;
    std::int64_t evals_since_best = 0;

    for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(edges);
        double value_sum = 0.0;
        std::map<std::string, double> parts_sum;
        std::int64_t rows_done = 0;
        std::int64_t batch_index = 0;

        for (std::int64_t start = 0; start < g.m; start += cfg.batch_size, ++batch_index) {
            const std::int64_t end = std::min<std::int64_t>(start + cfg.batch_size, g.m);
            const auto rows = end - start;
            TrainingBatch batch;
            batch.K = cfg.K;
            batch.n_u = g.n_u;
            batch.users.resize(static_cast<std::size_t>(rows));
            batch.pos_items.resize(static_cast<std::size_t>(rows));
            batch.neg_items.resize(static_cast<std::size_t>(rows) * cfg.K);
            for (std::int64_t r = 0; r < rows; ++r) {
                const auto& [u, i] = edges[static_cast<std::size_t>(start + r)];
                batch.users[static_cast<std::size_t>(r)] = u;
                batch.pos_items[static_cast<std::size_t>(r)] = i;
                draw_row_negatives(g, neg_rng, u, cfg.K,
                                   batch.neg_items.data() + static_cast<std::size_t>(r) * cfg.K);
            }

            PropagationCache cache;
            const auto e = propagate(table, op, prop, &cache, cfg.threads);
            LossOutput out;
            switch (cfg.loss) {
                case LossKind::bpr:
                    out = bpr_loss(e, batch, cfg.lambda,
                                   cfg.lambda > 0.0 ? frobenius_sq(table.e0) : 0.0);
                    break;
                case LossKind::coles: {
                    const auto [l_pos, l_neg] = batch_laplacians(batch, g.n());
                    out = coles_loss(e, l_pos, l_neg, cfg.beta);
                    add_l2_part(out, table, cfg.lambda);
                    break;
                }
                case LossKind::gr_coles: {
                    const auto [l_pos, l_neg] = batch_laplacians(batch, g.n());
                    out = gr_objective(e, batch, l_pos, l_neg, cfg.beta, cfg.t, cfg.coles_scale,
                                       cfg.reg_scale);
                    add_l2_part(out, table, cfg.lambda);
                    break;
                }
            }
            if (!std::isfinite(out.value))
                throw std::runtime_error("train_gr: non-finite loss in " +
                                         batch_label(epoch, batch_index));
            const auto grad0 = propagate_backward(out.grad, cache, op, prop, cfg.threads);
            adam_step(table, grad0, state, cfg.lambda, batch_label(epoch, batch_index));

            value_sum += out.value;
            for (const auto& [k, v] : out.parts) parts_sum[k] += v;
            rows_done += rows;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = value_sum / static_cast<double>(rows_done);
        for (auto& [k, v] : parts_sum) rec.parts[k] = v / static_cast<double>(rows_done);
        model.history.epochs.push_back(std::move(rec));

        if (has_test && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
            const auto e = propagate(table, op, prop, nullptr, cfg.threads);
            const auto res = evaluate_ranking(e, g, cfg.eval_k, cfg.threads);
            model.history.evals.push_back({epoch, res.mean_recall, res.mean_ndcg});
            if (res.mean_recall > model.history.best_recall) {
                model.history.best_recall = res.mean_recall;
                model.history.best_epoch = epoch;
                best = table;
                evals_since_best = 0;
            } else if (++evals_since_best >= cfg.patience) {
                model.history.early_stopped = true;
                break;
            }
        }
    }

    model.table = model.history.best_epoch >= 0 ? std::move(best) : std::move(table);
    return model;
}

TrainedModel train_gcl(const PlainGraph& g, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.loss == LossKind::gr_coles)
        throw std::invalid_argument("train_gcl: loss must be bpr or coles");
    const bool normalized = cfg.resolved_normalize();
    if (g.n == 0) throw std::invalid_argument("train_gcl: empty graph");

    const auto op = build_propagation_operator(g, cfg.variant);
    const auto prop =
        PropagationConfig::uniform(static_cast<int>(cfg.layers), cfg.variant, normalized);
    auto table = EmbeddingTable::init(g.n, cfg.dim, mix_seed(cfg.seed, kTagInit));
    OptimizerState state;
    state.lr = cfg.lr;

    TrainedModel model;
    model.n_u = 0;
    model.layers = cfg.layers;
    model.variant = cfg.variant;
    model.normalized = normalized;

    SparseOperator l_pos;
    if (cfg.loss == LossKind::coles) l_pos = laplacian(build_adjacency(g));

    for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        PropagationCache cache;
        const auto e = propagate(table, op, prop, &cache, cfg.threads);
        LossOutput out;
        if (cfg.loss == LossKind::coles) {
            const auto l_neg =
                sample_negative_laplacian(g, cfg.K, mix_seed(cfg.seed, kTagGclNeg + static_cast<std::uint64_t>(epoch)));
            out = coles_loss(e, l_pos, l_neg, cfg.beta);
        } else {
            const auto np = sample_negative_pairs(
                g, cfg.K, mix_seed(cfg.seed, kTagGclNeg + static_cast<std::uint64_t>(epoch)));
            Rng pos_rng(mix_seed(cfg.seed, kTagGclPos + static_cast<std::uint64_t>(epoch)));
            std::vector<std::array<std::int32_t, 3>> triples;
            triples.reserve(np.pairs.size());
            for (const auto& [anchor, neg] : np.pairs) {
                const auto& nbrs = g.adj[static_cast<std::size_t>(anchor)];
                const auto pos = nbrs[static_cast<std::size_t>(
                    pos_rng.uniform_below(static_cast<std::int64_t>(nbrs.size())))];
                triples.push_back({anchor, pos, neg});
            }
            out = triple_bpr_loss(e, triples);
        }
        add_l2_part(out, table, cfg.lambda);
        if (!std::isfinite(out.value))
            throw std::runtime_error("train_gcl: non-finite loss in " + batch_label(epoch, 0));
        const auto grad0 = propagate_backward(out.grad, cache, op, prop, cfg.threads);
        adam_step(table, grad0, state, cfg.lambda, batch_label(epoch, 0));

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = out.value / static_cast<double>(g.n);
        for (const auto& [k, v] : out.parts) rec.parts[k] = v / static_cast<double>(g.n);
        model.history.epochs.push_back(std::move(rec));
    }

    model.table = std::move(table);
    return model;
}

LinearClassifier fit_linear_classifier(const Matrix& e, std::span<const std::int32_t> labels,
                                       std::span<const std::uint8_t> train_mask,
                                       const ClassifierConfig& cc) {
    if (static_cast<std::int64_t>(labels.size()) != e.rows || train_mask.size() != labels.size())
        throw std::invalid_argument("fit_linear_classifier: labels/mask size mismatch");
    if (cc.iters < 1 || !(cc.lr > 0.0) || !(cc.l2 >= 0.0))
        throw std::invalid_argument("fit_linear_classifier: bad config");

    std::vector<std::int64_t> rows;
    std::vector<std::int32_t> classes;
    for (std::int64_t r = 0; r < e.rows; ++r) {
        if (!train_mask[static_cast<std::size_t>(r)]) continue;
        if (labels[static_cast<std::size_t>(r)] < 0)
            throw std::invalid_argument("fit_linear_classifier: masked row " + std::to_string(r) +
                                        " has no label");
        rows.push_back(r);
        classes.push_back(labels[static_cast<std::size_t>(r)]);
    }
    if (rows.empty()) throw std::invalid_argument("fit_linear_classifier: empty training mask");
    classes = sorted_unique(std::move(classes));
    if (classes.size() < 2)
        throw std::invalid_argument("fit_linear_classifier: single-class training set");

    const auto num_classes = static_cast<std::int64_t>(classes.size());
    const std::int64_t d = e.cols;
    const auto n_train = static_cast<double>(rows.size());
    std::vector<std::int64_t> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto it = std::lower_bound(classes.begin(), classes.end(),
                                         labels[static_cast<std::size_t>(rows[i])]);
        y[i] = it - classes.begin();
    }

    LinearClassifier clf;
    clf.classes = classes;
    clf.w = Matrix(num_classes, d + 1, 0.0);
    Matrix grad(num_classes, d + 1, 0.0);
    std::vector<double> logits(static_cast<std::size_t>(num_classes));

    for (std::int64_t it = 0; it < cc.iters; ++it) {
        grad.zero();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto x = e.row(rows[i]);
            double mx = -std::numeric_limits<double>::infinity();
            for (std::int64_t c = 0; c < num_classes; ++c) {
                const auto wc = clf.w.row(c);
                logits[static_cast<std::size_t>(c)] = dot(wc.subspan(0, static_cast<std::size_t>(d)), x) + wc[static_cast<std::size_t>(d)];
                mx = std::max(mx, logits[static_cast<std::size_t>(c)]);
            }
            double z = 0.0;
            for (auto& l : logits) {
                l = std::exp(l - mx);
                z += l;
            }
            for (std::int64_t c = 0; c < num_classes; ++c) {
                const double p = logits[static_cast<std::size_t>(c)] / z;
                const double coeff = (p - (y[i] == c ? 1.0 : 0.0)) / n_train;
                auto gc = grad.row(c);
                for (std::int64_t k = 0; k < d; ++k)
                    gc[static_cast<std::size_t>(k)] += coeff * x[static_cast<std::size_t>(k)];
                gc[static_cast<std::size_t>(d)] += coeff;
            }
        }
        for (std::int64_t c = 0; c < num_classes; ++c) {
            auto wc = clf.w.row(c);
            const auto gc = grad.row(c);
            for (std::int64_t k = 0; k <= d; ++k) {
                const double reg = k < d ? cc.l2 * wc[static_cast<std::size_t>(k)] : 0.0;
                wc[static_cast<std::size_t>(k)] -= cc.lr * (gc[static_cast<std::size_t>(k)] + reg);
            }
        }
    }
    return clf;
}

TrainingBatch sample_edge_batch(const InteractionGraph& g, std::int64_t rows, int K, Rng& rng) {
    if (g.m == 0) throw std::invalid_argument("sample_edge_batch: graph has no training edges");
    if (rows < 1 || K < 1) throw std::invalid_argument("sample_edge_batch: rows and K must be >= 1");
    TrainingBatch b;
    b.K = K;
    b.n_u = g.n_u;
    b.users.resize(static_cast<std::size_t>(rows));
    b.pos_items.resize(static_cast<std::size_t>(rows));
    b.neg_items.resize(static_cast<std::size_t>(rows) * K);
    for (std::int64_t r = 0; r < rows; ++r) {
        const auto& [u, i] = g.edges[static_cast<std::size_t>(rng.uniform_below(g.m))];
        b.users[static_cast<std::size_t>(r)] = u;
        b.pos_items[static_cast<std::size_t>(r)] = i;
        draw_row_negatives(g, rng, u, K, b.neg_items.data() + static_cast<std::size_t>(r) * K);
    }
    return b;
}

double pipeline_fd_error(LossKind loss, std::int64_t n, std::int64_t dim, std::uint64_t seed) {
    if (n < 10) throw std::invalid_argument("pipeline_fd_error: need n >= 10");
    if (dim < 1) throw std::invalid_argument("pipeline_fd_error: need dim >= 1");
    const std::int64_t n_users = n / 2;
    // one block at p=0.4 keeps the generator's expected-degree floor satisfied
    // for every n >= 10
    const auto g = gen_planted_bipartite(n_users, n - n_users, 1, 0.4, 0.0, seed);
    const bool normalize = loss != LossKind::bpr;
    const auto op = build_propagation_operator(g, Variant::layer_average);
    const auto prop = PropagationConfig::uniform(2, Variant::layer_average, normalize);
    auto table = EmbeddingTable::init(g.n(), dim, mix_seed(seed, kTagInit));

    Rng rng(mix_seed(seed, kTagNegatives));
    const auto batch = sample_edge_batch(g, g.m, 2, rng);
    const auto [l_pos, l_neg] = batch_laplacians(batch, g.n());
    const auto objective = [&](const Matrix& e) -> LossOutput {
        switch (loss) {
            case LossKind::bpr: return bpr_loss(e, batch);
            case LossKind::coles: return coles_loss(e, l_pos, l_neg, 0.9);
            default: return gr_coles_loss(e, batch, l_pos, l_neg, 0.9, 2.0);
        }
    };

    PropagationCache cache;
    const auto e = propagate(table, op, prop, &cache);
    const auto out = objective(e);
    const auto analytic = propagate_backward(out.grad, cache, op, prop);

    const double h = 1e-6;
    double worst = 0.0;
    for (std::int64_t r = 0; r < g.n(); ++r)
        for (std::int64_t c = 0; c < dim; ++c) {
            const double keep = table.e0.at(r, c);
            table.e0.at(r, c) = keep + h;
            const double up = objective(propagate(table, op, prop)).value;
            table.e0.at(r, c) = keep - h;
            const double dn = objective(propagate(table, op, prop)).value;
            table.e0.at(r, c) = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double a = analytic.at(r, c);
            worst = std::max(worst, std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)}));
        }
    return worst;
}

std::vector<std::int32_t> predict(const LinearClassifier& c, const Matrix& e) {
    if (c.w.cols != e.cols + 1)
        throw std::invalid_argument("predict: embedding dimension does not match classifier");
    std::vector<std::int32_t> out(static_cast<std::size_t>(e.rows));
    for (std::int64_t r = 0; r < e.rows; ++r) {
        const auto x = e.row(r);
        std::int64_t arg = 0;
        double top = -std::numeric_limits<double>::infinity();
        for (std::int64_t cls = 0; cls < c.w.rows; ++cls) {
            const auto wc = c.w.row(cls);
            const double s =
                dot(wc.subspan(0, static_cast<std::size_t>(e.cols)), x) + wc[static_cast<std::size_t>(e.cols)];
            if (s > top) {
                top = s;
                arg = cls;
            }
        }
        out[static_cast<std::size_t>(r)] = c.classes[static_cast<std::size_t>(arg)];
    }
    return out;
}

}  // namespace grcl
