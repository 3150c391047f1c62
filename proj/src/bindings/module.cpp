#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "grcl/bounds.hpp"
#include "grcl/data.hpp"
#include "grcl/encoder.hpp"
#include "grcl/graph.hpp"
#include "grcl/losses.hpp"
#include "grcl/matrix.hpp"
#include "grcl/metrics.hpp"
#include "grcl/rng.hpp"
#include "grcl/training.hpp"

namespace py = pybind11;
using namespace grcl;

namespace {

py::array_t<double> to_numpy(const Matrix& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::memcpy(out.mutable_data(), m.data.data(),
                static_cast<std::size_t>(m.rows * m.cols) * sizeof(double));
    return out;
}

Matrix from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d float array");
    Matrix m(a.shape(0), a.shape(1));
    std::memcpy(m.data.data(), a.data(),
                static_cast<std::size_t>(m.rows * m.cols) * sizeof(double));
    return m;
}

py::array_t<std::int32_t> to_numpy_i32(const std::vector<std::int32_t>& v) {
    py::array_t<std::int32_t> out(static_cast<py::ssize_t>(v.size()));
    std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(std::int32_t));
    return out;
}

py::array_t<std::int64_t> to_numpy_i64(const std::vector<std::int64_t>& v) {
    py::array_t<std::int64_t> out(static_cast<py::ssize_t>(v.size()));
    std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(std::int64_t));
    return out;
}

std::vector<std::int32_t> i32_vector(const py::array_t<std::int32_t, py::array::forcecast>& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d integer array");
    std::vector<std::int32_t> v(static_cast<std::size_t>(a.shape(0)));
    std::memcpy(v.data(), a.data(), v.size() * sizeof(std::int32_t));
    return v;
}

py::dict loss_dict(const LossOutput& out) {
    py::dict d;
    d["value"] = out.value;
    d["grad"] = to_numpy(out.grad);
    py::dict parts;
    for (const auto& [k, v] : out.parts) parts[py::str(k)] = v;
    d["parts"] = parts;
    return d;
}

py::dict report_dict(const BoundReport& r) {
    py::dict d;
    d["bpr"] = r.bpr;
    d["bpr_pos"] = r.bpr_pos;
    d["bpr_neg"] = r.bpr_neg;
    d["coles_pos"] = r.coles_pos;
    d["coles_neg"] = r.coles_neg;
    d["lower"] = r.lower;
    d["upper"] = r.upper;
    d["beta_l"] = r.beta_l;
    d["beta_u"] = r.beta_u;
    d["ratio"] = r.ratio;
    d["d_min"] = r.d_min;
    d["d_max"] = r.d_max;
    d["K"] = r.K;
    d["n_u_batch"] = r.n_u_batch;
    d["m_batch"] = r.m_batch;
    d["eq19_residual"] = r.eq19_residual;
    d["eq20_ok"] = r.eq20_ok;
    d["eq21_ok"] = r.eq21_ok;
    d["sandwich_ok"] = r.sandwich_ok;
    return d;
}

TrainConfig config_from_kwargs(const std::string& loss, std::int64_t epochs,
                               std::int64_t batch_size, int K, double lr, double beta,
                               double t, double lambda, std::int64_t layers,
                               std::int64_t dim, std::uint64_t seed, std::int64_t eval_every,
                               std::int64_t patience, std::int64_t eval_k,
                               const std::string& variant, const std::string& normalize,
                               double coles_scale, double reg_scale, int threads) {
    TrainConfig cfg;
    cfg.loss = loss_from_string(loss);
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.K = K;
    cfg.lr = lr;
    cfg.beta = beta;
    cfg.t = t;
    cfg.lambda = lambda;
    cfg.layers = layers;
    cfg.dim = dim;
    cfg.seed = seed;
    cfg.eval_every = eval_every;
    cfg.patience = patience;
    cfg.eval_k = eval_k;
    cfg.variant = variant_from_string(variant);
    cfg.normalize = normalize_from_string(normalize);
    cfg.coles_scale = coles_scale;
    cfg.reg_scale = reg_scale;
    cfg.threads = threads;
    cfg.validate();
    return cfg;
}

py::dict history_dict(const TrainHistory& h) {
    py::list epochs;
    for (const auto& ep : h.epochs) {
        py::dict d;
        d["epoch"] = ep.epoch;
        d["loss"] = ep.loss;
        py::dict parts;
        for (const auto& [k, v] : ep.parts) parts[py::str(k)] = v;
        d["parts"] = parts;
        epochs.append(d);
    }
    py::list evals;
    for (const auto& ev : h.evals) {
        py::dict d;
        d["epoch"] = ev.epoch;
        d["recall"] = ev.recall;
        d["ndcg"] = ev.ndcg;
        evals.append(d);
    }
    py::dict out;
    out["epochs"] = epochs;
    out["evals"] = evals;
    out["metrics_omitted"] = h.metrics_omitted;
    out["early_stopped"] = h.early_stopped;
    out["best_epoch"] = h.best_epoch;
    out["best_recall"] = h.best_recall;
    return out;
}

}  // namespace

PYBIND11_MODULE(_grcl, m) {
    m.doc() = "Graph-embedding core: propagation encoders, contrastive and ranking "
              "losses, bound audits, and synthetic data generators";

    py::class_<InteractionGraph>(m, "InteractionGraph")
        .def_readonly("n_u", &InteractionGraph::n_u)
        .def_readonly("n_i", &InteractionGraph::n_i)
        .def_readonly("m", &InteractionGraph::m)
        .def_property_readonly("n", &InteractionGraph::n)
        .def_property_readonly(
            "num_test",
            [](const InteractionGraph& g) { return static_cast<std::int64_t>(g.test_edges.size()); })
        .def_property_readonly(
            "degrees", [](const InteractionGraph& g) { return to_numpy_i64(g.degrees); })
        .def_readonly("user_ids", &InteractionGraph::user_ids)
        .def_readonly("item_ids", &InteractionGraph::item_ids)
        .def("items_of",
             [](const InteractionGraph& g, std::int64_t u) {
                 const auto span = g.items_of(u);
                 return std::vector<std::int32_t>(span.begin(), span.end());
             },
             py::arg("user"))
        .def("__repr__", [](const InteractionGraph& g) {
            return "<InteractionGraph users=" + std::to_string(g.n_u) +
                   " items=" + std::to_string(g.n_i) + " train_edges=" + std::to_string(g.m) +
                   " test_edges=" + std::to_string(g.test_edges.size()) + ">";
        });

    py::class_<PlainGraph>(m, "PlainGraph")
        .def_readonly("n", &PlainGraph::n)
        .def_property_readonly(
            "num_edges",
            [](const PlainGraph& g) { return static_cast<std::int64_t>(g.edges.size()); })
        .def_property_readonly("labels",
                               [](const PlainGraph& g) { return to_numpy_i32(g.labels); })
        .def_property_readonly("features",
                               [](const PlainGraph& g) -> py::object {
                                   if (!g.features) return py::none();
                                   return to_numpy(*g.features);
                               })
        .def_readonly("node_ids", &PlainGraph::node_ids)
        .def("degree", &PlainGraph::degree, py::arg("node"))
        .def("__repr__", [](const PlainGraph& g) {
            return "<PlainGraph nodes=" + std::to_string(g.n) +
                   " edges=" + std::to_string(g.edges.size()) + ">";
        });

    py::class_<TrainingBatch>(m, "TrainingBatch")
        .def_property_readonly(
            "users", [](const TrainingBatch& b) { return to_numpy_i32(b.users); })
        .def_property_readonly(
            "pos_items", [](const TrainingBatch& b) { return to_numpy_i32(b.pos_items); })
        .def_property_readonly(
            "neg_items", [](const TrainingBatch& b) { return to_numpy_i32(b.neg_items); })
        .def_readonly("K", &TrainingBatch::K)
        .def_readonly("n_u", &TrainingBatch::n_u)
        .def("__len__", &TrainingBatch::size);

    py::class_<TrainedModel>(m, "TrainedModel")
        .def_property_readonly(
            "embeddings", [](const TrainedModel& t) { return to_numpy(t.table.e0); })
        .def_readonly("n_u", &TrainedModel::n_u)
        .def_readonly("layers", &TrainedModel::layers)
        .def_property_readonly(
            "variant", [](const TrainedModel& t) { return std::string(to_string(t.variant)); })
        .def_readonly("normalized", &TrainedModel::normalized)
        .def_property_readonly(
            "history", [](const TrainedModel& t) { return history_dict(t.history); })
        .def("__repr__", [](const TrainedModel& t) {
            return "<TrainedModel rows=" + std::to_string(t.table.n()) +
                   " dim=" + std::to_string(t.table.d()) + " layers=" + std::to_string(t.layers) +
                   ">";
        });

    py::class_<LinearClassifier>(m, "LinearClassifier")
        .def_property_readonly(
            "weights", [](const LinearClassifier& c) { return to_numpy(c.w); })
        .def_property_readonly(
            "classes", [](const LinearClassifier& c) { return to_numpy_i32(c.classes); });

    // data
    m.def("load_interactions",
          [](const std::string& path, double ratio, std::uint64_t seed) {
              return load_interactions(path, ratio, seed);
          },
          py::arg("path"), py::arg("ratio") = 0.8, py::arg("seed") = 0,
          "Load user-item interactions and hold out a per-user test split");
    m.def("load_node_dataset", &load_node_dataset, py::arg("dir"));
    m.def("load_edge_list", &load_edge_list, py::arg("path"));
    m.def("split_interactions",
          [](const InteractionGraph& g, double ratio, std::uint64_t seed) {
              return split_interactions(g, ratio, seed);
          },
          py::arg("graph"), py::arg("ratio"), py::arg("seed"));
    m.def("gen_planted_bipartite", &gen_planted_bipartite, py::arg("n_u"), py::arg("n_i"),
          py::arg("blocks"), py::arg("p_in"), py::arg("p_out"), py::arg("seed"));
    m.def("gen_csbm",
          [](std::int64_t n, const std::vector<double>& mu, const std::vector<double>& nu,
             double p, double q, std::uint64_t seed) {
              CsbmParams params;
              params.n = n;
              params.d = static_cast<std::int64_t>(mu.size());
              params.mu = mu;
              params.nu = nu;
              params.p = p;
              params.q = q;
              params.seed = seed;
              return gen_csbm(params);
          },
          py::arg("n"), py::arg("mu"), py::arg("nu"), py::arg("p"), py::arg("q"),
          py::arg("seed"),
          "Two-class contextual block model; feature dimension comes from len(mu)");

    // training and encoding
    m.def("train_gr",
          [](const InteractionGraph& g, const std::string& loss, std::int64_t epochs,
             std::int64_t batch_size, int K, double lr, double beta, double t, double lambda,
             std::int64_t layers, std::int64_t dim, std::uint64_t seed,
             std::int64_t eval_every, std::int64_t patience, std::int64_t eval_k,
             const std::string& variant, const std::string& normalize, double coles_scale,
             double reg_scale, int threads) {
              const auto cfg = config_from_kwargs(
                  loss, epochs, batch_size, K, lr, beta, t, lambda, layers, dim, seed,
                  eval_every, patience, eval_k, variant, normalize, coles_scale, reg_scale,
                  threads);
              py::gil_scoped_release release;
              return train_gr(g, cfg);
          },
          py::arg("graph"), py::arg("loss") = "bpr", py::arg("epochs") = 50,
          py::arg("batch_size") = 2048, py::arg("K") = 1, py::arg("lr") = 1e-2,
          py::arg("beta") = 0.9, py::arg("t") = 2.0, py::arg("lambda") = 1e-4,
          py::arg("layers") = 3, py::arg("dim") = 64, py::arg("seed") = 0,
          py::arg("eval_every") = 10, py::arg("patience") = 10, py::arg("eval_k") = 20,
          py::arg("variant") = "layer-average", py::arg("normalize") = "auto",
          py::arg("coles_scale") = 1.0, py::arg("reg_scale") = 1.0, py::arg("threads") = 1,
          "Mini-batch training on a user-item graph; returns the best-eval snapshot");
    m.def("train_gcl",
          [](const PlainGraph& g, const std::string& loss, std::int64_t epochs, int K,
             double lr, double beta, double lambda, std::int64_t layers, std::int64_t dim,
             std::uint64_t seed, const std::string& variant, const std::string& normalize,
             int threads) {
              TrainConfig cfg = TrainConfig::node_defaults();
              cfg.loss = loss_from_string(loss);
              cfg.epochs = epochs;
              cfg.K = K;
              cfg.lr = lr;
              cfg.beta = beta;
              cfg.lambda = lambda;
              cfg.layers = layers;
              cfg.dim = dim;
              cfg.seed = seed;
              cfg.variant = variant_from_string(variant);
              cfg.normalize = normalize_from_string(normalize);
              cfg.threads = threads;
              cfg.validate();
              py::gil_scoped_release release;
              return train_gcl(g, cfg);
          },
          py::arg("graph"), py::arg("loss") = "coles", py::arg("epochs") = 50,
          py::arg("K") = 1, py::arg("lr") = 1e-2, py::arg("beta") = 0.9,
          py::arg("lambda") = 1e-4, py::arg("layers") = 2, py::arg("dim") = 512,
          py::arg("seed") = 0, py::arg("variant") = "layer-average",
          py::arg("normalize") = "auto", py::arg("threads") = 1,
          "Full-batch contrastive pre-training on a plain graph");
    m.def("encode",
          [](const TrainedModel& model, const InteractionGraph& g, int threads) {
              const auto op = build_propagation_operator(g, model.variant);
              return to_numpy(encode(model, op, threads));
          },
          py::arg("model"), py::arg("graph"), py::arg("threads") = 1,
          "Propagated (and optionally row-normalized) embeddings as an array");
    m.def("encode",
          [](const TrainedModel& model, const PlainGraph& g, int threads) {
              const auto op = build_propagation_operator(g, model.variant);
              return to_numpy(encode(model, op, threads));
          },
          py::arg("model"), py::arg("graph"), py::arg("threads") = 1);

    // metrics and downstream heads
    m.def("evaluate_ranking",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& e,
             const InteractionGraph& g, std::int64_t k, int threads) {
              const auto res = evaluate_ranking(from_numpy(e), g, k, threads);
              py::dict d;
              d["recall"] = res.mean_recall;
              d["ndcg"] = res.mean_ndcg;
              d["k"] = res.k;
              d["users"] = res.num_users;
              return d;
          },
          py::arg("embeddings"), py::arg("graph"), py::arg("k") = 20, py::arg("threads") = 1,
          "Mean Recall@k / NDCG@k over users with test items, training items masked");
    m.def("fit_linear_classifier",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& e,
             const py::array_t<std::int32_t, py::array::forcecast>& labels,
             const py::array_t<bool, py::array::forcecast>& train_mask, std::int64_t iters,
             double lr, double l2) {
              const auto labels_v = i32_vector(labels);
              if (train_mask.ndim() != 1) throw std::invalid_argument("mask must be 1-d");
              std::vector<std::uint8_t> mask_v(static_cast<std::size_t>(train_mask.shape(0)));
              for (std::size_t i = 0; i < mask_v.size(); ++i)
                  mask_v[i] = train_mask.data()[i] ? 1 : 0;
              ClassifierConfig cc;
              cc.iters = iters;
              cc.lr = lr;
              cc.l2 = l2;
              return fit_linear_classifier(from_numpy(e), labels_v, mask_v, cc);
          },
          py::arg("embeddings"), py::arg("labels"), py::arg("train_mask"),
          py::arg("iters") = 300, py::arg("lr") = 0.5, py::arg("l2") = 1e-4,
          "Multinomial logistic regression on frozen embeddings");
    m.def("predict",
          [](const LinearClassifier& c,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& e) {
              return to_numpy_i32(predict(c, from_numpy(e)));
          },
          py::arg("classifier"), py::arg("embeddings"));
    m.def("accuracy",
          [](const py::array_t<std::int32_t, py::array::forcecast>& pred,
             const py::array_t<std::int32_t, py::array::forcecast>& truth,
             const py::array_t<bool, py::array::forcecast>& mask) {
              const auto p = i32_vector(pred);
              const auto t = i32_vector(truth);
              if (mask.ndim() != 1) throw std::invalid_argument("mask must be 1-d");
              std::vector<std::uint8_t> m8(static_cast<std::size_t>(mask.shape(0)));
              for (std::size_t i = 0; i < m8.size(); ++i) m8[i] = mask.data()[i] ? 1 : 0;
              return accuracy(p, t, m8);
          },
          py::arg("pred"), py::arg("truth"), py::arg("mask"));

    // losses on explicit embeddings
    m.def("sample_edge_batch",
          [](const InteractionGraph& g, std::int64_t rows, int K, std::uint64_t seed) {
              Rng rng(seed);
              return sample_edge_batch(g, rows, K, rng);
          },
          py::arg("graph"), py::arg("rows"), py::arg("K") = 1, py::arg("seed") = 0,
          "Edge-centric batch: uniform training edges plus K sampled negatives per row");
    m.def("bpr_loss",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& e,
             const TrainingBatch& b) { return loss_dict(bpr_loss(from_numpy(e), b)); },
          py::arg("embeddings"), py::arg("batch"));
    m.def("coles_loss",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& e,
             const TrainingBatch& b, double beta) {
              const auto em = from_numpy(e);
              const auto [l_pos, l_neg] = batch_laplacians(b, em.rows);
              return loss_dict(coles_loss(em, l_pos, l_neg, beta));
          },
          py::arg("embeddings"), py::arg("batch"), py::arg("beta") = 0.9);
    m.def("gr_coles_loss",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& e,
             const TrainingBatch& b, double beta, double t) {
              const auto em = from_numpy(e);
              const auto [l_pos, l_neg] = batch_laplacians(b, em.rows);
              return loss_dict(gr_coles_loss(em, b, l_pos, l_neg, beta, t));
          },
          py::arg("embeddings"), py::arg("batch"), py::arg("beta") = 0.9, py::arg("t") = 2.0);

    // bound audits
    m.def("bound_constants", [] {
        const auto c = bound_constants();
        py::dict d;
        d["chord"] = c.chord;
        d["ln2e"] = c.ln2e;
        d["ln_e_plus_inv_e"] = c.ln_e_plus_inv_e;
        return d;
    });
    m.def("theorem_bounds",
          [](double coles_pos, double coles_neg, std::int64_t d_min, std::int64_t d_max,
             int K, std::int64_t n_u, std::int64_t m_batch) {
              const auto [lo, hi] =
                  theorem_bounds(coles_pos, coles_neg, d_min, d_max, K, n_u, m_batch);
              return py::make_tuple(lo, hi);
          },
          py::arg("coles_pos"), py::arg("coles_neg"), py::arg("d_min"), py::arg("d_max"),
          py::arg("K"), py::arg("n_u"), py::arg("m"));
    m.def("audit_batch",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& e,
             const TrainingBatch& b, const InteractionGraph& g) {
              const std::span<const std::int64_t> deg(g.degrees.data(),
                                                      static_cast<std::size_t>(g.n_u));
              return report_dict(audit_batch(from_numpy(e), b, deg));
          },
          py::arg("embeddings"), py::arg("batch"), py::arg("graph"),
          "Checks the ranking-loss sandwich for one batch of unit-norm embeddings");

    // influence analysis
    m.def("relative_influence",
          [](const InteractionGraph& g, std::int64_t u, const std::string& variant, int L) {
              return relative_influence(g, u, variant_from_string(variant), L);
          },
          py::arg("graph"), py::arg("node"), py::arg("variant") = "layer-average",
          py::arg("layers") = 2);
    m.def("relative_influence",
          [](const PlainGraph& g, std::int64_t u, const std::string& variant, int L) {
              return relative_influence(g, u, variant_from_string(variant), L);
          },
          py::arg("graph"), py::arg("node"), py::arg("variant") = "layer-average",
          py::arg("layers") = 2);
    m.def("influence_closed_form",
          [](const std::string& variant, std::int64_t degree, std::int64_t two_hop) {
              return influence_closed_form(variant_from_string(variant), degree, two_hop);
          },
          py::arg("variant"), py::arg("degree"), py::arg("two_hop"));

    m.def("pipeline_fd_error",
          [](const std::string& loss, std::int64_t n, std::int64_t dim, std::uint64_t seed) {
              return pipeline_fd_error(loss_from_string(loss), n, dim, seed);
          },
          py::arg("loss"), py::arg("n") = 30, py::arg("dim") = 8, py::arg("seed") = 0,
          "Worst relative error between analytic and finite-difference gradients");

    m.attr("__version__") = "0.1.0";
}
