#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "grcl/encoder.hpp"
#include "grcl/graph.hpp"
#include "grcl/losses.hpp"
#include "grcl/matrix.hpp"

namespace grcl {

enum class LossKind { bpr, coles, gr_coles };

const char* to_string(LossKind k);
LossKind loss_from_string(const std::string& s);  // accepts "bpr", "coles", "gr-coles", "gr_coles"

enum class NormalizeMode { off, on, auto_select };

const char* to_string(NormalizeMode m);
NormalizeMode normalize_from_string(const std::string& s);  // "off", "on", "auto"

/// Scalar optimizer state. The moment matrices themselves live in
/// EmbeddingTable (one layout shared with persistence); step here mirrors
/// the table's adam_t and both advance together in adam_step.
struct OptimizerState {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
};

/// Bias-corrected Adam on the base table. A row is updated when its
/// gradient row is nonzero or lambda > 0; the quadratic penalty enters as
/// 2*lambda*e0 added to the gradient, not as decoupled decay. Throws on a
/// non-finite gradient entry, naming `batch_label`, and on shape or step
/// mismatches between table and state.
void adam_step(EmbeddingTable& table, const Matrix& grad, OptimizerState& state,
               double lambda, const std::string& batch_label = "");

struct TrainConfig {
    LossKind loss = LossKind::bpr;
    std::int64_t epochs = 50;
    std::int64_t batch_size = 2048;
    int K = 1;              // negatives per anchor
    double lr = 1e-2;
    double beta = 0.9;      // weight on the repulsive trace term
    double t = 2.0;         // Gaussian potential sharpness
    double lambda = 1e-4;   // quadratic penalty on e0
    std::int64_t layers = 3;
    std::int64_t dim = 64;
    std::uint64_t seed = 0;
    std::int64_t eval_every = 10;    // epochs between ranking evaluations
    std::int64_t patience = 10;      // evaluations without improvement before stopping
    std::int64_t eval_k = 20;        // cutoff for the tracked ranking metrics
    Variant variant = Variant::layer_average;
    NormalizeMode normalize = NormalizeMode::auto_select;
    double coles_scale = 1.0;  // ablation knob on the contrastive term
    double reg_scale = 1.0;    // ablation knob on both debias terms
    int threads = 1;

    /// Node-embedding defaults: contrastive loss, 2 layers, dim 512.
    static TrainConfig node_defaults();

    void validate() const;

    /// Resolves auto normalization: off for bpr, on otherwise; gr_coles
    /// rejects an explicit off.
    bool resolved_normalize() const;
};

struct EpochRecord {
    std::int64_t epoch = 0;  // 1-based
    double loss = 0.0;       // per-row mean over the epoch
    std::map<std::string, double> parts;
};

struct EvalRecord {
    std::int64_t epoch = 0;
    double recall = 0.0;
    double ndcg = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::vector<EvalRecord> evals;
    bool metrics_omitted = false;  // no test split
    bool early_stopped = false;
    std::int64_t best_epoch = -1;
    double best_recall = -1.0;
};

struct TrainedModel {
    EmbeddingTable table;
    std::int64_t n_u = 0;  // 0 for node models
    std::int64_t layers = 0;
    Variant variant = Variant::layer_average;
    bool normalized = false;
    TrainHistory history;
};

/// Degree-normalized propagation operator matching the variant.
SparseOperator build_propagation_operator(const InteractionGraph& g, Variant v);
SparseOperator build_propagation_operator(const PlainGraph& g, Variant v);

/// Propagates a trained model to its final embeddings.
Matrix encode(const TrainedModel& m, const SparseOperator& op, int threads = 1);

/// Ranking trainer: per epoch shuffles the train edges, forms one batch row
/// per positive edge, samples K negatives per row, propagates, applies the
/// configured loss, backpropagates, and takes one Adam step per batch.
/// Ranking metrics on the test split are recorded every eval_every epochs;
/// the model with the best tracked recall is returned (final model when no
/// test split exists, with a warning). Requires a train interaction for
/// every user holding test interactions.
TrainedModel train_gr(const InteractionGraph& g, const TrainConfig& cfg);

/// Node-embedding pre-trainer. loss=coles minimizes the full-graph trace
/// objective against a resampled negative-pair Laplacian each epoch;
/// loss=bpr ranks one sampled neighbor above one sampled non-neighbor per
/// anchor node per epoch. The returned embeddings are frozen (no
/// classifier state inside).
TrainedModel train_gcl(const PlainGraph& g, const TrainConfig& cfg);

struct ClassifierConfig {
    std::int64_t iters = 300;
    double lr = 0.5;
    double l2 = 1e-4;
};

/// Multinomial logistic regression over embedding rows. w is
/// num_classes x (d+1), last column the intercept; classes holds the
/// original label values in ascending order.
struct LinearClassifier {
    Matrix w;
    std::vector<std::int32_t> classes;
};

/// Full-batch gradient descent with a fixed iteration budget. Rows with
/// train_mask[i] != 0 participate; their labels must be >= 0. Throws when
/// the masked rows carry fewer than two distinct labels.
LinearClassifier fit_linear_classifier(const Matrix& e, std::span<const std::int32_t> labels,
                                       std::span<const std::uint8_t> train_mask,
                                       const ClassifierConfig& cc = {});

/// Argmax class per row; ties resolve to the lower class value.
std::vector<std::int32_t> predict(const LinearClassifier& c, const Matrix& e);

class Rng;

/// Batch of `rows` train edges sampled uniformly with replacement, with K
/// negatives per row drawn without replacement from outside the anchor's
/// item set. Drives bound audits and gradient checks.
TrainingBatch sample_edge_batch(const InteractionGraph& g, std::int64_t rows, int K, Rng& rng);

/// Max relative error between the analytic base-table gradient and central
/// finite differences through the full pipeline (propagate, optional
/// normalization, loss) on a seeded random instance with n total nodes.
/// Relative error uses max(1, |analytic|, |fd|) as the denominator.
double pipeline_fd_error(LossKind loss, std::int64_t n, std::int64_t dim, std::uint64_t seed);

}  // namespace grcl
