#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grcl/graph.hpp"
#include "grcl/matrix.hpp"

namespace grcl {

/// Trainable base embeddings E(0) plus Adam moment state. The moments are
/// owned here so that save/load and the optimizer agree on one layout.
struct EmbeddingTable {
    Matrix e0;  // n x d
    Matrix adam_m;
    Matrix adam_v;
    std::int64_t adam_t = 0;

    std::int64_t n() const { return e0.rows; }
    std::int64_t d() const { return e0.cols; }

    /// Gaussian init, sd 0.1, seeded; zeroed moments.
    static EmbeddingTable init(std::int64_t n, std::int64_t d, std::uint64_t seed);
};

enum class Variant { layer_average, selfloop_last };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);  // hyphen or underscore form

/// Propagation settings: depth, per-layer averaging weights (layer_average
/// only), and whether final rows are scaled to unit norm.
struct PropagationConfig {
    int num_layers = 0;                 // L
    std::vector<double> layer_weights;  // size L+1 for layer_average
    Variant variant = Variant::layer_average;
    bool normalize_output = false;

    /// Uniform weights 1/(L+1) for layer_average; empty for selfloop_last.
    static PropagationConfig uniform(int L, Variant v, bool normalize);

    /// Throws unless L >= 0 and, for layer_average, weights are nonnegative,
    /// of size L+1, and sum to 1 within 1e-12.
    void validate() const;
};

/// Forward state needed by the backward pass: the pre-normalization output
/// and the row norms (norms empty when normalization is off).
struct PropagationCache {
    Matrix pre_norm;
    std::vector<double> norms;
    int num_layers = 0;
    Variant variant = Variant::layer_average;
    bool normalize_output = false;
};

/// Final embeddings: layer_average sums a_l * T^l E(0) for l = 0..L over the
/// degree-normalized operator; selfloop_last returns the last layer under the
/// self-loop operator. Requires the operator kind matching the variant.
Matrix propagate(const EmbeddingTable& table, const SparseOperator& op,
                 const PropagationConfig& cfg, PropagationCache* cache = nullptr,
                 int threads = 1);

/// Adjoint of propagate: pushes grad_e through the row-normalization adjoint
/// g -> (g - (e.g) e) / |z| and then through the (symmetric) propagation.
Matrix propagate_backward(const Matrix& grad_e, const PropagationCache& cache,
                          const SparseOperator& op, const PropagationConfig& cfg,
                          int threads = 1);

/// Linear graph convolution with an explicit dense one-hot input: builds
/// X = I, forms T^L X by dense application, then multiplies by the weight
/// matrix (the base embeddings). Small-n oracle only.
Matrix gcn_linear_onehot(const EmbeddingTable& table, const SparseOperator& op, int L);

/// Count of nodes at distance exactly 2 from u.
std::int64_t two_hop_count(const SparseOperator& a, std::int64_t u);

/// Share of node u's own input in its depth-L receptive field, from exact
/// walk counts on the raw adjacency. selfloop_last uses (A+I)^L walks; the
/// averaging variant sums the per-depth shares for l = 0..L (a depth whose
/// walk total is zero contributes nothing).
double relative_influence(const SparseOperator& a_raw, std::int64_t u, Variant variant, int L);
double relative_influence(const InteractionGraph& g, std::int64_t u, Variant variant, int L);
double relative_influence(const PlainGraph& g, std::int64_t u, Variant variant, int L);

/// Two-layer closed forms, exact on locally tree-like neighborhoods:
/// selfloop_last (1+d)/(1+3d+d2); layer_average 1 + d/(d+d2).
double influence_closed_form(Variant variant, std::int64_t degree, std::int64_t two_hop);

}  // namespace grcl
