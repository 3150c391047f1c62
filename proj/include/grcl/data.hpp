#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grcl/graph.hpp"

namespace grcl {

/// Contextual stochastic block model parameters. Labels are Rademacher
/// (stored as classes 0/1), features are Gaussian with class-dependent mean
/// (mu for class 1, nu for class 0) and per-coordinate variance 1/d, edges
/// are Bernoulli(p) within a class and Bernoulli(q) across.
struct CsbmParams {
    std::int64_t n = 0;
    std::int64_t d = 1;
    std::vector<double> mu;  // size d
    std::vector<double> nu;  // size d
    double p = 0.0;
    double q = 0.0;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument on violation
};

/// Bookkeeping from loading or re-splitting interaction data.
struct LoadReport {
    std::int64_t lines = 0;          // data lines parsed (blank lines skipped)
    std::int64_t duplicates = 0;     // repeated (user, item) pairs collapsed
    std::int64_t split_train = 0;    // train edges produced by the split rule
    std::int64_t split_test = 0;     // held-out edges produced by the split rule
    std::int64_t dropped_items = 0;  // items left with zero training edges
};

/// Reads `user_id<TAB>item_id` lines (extra fields ignored), maps IDs to
/// dense indices in first-seen order, deduplicates repeats, and splits each
/// user's items into train/test at split_ratio. Users with fewer than two
/// interactions keep everything in train. Items that end up with no training
/// edge are dropped and renumbered (reported + stderr warning) because the
/// normalized propagation operator rejects isolated nodes.
InteractionGraph load_interactions(const std::string& path, double split_ratio = 0.8,
                                   std::uint64_t seed = 0, LoadReport* report = nullptr);

/// Re-splits the union of a graph's train and test edges with fresh
/// randomness. Same splitting rules as load_interactions.
InteractionGraph split_interactions(const InteractionGraph& g, double split_ratio,
                                    std::uint64_t seed, LoadReport* report = nullptr);

/// Writes the union of train and test interactions as `user<TAB>item` lines,
/// ordered by (user index, item index). If metadata_json is non-empty it is
/// written verbatim to `<path>.meta.json`.
void save_interactions(const std::string& path, const InteractionGraph& g,
                       const std::string& metadata_json = "");

/// Planted-block bipartite generator: users and items are partitioned into
/// `blocks` aligned contiguous groups; a user links to same-block items with
/// probability p_in and to the rest with p_out. Every user gets at least two
/// interactions (whole-row resampling) and every item at least one (one
/// extra same-block edge), so downstream operators never see isolated nodes.
/// All edges land in the train split; use split_interactions to hold out.
InteractionGraph gen_planted_bipartite(std::int64_t n_u, std::int64_t n_i,
                                       std::int64_t blocks, double p_in, double p_out,
                                       std::uint64_t seed);

/// Samples a CSBM graph: labels, features, then independent edge coin flips
/// per node pair. May produce isolated nodes (no resampling).
PlainGraph gen_csbm(const CsbmParams& params);

/// Writes `edges.tsv`, `features.csv` (when present), `labels.tsv` (when any
/// node is labeled) into dir; metadata_json (if non-empty) to
/// `dir/metadata.json`.
void save_node_dataset(const std::string& dir, const PlainGraph& g,
                       const std::string& metadata_json = "");

/// Loads a node-classification dataset. When features.csv exists its row
/// order defines the node indexing and every edge/label ID must appear in
/// it; otherwise nodes are numbered first-seen from edges.tsv. Unlabeled
/// nodes get label -1.
PlainGraph load_node_dataset(const std::string& dir);

/// Loads a bare edge list (two node IDs per line, edges.tsv format) as a
/// plain graph with first-seen node numbering; no features or labels.
PlainGraph load_edge_list(const std::string& path);

/// Trained-model container: the pre-propagation embedding table plus the
/// propagation settings and ID maps needed to reuse it. Node-level models
/// set n_i = 0 and keep node IDs in user_ids.
struct ModelFile {
    std::int64_t n_u = 0;
    std::int64_t n_i = 0;
    std::int64_t layers = 0;
    std::uint8_t variant = 0;    // 0 = layer averaging, 1 = self-loop propagation
    std::uint8_t normalize = 0;  // 1 if rows are unit-normalized after propagation
    Matrix e0;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
};

/// Versioned little-endian binary round trip. read_model rejects wrong
/// magic bytes, unknown versions, and truncated files.
void write_model(const std::string& path, const ModelFile& m);
ModelFile read_model(const std::string& path);

/// FNV-1a 64-bit content hashes, used to fingerprint inputs in run metadata.
std::uint64_t fnv1a64_bytes(const void* data, std::size_t len);
std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace grcl
