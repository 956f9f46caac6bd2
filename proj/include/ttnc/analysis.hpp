#ifndef TTNC_ANALYSIS_HPP
#define TTNC_ANALYSIS_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ttnc/data.hpp"
#include "ttnc/model.hpp"

namespace ttnc {

/// Single-feature entanglement entropies in nats.
struct EntropyReport {
    Eigen::MatrixXd per_label;   // n_classes x n_features
    Eigen::VectorXd aggregated;  // unweighted mean over labels
};

struct QuipsRanking {
    std::vector<Index> ranking;  // feature ids, aggregated entropy descending
    std::vector<bool> redundant;
    std::vector<Index> selected;   // schema order
    std::vector<Index> discarded;  // schema order
    EntropyReport entropy;
    std::vector<Eigen::MatrixXd> correlations;  // one N x N matrix per label
};

/// Entropy of the single-feature bipartition for every feature and label:
/// normalize the label state, canonicalize next to the leaf, Schmidt-decompose
/// across the leaf edge, S = -sum lambda^2 ln lambda^2.
EntropyReport feature_entropy(const TtnModel& model);

/// Per-label entropies for one feature (column of the full report).
Eigen::VectorXd feature_entropy(const TtnModel& model, Index feature);

/// Entropy across the bond above an internal node (node > 0), per label.
Eigen::VectorXd edge_entropy(const TtnModel& model, Index node);

/// C_{ij} = <psi_l| sz_i sz_j |psi_l> / <psi_l|psi_l> with sz = diag(1, -1)
/// in the local encoding basis; contracted on the tree, never expanded.
Eigen::MatrixXd correlation(const TtnModel& model, Index label);

/// Rank features by aggregated entropy, flag redundant members of
/// near-(anti)correlated pairs, keep the top k.
QuipsRanking quips(const TtnModel& model, Index k, double redundancy_threshold = 0.99);

/// Column restriction driven by a ranking (schema order preserved).
Dataset restrict_dataset(const Dataset& ds, const QuipsRanking& ranking);

/// Structured text tables: per-feature entropies and per-label correlations.
void write_feature_report(const QuipsRanking& r, const std::vector<std::string>& names,
                          const std::string& path);

}  // namespace ttnc

#endif  // TTNC_ANALYSIS_HPP
