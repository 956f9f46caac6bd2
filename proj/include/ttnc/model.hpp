#ifndef TTNC_MODEL_HPP
#define TTNC_MODEL_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ttnc/errors.hpp"
#include "ttnc/tensor.hpp"
#include "ttnc/topology.hpp"

namespace ttnc {

enum class FeatureKind : std::uint8_t {
    continuous = 0,  // x' = clamp(x / x_max, 0, 1)
    charge = 1,      // q in {-1, 0, +1} shifted to {0, 0.5, 1}
};

struct FeatureDef {
    std::string name;
    double x_max = 1.0;
    FeatureKind kind = FeatureKind::continuous;
};

using FeatureSpec = std::vector<FeatureDef>;

/// Product-state encoding of one sample: a unit 2-vector per feature.
struct EncodedSample {
    std::vector<Eigen::Vector2d> states;  // one per declared feature
    std::vector<double> raw;
};

constexpr int kAbstain = -1;

struct PredictionResult {
    Eigen::VectorXd confidences;   // P_l, sums to 1
    Eigen::VectorXd raw_overlaps;  // |<Phi(x)|psi_l>|
    int decision = kAbstain;       // class index, or kAbstain
};

/// Tree tensor network classifier. Node tensors are order 3 with legs
/// (left child, right child, parent); the root's parent leg is the label leg.
class TtnModel {
  public:
    TtnModel() = default;
    TtnModel(TreeTopology topology, Index n_classes, FeatureSpec spec,
             std::vector<TensorD> tensors, Index canonical_center = -1);

    const TreeTopology& topology() const { return topo_; }
    Index n_classes() const { return n_classes_; }
    const FeatureSpec& feature_spec() const { return spec_; }
    Index canonical_center() const { return center_; }

    const TensorD& tensor(Index node) const { return tensors_[static_cast<std::size_t>(node)]; }
    TensorD& tensor(Index node) { return tensors_[static_cast<std::size_t>(node)]; }
    const std::vector<TensorD>& tensors() const { return tensors_; }

    Index leaf_dim(Index leaf) const { return topo_.leaf_padded(leaf) ? 1 : 2; }
    /// Extent of the slot as seen from its parent (bond dim, leaf dim, or
    /// label count for the root's parent leg).
    Index slot_dim(Index slot) const;
    /// Bond dimension of the edge above an internal node (node > 0).
    Index bond_dim(Index node) const { return tensor(node).dim(2); }

    /// Throws NumericError when extents disagree along any edge.
    void validate() const;

    void set_center(Index c) { center_ = c; }

    /// In-place gauge moves; these preserve the represented classifier.
    void isometrize_toward_parent(Index node);
    void move_center_to_child(bool right);
    void move_center_to_parent();

    /// Multiply every tensor by a scalar (confidences are invariant).
    void scale(double a);

  private:
    TreeTopology topo_;
    Index n_classes_ = 0;
    FeatureSpec spec_;
    std::vector<TensorD> tensors_;
    Index center_ = -1;
};

/// Eq.-style spin map: x' = clamp-rescaled feature, state = [cos, sin](pi x'/2).
EncodedSample encode(std::span<const double> features, const FeatureSpec& spec);

/// Local state presented to the model at a leaf ([1,0] on padded leaves).
Eigen::Vector2d leaf_state(const TtnModel& model, const EncodedSample& sample, Index leaf);

PredictionResult classify(const TtnModel& model, const EncodedSample& sample, double delta);

/// Raw per-label overlaps <Phi(x)|psi_l> (signed).
Eigen::VectorXd overlaps(const TtnModel& model, const EncodedSample& sample);

/// Confidences + decision from signed overlaps and the abstention band.
PredictionResult decide(const Eigen::VectorXd& raw, double delta);

TtnModel canonicalize(const TtnModel& model, Index center);

/// Full weight tensor (leaf legs in leaf order, label leg last). Guarded to
/// n_leaves <= 12.
TensorD full_expand(const TtnModel& model);

/// Single-label copy: root label leg sliced to extent 1.
TtnModel slice_label(const TtnModel& model, Index label);

/// Overlap <psi_l(a)|psi_l(b)> per label for two models over the same topology.
Eigen::VectorXd label_overlaps(const TtnModel& a, const TtnModel& b);

/// Per-label squared norm <psi_l|psi_l>.
Eigen::VectorXd label_norms_sq(const TtnModel& model);

void save_model(const TtnModel& model, const std::string& path);
TtnModel load_model(const std::string& path);

}  // namespace ttnc

#endif  // TTNC_MODEL_HPP
