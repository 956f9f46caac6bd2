#ifndef TTNC_TRAINING_HPP
#define TTNC_TRAINING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ttnc/data.hpp"
#include "ttnc/model.hpp"

namespace ttnc {

enum class LossKind { nll, mse };

struct TrainConfig {
    Index chi_max = 16;
    Index n_sweeps = 10;
    LossKind loss = LossKind::nll;
    Index cg_iters_per_node = 5;
    double cg_tolerance = 1e-6;
    Index batch_size = 0;  // 0 = full batch
    double weight_decay = 0.0;  // L2 on the local tensor during node updates
    std::uint64_t seed = 0;
    int early_stop_patience = 3;
    double val_fraction = 0.10;  // carved from the provided training data
    int threads = 1;

    void validate() const {
        if (chi_max < 1) throw ConfigError("train: chi_max must be >= 1");
        if (n_sweeps < 0) throw ConfigError("train: n_sweeps must be >= 0");
        if (cg_iters_per_node < 1) throw ConfigError("train: cg_iters_per_node must be >= 1");
        if (!(cg_tolerance > 0)) throw ConfigError("train: cg_tolerance must be > 0");
        if (batch_size < 0) throw ConfigError("train: batch_size must be >= 0");
        if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
        if (!(val_fraction >= 0 && val_fraction < 1))
            throw ConfigError("train: val_fraction out of [0, 1)");
        if (threads < 1) throw ConfigError("train: threads must be >= 1");
    }
};

struct TrainReport {
    std::vector<double> sweep_loss;
    std::vector<double> train_accuracy;
    std::vector<double> val_accuracy;
    std::vector<double> wall_seconds;  // excluded from determinism comparisons
    std::vector<Index> final_bond_dims;
    Index best_sweep = -1;
};

/// Encoded labeled batch used by loss/gradient evaluation.
struct LabeledBatch {
    std::vector<EncodedSample> samples;
    std::vector<int> labels;
};

LabeledBatch encode_dataset(const Dataset& ds, const FeatureSpec& spec);

/// Noise-perturbed product-state start, canonicalized at the root with a
/// normalized root tensor. Deterministic per seed.
TtnModel init_model(const TreeTopology& topology, Index n_classes,
                    const FeatureSpec& spec, Index chi_max, std::uint64_t seed);

/// Mean batch loss of the full model (direct evaluation, no caches).
double loss(const TtnModel& model, const LabeledBatch& batch,
            LossKind kind = LossKind::nll);

/// Gradient of the mean batch loss with respect to the tensor at `node`.
/// Requires the model to be canonical at `node`.
TensorD local_gradient(const TtnModel& model, Index node, const LabeledBatch& batch,
                       LossKind kind = LossKind::nll);

std::pair<TtnModel, TrainReport> train(const TtnModel& model, const Dataset& dataset,
                                       const TrainConfig& config);

/// Accuracy of argmax decisions over a batch.
double accuracy(const TtnModel& model, const LabeledBatch& batch);

void write_train_report(const TrainReport& r, const std::string& path);

}  // namespace ttnc

#endif  // TTNC_TRAINING_HPP
