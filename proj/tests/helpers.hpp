#ifndef TTNC_TEST_HELPERS_HPP
#define TTNC_TEST_HELPERS_HPP

#include <random>

#include "ttnc/model.hpp"

namespace ttnc::testing {

inline FeatureSpec unit_spec(Index n) {
    FeatureSpec spec(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        spec[static_cast<std::size_t>(i)].name = "f" + std::to_string(i);
        spec[static_cast<std::size_t>(i)].x_max = 1.0;
    }
    return spec;
}

/// Random Gaussian model (no particular gauge, canonical center unset).
inline TtnModel random_model(Index n_features, Index n_classes, Index chi,
                             std::mt19937_64& rng) {
    TreeTopology topo = TreeTopology::balanced(n_features);
    std::normal_distribution<double> g;
    std::vector<TensorD> tensors;
    auto bond = [&](Index slot) -> Index {
        if (!topo.is_internal_slot(slot))
            return topo.leaf_padded(topo.leaf_of_slot(slot)) ? 1 : 2;
        return std::min(chi, topo.slot_phys_product(slot));
    };
    for (Index n = 0; n < topo.n_internal(); ++n) {
        Index dp = (n == 0) ? n_classes : bond(n);
        TensorD t({bond(topo.left_slot(n)), bond(topo.right_slot(n)), dp});
        for (Index i = 0; i < t.numel(); ++i) t[i] = g(rng);
        tensors.push_back(std::move(t));
    }
    return TtnModel(topo, n_classes, unit_spec(n_features), std::move(tensors));
}

inline std::vector<double> random_features(Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = u(rng);
    return x;
}

/// Oracle: per-label overlaps via the fully expanded weight tensor.
inline Eigen::VectorXd brute_force_overlaps(const TtnModel& m, const EncodedSample& s) {
    TensorD w = full_expand(m);
    const TreeTopology& topo = m.topology();
    const Index L = topo.n_leaves();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m.n_classes());
    std::vector<Index> idx(static_cast<std::size_t>(L + 1), 0);
    const Index n = w.numel();
    for (Index flat = 0; flat < n; ++flat) {
        Index rem = flat;
        for (Index k = L; k >= 0; --k) {
            idx[static_cast<std::size_t>(k)] = rem % w.dim(k);
            rem /= w.dim(k);
        }
        double amp = w[flat];
        for (Index leaf = 0; leaf < L; ++leaf)
            amp *= leaf_state(m, s, leaf)(idx[static_cast<std::size_t>(leaf)]);
        out(idx[static_cast<std::size_t>(L)]) += amp;
    }
    return out;
}

}  // namespace ttnc::testing

#endif
