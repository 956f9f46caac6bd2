#include "ttnc/compression.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

using namespace ttnc;
using ttnc::testing::random_features;
using ttnc::testing::random_model;
using ttnc::testing::unit_spec;

namespace {

std::vector<EncodedSample> random_samples(Index n, Index n_features,
                                          std::mt19937_64& rng) {
    FeatureSpec spec = unit_spec(n_features);
    std::vector<EncodedSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        auto x = random_features(n_features, rng);
        out.push_back(encode(x, spec));
    }
    return out;
}

// per-label overlap ratio between two models from their full expansions
Eigen::VectorXd expansion_fidelity(const TtnModel& a, const TtnModel& b) {
    TensorD wa = full_expand(a);
    TensorD wb = full_expand(b);
    const Index nc = a.n_classes();
    const Index block = wa.numel() / nc;
    Eigen::VectorXd out(nc);
    for (Index l = 0; l < nc; ++l) {
        double ov = 0, na = 0, nb = 0;
        // label leg is the last (fastest) index
        for (Index r = 0; r < block; ++r) {
            const double va = wa[r * nc + l], vb = wb[r * nc + l];
            ov += va * vb;
            na += va * va;
            nb += vb * vb;
        }
        out(l) = std::abs(ov) / std::sqrt(na * nb);
    }
    return out;
}

}  // namespace

TEST_CASE("truncation at full rank leaves every confidence intact") {
    std::mt19937_64 rng(71);
    TtnModel m = random_model(8, 2, 6, rng);
    TruncationPlan plan;
    plan.chi_target = 64;
    auto [t, rep] = truncate(m, plan);
    t.validate();
    CHECK(rep.params_after == rep.params_before);
    CHECK(rep.total_fidelity == doctest::Approx(1.0).epsilon(1e-12));
    for (Index i = 0; i < 20; ++i) {
        EncodedSample s = encode(random_features(8, rng), m.feature_spec());
        PredictionResult a = classify(m, s, 0.0);
        PredictionResult b = classify(t, s, 0.0);
        CHECK((a.confidences - b.confidences).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("chi = 1 yields a per-label product state with normalized confidences") {
    std::mt19937_64 rng(73);
    TtnModel m = random_model(8, 2, 6, rng);
    TruncationPlan plan;
    plan.chi_target = 1;
    auto [t, rep] = truncate(m, plan);
    t.validate();
    for (Index node = 1; node < t.topology().n_internal(); ++node)
        CHECK(t.bond_dim(node) == 1);
    EncodedSample s = encode(random_features(8, rng), m.feature_spec());
    PredictionResult p = classify(t, s, 0.0);
    CHECK(p.confidences.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (const EdgeRecord& e : rep.edges) CHECK(e.chi_after == 1);
}

TEST_CASE("per-label fidelity matches the full-expansion oracle") {
    std::mt19937_64 rng(79);
    TtnModel m = random_model(8, 2, 16, rng);
    TruncationPlan plan;
    plan.chi_target = 4;
    auto [t, rep] = truncate(m, plan);
    Eigen::VectorXd oracle = expansion_fidelity(t, m);
    for (Index l = 0; l < 2; ++l) {
        CHECK(rep.fidelity(l) >= 0.0);
        CHECK(rep.fidelity(l) <= 1.0);
        CHECK(rep.fidelity(l) == doctest::Approx(oracle(l)).epsilon(1e-8));
    }
}

TEST_CASE("a single cut edge loses fidelity by the discarded weight") {
    std::mt19937_64 rng(83);
    for (int trial = 0; trial < 4; ++trial) {
        TtnModel m = random_model(8, 2, 8, rng);
        TruncationPlan plan;
        plan.chi_per_edge.assign(static_cast<std::size_t>(m.topology().n_internal()), 0);
        for (Index node = 1; node < m.topology().n_internal(); ++node)
            plan.chi_per_edge[static_cast<std::size_t>(node)] = m.bond_dim(node);
        plan.chi_per_edge[1] = m.bond_dim(1) / 2;
        auto [t, rep] = truncate(m, plan);

        double eps = 0;
        for (const EdgeRecord& e : rep.edges)
            if (e.node == 1) eps = e.truncation_error;
        REQUIRE(eps > 0.0);
        const double loss =
            std::sqrt(std::max(0.0, 1.0 - rep.total_fidelity * rep.total_fidelity));
        CHECK(loss == doctest::Approx(eps).epsilon(0.10));
    }
}

TEST_CASE("param_count agrees with an explicit shape walk") {
    std::mt19937_64 rng(89);
    // 4 leaves, chi = 2, 2 classes: three 2x2x2 tensors
    TtnModel a = random_model(4, 2, 2, rng);
    CHECK(param_count(a) == 24);
    // 3 features pad one leaf to dimension 1; chi = 1 collapses the bonds
    TtnModel b = random_model(3, 2, 1, rng);
    CHECK(param_count(b) == 4 + 2 + 2);
    // generic cross-check against the declared shapes
    TtnModel c = random_model(8, 3, 5, rng);
    Index walked = 0;
    for (Index node = 0; node < c.topology().n_internal(); ++node) {
        const auto& sh = c.tensor(node).shape();
        walked += sh[0] * sh[1] * sh[2];
    }
    CHECK(param_count(c) == walked);
}

TEST_CASE("truncation shrinks parameters and fidelity monotonically") {
    std::mt19937_64 rng(97);
    TtnModel m = random_model(8, 2, 8, rng);
    Index last_params = param_count(m) + 1;
    double last_fid = 1.0 + 1e-12;
    for (Index chi : {Index(8), Index(6), Index(4), Index(2), Index(1)}) {
        TruncationPlan plan;
        plan.chi_target = chi;
        auto [t, rep] = truncate(m, plan);
        CHECK(rep.params_after <= rep.params_before);
        CHECK(rep.params_after < last_params);
        CHECK(rep.total_fidelity <= last_fid + 1e-10);
        for (const EdgeRecord& e : rep.edges) CHECK(e.chi_after <= e.chi_before);
        last_params = rep.params_after;
        last_fid = rep.total_fidelity;
    }
}

TEST_CASE("truncate rejects invalid plans") {
    std::mt19937_64 rng(101);
    TtnModel m = random_model(4, 2, 2, rng);
    TruncationPlan bad;
    bad.chi_target = 0;
    CHECK_THROWS_AS(truncate(m, bad), ConfigError);
    TruncationPlan neg;
    neg.chi_target = 2;
    neg.cutoff = -0.1;
    CHECK_THROWS_AS(truncate(m, neg), ConfigError);
    TruncationPlan short_map;
    short_map.chi_per_edge = {1, 1};
    CHECK_THROWS_AS(truncate(m, short_map), ConfigError);
}

TEST_CASE("latency drops when the bond dimension collapses") {
    std::mt19937_64 rng(103);
    TtnModel big = random_model(16, 2, 16, rng);
    TruncationPlan plan;
    plan.chi_target = 1;
    auto [small, rep] = truncate(big, plan);
    auto samples = random_samples(64, 16, rng);
    LatencyStats lb = measure_latency(big, samples, 2000);
    LatencyStats ls = measure_latency(small, samples, 2000);
    CHECK(lb.mean_us > 0.0);
    CHECK(ls.mean_us > 0.0);
    CHECK(lb.p99_us >= lb.mean_us);
    CHECK(ls.mean_us < lb.mean_us);
}

TEST_CASE("tune_for_latency returns the untruncated model for a loose budget") {
    std::mt19937_64 rng(107);
    TtnModel m = random_model(8, 2, 4, rng);
    auto samples = random_samples(32, 8, rng);
    LatencyStats base = measure_latency(m, samples, 2000);
    auto [t, rep] = tune_for_latency(m, base.mean_us * 50.0, samples);
    CHECK(rep.params_after == rep.params_before);
    CHECK(rep.fidelity.minCoeff() == 1.0);
    CHECK(rep.latency_after.mean_us <= base.mean_us * 50.0);
}

TEST_CASE("tune_for_latency reports the chi = 1 floor on impossible budgets") {
    std::mt19937_64 rng(109);
    TtnModel m = random_model(8, 2, 4, rng);
    auto samples = random_samples(32, 8, rng);
    try {
        tune_for_latency(m, 1e-4, samples);
        FAIL("expected LatencyFloorError");
    } catch (const LatencyFloorError& e) {
        CHECK(e.floor_us > 1e-4);
    }
}

TEST_CASE("tune_for_latency meets an intermediate budget") {
    std::mt19937_64 rng(113);
    TtnModel m = random_model(16, 2, 16, rng);
    auto samples = random_samples(64, 16, rng);
    TruncationPlan plan;
    plan.chi_target = 2;
    auto [two, r2] = truncate(m, plan);
    const double budget = measure_latency(two, samples, 2000).mean_us * 1.5;
    auto [t, rep] = tune_for_latency(m, budget, samples);
    CHECK(rep.latency_after.mean_us <= budget);
    CHECK(rep.latency_before.mean_us > budget);
    CHECK(rep.params_after < rep.params_before);
    CHECK(rep.total_fidelity <= 1.0);
}

TEST_CASE("compression report renders every section") {
    std::mt19937_64 rng(127);
    TtnModel m = random_model(4, 2, 2, rng);
    TruncationPlan plan;
    plan.chi_target = 1;
    auto [t, rep] = truncate(m, plan);
    const std::string path = "compression_report_test.txt";
    write_compression_report(rep, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("chi_before") != std::string::npos);
    CHECK(text.find("total_fidelity") != std::string::npos);
    CHECK(text.find("free_parameters") != std::string::npos);
    std::remove(path.c_str());
}
