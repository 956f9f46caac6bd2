#include <random>

#include "doctest.h"
#include "ttnc/tensor.hpp"

using namespace ttnc;

namespace {

TensorD random_tensor(std::vector<Index> shape, std::mt19937_64& rng) {
    TensorD t(shape);
    std::normal_distribution<double> g;
    for (Index i = 0; i < t.numel(); ++i) t[i] = g(rng);
    return t;
}

// independent triple-loop matrix product
MatrixX<double> loop_matmul(const TensorD& a, const TensorD& b) {
    MatrixX<double> c = MatrixX<double>::Zero(a.dim(0), b.dim(1));
    for (Index i = 0; i < a.dim(0); ++i)
        for (Index j = 0; j < b.dim(1); ++j)
            for (Index k = 0; k < a.dim(1); ++k) c(i, j) += a(i, k) * b(k, j);
    return c;
}

}  // namespace

TEST_CASE("contract: identity acts trivially") {
    TensorD id({3, 3});
    for (Index i = 0; i < 3; ++i) id(i, i) = 1.0;
    TensorD v({3}, {1.5, -2.0, 0.25});
    TensorD out = contract(id, v, {{1, 0}});
    REQUIRE(out.shape() == std::vector<Index>{3});
    for (Index i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(v[i]).epsilon(1e-15));
}

TEST_CASE("contract: outer product preserves norm product") {
    std::mt19937_64 rng(7);
    TensorD a = random_tensor({4, 3}, rng);
    TensorD b = random_tensor({2, 5}, rng);
    TensorD out = contract(a, b, std::initializer_list<std::pair<Index, Index>>{});
    REQUIRE(out.shape() == std::vector<Index>({4, 3, 2, 5}));
    CHECK(out.frobenius_norm() ==
          doctest::Approx(a.frobenius_norm() * b.frobenius_norm()).epsilon(1e-12));
}

TEST_CASE("contract: matches brute-force loop product") {
    std::mt19937_64 rng(11);
    TensorD a = random_tensor({4, 5}, rng);
    TensorD b = random_tensor({5, 6}, rng);
    TensorD c = contract(a, b, {{1, 0}});
    MatrixX<double> ref = loop_matmul(a, b);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 6; ++j) CHECK(std::abs(c(i, j) - ref(i, j)) < 1e-12);
}

TEST_CASE("contract: error cases") {
    std::mt19937_64 rng(3);
    TensorD a = random_tensor({4, 5}, rng);
    TensorD b = random_tensor({6, 6}, rng);
    CHECK_THROWS_AS((void)contract(a, b, {{1, 0}}), std::invalid_argument);
    CHECK_THROWS_AS((void)contract(a, b, {{1, 7}}), std::invalid_argument);
    TensorD sq = random_tensor({5, 5}, rng);
    CHECK_THROWS_AS((void)contract(a, sq, {{1, 0}, {1, 1}}), std::invalid_argument);
}

TEST_CASE("contract is bilinear") {
    std::mt19937_64 rng(13);
    TensorD a = random_tensor({3, 4, 2}, rng);
    TensorD b = random_tensor({4, 2, 5}, rng);
    TensorD ab = contract(a, b, {{1, 0}, {2, 1}});
    TensorD a2 = a;
    a2 *= 3.5;
    TensorD ab2 = contract(a2, b, {{1, 0}, {2, 1}});
    for (Index i = 0; i < ab.numel(); ++i)
        CHECK(ab2[i] == doctest::Approx(3.5 * ab[i]).epsilon(1e-12));
}

TEST_CASE("svd_split: rank-1 outer product") {
    std::mt19937_64 rng(17);
    TensorD u = random_tensor({6}, rng);
    TensorD v = random_tensor({4}, rng);
    TensorD t = contract(u, v, std::initializer_list<std::pair<Index, Index>>{});
    auto r = svd_split(t, {0}, kUnboundedRank, 1e-14);
    REQUIRE(r.singular_values.size() == 1);
    CHECK(r.singular_values(0) ==
          doctest::Approx(u.frobenius_norm() * v.frobenius_norm()).epsilon(1e-12));
    CHECK(r.truncation_error < 1e-10);
}

TEST_CASE("svd_split: identity matrix") {
    const Index n = 5;
    TensorD id({n, n});
    for (Index i = 0; i < n; ++i) id(i, i) = 1.0;
    auto r = svd_split(id, {0}, n, 0.0);
    REQUIRE(r.singular_values.size() == n);
    for (Index i = 0; i < n; ++i)
        CHECK(r.singular_values(i) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.truncation_error == doctest::Approx(0.0));
}

TEST_CASE("svd_split: truncation error against eigendecomposition of t^T t") {
    std::mt19937_64 rng(23);
    TensorD t = random_tensor({8, 8}, rng);
    auto r = svd_split(t, {0}, 3, 0.0);
    REQUIRE(r.singular_values.size() == 3);

    Eigen::Map<const MatrixX<double>> m(t.data(), 8, 8);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        Eigen::MatrixXd(m.transpose() * m));
    // eigenvalues ascending: sigma_4..sigma_8 are the five smallest
    double disc = 0;
    for (Index i = 0; i < 5; ++i) disc += std::max(0.0, es.eigenvalues()(i));
    CHECK(r.truncation_error == doctest::Approx(std::sqrt(disc)).epsilon(1e-10));
}

TEST_CASE("svd_split: lossless at unbounded rank, zero cutoff") {
    std::mt19937_64 rng(29);
    TensorD t = random_tensor({3, 4, 5}, rng);
    auto r = svd_split(t, {0, 2});
    // recontract left * diag(s) * right
    TensorD s({r.singular_values.size(), r.singular_values.size()});
    for (Index i = 0; i < r.singular_values.size(); ++i) s(i, i) = r.singular_values(i);
    TensorD ls = contract(r.left_isometry, s, {{r.left_isometry.rank() - 1, 0}});
    TensorD rec = contract(ls, r.right_isometry, {{ls.rank() - 1, 0}});
    // rec legs: (dim0, dim2, dim1) -> permute back
    const Index order[] = {0, 2, 1};
    rec = permuted(rec, std::span<const Index>(order, 3));
    double err = 0;
    for (Index i = 0; i < t.numel(); ++i) err += (rec[i] - t[i]) * (rec[i] - t[i]);
    CHECK(std::sqrt(err) < 1e-10);
}

TEST_CASE("svd_split: isometry property of factors") {
    std::mt19937_64 rng(31);
    TensorD t = random_tensor({4, 3, 5}, rng);
    auto r = svd_split(t, {1});
    const Index k = r.singular_values.size();
    Eigen::Map<const MatrixX<double>> u(r.left_isometry.data(), 3, k);
    Eigen::Map<const MatrixX<double>> v(r.right_isometry.data(), k, 20);
    CHECK((u.transpose() * u - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-10);
    CHECK((v * v.transpose() - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-10);
}

TEST_CASE("svd_split: norm equals root-sum-square of singular values, any bipartition") {
    std::mt19937_64 rng(37);
    TensorD t = random_tensor({2, 3, 4, 2}, rng);
    for (auto legs : std::vector<std::vector<Index>>{{0}, {1, 3}, {0, 2}, {0, 1, 2}}) {
        auto r = svd_split(t, std::span<const Index>(legs));
        CHECK(t.frobenius_norm() ==
              doctest::Approx(r.singular_values.norm()).epsilon(1e-10));
    }
}

TEST_CASE("svd_split: invalid leg sets") {
    std::mt19937_64 rng(41);
    TensorD t = random_tensor({4, 4}, rng);
    std::vector<Index> none;
    CHECK_THROWS_AS((void)svd_split(t, std::span<const Index>(none)), std::invalid_argument);
    CHECK_THROWS_AS((void)svd_split(t, {0, 1}), std::invalid_argument);
}

TEST_CASE("qr_split: orthogonal input gives unit-diagonal remainder") {
    std::mt19937_64 rng(43);
    TensorD g = random_tensor({5, 5}, rng);
    Eigen::Map<const MatrixX<double>> mg(g.data(), 5, 5);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(mg)};
    Eigen::MatrixXd q = qr.householderQ();
    TensorD ortho({5, 5});
    Eigen::Map<MatrixX<double>>(ortho.data(), 5, 5) = q;

    auto [iso, rem] = qr_split(ortho, {0});
    Eigen::Map<const MatrixX<double>> r(rem.data(), 5, 5);
    Eigen::MatrixXd absr = r.cwiseAbs();
    CHECK((absr.transpose() * absr - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-10);
}

TEST_CASE("qr_split: norm preservation and recontraction") {
    std::mt19937_64 rng(47);
    TensorD t = random_tensor({4, 4}, rng);
    auto [iso, rem] = qr_split(t, {0});
    CHECK(t.frobenius_norm() == doctest::Approx(rem.frobenius_norm()).epsilon(1e-10));
    TensorD rec = contract(iso, rem, {{1, 0}});
    for (Index i = 0; i < t.numel(); ++i) CHECK(std::abs(rec[i] - t[i]) < 1e-10);

    // isometry check
    Eigen::Map<const MatrixX<double>> q(iso.data(), 4, 4);
    CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-10);
}

TEST_CASE("qr_split on higher-order tensors recontracts") {
    std::mt19937_64 rng(53);
    TensorD t = random_tensor({3, 2, 4}, rng);
    auto [iso, rem] = qr_split(t, {0, 2});
    TensorD rec = contract(iso, rem, {{2, 0}});  // (3, 4, 2)
    const Index order[] = {0, 2, 1};
    rec = permuted(rec, std::span<const Index>(order, 3));
    for (Index i = 0; i < t.numel(); ++i) CHECK(std::abs(rec[i] - t[i]) < 1e-10);
}

TEST_CASE("permuted: round trip") {
    std::mt19937_64 rng(59);
    TensorD t = random_tensor({2, 3, 4}, rng);
    const Index fwd[] = {2, 0, 1};
    const Index bwd[] = {1, 2, 0};
    TensorD back = permuted(permuted(t, std::span<const Index>(fwd, 3)),
                            std::span<const Index>(bwd, 3));
    REQUIRE(back.shape() == t.shape());
    for (Index i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);
}
