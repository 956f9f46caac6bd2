#ifndef TTNC_TENSOR_HPP
#define TTNC_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ttnc {

using Index = Eigen::Index;

/// Dense real-valued tensor with row-major linearization.
/// The last index runs fastest; this order is also the on-disk layout.
template <typename Scalar>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<Index> shape)
        : shape_(std::move(shape)), data_(checked_numel(shape_), Scalar(0)) {}

    Tensor(std::vector<Index> shape, std::vector<Scalar> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<Index>(data_.size()) != checked_numel(shape_))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    Index rank() const { return static_cast<Index>(shape_.size()); }
    Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
    const std::vector<Index>& shape() const { return shape_; }
    Index numel() const { return static_cast<Index>(data_.size()); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }
    std::vector<Scalar>& storage() { return data_; }
    const std::vector<Scalar>& storage() const { return data_; }

    Scalar& operator[](Index flat) { return data_[static_cast<std::size_t>(flat)]; }
    Scalar operator[](Index flat) const { return data_[static_cast<std::size_t>(flat)]; }

    Scalar& at(std::span<const Index> idx) { return data_[flatten(idx)]; }
    Scalar at(std::span<const Index> idx) const { return data_[flatten(idx)]; }

    template <typename... Ix>
    Scalar& operator()(Ix... ix) {
        const Index idx[] = {static_cast<Index>(ix)...};
        return data_[flatten({idx, sizeof...(Ix)})];
    }
    template <typename... Ix>
    Scalar operator()(Ix... ix) const {
        const Index idx[] = {static_cast<Index>(ix)...};
        return data_[flatten({idx, sizeof...(Ix)})];
    }

    /// Reinterpret with a new shape of equal element count.
    Tensor reshaped(std::vector<Index> shape) const {
        if (checked_numel(shape) != numel())
            throw std::invalid_argument("reshaped: element count mismatch");
        return Tensor(std::move(shape), data_);
    }

    Scalar frobenius_norm() const {
        return Eigen::Map<const Eigen::Vector<Scalar, Eigen::Dynamic>>(data_.data(),
                                                                       numel())
            .norm();
    }

    Tensor& operator*=(Scalar a) {
        Eigen::Map<Eigen::Vector<Scalar, Eigen::Dynamic>>(data_.data(), numel()) *= a;
        return *this;
    }

    static Index checked_numel(const std::vector<Index>& shape) {
        Index n = 1;
        for (Index d : shape) {
            if (d < 1) throw std::invalid_argument("Tensor: extents must be >= 1");
            n *= d;
        }
        return n;
    }

  private:
    std::size_t flatten(std::span<const Index> idx) const {
        if (idx.size() != shape_.size())
            throw std::invalid_argument("Tensor: index rank mismatch");
        std::size_t flat = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] < 0 || idx[k] >= shape_[k])
                throw std::out_of_range("Tensor: index out of range");
            flat = flat * static_cast<std::size_t>(shape_[k]) +
                   static_cast<std::size_t>(idx[k]);
        }
        return flat;
    }

    std::vector<Index> shape_;
    std::vector<Scalar> data_;
};

using TensorD = Tensor<double>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Vector<Scalar, Eigen::Dynamic>;

/// Permute tensor legs: result leg k is input leg order[k].
template <typename Scalar>
Tensor<Scalar> permuted(const Tensor<Scalar>& t, std::span<const Index> order) {
    const Index r = t.rank();
    if (static_cast<Index>(order.size()) != r)
        throw std::invalid_argument("permuted: order length mismatch");
    std::vector<bool> seen(static_cast<std::size_t>(r), false);
    std::vector<Index> out_shape(static_cast<std::size_t>(r));
    for (Index k = 0; k < r; ++k) {
        Index src = order[static_cast<std::size_t>(k)];
        if (src < 0 || src >= r || seen[static_cast<std::size_t>(src)])
            throw std::invalid_argument("permuted: invalid permutation");
        seen[static_cast<std::size_t>(src)] = true;
        out_shape[static_cast<std::size_t>(k)] = t.dim(src);
    }
    Tensor<Scalar> out(out_shape);
    if (r == 0) {
        out[0] = t[0];
        return out;
    }
    // in_stride[k]: stride in the input of the k-th output leg
    std::vector<Index> stride(static_cast<std::size_t>(r), 1);
    for (Index k = r - 2; k >= 0; --k)
        stride[static_cast<std::size_t>(k)] =
            stride[static_cast<std::size_t>(k + 1)] * t.dim(k + 1);
    std::vector<Index> in_stride(static_cast<std::size_t>(r));
    for (Index k = 0; k < r; ++k)
        in_stride[static_cast<std::size_t>(k)] =
            stride[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];

    std::vector<Index> idx(static_cast<std::size_t>(r), 0);
    const Index n = out.numel();
    Index src_flat = 0;
    for (Index flat = 0; flat < n; ++flat) {
        out[flat] = t[src_flat];
        for (Index k = r - 1; k >= 0; --k) {
            auto ku = static_cast<std::size_t>(k);
            if (++idx[ku] < out_shape[ku]) {
                src_flat += in_stride[ku];
                break;
            }
            src_flat -= in_stride[ku] * (out_shape[ku] - 1);
            idx[ku] = 0;
        }
    }
    return out;
}

namespace detail {

template <typename Scalar>
struct Matricized {
    Tensor<Scalar> permuted;  // rows-legs first, then column legs
    Index rows = 1;
    Index cols = 1;
    std::vector<Index> row_dims;
    std::vector<Index> col_dims;
};

/// Bring row_legs to the front (in the given order) and flatten to a matrix.
template <typename Scalar>
Matricized<Scalar> matricize(const Tensor<Scalar>& t, std::span<const Index> row_legs) {
    const Index r = t.rank();
    std::vector<bool> is_row(static_cast<std::size_t>(r), false);
    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(r));
    for (Index leg : row_legs) {
        if (leg < 0 || leg >= r) throw std::invalid_argument("matricize: leg out of range");
        if (is_row[static_cast<std::size_t>(leg)])
            throw std::invalid_argument("matricize: repeated leg");
        is_row[static_cast<std::size_t>(leg)] = true;
        order.push_back(leg);
    }
    for (Index leg = 0; leg < r; ++leg)
        if (!is_row[static_cast<std::size_t>(leg)]) order.push_back(leg);

    Matricized<Scalar> m;
    m.permuted = permuted(t, order);
    for (std::size_t k = 0; k < row_legs.size(); ++k) {
        m.row_dims.push_back(m.permuted.dim(static_cast<Index>(k)));
        m.rows *= m.row_dims.back();
    }
    for (Index k = static_cast<Index>(row_legs.size()); k < r; ++k) {
        m.col_dims.push_back(m.permuted.dim(k));
        m.cols *= m.col_dims.back();
    }
    return m;
}

}  // namespace detail

/// Pairwise contraction: leg_pairs[k] = {leg of a, leg of b} to be summed over.
/// Result legs: free legs of a (in order), then free legs of b.
template <typename Scalar>
Tensor<Scalar> contract(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                        std::span<const std::pair<Index, Index>> leg_pairs) {
    std::vector<bool> a_used(static_cast<std::size_t>(a.rank()), false);
    std::vector<bool> b_used(static_cast<std::size_t>(b.rank()), false);
    Index k_dim = 1;
    for (auto [la, lb] : leg_pairs) {
        if (la < 0 || la >= a.rank() || lb < 0 || lb >= b.rank())
            throw std::invalid_argument("contract: leg index out of range");
        if (a_used[static_cast<std::size_t>(la)] || b_used[static_cast<std::size_t>(lb)])
            throw std::invalid_argument("contract: repeated leg in pairs");
        if (a.dim(la) != b.dim(lb))
            throw std::invalid_argument("contract: paired extents do not match");
        a_used[static_cast<std::size_t>(la)] = true;
        b_used[static_cast<std::size_t>(lb)] = true;
        k_dim *= a.dim(la);
    }

    std::vector<Index> a_free, b_free, a_contr, b_contr;
    for (auto [la, lb] : leg_pairs) {
        a_contr.push_back(la);
        b_contr.push_back(lb);
    }
    for (Index l = 0; l < a.rank(); ++l)
        if (!a_used[static_cast<std::size_t>(l)]) a_free.push_back(l);
    for (Index l = 0; l < b.rank(); ++l)
        if (!b_used[static_cast<std::size_t>(l)]) b_free.push_back(l);

    // a -> (free, contracted), b -> (contracted, free)
    std::vector<Index> a_order = a_free;
    a_order.insert(a_order.end(), a_contr.begin(), a_contr.end());
    std::vector<Index> b_order = b_contr;
    b_order.insert(b_order.end(), b_free.begin(), b_free.end());
    Tensor<Scalar> ap = permuted(a, std::span<const Index>(a_order));
    Tensor<Scalar> bp = permuted(b, std::span<const Index>(b_order));

    std::vector<Index> out_shape;
    Index m_dim = 1, n_dim = 1;
    for (Index l : a_free) {
        out_shape.push_back(a.dim(l));
        m_dim *= a.dim(l);
    }
    for (Index l : b_free) {
        out_shape.push_back(b.dim(l));
        n_dim *= b.dim(l);
    }

    Tensor<Scalar> out(out_shape);
    Eigen::Map<const MatrixX<Scalar>> ma(ap.data(), m_dim, k_dim);
    Eigen::Map<const MatrixX<Scalar>> mb(bp.data(), k_dim, n_dim);
    Eigen::Map<MatrixX<Scalar>> mo(out.data(), m_dim, n_dim);
    mo.noalias() = ma * mb;
    return out;
}

template <typename Scalar>
Tensor<Scalar> contract(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                        std::initializer_list<std::pair<Index, Index>> leg_pairs) {
    std::vector<std::pair<Index, Index>> pairs(leg_pairs);
    return contract(a, b, std::span<const std::pair<Index, Index>>(pairs));
}

template <typename Scalar>
struct SvdResult {
    Tensor<Scalar> left_isometry;   // (row legs..., bond)
    VectorX<Scalar> singular_values;  // non-increasing, >= 0
    Tensor<Scalar> right_isometry;  // (bond, column legs...)
    Scalar truncation_error = 0;    // sqrt(sum of squared discarded values)
};

constexpr Index kUnboundedRank = -1;

/// SVD across the bipartition (left_legs | rest), with optional rank cap and
/// relative cutoff on singular values. At least one value is always kept.
template <typename Scalar>
SvdResult<Scalar> svd_split(const Tensor<Scalar>& t, std::span<const Index> left_legs,
                            Index max_rank = kUnboundedRank, Scalar cutoff = Scalar(0)) {
    if (left_legs.empty() || static_cast<Index>(left_legs.size()) >= t.rank())
        throw std::invalid_argument("svd_split: left legs must be a proper non-empty subset");
    if (max_rank != kUnboundedRank && max_rank < 1)
        throw std::invalid_argument("svd_split: max_rank must be >= 1");
    if (cutoff < Scalar(0)) throw std::invalid_argument("svd_split: negative cutoff");

    auto m = detail::matricize(t, left_legs);
    Eigen::Map<const MatrixX<Scalar>> mat(m.permuted.data(), m.rows, m.cols);

    Eigen::JacobiSVD<MatrixX<Scalar>> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const Index full = s.size();

    Index keep = full;
    if (full > 0 && s(0) > Scalar(0)) {
        while (keep > 1 && s(keep - 1) < cutoff * s(0)) --keep;
    }
    if (max_rank != kUnboundedRank) keep = std::min(keep, max_rank);
    keep = std::max<Index>(keep, 1);

    SvdResult<Scalar> out;
    out.singular_values = s.head(keep);
    out.truncation_error = std::sqrt(s.tail(full - keep).squaredNorm());

    std::vector<Index> u_shape = m.row_dims;
    u_shape.push_back(keep);
    Tensor<Scalar> u(u_shape);
    Eigen::Map<MatrixX<Scalar>>(u.data(), m.rows, keep) = svd.matrixU().leftCols(keep);
    out.left_isometry = std::move(u);

    std::vector<Index> v_shape{keep};
    v_shape.insert(v_shape.end(), m.col_dims.begin(), m.col_dims.end());
    Tensor<Scalar> v(v_shape);
    Eigen::Map<MatrixX<Scalar>>(v.data(), keep, m.cols) =
        svd.matrixV().leftCols(keep).transpose();
    out.right_isometry = std::move(v);
    return out;
}

template <typename Scalar>
SvdResult<Scalar> svd_split(const Tensor<Scalar>& t, std::initializer_list<Index> left_legs,
                            Index max_rank = kUnboundedRank, Scalar cutoff = Scalar(0)) {
    std::vector<Index> legs(left_legs);
    return svd_split(t, std::span<const Index>(legs), max_rank, cutoff);
}

/// Thin QR across the bipartition (left_legs | rest).
/// Returns (isometry with legs (row legs..., bond), remainder (bond, column legs...)).
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> qr_split(const Tensor<Scalar>& t,
                                                   std::span<const Index> left_legs) {
    if (left_legs.empty() || static_cast<Index>(left_legs.size()) >= t.rank())
        throw std::invalid_argument("qr_split: left legs must be a proper non-empty subset");

    auto m = detail::matricize(t, left_legs);
    Eigen::Map<const MatrixX<Scalar>> mat(m.permuted.data(), m.rows, m.cols);
    const Index k = std::min(m.rows, m.cols);

    Eigen::HouseholderQR<MatrixX<Scalar>> qr(mat);
    MatrixX<Scalar> q = qr.householderQ() * MatrixX<Scalar>::Identity(m.rows, k);
    MatrixX<Scalar> r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();

    std::vector<Index> q_shape = m.row_dims;
    q_shape.push_back(k);
    Tensor<Scalar> qt(q_shape);
    Eigen::Map<MatrixX<Scalar>>(qt.data(), m.rows, k) = q;

    std::vector<Index> r_shape{k};
    r_shape.insert(r_shape.end(), m.col_dims.begin(), m.col_dims.end());
    Tensor<Scalar> rt(r_shape);
    Eigen::Map<MatrixX<Scalar>>(rt.data(), k, m.cols) = r;
    return {std::move(qt), std::move(rt)};
}

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> qr_split(const Tensor<Scalar>& t,
                                                   std::initializer_list<Index> left_legs) {
    std::vector<Index> legs(left_legs);
    return qr_split(t, std::span<const Index>(legs));
}

}  // namespace ttnc

#endif  // TTNC_TENSOR_HPP
