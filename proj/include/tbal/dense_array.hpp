#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "tbal/error.hpp"

namespace tbal {

/// Nonnegative order-N array in row-major layout (last index fastest).
class DenseArray {
public:
    DenseArray() = default;

    DenseArray(std::vector<std::size_t> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_.empty()) throw Error(ErrorKind::InvalidArgument, "array order must be at least 1");
        std::size_t total = 1;
        for (auto s : shape_) {
            if (s == 0) throw Error(ErrorKind::InvalidArgument, "array side of length 0");
            total *= s;
        }
        if (data_.size() != total)
            throw Error(ErrorKind::ShapeMismatch,
                        std::to_string(data_.size()) + " values for " + std::to_string(total) + " cells");
        strides_.assign(shape_.size(), 1);
        for (std::size_t m = shape_.size() - 1; m-- > 0;) strides_[m] = strides_[m + 1] * shape_[m + 1];
    }

    static DenseArray zeros(std::vector<std::size_t> shape) {
        std::size_t total = 1;
        for (auto s : shape) total *= s;
        return DenseArray(std::move(shape), std::vector<double>(total, 0.0));
    }

    static DenseArray filled(std::size_t order, std::size_t n, double value) {
        std::vector<std::size_t> shape(order, n);
        std::size_t total = 1;
        for (auto s : shape) total *= s;
        return DenseArray(std::move(shape), std::vector<double>(total, value));
    }

    /// Row-major nested-list style construction for matrices.
    static DenseArray matrix(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "empty matrix");
        std::vector<double> data;
        for (auto& r : rows) {
            if (r.size() != rows.front().size()) throw Error(ErrorKind::ShapeMismatch, "ragged matrix rows");
            data.insert(data.end(), r.begin(), r.end());
        }
        return DenseArray({rows.size(), rows.front().size()}, std::move(data));
    }

    [[nodiscard]] std::size_t order() const noexcept { return shape_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::size_t stride(std::size_t m) const noexcept { return strides_[m]; }
    [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& data() noexcept { return data_; }

    [[nodiscard]] bool equilateral() const noexcept {
        for (auto s : shape_)
            if (s != shape_.front()) return false;
        return true;
    }

    [[nodiscard]] std::size_t offset(const std::vector<std::size_t>& idx) const noexcept {
        std::size_t off = 0;
        for (std::size_t m = 0; m < idx.size(); ++m) off += idx[m] * strides_[m];
        return off;
    }

    [[nodiscard]] std::vector<std::size_t> unravel(std::size_t off) const {
        std::vector<std::size_t> idx(shape_.size());
        for (std::size_t m = 0; m < shape_.size(); ++m) {
            idx[m] = off / strides_[m];
            off %= strides_[m];
        }
        return idx;
    }

    [[nodiscard]] double operator()(const std::vector<std::size_t>& idx) const { return data_[offset(idx)]; }
    double& operator()(const std::vector<std::size_t>& idx) { return data_[offset(idx)]; }
    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return data_[i * strides_[0] + j * strides_[1]]; }

    /// Throws NegativeEntry / EmptySupport when the array is not a valid
    /// balancing input.
    void require_nonnegative() const {
        bool any = false;
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!(data_[i] >= 0.0) || !std::isfinite(data_[i]))
                throw Error(ErrorKind::NegativeEntry, "entry " + std::to_string(i) + " is " + std::to_string(data_[i]));
            any |= data_[i] > 0.0;
        }
        if (!any) throw Error(ErrorKind::EmptySupport, "array has no positive entry");
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<std::size_t> strides_;
    std::vector<double> data_;
};

/// Sums along mode m: result has the shape of A with mode m removed.
inline std::vector<double> fiber_sums(const DenseArray& A, std::size_t m) {
    const auto& shape = A.shape();
    const std::size_t inner = A.stride(m), len = shape[m], outer = A.size() / (inner * len);
    std::vector<double> sums(outer * inner, 0.0);
    const auto& d = A.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < len; ++k) {
            const double* src = d.data() + (o * len + k) * inner;
            double* dst = sums.data() + o * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    return sums;
}

/// Euclidean norm of every fiber-sum deviation from 1 across all modes. For
/// matrices this is the norm of the stacked row- and column-sum deviations.
inline double residual(const DenseArray& A) {
    double acc = 0.0;
    for (std::size_t m = 0; m < A.order(); ++m)
        for (double s : fiber_sums(A, m)) acc += (s - 1.0) * (s - 1.0);
    return std::sqrt(acc);
}

}  // namespace tbal
