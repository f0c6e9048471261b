#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fusetext/errors.hpp"

namespace fusetext {

using Shape = std::array<std::size_t, 2>;

inline std::string shape_string(Shape s) {
    std::ostringstream os;
    os << '[' << s[0] << "x" << s[1] << ']';
    return os.str();
}

// Dense row-major matrix of doubles. Vectors are 1xn, scalars 1x1.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape()));
        }
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("ragged initializer for tensor");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor(r, c, std::move(data));
    }

    static Tensor row_vector(std::span<const double> values) {
        return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
    }

    static Tensor scalar(double v) { return Tensor(1, 1, v); }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    Shape shape() const { return {rows_, cols_}; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * cols_, cols_);
    }
    std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }
    const std::vector<double>& values() const { return data_; }

    double item() const {
        if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(shape()));
        return data_[0];
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Exact, element-by-element comparison.
    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using ParamStore = std::map<std::string, Tensor>;

namespace dense {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

// c += a * b
inline void gemm_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = &c(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            if (av == 0.0) continue;
            const double* brow = b.row(p).data();
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c += a * b^T
inline void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i).data();
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.row(j).data();
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            c(i, j) += s;
        }
    }
}

// c += a^T * b
inline void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a.row(p).data();
        const double* brow = b.row(p).data();
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = &c(i, 0);
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
    }
    Tensor c(a.rows(), b.cols());
    gemm_acc(a, b, c);
    return c;
}

inline Tensor transpose(const Tensor& a) {
    Tensor t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline void axpy(double alpha, const Tensor& x, Tensor& y) {
    require_same_shape(x, y, "axpy");
    auto xs = x.data();
    auto ys = y.data();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] += alpha * xs[i];
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("concat: row counts differ, " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
    }
    Tensor out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
    }
    return out;
}

inline Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
    if (begin + count > a.cols()) throw ShapeError("slice_cols out of range for " + shape_string(a.shape()));
    Tensor out(a.rows(), count);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = a(i, begin + j);
    return out;
}

inline Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
    if (begin + count > a.rows()) throw ShapeError("slice_rows out of range for " + shape_string(a.shape()));
    Tensor out(count, a.cols());
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(begin + i, j);
    return out;
}

// Row-wise softmax with max subtraction.
inline Tensor softmax_rows(const Tensor& x) {
    Tensor y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto in = x.row(i);
        auto out = y.row(i);
        double mx = in.empty() ? 0.0 : in[0];
        for (double v : in) mx = std::max(mx, v);
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            out[j] = std::exp(in[j] - mx);
            sum += out[j];
        }
        for (double& v : out) v /= sum;
    }
    return y;
}

}  // namespace dense
}  // namespace fusetext
