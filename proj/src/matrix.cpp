#include "advgnn/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace advgnn {

namespace {

void check_finite(const Matrix& m, const char* op) {
    if (!all_finite(m)) {
        throw NumericError(std::string(op) + " produced a non-finite entry (" + m.shape_string() + ")");
    }
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ShapeError("ragged initializer list");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    const std::size_t m = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            auto brow = b.row(k);
            for (std::size_t j = 0; j < m; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    check_finite(out, "matmul");
    return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_at_b: cannot multiply transpose of " + a.shape_string() + " by " +
                         b.shape_string());
    }
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row(k);
        auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) {
                continue;
            }
            auto orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                orow[j] += aki * brow[j];
            }
        }
    }
    check_finite(out, "matmul_at_b");
    return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_a_bt: cannot multiply " + a.shape_string() + " by transpose of " +
                         b.shape_string());
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += arow[k] * brow[k];
            }
            out(i, j) = acc;
        }
    }
    check_finite(out, "matmul_a_bt");
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

Matrix elementwise(const Matrix& a, const Matrix& b, ElementwiseOp op) {
    require_same_shape(a, b, "elementwise");
    Matrix out(a.rows(), a.cols());
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    switch (op) {
    case ElementwiseOp::add:
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
        break;
    case ElementwiseOp::sub:
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
        break;
    case ElementwiseOp::mul:
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
        break;
    }
    check_finite(out, "elementwise");
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.values()) {
        v *= s;
    }
    check_finite(out, "scale");
    return out;
}

void axpy(Matrix& a, double s, const Matrix& b) {
    require_same_shape(a, b, "axpy");
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        av[i] += s * bv[i];
    }
}

Matrix column_mean(const Matrix& a) {
    Matrix out(1, a.cols());
    if (a.rows() == 0) {
        return out;
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(0, j) += r[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(a.rows());
    for (double& v : out.values()) {
        v *= inv;
    }
    return out;
}

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows()) {
            throw ShapeError("gather_rows: row " + std::to_string(idx[i]) + " out of range for " + a.shape_string());
        }
        std::copy(a.row(idx[i]).begin(), a.row(idx[i]).end(), out.row(i).begin());
    }
    return out;
}

bool all_finite(const Matrix& a) noexcept {
    return std::all_of(a.values().begin(), a.values().end(), [](double v) { return std::isfinite(v); });
}

double max_abs(const Matrix& a) noexcept {
    double m = 0.0;
    for (double v : a.values()) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

} // namespace advgnn
