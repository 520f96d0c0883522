#ifndef ADVGNN_MATRIX_HPP
#define ADVGNN_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advgnn {

/// Thrown when operand shapes are incompatible.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation would produce NaN or Inf entries.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    /// "RxC", used in error messages.
    std::string shape_string() const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class ElementwiseOp { add, sub, mul };

Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b without materializing the transpose.
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
/// a * b^T without materializing the transpose.
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix elementwise(const Matrix& a, const Matrix& b, ElementwiseOp op);
inline Matrix add(const Matrix& a, const Matrix& b) { return elementwise(a, b, ElementwiseOp::add); }
inline Matrix sub(const Matrix& a, const Matrix& b) { return elementwise(a, b, ElementwiseOp::sub); }
inline Matrix hadamard(const Matrix& a, const Matrix& b) { return elementwise(a, b, ElementwiseOp::mul); }

Matrix scale(const Matrix& a, double s);
/// a += s * b, in place.
void axpy(Matrix& a, double s, const Matrix& b);

/// Column means, as a 1 x cols matrix.
Matrix column_mean(const Matrix& a);
/// Rows of `a` selected by `idx`, in order.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> idx);

bool all_finite(const Matrix& a) noexcept;
double max_abs(const Matrix& a) noexcept;

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

} // namespace advgnn

#endif // ADVGNN_MATRIX_HPP
