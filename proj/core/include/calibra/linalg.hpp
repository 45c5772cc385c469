#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace calibra {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix column(const Vector& v);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const double* row(std::size_t i) const { return data_.data() + i * cols_; }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const std::vector<double>& data() const { return data_; }

    Vector col(std::size_t j) const;
    bool all_finite() const;
    double max_abs() const;

    bool operator==(const Matrix& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Vector matvec(const Matrix& a, const Vector& x);
Matrix add(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// a^T a, a^T b, a^T diag(w) a
Matrix crossprod(const Matrix& a);
Matrix crossprod(const Matrix& a, const Matrix& b);
Matrix weighted_crossprod(const Matrix& a, const Vector& w);
Vector crossprod(const Matrix& a, const Vector& y);

Matrix solve_sym(const Matrix& a, const Matrix& b);
Vector solve_sym(const Matrix& a, const Vector& b);
Matrix inverse_sym(const Matrix& a);

struct OlsFit {
    Vector coef;
    double residual_var = 0.0;
    Matrix xtx_inv;
    Vector residuals;
};

OlsFit ols_solve(const Matrix& design, const Vector& response);

}
