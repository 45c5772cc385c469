#include "calibra/linalg.hpp"

#include "calibra/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace calibra {

namespace {

constexpr double kPivotTol = 1e-12;
constexpr double kSymTol = 1e-10;

std::string dims(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_square_sym(const Matrix& a) {
    if (a.rows() != a.cols()) throw ShapeError("solve_sym: matrix is " + dims(a) + ", not square");
    double tol = kSymTol * std::max(1.0, a.max_abs());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol)
                throw DomainError("solve_sym: matrix not symmetric at (" + std::to_string(i) + "," +
                                  std::to_string(j) + ")");
}

// Cholesky a = L L^T. Returns false (with failing pivot) when a is not numerically PD.
bool cholesky(const Matrix& a, Matrix& l, std::size_t& bad) {
    std::size_t n = a.rows();
    l = Matrix(n, n);
    double maxd = 0.0;
    for (std::size_t i = 0; i < n; ++i) maxd = std::max(maxd, std::abs(a(i, i)));
    double tol = kPivotTol * maxd;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > tol)) {
            bad = j;
            return false;
        }
        double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return true;
}

// LDL^T without pivoting, for symmetric indefinite blocks
void ldlt(const Matrix& a, Matrix& l, Vector& d) {
    std::size_t n = a.rows();
    l = Matrix::identity(n);
    d.assign(n, 0.0);
    double maxd = 0.0;
    for (std::size_t i = 0; i < n; ++i) maxd = std::max(maxd, std::abs(a(i, i)));
    double tol = kPivotTol * maxd;
    for (std::size_t j = 0; j < n; ++j) {
        double dj = a(j, j);
        for (std::size_t k = 0; k < j; ++k) dj -= l(j, k) * l(j, k) * d[k];
        if (!(std::abs(dj) > tol))
            throw SingularityError("singular matrix: pivot " + std::to_string(j) + " below tolerance",
                                   static_cast<long>(j));
        d[j] = dj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k) * d[k];
            l(i, j) = s / dj;
        }
    }
}

void forward_sub(const Matrix& l, double* x, std::size_t stride, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i * stride];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k * stride];
        x[i * stride] = s / l(i, i);
    }
}

void backward_sub_t(const Matrix& l, double* x, std::size_t stride, std::size_t n) {
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii * stride];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k * stride];
        x[ii * stride] = s / l(ii, ii);
    }
}

}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows * cols)
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    if (!all_finite()) throw DomainError("matrix has non-finite entries");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::column(const Vector& v) { return Matrix(v.size(), 1, v); }

Vector Matrix::col(std::size_t j) const {
    Vector v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul: " + dims(a) + " times " + dims(b));
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double aik = a(i, k);
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Vector matvec(const Matrix& a, const Vector& x) {
    if (a.cols() != x.size()) throw ShapeError("matvec: " + dims(a) + " times vector of " + std::to_string(x.size()));
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: " + dims(a) + " plus " + dims(b));
    Matrix c = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) *= s;
    return c;
}

Matrix crossprod(const Matrix& a) {
    std::size_t p = a.cols();
    Matrix g(p, p);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row(i);
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t k = j; k < p; ++k) g(j, k) += r[j] * r[k];
    }
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < j; ++k) g(j, k) = g(k, j);
    return g;
}

Matrix crossprod(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("crossprod: " + dims(a) + " with " + dims(b));
    Matrix g(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ra = a.row(i);
        const double* rb = b.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t k = 0; k < b.cols(); ++k) g(j, k) += ra[j] * rb[k];
    }
    return g;
}

Matrix weighted_crossprod(const Matrix& a, const Vector& w) {
    if (a.rows() != w.size()) throw ShapeError("weighted_crossprod: weight length mismatch");
    std::size_t p = a.cols();
    Matrix g(p, p);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row(i);
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t k = j; k < p; ++k) g(j, k) += w[i] * r[j] * r[k];
    }
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < j; ++k) g(j, k) = g(k, j);
    return g;
}

Vector crossprod(const Matrix& a, const Vector& y) {
    if (a.rows() != y.size()) throw ShapeError("crossprod: " + dims(a) + " with vector of " + std::to_string(y.size()));
    Vector g(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) g[j] += r[j] * y[i];
    }
    return g;
}

Matrix solve_sym(const Matrix& a, const Matrix& b) {
    require_square_sym(a);
    if (b.rows() != a.rows()) throw ShapeError("solve_sym: rhs is " + dims(b) + " for " + dims(a));
    std::size_t n = a.rows();
    Matrix x = b;
    Matrix l;
    std::size_t bad = 0;
    if (cholesky(a, l, bad)) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            forward_sub(l, x.row(0) + j, x.cols(), n);
            backward_sub_t(l, x.row(0) + j, x.cols(), n);
        }
        return x;
    }
    Vector d;
    ldlt(a, l, d);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double* xj = x.row(0) + j;
        std::size_t s = x.cols();
        for (std::size_t i = 0; i < n; ++i) {
            double v = xj[i * s];
            for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * xj[k * s];
            xj[i * s] = v;
        }
        for (std::size_t i = 0; i < n; ++i) xj[i * s] /= d[i];
        for (std::size_t i = n; i-- > 0;) {
            double v = xj[i * s];
            for (std::size_t k = i + 1; k < n; ++k) v -= l(k, i) * xj[k * s];
            xj[i * s] = v;
        }
    }
    return x;
}

Vector solve_sym(const Matrix& a, const Vector& b) {
    return solve_sym(a, Matrix::column(b)).col(0);
}

Matrix inverse_sym(const Matrix& a) {
    Matrix inv = solve_sym(a, Matrix::identity(a.rows()));
    for (std::size_t i = 0; i < inv.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double m = 0.5 * (inv(i, j) + inv(j, i));
            inv(i, j) = inv(j, i) = m;
        }
    return inv;
}

OlsFit ols_solve(const Matrix& design, const Vector& response) {
    std::size_t n = design.rows(), p = design.cols();
    if (response.size() != n)
        throw ShapeError("ols_solve: design has " + std::to_string(n) + " rows, response " +
                         std::to_string(response.size()));
    if (p == 0) throw ShapeError("ols_solve: empty design");
    if (n <= p)
        throw InsufficientDataError("ols_solve: " + std::to_string(n) + " rows for " + std::to_string(p) +
                                    " coefficients");

    long icpt = -1;
    for (std::size_t j = 0; j < p && icpt < 0; ++j) {
        bool ones = true;
        for (std::size_t i = 0; i < n && ones; ++i) ones = design(i, j) == 1.0;
        if (ones) icpt = static_cast<long>(j);
    }

    // x~_j = (x_j - c_j) / s_j, intercept column untouched
    Vector center(p, 0.0), sd(p, 1.0);
    for (std::size_t j = 0; j < p; ++j) {
        if (static_cast<long>(j) == icpt) continue;
        double mean = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += design(i, j);
            mx = std::max(mx, std::abs(design(i, j)));
        }
        mean /= static_cast<double>(n);
        double c = icpt >= 0 ? mean : 0.0;
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = design(i, j) - c;
            ss += d * d;
        }
        double s = std::sqrt(ss / static_cast<double>(n));
        if (!(s > 1e-12 * mx) || s == 0.0)
            throw SingularityError("ols_solve: column " + std::to_string(j) + " is constant (rank deficient)",
                                   static_cast<long>(j));
        center[j] = c;
        sd[j] = s;
    }

    Matrix xs(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) xs(i, j) = (design(i, j) - center[j]) / sd[j];

    Matrix g = crossprod(xs);
    Vector rhs = crossprod(xs, response);
    Matrix l;
    std::size_t bad = 0;
    if (!cholesky(g, l, bad))
        throw SingularityError("ols_solve: design rank deficient at column " + std::to_string(bad),
                               static_cast<long>(bad));
    Matrix ginv = Matrix::identity(p);
    for (std::size_t j = 0; j < p; ++j) {
        forward_sub(l, ginv.row(0) + j, p, p);
        backward_sub_t(l, ginv.row(0) + j, p, p);
    }
    Vector bs = rhs;
    forward_sub(l, bs.data(), 1, p);
    backward_sub_t(l, bs.data(), 1, p);

    // back-transform: beta = M beta~, (X'X)^-1 = M (X~'X~)^-1 M'
    Matrix m(p, p);
    for (std::size_t j = 0; j < p; ++j) {
        if (static_cast<long>(j) == icpt) {
            m(j, j) = 1.0;
            continue;
        }
        m(j, j) = 1.0 / sd[j];
        if (icpt >= 0) m(static_cast<std::size_t>(icpt), j) = -center[j] / sd[j];
    }

    OlsFit fit;
    fit.coef = matvec(m, bs);
    fit.xtx_inv = matmul(matmul(m, ginv), transpose(m));
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double v = 0.5 * (fit.xtx_inv(i, j) + fit.xtx_inv(j, i));
            fit.xtx_inv(i, j) = fit.xtx_inv(j, i) = v;
        }
    fit.residuals.resize(n);
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = design.row(i);
        double f = 0.0;
        for (std::size_t j = 0; j < p; ++j) f += r[j] * fit.coef[j];
        fit.residuals[i] = response[i] - f;
        rss += fit.residuals[i] * fit.residuals[i];
    }
    fit.residual_var = rss / static_cast<double>(n - p);
    return fit;
}

}
