#pragma once

#include "calibra/linalg.hpp"

namespace calibra {

struct LogisticFit {
    Vector coef;
    Matrix info_inv;        // (X' W X)^-1 at the solution
    Matrix score_contribs;  // row i: x_i (y_i - p_i)
    Vector fitted;          // p_i
    double loglik = 0.0;
    int iterations = 0;
};

double logistic_loglik(const Matrix& design, const Vector& y, const Vector& coef);
LogisticFit fit_logistic_irls(const Matrix& design, const Vector& y);

}
