#pragma once

#include "calibra/model.hpp"
#include "calibra/rng.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace calibra::testing {

inline Dataset make(Arm arm, std::vector<std::pair<std::string, Vector>> cols,
                    OutcomeType t = OutcomeType::continuous) {
    return Dataset(arm, t, std::move(cols));
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

inline Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

}
