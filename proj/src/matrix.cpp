#include "grcl/matrix.hpp"

#include <cmath>

namespace grcl {

bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

double frobenius_sq(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return s;
}

std::vector<double> normalize_rows(Matrix& m) {
    std::vector<double> norms(static_cast<std::size_t>(m.rows));
    for (std::int64_t r = 0; r < m.rows; ++r) {
        const double nrm = std::sqrt(squared_norm(m.row(r)));
        if (nrm == 0.0)
            throw std::runtime_error("normalize_rows: zero-norm row at node " + std::to_string(r));
        norms[static_cast<std::size_t>(r)] = nrm;
        for (double& v : m.row(r)) v /= nrm;
    }
    return norms;
}

}  // namespace grcl
