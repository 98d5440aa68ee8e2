#pragma once

#include <vector>

#include <gtest/gtest.h>
#include <qmpemba/qmpemba.hpp>

namespace qmpemba::test {

// Two-level Davies oracle at omega = 5, T = 10, gamma = 1.
inline double qubit_bose() { return 1.0 / std::expm1(0.5); }
inline double qubit_gamma_total() { return 1.0 + 2.0 * qubit_bose(); }

inline DensityMatrix skewed_state() { return bloch_to_state(BlochVector{{0.276, 0.359, 0.303}}); }

inline std::vector<double> linear_grid(double t_max, std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = t_max * static_cast<double>(i) / static_cast<double>(n - 1);
    return t;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// Sorted copy of a complex multiset for tolerance comparisons.
inline std::vector<cd> sorted(std::vector<cd> v) {
    std::sort(v.begin(), v.end(), [](cd a, cd b) {
        if (std::abs(a.real() - b.real()) > 1e-7) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return v;
}

inline double multiset_distance(std::vector<cd> a, std::vector<cd> b) {
    if (a.size() != b.size()) return kInfinity;
    a = sorted(std::move(a));
    b = sorted(std::move(b));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

inline std::vector<cd> dense_eigenvalues(const Matrix& g) {
    Eigen::ComplexEigenSolver<Matrix> solver(g, false);
    const Vector ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

inline std::vector<cd> block_eigenvalues(const DaviesGenerator& g) {
    std::vector<cd> out;
    Eigen::EigenSolver<RealMatrix> solver(g.pop_block, false);
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) out.push_back(solver.eigenvalues()(i));
    for (const auto& e : g.coh_diagonal) out.push_back(e.value);
    return out;
}

}  // namespace qmpemba::test
