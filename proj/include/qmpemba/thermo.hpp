#pragma once

// Thermodynamic diagnostics along an evolution. Entropies are in nats.

#include <optional>
#include <ostream>
#include <vector>

#include "spectral.hpp"

namespace qmpemba {

inline RealVector state_eigenvalues(const Matrix& rho) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(rho, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

inline double von_neumann_entropy(const Matrix& rho) {
    const RealVector p = state_eigenvalues(rho);
    double s = 0.0;
    for (double x : p) s -= detail::xlogx(std::max(x, 0.0));
    return s;
}

inline double shannon_entropy(const RealVector& p) {
    double s = 0.0;
    for (double x : p) s -= detail::xlogx(std::max(x, 0.0));
    return s;
}

namespace detail {

inline void require_positive_beta(const Beta& beta) {
    require(beta.is_infinite() || beta.value() > 0.0, "free energies need a positive beta");
}

}  // namespace detail

// F_neq = Tr(H rho) + beta^{-1} Tr(rho ln rho); the entropy term drops at beta = infinity.
inline double noneq_free_energy(const Matrix& rho, const Matrix& h, const Beta& beta) {
    detail::require_positive_beta(beta);
    const double energy = (h * rho).trace().real();
    if (beta.is_infinite()) return energy;
    return energy - von_neumann_entropy(rho) / beta.value();
}

// F_eq = -beta^{-1} ln Z, shifted by the ground energy.
inline double equilibrium_free_energy(const SpectralBasis& basis, const Beta& beta) {
    detail::require_positive_beta(beta);
    const double ground = basis.energies(0);
    if (beta.is_infinite()) return ground;
    const double b = beta.value();
    double z = 0.0;
    for (double e : basis.energies) z += std::exp(-b * (e - ground));
    return ground - std::log(z) / b;
}

// Tr[rho (ln rho - ln sigma)]. Returns +infinity when the support of rho is
// not contained in the support of sigma.
inline double relative_entropy(const Matrix& rho, const Matrix& sigma) {
    constexpr double support_tol = 1e-12;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma);
    const RealVector& s = solver.eigenvalues();
    const Matrix& w = solver.eigenvectors();
    double cross = 0.0;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        const double weight = (w.col(j).adjoint() * rho * w.col(j))(0, 0).real();
        if (s(j) <= support_tol) {
            if (weight > support_tol) return kInfinity;
            continue;
        }
        cross += weight * std::log(s(j));
    }
    return -von_neumann_entropy(rho) - cross;
}

// D(rho || tau_beta) with ln tau_beta taken from the energies, exact even where
// Gibbs weights underflow.
inline double relative_entropy_to_thermal(const Matrix& rho, const SpectralBasis& basis, const Beta& beta) {
    const RealVector logp = log_thermal_populations(basis, beta);
    const RealVector p = energy_populations(rho, basis);
    double cross = 0.0;
    for (Eigen::Index n = 0; n < p.size(); ++n) {
        if (std::isinf(logp(n))) {
            if (p(n) > 1e-12) return kInfinity;
            continue;
        }
        cross += p(n) * logp(n);
    }
    return -von_neumann_entropy(rho) - cross;
}

struct EntropySplit {
    double classical = 0.0;  // P: classical relative entropy of the populations
    double coherence = 0.0;  // C: relative entropy of coherence
};

// D(rho || tau) = P + C with P = sum_n p_n ln(p_n / tau_n), C = S(Delta rho) - S(rho).
inline EntropySplit entropy_split(const Matrix& rho, const SpectralBasis& basis, const Beta& beta) {
    const RealVector logp = log_thermal_populations(basis, beta);
    const RealVector p = energy_populations(rho, basis);
    EntropySplit out;
    for (Eigen::Index n = 0; n < p.size(); ++n) {
        const double pn = std::max(p(n), 0.0);
        if (pn <= 1e-300) continue;
        if (std::isinf(logp(n))) {
            out.classical = kInfinity;
            break;
        }
        out.classical += pn * (std::log(pn) - logp(n));
    }
    out.coherence = shannon_entropy(p) - von_neumann_entropy(rho);
    return out;
}

// Elementwise L1 distance sum_ij |rho_ij - tau_ij| in the energy eigenbasis.
inline double l1_elementwise(const Matrix& rho, const Matrix& tau, const SpectralBasis& basis) {
    detail::require(rho.rows() == tau.rows(), "dimension mismatch in l1_elementwise");
    return basis.to_energy_frame(rho - tau).cwiseAbs().sum();
}

// Schatten-1 norm ||rho - sigma||_1.
inline double trace_norm_distance(const Matrix& rho, const Matrix& sigma) {
    const Matrix diff = 0.5 * ((rho - sigma) + (rho - sigma).adjoint());
    return state_eigenvalues(diff).cwiseAbs().sum();
}

// T = 1/2 ||rho - sigma||_1
inline double trace_distance(const Matrix& rho, const Matrix& sigma) { return 0.5 * trace_norm_distance(rho, sigma); }

struct ThermoTrajectory {
    std::vector<double> times;
    std::vector<double> free_energy;     // F_neq
    std::vector<double> relative;        // D(rho || tau)
    std::vector<double> classical;       // P
    std::vector<double> coherence;       // C
    std::vector<double> l1;              // elementwise L1
    std::vector<double> trace_dist;      // 1/2 Schatten-1
    std::vector<double> spohn;           // Pi, empty when fewer than 3 points
    double beta = 1.0;
    double equilibrium_free_energy = 0.0;

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

// Pi(t) = -beta dF_neq/dt: second-order central differences inside, one-sided
// second-order stencils at the ends. Non-uniform grids are allowed.
inline std::vector<double> spohn_rate(const std::vector<double>& times, const std::vector<double>& free_energy,
                                      double beta) {
    detail::require(times.size() == free_energy.size(), "grid mismatch in spohn_rate");
    detail::require(times.size() >= 3, "the entropy production rate needs at least 3 grid points");
    const std::size_t n = times.size();
    std::vector<double> rate(n);
    auto three_point = [&](std::size_t i0, std::size_t i1, std::size_t i2, double at) {
        const double x0 = times[i0], x1 = times[i1], x2 = times[i2];
        const double f0 = free_energy[i0], f1 = free_energy[i1], f2 = free_energy[i2];
        // derivative of the interpolating parabola
        return f0 * (2 * at - x1 - x2) / ((x0 - x1) * (x0 - x2)) + f1 * (2 * at - x0 - x2) / ((x1 - x0) * (x1 - x2)) +
               f2 * (2 * at - x0 - x1) / ((x2 - x0) * (x2 - x1));
    };
    auto scaled = [&](double slope) {
        if (std::isfinite(beta)) return -beta * slope;
        if (slope == 0.0) return 0.0;  // infinite beta: only the sign of dF/dt survives
        return slope < 0.0 ? kInfinity : -kInfinity;
    };
    rate[0] = scaled(three_point(0, 1, 2, times[0]));
    for (std::size_t i = 1; i + 1 < n; ++i) rate[i] = scaled(three_point(i - 1, i, i + 1, times[i]));
    rate[n - 1] = scaled(three_point(n - 3, n - 2, n - 1, times[n - 1]));
    return rate;
}

inline std::vector<double> spohn_rate(const ThermoTrajectory& traj) {
    return spohn_rate(traj.times, traj.free_energy, traj.beta);
}

inline ThermoTrajectory thermo_trajectory(const EvolutionGrid& grid, const SpectralBasis& basis, const Beta& beta) {
    detail::require_positive_beta(beta);
    const Matrix h = basis.hamiltonian();
    const Matrix tau = thermal_state(basis, beta).matrix();
    ThermoTrajectory traj;
    traj.beta = beta.is_infinite() ? kInfinity : beta.value();
    traj.equilibrium_free_energy = equilibrium_free_energy(basis, beta);
    traj.times = grid.times;
    for (const DensityMatrix& state : grid.states) {
        const Matrix& rho = state.matrix();
        traj.free_energy.push_back(noneq_free_energy(rho, h, beta));
        traj.relative.push_back(relative_entropy_to_thermal(rho, basis, beta));
        EntropySplit split = entropy_split(rho, basis, beta);
        traj.classical.push_back(split.classical);
        traj.coherence.push_back(split.coherence);
        traj.l1.push_back(l1_elementwise(rho, tau, basis));
        traj.trace_dist.push_back(trace_distance(rho, tau));
    }
    if (traj.size() >= 3) traj.spohn = spohn_rate(traj);
    return traj;
}

// Least-squares slope of ln(values) against time over [t_from, t_to]; a decay
// rate comes out negative. Points at or below `floor` are skipped.
inline double fit_exponential_rate(const std::vector<double>& times, const std::vector<double>& values,
                                   double t_from, double t_to = kInfinity, double floor = 1e-300) {
    detail::require(times.size() == values.size(), "grid mismatch in fit_exponential_rate");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t_from || times[i] > t_to || !(values[i] > floor)) continue;
        const double y = std::log(values[i]);
        sx += times[i];
        sy += y;
        sxx += times[i] * times[i];
        sxy += times[i] * y;
        ++n;
    }
    if (n < 2) throw NumericalError("not enough points above the floor for an exponential fit");
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

}  // namespace qmpemba
