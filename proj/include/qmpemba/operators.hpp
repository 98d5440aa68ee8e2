#pragma once

// Operator algebra: Hamiltonians, energy eigenbases, density matrices and
// qubit Bloch-vector conversions. Units: hbar = k_B = 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "common.hpp"

namespace qmpemba {

class HermitianOperator {
public:
    explicit HermitianOperator(Matrix entries) : m_(std::move(entries)) {
        detail::require(m_.rows() > 0 && m_.rows() == m_.cols(), "operator must be square and non-empty");
        double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
        if (detail::hermiticity_defect(m_) > 1e-12 * scale)
            throw ValidationError("operator is not Hermitian");
    }

    [[nodiscard]] const Matrix& matrix() const { return m_; }
    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }

private:
    Matrix m_;
};

// Inverse temperature. Zero temperature is a flag rather than a huge float.
class Beta {
public:
    static Beta finite(double beta) {
        detail::require(std::isfinite(beta), "beta must be finite; use Beta::infinite()");
        detail::require(beta >= 0.0, "negative inverse temperature is not supported");
        return Beta(beta, false);
    }
    static Beta infinite() { return Beta(kInfinity, true); }
    static Beta from_temperature(double temperature) {
        detail::require(temperature >= 0.0 && !std::isnan(temperature), "temperature must be >= 0");
        if (temperature == 0.0) return infinite();
        if (std::isinf(temperature)) return finite(0.0);
        return finite(1.0 / temperature);
    }

    [[nodiscard]] bool is_infinite() const { return infinite_; }
    [[nodiscard]] double value() const { return value_; }
    [[nodiscard]] double temperature() const { return infinite_ ? 0.0 : (value_ == 0.0 ? kInfinity : 1.0 / value_); }

private:
    Beta(double v, bool inf) : value_(v), infinite_(inf) {}
    double value_;
    bool infinite_;
};

struct SpectralBasis {
    RealVector energies;  // ascending
    Matrix vectors;       // eigenvectors as columns
    bool degenerate = false;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(energies.size()); }
    [[nodiscard]] Matrix to_energy_frame(const Matrix& op) const { return vectors.adjoint() * op * vectors; }
    [[nodiscard]] Matrix from_energy_frame(const Matrix& op) const { return vectors * op * vectors.adjoint(); }
    [[nodiscard]] Matrix hamiltonian() const {
        return from_energy_frame(energies.cast<cd>().asDiagonal().toDenseMatrix());
    }
};

// Two levels are degenerate when closer than this (scaled by the operator norm).
inline double degeneracy_tolerance(const RealVector& energies) {
    double norm = energies.size() ? energies.cwiseAbs().maxCoeff() : 0.0;
    return 1e-9 * std::max(1.0, norm);
}

inline SpectralBasis diagonalize(const HermitianOperator& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h.matrix());
    if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver failed");

    SpectralBasis basis;
    basis.energies = solver.eigenvalues();
    basis.vectors = solver.eigenvectors();

    // Phase convention: the largest-magnitude component of each eigenvector is real positive.
    for (Eigen::Index c = 0; c < basis.vectors.cols(); ++c) {
        Eigen::Index arg = 0;
        basis.vectors.col(c).cwiseAbs().maxCoeff(&arg);
        cd pivot = basis.vectors(arg, c);
        basis.vectors.col(c) *= std::conj(pivot) / std::abs(pivot);
        basis.vectors(arg, c) = std::abs(basis.vectors(arg, c));
    }

    double tol = degeneracy_tolerance(basis.energies);
    for (Eigen::Index n = 0; n + 1 < basis.energies.size(); ++n)
        if (basis.energies(n + 1) - basis.energies(n) < tol) basis.degenerate = true;
    return basis;
}

struct StateTolerance {
    double hermitian = 1e-12;
    double trace = 1e-10;
    double positivity = 1e-10;
};

class DensityMatrix {
public:
    explicit DensityMatrix(Matrix entries, StateTolerance tol = {}) : m_(std::move(entries)) {
        detail::require(m_.rows() > 0 && m_.rows() == m_.cols(), "density matrix must be square");
        if (detail::hermiticity_defect(m_) > tol.hermitian) throw ValidationError("density matrix is not Hermitian");
        if (std::abs(m_.trace() - 1.0) > tol.trace) throw ValidationError("density matrix trace differs from 1");
        Eigen::SelfAdjointEigenSolver<Matrix> solver(m_, Eigen::EigenvaluesOnly);
        if (solver.eigenvalues().minCoeff() < -tol.positivity)
            throw ValidationError("density matrix is not positive semidefinite");
    }

    [[nodiscard]] const Matrix& matrix() const { return m_; }
    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
    [[nodiscard]] RealVector eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(m_, Eigen::EigenvaluesOnly);
        return solver.eigenvalues();
    }
    [[nodiscard]] double purity() const { return (m_ * m_).trace().real(); }

private:
    Matrix m_;
};

// Normalised Gibbs weights, shifted by the ground energy to avoid overflow.
inline RealVector thermal_populations(const SpectralBasis& basis, const Beta& beta) {
    const auto d = basis.energies.size();
    RealVector p(d);
    double ground = basis.energies(0);
    if (beta.is_infinite()) {
        double tol = degeneracy_tolerance(basis.energies);
        for (Eigen::Index n = 0; n < d; ++n) p(n) = (basis.energies(n) - ground < tol) ? 1.0 : 0.0;
    } else {
        for (Eigen::Index n = 0; n < d; ++n) p(n) = std::exp(-beta.value() * (basis.energies(n) - ground));
    }
    return p / p.sum();
}

// ln of the Gibbs weights, exact even where the weights underflow. -inf for
// excited levels at zero temperature.
inline RealVector log_thermal_populations(const SpectralBasis& basis, const Beta& beta) {
    const auto d = basis.energies.size();
    RealVector logp(d);
    if (beta.is_infinite()) {
        RealVector p = thermal_populations(basis, beta);
        for (Eigen::Index n = 0; n < d; ++n) logp(n) = p(n) > 0 ? std::log(p(n)) : -kInfinity;
        return logp;
    }
    double ground = basis.energies(0);
    double z = 0.0;
    for (Eigen::Index n = 0; n < d; ++n) z += std::exp(-beta.value() * (basis.energies(n) - ground));
    double logz = std::log(z);
    for (Eigen::Index n = 0; n < d; ++n) logp(n) = -beta.value() * (basis.energies(n) - ground) - logz;
    return logp;
}

inline DensityMatrix thermal_state(const SpectralBasis& basis, const Beta& beta) {
    RealVector p = thermal_populations(basis, beta);
    Matrix rho = basis.from_energy_frame(p.cast<cd>().asDiagonal().toDenseMatrix());
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return DensityMatrix(std::move(rho));
}

namespace detail {

inline Vector gaussian_vector(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(static_cast<Eigen::Index>(dim));
    for (auto& x : v) {
        double re = normal(rng);
        double im = normal(rng);
        x = cd(re, im);
    }
    return v;
}

}  // namespace detail

// Haar-random unitary via QR of a complex Ginibre matrix with the R-phase fix.
inline Matrix haar_unitary(std::size_t dim, std::mt19937_64& rng) {
    Matrix g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (Eigen::Index c = 0; c < g.cols(); ++c) g.col(c) = detail::gaussian_vector(dim, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        cd diag = r(c, c);
        q.col(c) *= diag / std::abs(diag);
    }
    return q;
}

// Independent per-sample seeds (splitmix64 finaliser).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline DensityMatrix random_pure_state(std::size_t dim, std::uint64_t seed) {
    detail::require(dim >= 2, "random_pure_state needs dim >= 2");
    std::mt19937_64 rng(seed);
    Vector psi = detail::gaussian_vector(dim, rng);
    psi.normalize();
    return DensityMatrix(psi * psi.adjoint());
}

inline DensityMatrix random_mixed_state(std::size_t dim, std::size_t n_samples, std::uint64_t seed) {
    detail::require(dim >= 2, "random_mixed_state needs dim >= 2");
    detail::require(n_samples >= 1, "random_mixed_state needs n_samples >= 1");
    Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n_samples; ++i) {
        acc += random_pure_state(dim, derive_seed(seed, i)).matrix();
    }
    acc /= static_cast<double>(n_samples);
    return DensityMatrix(std::move(acc));
}

struct BlochVector {
    std::array<double, 3> r{0.0, 0.0, 0.0};

    [[nodiscard]] double norm() const { return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]); }
};

inline Matrix pauli_x() { Matrix m(2, 2); m << 0, 1, 1, 0; return m; }
inline Matrix pauli_y() { Matrix m(2, 2); m << 0, cd(0, -1), cd(0, 1), 0; return m; }
inline Matrix pauli_z() { Matrix m(2, 2); m << 1, 0, 0, -1; return m; }

inline DensityMatrix bloch_to_state(const BlochVector& b) {
    if (b.norm() > 1.0 + 1e-12) throw ValidationError("Bloch vector outside the unit ball");
    Matrix rho = 0.5 * (Matrix::Identity(2, 2) + b.r[0] * pauli_x() + b.r[1] * pauli_y() + b.r[2] * pauli_z());
    return DensityMatrix(std::move(rho));
}

inline BlochVector state_to_bloch(const DensityMatrix& rho) {
    detail::require(rho.dim() == 2, "Bloch vectors are defined for qubits only");
    const Matrix& m = rho.matrix();
    return BlochVector{{2.0 * m(0, 1).real(), -2.0 * m(0, 1).imag(), (m(0, 0) - m(1, 1)).real()}};
}

// Removes coherences in the energy eigenbasis.
inline DensityMatrix dephase(const DensityMatrix& rho, const SpectralBasis& basis) {
    detail::require(rho.dim() == basis.dim(), "dimension mismatch in dephase");
    Matrix e = basis.to_energy_frame(rho.matrix());
    Matrix diag = e.diagonal().real().cast<cd>().asDiagonal().toDenseMatrix();
    Matrix out = basis.from_energy_frame(diag);
    out = 0.5 * (out + out.adjoint()).eval();
    return DensityMatrix(std::move(out));
}

// Populations of a state in the energy eigenbasis.
inline RealVector energy_populations(const Matrix& rho, const SpectralBasis& basis) {
    RealVector p(rho.rows());
    for (Eigen::Index n = 0; n < rho.rows(); ++n)
        p(n) = (basis.vectors.col(n).adjoint() * rho * basis.vectors.col(n))(0, 0).real();
    return p;
}

// Single-site operator embedded at `site` (0 = leftmost tensor factor) of `sites` qubits.
inline Matrix embed_site(const Matrix& op, std::size_t site, std::size_t sites) {
    Matrix out = Matrix::Identity(1, 1);
    for (std::size_t j = 0; j < sites; ++j) {
        const Matrix factor = (j == site) ? op : Matrix::Identity(op.rows(), op.cols());
        Matrix next(out.rows() * factor.rows(), out.cols() * factor.cols());
        for (Eigen::Index a = 0; a < out.rows(); ++a)
            for (Eigen::Index b = 0; b < out.cols(); ++b)
                next.block(a * factor.rows(), b * factor.cols(), factor.rows(), factor.cols()) = out(a, b) * factor;
        out = std::move(next);
    }
    return out;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace qmpemba
