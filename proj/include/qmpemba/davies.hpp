#pragma once

// Davies generators: jump amplitudes from a bath specification, the dense
// vectorised Lindbladian and the block form (population block + coherence
// diagonal) available for non-degenerate Hamiltonians.
//
// Vectorisation is row-major throughout: vec(|n><m|) has index n*d + m, so
// vec(A X B) = (A (x) B^T) vec(X).

#include <optional>
#include <span>
#include <vector>

#include "operators.hpp"

namespace qmpemba {

enum class Statistics { Bose, Fermi };

struct BathSpec {
    Beta beta = Beta::finite(1.0);
    Statistics statistics = Statistics::Bose;
    double gamma = 1.0;

    void validate() const { detail::require(gamma > 0.0, "bath coupling gamma must be positive"); }
};

// Downward / upward weights for a transition with positive Bohr frequency x.
// up / down = exp(-beta x) (thermal detailed balance).
struct TransitionWeights {
    double down = 1.0;
    double up = 0.0;
};

inline TransitionWeights transition_weights(const BathSpec& bath, double x) {
    detail::require(x > 0.0, "transition weights need a positive Bohr frequency");
    if (bath.beta.is_infinite()) return {1.0, 0.0};
    const double bx = bath.beta.value() * x;
    if (bath.statistics == Statistics::Bose) {
        if (bx == 0.0) throw ValidationError("Bose occupation diverges at infinite temperature");
        double n = 1.0 / std::expm1(bx);
        return {1.0 + n, n};
    }
    return {1.0 / (1.0 + std::exp(-bx)), 1.0 / (std::exp(bx) + 1.0)};
}

// J(i, k) is the amplitude of the jump operator |i><k| (rate k -> i is J(i, k)^2).
struct JumpMatrix {
    RealMatrix amplitudes;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(amplitudes.rows()); }
    [[nodiscard]] RealMatrix rates() const { return amplitudes.cwiseAbs2(); }

    void validate() const {
        detail::require(amplitudes.rows() == amplitudes.cols(), "jump matrix must be square");
        detail::require((amplitudes.array() >= 0.0).all(), "jump amplitudes must be nonnegative");
        detail::require((amplitudes.diagonal().array() == 0.0).all(), "jump matrix diagonal must vanish");
    }
};

enum class DegeneracyPolicy {
    Refuse,              // block construction: degenerate spectra are an error
    SkipDegeneratePairs  // dense fallback: no jumps inside degenerate manifolds
};

inline JumpMatrix build_jump_matrix(const SpectralBasis& basis, const BathSpec& bath,
                                    DegeneracyPolicy policy = DegeneracyPolicy::Refuse) {
    bath.validate();
    if (basis.degenerate && policy == DegeneracyPolicy::Refuse)
        throw DegenerateSpectrumError(
            "Hamiltonian is degenerate: the block Davies construction is unavailable, use the dense fallback");
    const auto d = basis.energies.size();
    const double tol = degeneracy_tolerance(basis.energies);
    JumpMatrix jumps{RealMatrix::Zero(d, d)};
    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index m = 0; m < n; ++m) {
            const double x = basis.energies(n) - basis.energies(m);
            if (x < tol) {
                if (policy == DegeneracyPolicy::Refuse)
                    throw DegenerateSpectrumError("zero Bohr frequency encountered; use the dense fallback");
                continue;
            }
            TransitionWeights w = transition_weights(bath, x);
            jumps.amplitudes(m, n) = bath.gamma * std::sqrt(w.down);  // n -> m, downward
            jumps.amplitudes(n, m) = bath.gamma * std::sqrt(w.up);    // m -> n, upward
        }
    }
    return jumps;
}

// Jump operators alpha |i><k| expressed in the lab frame.
inline std::vector<Matrix> jump_operators(const SpectralBasis& basis, const JumpMatrix& jumps) {
    std::vector<Matrix> ops;
    const auto d = static_cast<Eigen::Index>(jumps.dim());
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index k = 0; k < d; ++k)
            if (jumps.amplitudes(i, k) != 0.0)
                ops.emplace_back(jumps.amplitudes(i, k) * basis.vectors.col(i) * basis.vectors.col(k).adjoint());
    return ops;
}

// -i[H, .] in row-major vectorised form.
inline Matrix unitary_superoperator(const Matrix& h) {
    const auto d = h.rows();
    const Matrix id = Matrix::Identity(d, d);
    return cd(0, -1) * kron(h, id) + cd(0, 1) * kron(id, h.transpose());
}

// Generic Lindbladian, each term assembled with explicit Kronecker products:
//   -iH(x)1 + i1(x)H^T + sum_l L(x)(L^dag)^T - 1/2 L^dag L (x) 1 - 1/2 1 (x) (L^dag L)^T
inline Matrix lindblad_dense(const Matrix& h, std::span<const Matrix> jumps) {
    const auto d = h.rows();
    const Matrix id = Matrix::Identity(d, d);
    Matrix g = unitary_superoperator(h);
    for (const Matrix& l : jumps) {
        detail::require(l.rows() == d && l.cols() == d, "jump operator dimension mismatch");
        const Matrix ldl = l.adjoint() * l;
        g += kron(l, l.adjoint().transpose()) - 0.5 * kron(ldl, id) - 0.5 * kron(id, ldl.transpose());
    }
    return g;
}

// Dense Davies generator in the lab frame. Rank-one jumps make the sandwich
// term factor as X R X^dag, R the rate matrix and X(:, n) = vec(|n><n|).
inline Matrix build_dense_generator(const SpectralBasis& basis, const Matrix& h, const JumpMatrix& jumps) {
    jumps.validate();
    const auto d = static_cast<Eigen::Index>(basis.dim());
    detail::require(h.rows() == d && jumps.dim() == basis.dim(), "dimension mismatch in dense generator");
    const RealMatrix rates = jumps.rates();

    Matrix x(d * d, d);
    for (Eigen::Index n = 0; n < d; ++n) {
        const Vector v = basis.vectors.col(n);
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = 0; b < d; ++b) x(a * d + b, n) = v(a) * std::conj(v(b));
    }

    // sum_l L^dag L = sum_k (column-sum of rates)_k |k><k|
    const RealVector escape = rates.colwise().sum().transpose();
    const Matrix k = basis.from_energy_frame(escape.cast<cd>().asDiagonal().toDenseMatrix());
    const Matrix id = Matrix::Identity(d, d);

    Matrix g = unitary_superoperator(h);
    g.noalias() += x * (rates.cast<cd>() * x.adjoint());
    g -= 0.5 * kron(k, id);
    g -= 0.5 * kron(id, k.transpose());
    return g;
}

// G_p = J2 + J_s: J2 the elementwise square, J_s(k, k) = -sum_i J(i, k)^2.
inline RealMatrix build_population_block(const JumpMatrix& jumps) {
    jumps.validate();
    RealMatrix block = jumps.rates();
    const RealVector escape = block.colwise().sum().transpose();
    block.diagonal() -= escape;
    return block;
}

struct CoherenceEntry {
    std::size_t row = 0;  // n of |n><m|
    std::size_t col = 0;  // m of |n><m|
    std::size_t position = 0;  // row-major vectorised index n*d + m
    cd value;
};

inline std::vector<CoherenceEntry> build_coherence_diagonal(const SpectralBasis& basis, const JumpMatrix& jumps) {
    jumps.validate();
    if (basis.degenerate) throw DegenerateSpectrumError("coherence block requires a non-degenerate Hamiltonian");
    const auto d = basis.dim();
    const RealVector escape = jumps.rates().colwise().sum().transpose();
    std::vector<CoherenceEntry> entries;
    entries.reserve(d * (d - 1));
    for (std::size_t n = 0; n < d; ++n) {
        for (std::size_t m = n + 1; m < d; ++m) {
            const auto ni = static_cast<Eigen::Index>(n);
            const auto mi = static_cast<Eigen::Index>(m);
            const double decay = -0.5 * (escape(ni) + escape(mi));
            const double bohr = basis.energies(ni) - basis.energies(mi);
            // -i[H, |n><m|] = -i (h_n - h_m) |n><m|
            entries.push_back({n, m, n * d + m, cd(decay, -bohr)});
            entries.push_back({m, n, m * d + n, cd(decay, bohr)});
        }
    }
    return entries;
}

struct DaviesGenerator {
    SpectralBasis basis;
    BathSpec bath;
    std::optional<Matrix> dense;  // lab frame, only when requested
    RealMatrix pop_block;
    std::vector<CoherenceEntry> coh_diagonal;

    [[nodiscard]] std::size_t dim() const { return basis.dim(); }
};

// Block construction; no d^2 x d^2 matrix is allocated unless with_dense is set.
inline DaviesGenerator build_davies_generator(const SpectralBasis& basis, const BathSpec& bath,
                                              bool with_dense = false) {
    DaviesGenerator g;
    g.basis = basis;
    g.bath = bath;
    JumpMatrix jumps = build_jump_matrix(basis, bath);
    g.pop_block = build_population_block(jumps);
    g.coh_diagonal = build_coherence_diagonal(basis, jumps);
    if (with_dense) g.dense = build_dense_generator(basis, basis.hamiltonian(), jumps);
    return g;
}

inline Vector vectorize(const Matrix& m) {
    Vector v(m.size());
    for (Eigen::Index a = 0; a < m.rows(); ++a)
        for (Eigen::Index b = 0; b < m.cols(); ++b) v(a * m.cols() + b) = m(a, b);
    return v;
}

inline Matrix unvectorize(const Vector& v, Eigen::Index d) {
    Matrix m(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) m(a, b) = v(a * d + b);
    return m;
}

inline double fixed_point_residual(const Matrix& g, const Matrix& tau) {
    return (g * vectorize(tau)).cwiseAbs().maxCoeff();
}

// Largest violation of <A, D^dag B>_tau = <D^dag A, B>_tau over elemental
// operator pairs, with the KMS product <A, B>_tau = Tr(tau A^dag B) and
// D = G - (-i[H, .]).
inline double verify_detailed_balance(const Matrix& g, const Matrix& h, const Matrix& tau) {
    const auto d = h.rows();
    detail::require(g.rows() == d * d && tau.rows() == d, "dimension mismatch in detailed-balance check");
    const Matrix dissipator = g - unitary_superoperator(h);
    // Tr(tau A^dag B) = vec(A)^dag (1 (x) tau^T) vec(B)
    const Matrix metric = kron(Matrix::Identity(d, d), tau.transpose());
    const Matrix lhs = metric * dissipator.adjoint();
    const Matrix rhs = dissipator * metric;
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

}  // namespace qmpemba
