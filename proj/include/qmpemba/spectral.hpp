#pragma once

// Biorthogonal spectral decomposition of a generator and state evolution
// through the spectral expansion, with a direct matrix-exponential route
// kept as an independent check.
//
// Mode numbers are 1-based: mode 1 is the steady state, modes are ordered by
// |Re lambda| ascending, then Im lambda ascending.

#include <algorithm>
#include <numeric>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "davies.hpp"

namespace qmpemba {

// An eigenmatrix stored in the cheapest exact form: a dense matrix, a
// diagonal, or a scaled matrix unit |row><col|.
class Eigenmatrix {
public:
    enum class Kind { Dense, Diagonal, Unit };

    static Eigenmatrix dense(Matrix m) {
        Eigenmatrix e(Kind::Dense);
        e.dense_ = std::move(m);
        return e;
    }
    static Eigenmatrix diagonal(Vector diag) {
        Eigenmatrix e(Kind::Diagonal);
        e.diag_ = std::move(diag);
        return e;
    }
    static Eigenmatrix unit(std::size_t row, std::size_t col, cd scale = 1.0) {
        Eigenmatrix e(Kind::Unit);
        e.row_ = row;
        e.col_ = col;
        e.scale_ = scale;
        return e;
    }

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] std::size_t row() const { return row_; }
    [[nodiscard]] std::size_t col() const { return col_; }

    [[nodiscard]] Matrix to_matrix(Eigen::Index d) const {
        switch (kind_) {
            case Kind::Dense: return dense_;
            case Kind::Diagonal: return diag_.asDiagonal().toDenseMatrix();
            case Kind::Unit: {
                Matrix m = Matrix::Zero(d, d);
                m(static_cast<Eigen::Index>(row_), static_cast<Eigen::Index>(col_)) = scale_;
                return m;
            }
        }
        return {};
    }

    // Tr(E rho)
    [[nodiscard]] cd trace_product(const Matrix& rho) const {
        switch (kind_) {
            case Kind::Dense: return (dense_.transpose().array() * rho.array()).sum();
            case Kind::Diagonal: return (diag_.array() * rho.diagonal().array()).sum();
            case Kind::Unit: return scale_ * rho(static_cast<Eigen::Index>(col_), static_cast<Eigen::Index>(row_));
        }
        return {};
    }

    // out += coeff * E
    void accumulate(Matrix& out, cd coeff) const {
        switch (kind_) {
            case Kind::Dense: out += coeff * dense_; break;
            case Kind::Diagonal: out.diagonal() += coeff * diag_; break;
            case Kind::Unit:
                out(static_cast<Eigen::Index>(row_), static_cast<Eigen::Index>(col_)) += coeff * scale_;
                break;
        }
    }

    [[nodiscard]] Eigenmatrix adjoint() const {
        switch (kind_) {
            case Kind::Dense: return dense(dense_.adjoint());
            case Kind::Diagonal: return diagonal(diag_.conjugate());
            case Kind::Unit: return unit(col_, row_, std::conj(scale_));
        }
        return *this;
    }

private:
    explicit Eigenmatrix(Kind k) : kind_(k) {}
    Kind kind_;
    Matrix dense_;
    Vector diag_;
    std::size_t row_ = 0;
    std::size_t col_ = 0;
    cd scale_ = 1.0;
};

struct Mode {
    cd eigenvalue;
    Eigenmatrix right;  // G[r] = lambda r
    Eigenmatrix left;   // Tr(l G[X]) = lambda Tr(l X) for all X
};

// Eigenmatrices live in an internal frame F: lab = F X F^dag. F is the
// identity for dense decompositions and the energy eigenbasis for the block
// path.
class GeneratorSpectrum {
public:
    GeneratorSpectrum(Matrix frame, std::vector<Mode> modes, DensityMatrix steady, bool gap_complex)
        : frame_(std::move(frame)), modes_(std::move(modes)), steady_(std::move(steady)), gap_complex_(gap_complex) {}

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(frame_.rows()); }
    [[nodiscard]] std::size_t size() const { return modes_.size(); }
    [[nodiscard]] const Matrix& frame() const { return frame_; }
    [[nodiscard]] const Mode& mode(std::size_t k) const { return modes_.at(k - 1); }
    [[nodiscard]] cd eigenvalue(std::size_t k) const { return mode(k).eigenvalue; }
    [[nodiscard]] std::vector<cd> eigenvalues() const {
        std::vector<cd> out;
        out.reserve(modes_.size());
        for (const auto& m : modes_) out.push_back(m.eigenvalue);
        return out;
    }
    [[nodiscard]] const DensityMatrix& steady_state() const { return steady_; }
    [[nodiscard]] bool gap_is_complex() const { return gap_complex_; }

    [[nodiscard]] Matrix to_internal(const Matrix& lab) const { return frame_.adjoint() * lab * frame_; }
    [[nodiscard]] Matrix to_lab(const Matrix& internal) const { return frame_ * internal * frame_.adjoint(); }
    [[nodiscard]] Matrix right(std::size_t k) const {
        return to_lab(mode(k).right.to_matrix(static_cast<Eigen::Index>(dim())));
    }
    [[nodiscard]] Matrix left(std::size_t k) const {
        return to_lab(mode(k).left.to_matrix(static_cast<Eigen::Index>(dim())));
    }

private:
    Matrix frame_;
    std::vector<Mode> modes_;
    DensityMatrix steady_;
    bool gap_complex_;
};

namespace detail {

inline double eigenvalue_tolerance(const std::vector<cd>& values) {
    double scale = 1.0;
    for (cd v : values) scale = std::max(scale, std::abs(v));
    return 1e-9 * scale;
}

// Rounded ordering keys keep the sort a strict weak ordering under noise.
inline long long bucket(double x, double tol) { return std::llround(x / tol); }

inline int compare_eigenmatrices(const Eigenmatrix& a, const Eigenmatrix& b, Eigen::Index d) {
    if (a.kind() == Eigenmatrix::Kind::Unit && b.kind() == Eigenmatrix::Kind::Unit) {
        auto pa = a.row() * static_cast<std::size_t>(d) + a.col();
        auto pb = b.row() * static_cast<std::size_t>(d) + b.col();
        return pa < pb ? -1 : (pa > pb ? 1 : 0);
    }
    const Matrix ma = a.to_matrix(d);
    const Matrix mb = b.to_matrix(d);
    for (Eigen::Index i = 0; i < ma.size(); ++i) {
        for (double part : {0.0, 1.0}) {
            double va = part == 0.0 ? ma.data()[i].real() : ma.data()[i].imag();
            double vb = part == 0.0 ? mb.data()[i].real() : mb.data()[i].imag();
            long long ka = bucket(va, 1e-9);
            long long kb = bucket(vb, 1e-9);
            if (ka != kb) return ka > kb ? -1 : 1;
        }
    }
    return 0;
}

inline void sort_modes(std::vector<Mode>& modes, Eigen::Index d) {
    const double tol = eigenvalue_tolerance([&] {
        std::vector<cd> v;
        for (const auto& m : modes) v.push_back(m.eigenvalue);
        return v;
    }());
    // mode 1 (steady) stays in front
    std::stable_sort(modes.begin() + 1, modes.end(), [&](const Mode& a, const Mode& b) {
        long long ra = bucket(std::abs(a.eigenvalue.real()), tol);
        long long rb = bucket(std::abs(b.eigenvalue.real()), tol);
        if (ra != rb) return ra < rb;
        long long ia = bucket(a.eigenvalue.imag(), tol);
        long long ib = bucket(b.eigenvalue.imag(), tol);
        if (ia != ib) return ia < ib;
        return compare_eigenmatrices(a.right, b.right, d) < 0;
    });
}

// Replaces each Im < 0 mode by the adjoint of its Im > 0 partner, so that
// conjugate eigenvalues carry exactly adjoint eigenmatrices.
inline void pair_conjugates(std::vector<Mode>& modes, double tol) {
    std::vector<bool> used(modes.size(), false);
    for (std::size_t k = 0; k < modes.size(); ++k) {
        if (modes[k].eigenvalue.imag() <= tol) continue;
        std::size_t best = modes.size();
        double best_dist = kInfinity;
        for (std::size_t j = 0; j < modes.size(); ++j) {
            if (used[j] || modes[j].eigenvalue.imag() >= -tol) continue;
            double dist = std::abs(modes[j].eigenvalue - std::conj(modes[k].eigenvalue));
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        if (best == modes.size() || best_dist > 1e3 * tol)
            throw NumericalError("complex eigenvalue without a conjugate partner");
        used[best] = true;
        modes[best] = Mode{std::conj(modes[k].eigenvalue), modes[k].right.adjoint(), modes[k].left.adjoint()};
    }
}

inline double max_abs_index(const Matrix& m, Eigen::Index& arg) {
    Eigen::Index r = 0, c = 0;
    double v = m.cwiseAbs().maxCoeff(&r, &c);
    arg = r * m.cols() + c;
    return v;
}

inline GeneratorSpectrum finish_spectrum(Matrix frame, std::vector<Mode> modes, double tol) {
    const auto d = frame.rows();
    pair_conjugates(modes, tol);
    sort_modes(modes, d);

    Matrix tau = frame * modes.front().right.to_matrix(d) * frame.adjoint();
    tau = 0.5 * (tau + tau.adjoint()).eval();
    DensityMatrix steady(std::move(tau), StateTolerance{1e-9, 1e-9, 1e-8});

    bool complex_gap = modes.size() > 1 && std::abs(modes[1].eigenvalue.imag()) > tol;
    return GeneratorSpectrum(std::move(frame), std::move(modes), std::move(steady), complex_gap);
}

}  // namespace detail

inline constexpr double kDefectivenessThreshold = 1e12;

// Dense decomposition. Left eigenmatrices come from the rows of V^{-1}, which
// makes Tr(l_j r_k) = delta_jk hold by construction.
inline GeneratorSpectrum decompose(const Matrix& g) {
    const auto n = g.rows();
    const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
    detail::require(n == g.cols() && d * d == n, "generator must be a d^2 x d^2 matrix");

    Eigen::ComplexEigenSolver<Matrix> solver(g, true);
    if (solver.info() != Eigen::Success) throw NumericalError("generator eigensolver failed");
    const Matrix& v = solver.eigenvectors();
    Eigen::PartialPivLU<Matrix> lu(v);
    const Matrix w = lu.inverse();
    const double cond = v.cwiseAbs().colwise().sum().maxCoeff() * w.cwiseAbs().colwise().sum().maxCoeff();
    if (!std::isfinite(cond) || cond > kDefectivenessThreshold)
        throw NumericalError("generator is not diagonalizable (eigenvector condition number too large)");

    std::vector<cd> values(solver.eigenvalues().begin(), solver.eigenvalues().end());
    const double tol = detail::eigenvalue_tolerance(values);

    Eigen::Index zero = 0;
    solver.eigenvalues().cwiseAbs().minCoeff(&zero);
    if (std::abs(values[zero]) > tol) throw NumericalError("generator has no steady state (no zero eigenvalue)");
    for (Eigen::Index k = 0; k < n; ++k)
        if (k != zero && std::abs(values[k]) <= tol) throw NumericalError("steady state is not unique");

    std::vector<Mode> modes;
    modes.reserve(n);
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_partition(order.begin(), order.end(), [&](Eigen::Index k) { return k == zero; });
    for (Eigen::Index k : order) {
        Matrix r = unvectorize(v.col(k), d);
        Matrix l = unvectorize(w.row(k).transpose(), d).transpose();
        cd lambda = values[k];
        if (k == zero) {
            lambda = 0.0;
            cd t = r.trace();
            r /= t;
            l *= t;
        } else if (std::abs(lambda.imag()) <= tol) {
            // Real eigenvalue: rotate towards a Hermitian representative, Tr(r^2) = e^{2i phi} |r|^2.
            cd s = (r * r).trace();
            if (std::abs(s) > 1e-12) {
                cd phase = std::sqrt(s / std::abs(s));
                r /= phase;
                l *= phase;
            }
            Eigen::Index arg = 0;
            detail::max_abs_index(r, arg);
            if (r(arg / d, arg % d).real() < 0) {
                r = -r;
                l = -l;
            }
            lambda = lambda.real();
        } else {
            Eigen::Index arg = 0;
            detail::max_abs_index(r, arg);
            cd pivot = r(arg / d, arg % d);
            cd phase = pivot / std::abs(pivot);
            r /= phase;
            l *= phase;
        }
        modes.push_back(Mode{lambda, Eigenmatrix::dense(std::move(r)), Eigenmatrix::dense(std::move(l))});
    }
    return detail::finish_spectrum(Matrix::Identity(d, d), std::move(modes), tol);
}

// Block decomposition: population modes from the d x d rate matrix, coherence
// modes are the matrix units themselves. Nothing of size d^2 x d^2 is formed.
inline GeneratorSpectrum decompose(const DaviesGenerator& g) {
    const auto d = static_cast<Eigen::Index>(g.dim());
    const RealMatrix& p = g.pop_block;
    std::vector<Mode> modes;
    modes.reserve(static_cast<std::size_t>(d * d));

    std::vector<cd> pop_values;
    std::vector<RealVector> rights, lefts;
    if (!g.bath.beta.is_infinite()) {
        // Detailed balance makes sqrt(pi)^{-1} P sqrt(pi) symmetric; the
        // weights are formed from energies so they never underflow.
        const double beta = g.bath.beta.value();
        RealVector half(d);
        for (Eigen::Index i = 0; i < d; ++i) half(i) = -0.5 * beta * (g.basis.energies(i) - g.basis.energies(0));
        RealMatrix s(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) s(i, j) = p(i, j) * std::exp(half(j) - half(i));
        s = 0.5 * (s + s.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<RealMatrix> solver(s);
        if (solver.info() != Eigen::Success) throw NumericalError("population block eigensolver failed");
        for (Eigen::Index k = 0; k < d; ++k) {
            RealVector q = solver.eigenvectors().col(k);
            pop_values.emplace_back(solver.eigenvalues()(k), 0.0);
            rights.push_back(q.cwiseProduct(half.array().exp().matrix()));
            lefts.push_back(q.cwiseProduct((-half.array()).exp().matrix()));
        }
    } else {
        Eigen::EigenSolver<RealMatrix> solver(p);
        if (solver.info() != Eigen::Success) throw NumericalError("population block eigensolver failed");
        const Matrix v = solver.eigenvectors();
        const Matrix w = v.inverse();
        const double cond = v.cwiseAbs().colwise().sum().maxCoeff() * w.cwiseAbs().colwise().sum().maxCoeff();
        if (!std::isfinite(cond) || cond > kDefectivenessThreshold)
            throw NumericalError("population block is not diagonalizable");
        for (Eigen::Index k = 0; k < d; ++k) {
            pop_values.emplace_back(solver.eigenvalues()(k).real(), 0.0);
            rights.push_back(v.col(k).real());
            lefts.push_back(w.row(k).transpose().real());
        }
    }

    std::vector<cd> all_values = pop_values;
    for (const auto& e : g.coh_diagonal) all_values.push_back(e.value);
    const double tol = detail::eigenvalue_tolerance(all_values);

    std::size_t zero = 0;
    for (std::size_t k = 1; k < pop_values.size(); ++k)
        if (std::abs(pop_values[k]) < std::abs(pop_values[zero])) zero = k;
    if (std::abs(pop_values[zero]) > tol) throw NumericalError("population block has no zero eigenvalue");

    std::vector<std::size_t> order(pop_values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_partition(order.begin(), order.end(), [&](std::size_t k) { return k == zero; });
    for (std::size_t k : order) {
        RealVector r = rights[k];
        RealVector l = lefts[k];
        cd lambda = pop_values[k];
        if (k == zero) {
            lambda = 0.0;
            double t = r.sum();
            r /= t;
            l *= t;
        } else {
            double norm = r.norm();
            Eigen::Index arg = 0;
            r.cwiseAbs().maxCoeff(&arg);
            if (r(arg) < 0) norm = -norm;
            r /= norm;
            l *= norm;
        }
        const double overlap = l.dot(r);
        l /= overlap;
        modes.push_back(Mode{lambda, Eigenmatrix::diagonal(r.cast<cd>()), Eigenmatrix::diagonal(l.cast<cd>())});
    }
    for (const auto& e : g.coh_diagonal)
        modes.push_back(Mode{e.value, Eigenmatrix::unit(e.row, e.col), Eigenmatrix::unit(e.col, e.row)});

    return detail::finish_spectrum(g.basis.vectors, std::move(modes), tol);
}

struct SpectralGap {
    double value = 0.0;         // |Re lambda_2|
    bool complex_pair = false;  // lambda_2 belongs to a conjugate pair
};

inline SpectralGap spectral_gap(const GeneratorSpectrum& spec) {
    detail::require(spec.size() >= 2, "spectral gap needs at least two modes");
    return {std::abs(spec.eigenvalue(2).real()), spec.gap_is_complex()};
}

// Tr(l_k rho) for a lab-frame state.
inline cd amplitude(const GeneratorSpectrum& spec, std::size_t k, const Matrix& rho) {
    detail::require(k >= 1 && k <= spec.size(), "mode number out of range");
    return spec.mode(k).left.trace_product(spec.to_internal(rho));
}

inline cd amplitude(const GeneratorSpectrum& spec, std::size_t k, const DensityMatrix& rho) {
    return amplitude(spec, k, rho.matrix());
}

struct EvolutionGrid {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
};

inline constexpr StateTolerance kTrajectoryTolerance{1e-9, 1e-9, 1e-8};

namespace detail {

inline void check_times(const std::vector<double>& times) {
    detail::require(!times.empty(), "time grid must not be empty");
    detail::require(times.front() >= 0.0, "times must be nonnegative");
    for (std::size_t i = 1; i < times.size(); ++i)
        detail::require(times[i] > times[i - 1], "times must be strictly ascending");
}

}  // namespace detail

inline constexpr double kMaxAmplification = 1e6;

// rho(t) = tau + sum_{k>=2} Tr(l_k rho_i) r_k e^{lambda_k t}
inline EvolutionGrid evolve_spectral(const GeneratorSpectrum& spec, const DensityMatrix& rho,
                                     const std::vector<double>& times) {
    detail::check_times(times);
    detail::require(rho.dim() == spec.dim(), "state dimension does not match the generator");
    const auto d = static_cast<Eigen::Index>(spec.dim());
    const Matrix internal = spec.to_internal(rho.matrix());
    std::vector<cd> coeff(spec.size() + 1);
    double amplification = 0.0;
    for (std::size_t k = 2; k <= spec.size(); ++k) {
        coeff[k] = spec.mode(k).left.trace_product(internal);
        amplification += std::abs(coeff[k]) * spec.mode(k).right.to_matrix(d).cwiseAbs().maxCoeff();
    }
    // Far from equilibrium at low temperature the expansion terms can be many
    // orders of magnitude larger than the state they sum to.
    if (amplification > kMaxAmplification)
        throw NumericalError("spectral expansion is ill-conditioned for this state; use block propagation");
    const Matrix tau = spec.mode(1).right.to_matrix(d);
    {
        Matrix acc = tau;
        for (std::size_t k = 2; k <= spec.size(); ++k) spec.mode(k).right.accumulate(acc, coeff[k]);
        if ((spec.to_lab(acc) - rho.matrix()).cwiseAbs().maxCoeff() > 1e-8)
            throw NumericalError("spectral expansion does not reconstruct the initial state; use block propagation");
    }

    EvolutionGrid grid;
    grid.times = times;
    grid.states.reserve(times.size());
    for (double t : times) {
        Matrix acc = tau;
        for (std::size_t k = 2; k <= spec.size(); ++k) {
            const Mode& m = spec.mode(k);
            spec.mode(k).right.accumulate(acc, coeff[k] * std::exp(m.eigenvalue * t));
        }
        grid.states.emplace_back(spec.to_lab(acc), kTrajectoryTolerance);
    }
    return grid;
}

// Stepwise propagation with exp(G dt) (Pade scaling and squaring); the
// propagator is reused while the step size is unchanged.
inline EvolutionGrid evolve_direct(const Matrix& g, const DensityMatrix& rho, const std::vector<double>& times) {
    detail::check_times(times);
    const auto d = static_cast<Eigen::Index>(rho.dim());
    detail::require(g.rows() == d * d, "state dimension does not match the generator");

    EvolutionGrid grid;
    grid.times = times;
    grid.states.reserve(times.size());
    Vector state = vectorize(rho.matrix());
    double now = 0.0;
    double cached_dt = -1.0;
    Matrix propagator;
    for (double t : times) {
        const double dt = t - now;
        if (dt > 0.0) {
            if (std::abs(dt - cached_dt) > 1e-14 * std::max(1.0, t)) {
                propagator = (g * cd(dt)).exp();
                cached_dt = dt;
            }
            state = propagator * state;
        }
        now = t;
        grid.states.emplace_back(unvectorize(state, d), kTrajectoryTolerance);
    }
    return grid;
}

// Block propagation: populations through exp(G_p dt), coherences through
// their diagonal decay. Well conditioned at any temperature.
inline EvolutionGrid evolve_block(const DaviesGenerator& g, const DensityMatrix& rho,
                                  const std::vector<double>& times) {
    detail::check_times(times);
    detail::require(rho.dim() == g.dim(), "state dimension does not match the generator");
    const Matrix initial = g.basis.to_energy_frame(rho.matrix());
    const RealVector pop = initial.diagonal().real();

    EvolutionGrid grid;
    grid.times = times;
    grid.states.reserve(times.size());
    for (double t : times) {
        // one exponential per time point, so rounding does not accumulate
        const RealVector p = RealMatrix((g.pop_block * t).exp()) * pop;
        Matrix e = p.cast<cd>().asDiagonal();
        for (const auto& c : g.coh_diagonal) {
            const auto n = static_cast<Eigen::Index>(c.row);
            const auto m = static_cast<Eigen::Index>(c.col);
            e(n, m) = initial(n, m) * std::exp(c.value * t);
        }
        Matrix lab = g.basis.from_energy_frame(e);
        lab = 0.5 * (lab + lab.adjoint()).eval();
        grid.states.emplace_back(std::move(lab), kTrajectoryTolerance);
    }
    return grid;
}

}  // namespace qmpemba
