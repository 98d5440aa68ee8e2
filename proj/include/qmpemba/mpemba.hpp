#pragma once

// The exact population-inverting transformation, overlap certificates,
// crossing detection for free-energy curves and a Monte-Carlo check that no
// unitary raises the free energy above the inverted state.

#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "thermo.hpp"

namespace qmpemba {

struct ExactTransform {
    DensityMatrix state;  // rho' = U rho U^dag
    Matrix unitary;       // U = U2 U1
    Matrix diagonalizer;  // U1: eigenbasis of rho -> computational basis
    Matrix placement;     // U2: computational basis -> energy eigenbasis
};

// Places the eigenvalues of rho, sorted ascending, onto the energy levels,
// sorted ascending: the smallest population lands on the ground state. Equal
// eigenvalues keep the order returned by the Hermitian eigensolver.
inline ExactTransform exact_transform(const DensityMatrix& rho, const SpectralBasis& basis) {
    detail::require(rho.dim() == basis.dim(), "dimension mismatch in exact_transform");
    if (basis.degenerate)
        throw DegenerateSpectrumError("the exact transform needs a non-degenerate Hamiltonian");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(rho.matrix());
    if (solver.info() != Eigen::Success) throw NumericalError("state eigensolver failed");

    ExactTransform out{rho, Matrix(), solver.eigenvectors().adjoint(), basis.vectors};
    out.unitary = out.placement * out.diagonalizer;
    const RealVector q = solver.eigenvalues();
    Matrix transformed = basis.from_energy_frame(q.cast<cd>().asDiagonal().toDenseMatrix());
    transformed = 0.5 * (transformed + transformed.adjoint()).eval();
    out.state = DensityMatrix(std::move(transformed));
    return out;
}

// |Tr(l_k rho)| for every mode with a non-real eigenvalue.
inline std::map<std::size_t, double> coherent_overlaps(const GeneratorSpectrum& spec, const Matrix& rho) {
    const double tol = detail::eigenvalue_tolerance(spec.eigenvalues());
    const Matrix internal = spec.to_internal(rho);
    std::map<std::size_t, double> out;
    for (std::size_t k = 2; k <= spec.size(); ++k)
        if (std::abs(spec.eigenvalue(k).imag()) > tol) out[k] = std::abs(spec.mode(k).left.trace_product(internal));
    return out;
}

inline constexpr double kOverlapTolerance = 1e-10;

struct OverlapReport {
    std::map<std::size_t, double> overlaps;
    double max_overlap = 0.0;
    bool eliminated = true;
};

inline OverlapReport verify_overlap_elimination(const GeneratorSpectrum& spec, const DensityMatrix& rho) {
    OverlapReport report;
    report.overlaps = coherent_overlaps(spec, rho.matrix());
    for (const auto& [k, v] : report.overlaps) report.max_overlap = std::max(report.max_overlap, v);
    report.eliminated = report.max_overlap <= kOverlapTolerance;
    return report;
}

// O = |Tr(l_k rho)| + |Tr(l_k^dag rho)|
inline double mode_overlap(const GeneratorSpectrum& spec, std::size_t k, const Matrix& rho) {
    const Matrix internal = spec.to_internal(rho);
    const Eigenmatrix& l = spec.mode(k).left;
    return std::abs(l.trace_product(internal)) + std::abs(l.adjoint().trace_product(internal));
}

// First mode after the steady state whose right eigenmatrix is diagonal in the
// energy eigenbasis.
inline std::size_t slowest_population_mode(const GeneratorSpectrum& spec, const SpectralBasis& basis) {
    for (std::size_t k = 2; k <= spec.size(); ++k) {
        const Matrix r = basis.to_energy_frame(spec.right(k));
        const double off = (r - Matrix(r.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
        if (off <= 1e-8 * std::max(1.0, r.cwiseAbs().maxCoeff())) return k;
    }
    throw NumericalError("no population mode found in the spectrum");
}

// Slowest decaying mode with a complex eigenvalue; empty when every mode is real.
inline std::optional<std::size_t> slowest_coherent_mode(const GeneratorSpectrum& spec) {
    const double tol = detail::eigenvalue_tolerance(spec.eigenvalues());
    for (std::size_t k = 2; k <= spec.size(); ++k)
        if (std::abs(spec.eigenvalue(k).imag()) > tol) return k;
    return std::nullopt;
}

// Slowest decaying mode whose right eigenmatrix commutes with `symmetry`
// (e.g. fermion parity, which no physical state can break).
inline std::size_t slowest_mode_in_sector(const GeneratorSpectrum& spec, const Matrix& symmetry, double tol = 1e-8) {
    detail::require(symmetry.rows() == static_cast<Eigen::Index>(spec.dim()), "symmetry dimension mismatch");
    for (std::size_t k = 2; k <= spec.size(); ++k) {
        const Matrix r = spec.right(k);
        if ((symmetry * r - r * symmetry).cwiseAbs().maxCoeff() <= tol * std::max(1.0, r.cwiseAbs().maxCoeff()))
            return k;
    }
    throw NumericalError("no decaying mode in the requested symmetry sector");
}

// Mixes rho with |psi><psi|, psi = (|E_a> + |E_b>)/sqrt(2), choosing the weight
// by bisection so the overlap with mode k reaches `target`.
struct EnrichedState {
    DensityMatrix state;
    double weight = 0.0;
    double overlap = 0.0;
};

inline EnrichedState enrich_overlap(const GeneratorSpectrum& spec, const SpectralBasis& basis, const DensityMatrix& rho,
                                    std::size_t k, std::size_t level_a, std::size_t level_b, double target) {
    detail::require(level_a != level_b && level_a < basis.dim() && level_b < basis.dim(), "invalid level pair");
    detail::require(target >= 0.0, "target overlap must be nonnegative");
    Vector psi = (basis.vectors.col(static_cast<Eigen::Index>(level_a)) +
                  basis.vectors.col(static_cast<Eigen::Index>(level_b))) /
                 std::sqrt(2.0);
    const Matrix pure = psi * psi.adjoint();
    auto mix = [&](double w) { return Matrix((1.0 - w) * rho.matrix() + w * pure); };
    const double o0 = mode_overlap(spec, k, rho.matrix());
    const double o1 = mode_overlap(spec, k, pure);
    if ((target - o0) * (target - o1) > 0.0)
        throw ValidationError("target overlap is outside the range reachable by mixing");
    double lo = 0.0, hi = 1.0;
    const bool rising = o1 > o0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double w = 0.5 * (lo + hi);
        const bool below = mode_overlap(spec, k, mix(w)) < target;
        (below == rising ? lo : hi) = w;
    }
    EnrichedState out{DensityMatrix(mix(0.5 * (lo + hi))), 0.5 * (lo + hi), 0.0};
    out.overlap = mode_overlap(spec, k, out.state.matrix());
    return out;
}

// Time after which curve b stays strictly below curve a up to the end of the
// grid, linearly interpolated inside the bracketing interval. Differences
// within `noise` are undecided, so curves that merge into rounding noise do not
// count as crossing. Empty when b does not start above a or never ends below it.
inline std::optional<double> detect_crossing(const std::vector<double>& times, const std::vector<double>& a,
                                             const std::vector<double>& b, double noise = 0.0) {
    if (times.size() != a.size() || times.size() != b.size())
        throw ValidationError("crossing detection needs both curves on the same time grid");
    if (times.empty() || !(b.front() - a.front() > noise)) return std::nullopt;
    std::size_t last_above = 0;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (b[i] - a[i] > noise) last_above = i;
    bool below = false;
    for (std::size_t i = last_above + 1; i < times.size(); ++i)
        if (b[i] - a[i] < -noise) below = true;
    if (!below) return std::nullopt;
    const std::size_t i = last_above;
    const double d0 = b[i] - a[i];
    const double d1 = b[i + 1] - a[i + 1];
    return times[i] + (times[i + 1] - times[i]) * d0 / (d0 - d1);
}

// Exponential rate of a decaying tail: log-linear fit over the second half of
// the points that are still above `floor`.
inline double fit_tail_rate(const std::vector<double>& times, const std::vector<double>& values,
                            double floor = 1e-11) {
    std::size_t end = 0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] > floor) end = i + 1;
    if (end < 4) throw NumericalError("tail too short for a rate fit");
    const double from = times[end / 2];
    return fit_exponential_rate(times, values, from, times[end - 1], floor);
}

namespace detail {

// Does p majorize q? Partial sums of the descending sorts, with slack.
inline bool majorizes(RealVector p, RealVector q, double tol = 1e-12) {
    std::sort(p.begin(), p.end(), std::greater<>());
    std::sort(q.begin(), q.end(), std::greater<>());
    double sp = 0.0, sq = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        sp += p(i);
        sq += q(i);
        if (sp < sq - tol) return false;
    }
    return true;
}

}  // namespace detail

struct MajorizationReport {
    std::size_t samples = 0;
    std::size_t free_energy_violations = 0;
    std::size_t majorization_violations = 0;
    double max_free_energy_excess = -kInfinity;  // max F(V rho' V^dag) - F(rho')

    [[nodiscard]] bool holds() const { return free_energy_violations == 0 && majorization_violations == 0; }
};

// For Haar-random V: F(V rho' V^dag) <= F(rho') and the energy populations of
// rho' majorize those of V rho' V^dag. Sample i uses its own derived seed.
inline MajorizationReport majorization_check(const DensityMatrix& transformed, const SpectralBasis& basis,
                                             const Beta& beta, std::size_t samples, std::uint64_t seed,
                                             std::size_t threads = 1) {
    const Matrix h = basis.hamiltonian();
    const double reference = noneq_free_energy(transformed.matrix(), h, beta);
    const RealVector p = energy_populations(transformed.matrix(), basis);
    std::vector<double> excess(samples);
    std::vector<char> majorized(samples);
    detail::parallel_for(samples, threads, [&](std::size_t i) {
        std::mt19937_64 rng(derive_seed(seed, i));
        const Matrix v = haar_unitary(basis.dim(), rng);
        Matrix rotated = v * transformed.matrix() * v.adjoint();
        rotated = 0.5 * (rotated + rotated.adjoint()).eval();
        excess[i] = noneq_free_energy(rotated, h, beta) - reference;
        majorized[i] = detail::majorizes(p, energy_populations(rotated, basis));
    });
    MajorizationReport report;
    report.samples = samples;
    for (std::size_t i = 0; i < samples; ++i) {
        report.max_free_energy_excess = std::max(report.max_free_energy_excess, excess[i]);
        if (excess[i] > 1e-10) ++report.free_energy_violations;
        if (!majorized[i]) ++report.majorization_violations;
    }
    return report;
}

// Relative rounding level of free energies near equilibrium.
inline constexpr double kCrossingNoise = 1e-12;

struct MpembaCertificate {
    bool applicable = true;
    std::string note;
    std::map<std::size_t, double> residual_overlaps;  // coherent modes, transformed state
    std::optional<double> target_overlap;             // O for a targeted mode, when one was set
    double free_energy_gain = 0.0;                    // F(rho') - F(rho)
    std::optional<double> crossing_time;
    double rate_before = 0.0;
    double rate_after = 0.0;
};

struct CertificateInputs {
    const GeneratorSpectrum* spectrum = nullptr;
    const SpectralBasis* basis = nullptr;
    Beta beta = Beta::finite(1.0);
    std::vector<double> times;
    std::optional<std::size_t> target_mode;
    // Trajectory for a state on `times`; the spectral expansion when unset.
    std::function<EvolutionGrid(const DensityMatrix&, const std::vector<double>&)> evolve;
};

struct CertificateRun {
    MpembaCertificate certificate;
    ThermoTrajectory original;
    ThermoTrajectory transformed;
};

// Evolves rho and rho' and fills a certificate. Inputs already at equilibrium,
// or whose transform leaves them unchanged, are reported as not applicable.
inline CertificateRun certify(const CertificateInputs& in, const DensityMatrix& rho, const DensityMatrix& rho_t) {
    detail::require(in.spectrum && in.basis, "certificate needs a spectrum and a basis");
    const GeneratorSpectrum& spec = *in.spectrum;
    CertificateRun run;
    MpembaCertificate& cert = run.certificate;

    const Matrix h = in.basis->hamiltonian();
    const double f_eq = equilibrium_free_energy(*in.basis, in.beta);
    const double f0 = noneq_free_energy(rho.matrix(), h, in.beta);
    const double f1 = noneq_free_energy(rho_t.matrix(), h, in.beta);
    cert.free_energy_gain = f1 - f0;
    cert.residual_overlaps = coherent_overlaps(spec, rho_t.matrix());
    if (in.target_mode) cert.target_overlap = mode_overlap(spec, *in.target_mode, rho_t.matrix());

    const double scale = 1e-10 * std::max(1.0, std::abs(f_eq));
    if (f0 <= f_eq + scale) {
        cert.applicable = false;
        cert.note = "initial state is already the equilibrium state";
    } else if ((rho.matrix() - rho_t.matrix()).cwiseAbs().maxCoeff() <= 1e-12) {
        cert.applicable = false;
        cert.note = "transform leaves the state unchanged";
    }

    auto evolve = [&](const DensityMatrix& state) {
        return in.evolve ? in.evolve(state, in.times) : evolve_spectral(spec, state, in.times);
    };
    run.original = thermo_trajectory(evolve(rho), *in.basis, in.beta);
    run.transformed = thermo_trajectory(evolve(rho_t), *in.basis, in.beta);
    if (!cert.applicable) return run;

    cert.crossing_time =
        detect_crossing(in.times, run.original.free_energy, run.transformed.free_energy, kCrossingNoise * (1.0 + std::abs(f_eq)));
    cert.rate_before = fit_tail_rate(in.times, run.original.l1);
    cert.rate_after = fit_tail_rate(in.times, run.transformed.l1);
    return run;
}

inline std::string format_certificate(const MpembaCertificate& c) {
    std::ostringstream os;
    os.precision(12);
    os << "status: " << (c.applicable ? "applicable" : "not applicable") << '\n';
    if (!c.note.empty()) os << "note: " << c.note << '\n';
    os << "free_energy_gain: " << c.free_energy_gain << '\n';
    os << "crossing_time: ";
    if (c.crossing_time)
        os << *c.crossing_time << '\n';
    else
        os << "none\n";
    if (c.applicable) {
        os << "rate_before: " << c.rate_before << '\n';
        os << "rate_after: " << c.rate_after << '\n';
    }
    if (c.target_overlap) os << "target_overlap: " << *c.target_overlap << '\n';
    double worst = 0.0;
    for (const auto& [k, v] : c.residual_overlaps) worst = std::max(worst, v);
    os << "max_coherent_overlap: " << worst << '\n';
    for (const auto& [k, v] : c.residual_overlaps) os << "overlap " << k << ": " << v << '\n';
    return os.str();
}

}  // namespace qmpemba
