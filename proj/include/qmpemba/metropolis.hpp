#pragma once

// Annealing searches that lower the overlap of a state with selected slow
// modes: a unitary search over products of single-qubit rotations and a
// permutation search over the populations of a diagonal state.

#include <array>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

#include "spectral.hpp"

namespace qmpemba {

struct MetropolisConfig {
    double cooling_tau = 0.999;
    double threshold_eps = 1e-6;
    std::size_t nano_n = 200;
    std::size_t micro_m = 20;
    std::size_t macro_M = 20;
    std::vector<std::size_t> target_modes{2, 3};
    std::uint64_t seed = 1;
    std::size_t max_total_iterations = 0;  // 0: no cap beyond the loop budgets
    bool record_trace = true;

    void validate() const {
        detail::require(cooling_tau > 0.0 && cooling_tau < 1.0, "cooling constant must lie in (0, 1)");
        detail::require(threshold_eps > 0.0, "threshold epsilon must be positive");
        detail::require(nano_n > 0 && micro_m > 0 && macro_M > 0, "loop budgets must be positive");
    }
};

struct TraceStep {
    std::size_t iteration = 0;
    double cost = 0.0;  // cost of the walker after the step
    double temperature = 1.0;
    bool accepted = false;
};

struct OptimizationTrace {
    std::vector<TraceStep> steps;
};

inline void write_trace_csv(std::ostream& os, const OptimizationTrace& trace) {
    os << "iteration,cost,T_eff,accepted\n";
    os.precision(17);
    for (const auto& s : trace.steps)
        os << s.iteration << ',' << s.cost << ',' << s.temperature << ',' << (s.accepted ? 1 : 0) << '\n';
}

// Per-qubit parameters (alpha, beta, gamma, delta) of
// U_j = e^{i alpha} Rz(beta) Rx(gamma) Rz(delta).
struct UnitaryAnsatz {
    std::vector<std::array<double, 4>> params;
    bool fermionic = false;

    [[nodiscard]] std::size_t sites() const { return params.size(); }
};

inline double wrap_angle(double x) {
    constexpr double period = 2.0 * kPi;
    x = std::fmod(x, period);
    if (x < 0.0) x += period;
    return x >= period ? 0.0 : x;
}

inline Eigen::Matrix2cd single_qubit_unitary(const std::array<double, 4>& p) {
    const cd i(0.0, 1.0);
    auto rz = [&](double t) {
        Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
        m(0, 0) = std::exp(-i * (t / 2));
        m(1, 1) = std::exp(i * (t / 2));
        return m;
    };
    Eigen::Matrix2cd rx;
    rx << std::cos(p[2] / 2), -i * std::sin(p[2] / 2), -i * std::sin(p[2] / 2), std::cos(p[2] / 2);
    return std::exp(i * p[0]) * rz(p[1]) * rx * rz(p[3]);
}

// Factor on site j (1-based): U_j (sigma^z_j)^{mod(L - j, 2)} in the fermionic form.
inline Eigen::Matrix2cd site_factor(const UnitaryAnsatz& a, std::size_t site) {
    Eigen::Matrix2cd u = single_qubit_unitary(a.params[site]);
    const std::size_t j = site + 1;
    if (a.fermionic && (a.sites() - j) % 2 == 1) u.col(1) *= -1.0;  // right-multiply by sigma^z
    return u;
}

inline Matrix build_ansatz_unitary(const UnitaryAnsatz& a) {
    detail::require(a.sites() >= 1, "ansatz needs at least one qubit");
    Matrix u = Matrix::Identity(1, 1);
    for (std::size_t j = 0; j < a.sites(); ++j) u = kron(u, Matrix(site_factor(a, j)));
    return u;
}

namespace detail {

// m <- G_site m (left) or m <- m G_site^dag (right), G a 2x2 acting on one qubit
// (site 0 is the leftmost tensor factor).
inline void apply_site_left(Matrix& m, const Eigen::Matrix2cd& g, std::size_t site, std::size_t sites) {
    const Eigen::Index stride = Eigen::Index(1) << (sites - 1 - site);
    const Eigen::Index d = m.rows();
    for (Eigen::Index base = 0; base < d; ++base) {
        if (base & stride) continue;
        const Eigen::Index hi = base | stride;
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const cd a = m(base, c), b = m(hi, c);
            m(base, c) = g(0, 0) * a + g(0, 1) * b;
            m(hi, c) = g(1, 0) * a + g(1, 1) * b;
        }
    }
}

inline void apply_site_right_adjoint(Matrix& m, const Eigen::Matrix2cd& g, std::size_t site, std::size_t sites) {
    const Eigen::Index stride = Eigen::Index(1) << (sites - 1 - site);
    const Eigen::Index d = m.cols();
    const Eigen::Matrix2cd h = g.adjoint();
    for (Eigen::Index base = 0; base < d; ++base) {
        if (base & stride) continue;
        const Eigen::Index hi = base | stride;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            const cd a = m(r, base), b = m(r, hi);
            m(r, base) = a * h(0, 0) + b * h(1, 0);
            m(r, hi) = a * h(0, 1) + b * h(1, 1);
        }
    }
}

inline std::size_t qubit_count(std::size_t dim) {
    std::size_t sites = 0;
    while ((std::size_t(1) << sites) < dim) ++sites;
    require((std::size_t(1) << sites) == dim, "the rotation ansatz needs a power-of-two dimension");
    return sites;
}

// Metropolis rule shared by both searches.
inline bool metropolis_accept(double proposed, double current, double temperature, std::mt19937_64& rng) {
    if (proposed < current) return true;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng) < std::exp(-(proposed - current) / temperature);
}

}  // namespace detail

// C = sum_k |Tr(l_k rho')| over the targeted modes.
inline double cost(const GeneratorSpectrum& spec, const Matrix& rho, const std::vector<std::size_t>& modes) {
    if (modes.empty()) return 0.0;
    const Matrix internal = spec.to_internal(rho);
    double c = 0.0;
    for (std::size_t k : modes) {
        detail::require(k >= 1 && k <= spec.size(), "target mode out of range");
        c += std::abs(spec.mode(k).left.trace_product(internal));
    }
    return c;
}

struct UnitaryMetropolisResult {
    DensityMatrix state;
    Matrix unitary;
    UnitaryAnsatz ansatz;  // parameters of the best state; empty when the input already converged
    double cost = 0.0;
    double initial_cost = 0.0;
    bool converged = false;
    std::size_t iterations = 0;  // proposals made
    std::size_t converged_at = 0;
    OptimizationTrace trace;
};

namespace detail {

// Lab-frame left eigenmatrices, transposed so that Tr(l rho) = sum(lt .* rho).
inline std::vector<Matrix> cost_kernels(const GeneratorSpectrum& spec, const std::vector<std::size_t>& modes) {
    std::vector<Matrix> out;
    for (std::size_t k : modes) {
        require(k >= 1 && k <= spec.size(), "target mode out of range");
        out.push_back(spec.left(k).transpose());
    }
    return out;
}

inline double kernel_cost(const std::vector<Matrix>& kernels, const Matrix& rho) {
    double c = 0.0;
    for (const Matrix& k : kernels) c += std::abs((k.array() * rho.array()).sum());
    return c;
}

}  // namespace detail

inline UnitaryMetropolisResult unitary_metropolis(const GeneratorSpectrum& spec, const DensityMatrix& rho,
                                                  const MetropolisConfig& config, bool fermionic = false) {
    config.validate();
    detail::require(rho.dim() == spec.dim(), "state dimension does not match the spectrum");
    const std::size_t sites = detail::qubit_count(rho.dim());
    const std::vector<Matrix> kernels = detail::cost_kernels(spec, config.target_modes);

    UnitaryMetropolisResult result{rho, Matrix::Identity(rho.dim(), rho.dim()), UnitaryAnsatz{{}, fermionic}};
    result.initial_cost = detail::kernel_cost(kernels, rho.matrix());
    result.cost = result.initial_cost;
    if (result.cost < config.threshold_eps) {
        result.converged = true;
        return result;
    }

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    std::uniform_int_distribution<std::size_t> pick_site(0, sites - 1);
    std::uniform_int_distribution<std::size_t> pick_param(0, 3);

    UnitaryAnsatz ansatz{std::vector<std::array<double, 4>>(sites), fermionic};
    for (auto& p : ansatz.params)
        for (double& x : p) x = angle(rng);
    std::vector<Eigen::Matrix2cd> factors(sites);
    for (std::size_t j = 0; j < sites; ++j) factors[j] = site_factor(ansatz, j);

    auto full_state = [&](const UnitaryAnsatz& a) {
        const Matrix u = build_ansatz_unitary(a);
        Matrix r = u * rho.matrix() * u.adjoint();
        return Matrix(0.5 * (r + r.adjoint()));
    };

    Matrix current = full_state(ansatz);
    double current_cost = detail::kernel_cost(kernels, current);
    UnitaryAnsatz best = ansatz;
    double best_cost = current_cost;
    double temperature = 1.0;
    Matrix candidate(current.rows(), current.cols());

    const std::size_t budget = sites * config.macro_M * config.micro_m * config.nano_n;
    const std::size_t cap = config.max_total_iterations ? std::min(budget, config.max_total_iterations) : budget;
    constexpr std::size_t refresh_every = 4096;  // bounds drift of the incremental updates
    std::size_t iteration = 0;
    bool done = best_cost < config.threshold_eps || cap == 0;

    for (std::size_t macro = 0; macro < sites * config.macro_M && !done; ++macro) {
        const std::size_t j = pick_site(rng);
        for (std::size_t micro = 0; micro < config.micro_m && !done; ++micro) {
            const std::size_t which = pick_param(rng);
            for (std::size_t nano = 0; nano < config.nano_n && !done; ++nano) {
                const double step = angle(rng);
                std::array<double, 4> proposal = ansatz.params[j];
                proposal[which] = wrap_angle(proposal[which] + step);

                const std::array<double, 4> saved = ansatz.params[j];
                ansatz.params[j] = proposal;
                const Eigen::Matrix2cd next = site_factor(ansatz, j);
                const Eigen::Matrix2cd g = next * factors[j].adjoint();
                candidate = current;
                detail::apply_site_left(candidate, g, j, sites);
                detail::apply_site_right_adjoint(candidate, g, j, sites);
                const double proposed_cost = detail::kernel_cost(kernels, candidate);

                const bool accepted = detail::metropolis_accept(proposed_cost, current_cost, temperature, rng);
                if (accepted) {
                    factors[j] = next;
                    current.swap(candidate);
                    current_cost = proposed_cost;
                    temperature *= config.cooling_tau;
                } else {
                    ansatz.params[j] = saved;
                }
                ++iteration;
                if (iteration % refresh_every == 0) {
                    current = full_state(ansatz);
                    current_cost = detail::kernel_cost(kernels, current);
                }
                if (config.record_trace) result.trace.steps.push_back({iteration, current_cost, temperature, accepted});
                if (current_cost < best_cost) {
                    best_cost = current_cost;
                    best = ansatz;
                }
                if (best_cost < config.threshold_eps || iteration >= cap) done = true;
            }
        }
    }

    // Rebuild the best state from its parameters rather than trusting the running update.
    const Matrix u = build_ansatz_unitary(best);
    Matrix out = u * rho.matrix() * u.adjoint();
    out = 0.5 * (out + out.adjoint()).eval();
    result.cost = detail::kernel_cost(kernels, out);
    result.converged = result.cost < config.threshold_eps;
    result.state = DensityMatrix(std::move(out), kTrajectoryTolerance);
    result.unitary = u;
    result.ansatz = best;
    result.iterations = iteration;
    result.converged_at = result.converged ? iteration : 0;
    return result;
}

struct SwapMetropolisResult {
    RealVector populations;
    double cost = 0.0;
    double initial_cost = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    OptimizationTrace trace;
};

// Diagonal of l_k in the energy eigenbasis, i.e. the vectorised population part.
inline std::vector<Vector> diagonal_left_modes(const GeneratorSpectrum& spec, const SpectralBasis& basis,
                                               const std::vector<std::size_t>& modes) {
    std::vector<Vector> out;
    for (std::size_t k : modes) {
        detail::require(k >= 1 && k <= spec.size(), "target mode out of range");
        out.push_back(basis.to_energy_frame(spec.left(k)).diagonal());
    }
    return out;
}

// Random permutations of four populations (two when d < 4); accept and cool
// exactly as in the unitary search. Stops once C < eps or after
// max_total_iterations proposals.
inline SwapMetropolisResult swap_metropolis(const std::vector<Vector>& modes, const RealVector& populations,
                                            const MetropolisConfig& config) {
    config.validate();
    const auto d = populations.size();
    detail::require(d >= 2, "swap search needs at least two populations");
    for (const Vector& l : modes) detail::require(l.size() == d, "mode and population sizes differ");
    detail::require(config.max_total_iterations > 0, "swap search needs max_total_iterations");

    auto evaluate = [&](const RealVector& p) {
        double c = 0.0;
        for (const Vector& l : modes) c += std::abs((l.array() * p.cast<cd>().array()).sum());
        return c;
    };

    SwapMetropolisResult result;
    result.populations = populations;
    result.initial_cost = evaluate(populations);
    result.cost = result.initial_cost;
    if (result.cost < config.threshold_eps) {
        result.converged = true;
        return result;
    }

    std::mt19937_64 rng(config.seed);
    const std::size_t group = d >= 4 ? 4 : 2;
    std::vector<std::array<std::size_t, 4>> perms;
    {
        std::array<std::size_t, 4> p{0, 1, 2, 3};
        if (group == 4) {
            while (std::next_permutation(p.begin(), p.end())) perms.push_back(p);
        } else {
            perms.push_back({1, 0, 2, 3});
        }
    }
    std::uniform_int_distribution<std::size_t> pick_perm(0, perms.size() - 1);

    RealVector current = populations;
    double current_cost = result.cost;
    RealVector best = current;
    double best_cost = current_cost;
    double temperature = 1.0;
    std::vector<std::size_t> index(static_cast<std::size_t>(d));
    std::iota(index.begin(), index.end(), 0);

    std::size_t iteration = 0;
    while (best_cost >= config.threshold_eps && iteration < config.max_total_iterations) {
        // distinct positions by a partial Fisher-Yates shuffle
        for (std::size_t s = 0; s < group; ++s) {
            std::uniform_int_distribution<std::size_t> pick(s, index.size() - 1);
            std::swap(index[s], index[pick(rng)]);
        }
        const auto& perm = perms[pick_perm(rng)];
        RealVector candidate = current;
        for (std::size_t s = 0; s < group; ++s)
            candidate(static_cast<Eigen::Index>(index[s])) = current(static_cast<Eigen::Index>(index[perm[s]]));
        const double proposed_cost = evaluate(candidate);
        const bool accepted = detail::metropolis_accept(proposed_cost, current_cost, temperature, rng);
        if (accepted) {
            current = std::move(candidate);
            current_cost = proposed_cost;
            temperature *= config.cooling_tau;
        }
        ++iteration;
        if (config.record_trace) result.trace.steps.push_back({iteration, current_cost, temperature, accepted});
        if (current_cost < best_cost) {
            best_cost = current_cost;
            best = current;
        }
    }
    result.populations = best;
    result.cost = best_cost;
    result.converged = best_cost < config.threshold_eps;
    result.iterations = iteration;
    return result;
}

}  // namespace qmpemba
