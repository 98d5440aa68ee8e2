#pragma once

// Model zoo: a single qubit, the transverse-field Ising chain, a
// two-level atom in a photon bath and a spinful quantum dot.
//
// Energies of the atom and dot are in GHz with k_B = hbar = 1; temperatures
// given in kelvin are converted with kKelvinToGHz.

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mpemba.hpp"

namespace qmpemba {

inline constexpr double kKelvinToGHz = 20.8366;

struct ExplicitJump {
    Matrix op;
    double rate = 0.0;
};

struct ModelInstance {
    std::string name;
    HermitianOperator h;
    Beta beta;
    // Generic Davies recipe, or the Lindblad dissipators written out explicitly.
    std::variant<BathSpec, std::vector<ExplicitJump>> dissipators;
    std::map<std::string, double> default_params;
    std::string units_note;
    std::size_t qubits = 0;  // tensor-product sites, 0 when not a qubit register
    bool fermionic = false;
    // Symmetry no physical state breaks (fermion parity); modes outside its
    // commutant are never excited.
    std::optional<Matrix> superselection;

    [[nodiscard]] std::size_t dim() const { return h.dim(); }
    [[nodiscard]] bool explicit_jumps() const { return std::holds_alternative<std::vector<ExplicitJump>>(dissipators); }

    void validate() const {
        if (const auto* jumps = std::get_if<std::vector<ExplicitJump>>(&dissipators)) {
            for (const auto& j : *jumps) {
                detail::require(j.rate >= 0.0, "explicit jump rates must be nonnegative");
                detail::require(j.op.rows() == static_cast<Eigen::Index>(dim()) && j.op.cols() == j.op.rows(),
                                "jump operator dimension mismatch");
            }
        } else {
            std::get<BathSpec>(dissipators).validate();
        }
    }
};

inline ModelInstance single_qubit(double omega = 5.0, double temperature = 10.0, double gamma = 1.0) {
    detail::require(omega > 0.0, "qubit frequency must be positive");
    const Beta beta = Beta::from_temperature(temperature);
    ModelInstance m{"single_qubit", HermitianOperator(0.5 * omega * pauli_z()), beta,
                    BathSpec{beta, Statistics::Bose, gamma}};
    m.default_params = {{"omega", 5.0}, {"T_b", 10.0}, {"gamma", 1.0}};
    m.units_note = "energies in units of J";
    m.qubits = 1;
    return m;
}

inline Matrix tfim_hamiltonian(std::size_t sites, double j, double h) {
    detail::require(sites >= 2 && sites <= 6, "the Ising chain supports 2 to 6 sites");
    const auto d = static_cast<Eigen::Index>(std::size_t(1) << sites);
    Matrix out = Matrix::Zero(d, d);
    for (std::size_t s = 0; s + 1 < sites; ++s)
        out -= j * embed_site(pauli_z(), s, sites) * embed_site(pauli_z(), s + 1, sites);
    for (std::size_t s = 0; s < sites; ++s) out += h * embed_site(pauli_x(), s, sites);
    return out;
}

inline ModelInstance tfim(std::size_t sites = 5, double j = 1.0, double h = 0.5, double temperature = 0.1,
                          double gamma = 1.0) {
    const Beta beta = Beta::from_temperature(temperature);
    ModelInstance m{"tfim", HermitianOperator(tfim_hamiltonian(sites, j, h)), beta,
                    BathSpec{beta, Statistics::Bose, gamma}};
    m.default_params = {{"L", 5.0}, {"J", 1.0}, {"h", 0.5}, {"T_b", 0.1}, {"gamma", 1.0}};
    m.units_note = "energies in units of J, open boundaries";
    m.qubits = sites;
    return m;
}

inline double bose_occupation(double x, const Beta& beta) {
    if (beta.is_infinite()) return 0.0;
    detail::require(beta.value() * x > 0.0, "Bose occupation diverges at zero energy or infinite temperature");
    return 1.0 / std::expm1(beta.value() * x);
}

inline double fermi_occupation(double x, const Beta& beta) {
    if (beta.is_infinite()) return x > 0.0 ? 0.0 : 1.0;
    return 1.0 / (std::exp(beta.value() * x) + 1.0);
}

// Basis {|g>, |e>}; sigma+ raises g -> e.
inline ModelInstance two_level_atom(double epsilon = 2.0 * kPi * 4.0, double gamma = 2.0 * kPi * 1.41e-3,
                                    double temperature_kelvin = 0.1) {
    detail::require(epsilon > 0.0 && gamma > 0.0, "atom energy and damping must be positive");
    const Beta beta = Beta::from_temperature(temperature_kelvin * kKelvinToGHz);
    Matrix raise = Matrix::Zero(2, 2);
    raise(1, 0) = 1.0;
    Matrix h = Matrix::Zero(2, 2);
    h(1, 1) = epsilon;
    const double n = bose_occupation(epsilon, beta);
    std::vector<ExplicitJump> jumps{{raise, gamma * n}, {raise.adjoint(), gamma * (n + 1.0)}};
    ModelInstance m{"two_level_atom", HermitianOperator(h), beta, std::move(jumps)};
    m.default_params = {{"epsilon", 2.0 * kPi * 4.0}, {"gamma", 2.0 * kPi * 1.41e-3}, {"T_b_kelvin", 0.1}};
    m.units_note = "GHz; temperature converted at 20.8366 GHz/K";
    m.qubits = 1;
    return m;
}

enum class DotOccupation {
    TransitionResolved,  // f at eps for 0 <-> sigma, at eps + E_c for sigma <-> up-down
    Single               // one occupation f(eps) for every transition
};

// Fock basis {|0>, |up>, |down>, |up down>} laid out as the register
// (down) (x) (up), so the annihilators carry a Jordan-Wigner string.
struct DotOperators {
    Matrix d_up;
    Matrix d_down;
    Matrix n_up;
    Matrix n_down;
};

inline DotOperators dot_operators() {
    Matrix lower = Matrix::Zero(2, 2);
    lower(0, 1) = 1.0;  // |empty><occupied|
    const Matrix id = Matrix::Identity(2, 2);
    DotOperators ops;
    ops.d_down = kron(lower, id);
    ops.d_up = kron(pauli_z(), lower);
    ops.n_up = ops.d_up.adjoint() * ops.d_up;
    ops.n_down = ops.d_down.adjoint() * ops.d_down;
    return ops;
}

inline ModelInstance quantum_dot(double epsilon = 242.0, double charging = 1189.0, double gamma = 1.0,
                                 double temperature_kelvin = 2.0,
                                 DotOccupation occupation = DotOccupation::TransitionResolved) {
    detail::require(epsilon > 0.0 && charging >= 0.0 && gamma > 0.0, "dot parameters must be positive");
    const Beta beta = Beta::from_temperature(temperature_kelvin * kKelvinToGHz);
    const DotOperators ops = dot_operators();
    const Matrix h = epsilon * (ops.n_up + ops.n_down) + charging * ops.n_up * ops.n_down;

    std::vector<ExplicitJump> jumps;
    const Matrix id = Matrix::Identity(4, 4);
    for (const Matrix* d : {&ops.d_up, &ops.d_down}) {
        const Matrix& other_n = (d == &ops.d_up) ? ops.n_down : ops.n_up;
        if (occupation == DotOccupation::Single) {
            const double f = fermi_occupation(epsilon, beta);
            jumps.push_back({d->adjoint(), gamma * f});
            jumps.push_back({*d, gamma * (1.0 - f)});
            continue;
        }
        // split d_sigma by whether the other spin is present
        const Matrix low = *d * (id - other_n);
        const Matrix high = *d * other_n;
        const double f_low = fermi_occupation(epsilon, beta);
        const double f_high = fermi_occupation(epsilon + charging, beta);
        jumps.push_back({low.adjoint(), gamma * f_low});
        jumps.push_back({low, gamma * (1.0 - f_low)});
        jumps.push_back({high.adjoint(), gamma * f_high});
        jumps.push_back({high, gamma * (1.0 - f_high)});
    }
    ModelInstance m{"quantum_dot", HermitianOperator(h), beta, std::move(jumps)};
    m.default_params = {{"epsilon", 242.0}, {"E_c", 1189.0}, {"gamma", 1.0}, {"T_b_kelvin", 2.0}};
    m.units_note = "GHz; temperature converted at 20.8366 GHz/K";
    m.qubits = 2;
    m.fermionic = true;
    m.superselection = kron(pauli_z(), pauli_z());
    return m;
}

// A model with its generator: the block form when the spectrum allows it,
// otherwise (or on request) the dense lab-frame matrix.
struct ModelSystem {
    ModelInstance model;
    SpectralBasis basis;
    std::optional<DaviesGenerator> block;
    std::optional<Matrix> dense;

    [[nodiscard]] const Beta& beta() const { return model.beta; }
    [[nodiscard]] Matrix thermal() const { return thermal_state(basis, model.beta).matrix(); }
    [[nodiscard]] Matrix dense_generator() const {
        if (dense) return *dense;
        detail::require(block.has_value(), "system has no generator");
        JumpMatrix jumps = build_jump_matrix(basis, block->bath);
        return build_dense_generator(basis, basis.hamiltonian(), jumps);
    }
};

struct BuildOptions {
    bool dense_fallback = false;  // allow the dense route for degenerate spectra
    bool force_dense = false;     // build the dense matrix even when blocks are available
};

inline std::vector<Matrix> scaled_jumps(const std::vector<ExplicitJump>& jumps) {
    std::vector<Matrix> out;
    for (const auto& j : jumps)
        if (j.rate > 0.0) out.push_back(std::sqrt(j.rate) * j.op);
    return out;
}

inline ModelSystem build_system(ModelInstance model, BuildOptions options = {}) {
    model.validate();
    ModelSystem sys{model, diagonalize(model.h), std::nullopt, std::nullopt};
    if (const auto* jumps = std::get_if<std::vector<ExplicitJump>>(&model.dissipators)) {
        const std::vector<Matrix> ops = scaled_jumps(*jumps);
        sys.dense = lindblad_dense(model.h.matrix(), ops);
        return sys;
    }
    const BathSpec& bath = std::get<BathSpec>(model.dissipators);
    if (sys.basis.degenerate) {
        if (!options.dense_fallback)
            throw DegenerateSpectrumError("model '" + model.name +
                                          "' has a degenerate spectrum; rerun with --dense-fallback");
        JumpMatrix jumps = build_jump_matrix(sys.basis, bath, DegeneracyPolicy::SkipDegeneratePairs);
        sys.dense = build_dense_generator(sys.basis, model.h.matrix(), jumps);
        return sys;
    }
    sys.block = build_davies_generator(sys.basis, bath, options.force_dense);
    if (sys.block->dense) sys.dense = sys.block->dense;
    return sys;
}

inline GeneratorSpectrum decompose(const ModelSystem& sys) {
    if (sys.block) return decompose(*sys.block);
    return decompose(*sys.dense);
}

// Trajectory through the best-conditioned route available for the system.
inline EvolutionGrid evolve(const ModelSystem& sys, const GeneratorSpectrum& spec, const DensityMatrix& rho,
                            const std::vector<double>& times) {
    if (sys.block) return evolve_block(*sys.block, rho, times);
    try {
        return evolve_spectral(spec, rho, times);
    } catch (const NumericalError&) {
        return evolve_direct(*sys.dense, rho, times);
    }
}

// Slowest mode a physical state can excite: lambda_2, or the slowest mode
// commuting with the superselection operator when the model has one.
inline std::size_t leading_mode(const ModelSystem& sys, const GeneratorSpectrum& spec) {
    if (sys.model.superselection) return slowest_mode_in_sector(spec, *sys.model.superselection);
    detail::require(spec.size() >= 2, "spectrum has no decaying mode");
    return 2;
}

// Fixed-point residual of the dot with a single occupation for both
// transitions; nonzero whenever E_c > 0, reported alongside the default form.
inline double dot_single_occupation_residual(double epsilon = 242.0, double charging = 1189.0, double gamma = 1.0,
                                             double temperature_kelvin = 2.0) {
    const ModelSystem sys =
        build_system(quantum_dot(epsilon, charging, gamma, temperature_kelvin, DotOccupation::Single));
    return fixed_point_residual(*sys.dense, sys.thermal());
}

}  // namespace qmpemba
