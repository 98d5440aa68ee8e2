#include "support.hpp"

namespace qmpemba {
namespace {

using test::max_abs;

ModelSystem qubit_system(bool dense = false) {
    BuildOptions o;
    o.force_dense = dense;
    return build_system(single_qubit(), o);
}

void check_spectrum_contract(const GeneratorSpectrum& spec, bool davies_input, const SpectralBasis* basis) {
    const auto d = static_cast<Eigen::Index>(spec.dim());
    EXPECT_NEAR(std::abs(spec.eigenvalue(1)), 0.0, 1e-10);
    for (std::size_t k = 2; k < spec.size(); ++k)
        EXPECT_LE(std::abs(spec.eigenvalue(k).real()), std::abs(spec.eigenvalue(k + 1).real()) + 1e-9);
    EXPECT_GT(std::abs(spec.eigenvalue(2).real()), 1e-10);

    // biorthonormality Tr(l_j r_k) = delta_jk
    double worst = 0.0;
    for (std::size_t j = 1; j <= spec.size(); ++j)
        for (std::size_t k = 1; k <= spec.size(); ++k) {
            const cd v = (spec.left(j) * spec.right(k)).trace();
            worst = std::max(worst, std::abs(v - (j == k ? 1.0 : 0.0)));
        }
    EXPECT_LT(worst, 1e-8);

    EXPECT_LT(max_abs(spec.right(1) - spec.steady_state().matrix()), 1e-9);
    EXPECT_NEAR(std::abs(spec.right(1).trace() - 1.0), 0.0, 1e-10);
    EXPECT_LT(max_abs(spec.left(1) - Matrix::Identity(d, d)), 1e-9);
    for (std::size_t k = 2; k <= spec.size(); ++k) EXPECT_LT(std::abs(spec.right(k).trace()), 1e-10);

    const double tol = detail::eigenvalue_tolerance(spec.eigenvalues());
    for (std::size_t k = 2; k <= spec.size(); ++k) {
        const cd v = spec.eigenvalue(k);
        if (std::abs(v.imag()) <= tol) continue;
        bool has_partner = false;
        for (std::size_t j = 2; j <= spec.size(); ++j)
            if (std::abs(spec.eigenvalue(j) - std::conj(v)) <= tol) has_partner = true;
        EXPECT_TRUE(has_partner) << "mode " << k;
        if (davies_input && basis) {
            const Matrix l = basis->to_energy_frame(spec.left(k));
            EXPECT_LT(l.diagonal().cwiseAbs().maxCoeff(), 1e-9) << "mode " << k;
        }
    }
}

TEST(Decompose, QubitAnalyticSpectrum) {
    const ModelSystem sys = qubit_system();
    const GeneratorSpectrum spec = decompose(sys);
    ASSERT_EQ(spec.size(), 4u);
    const double gt = test::qubit_gamma_total();
    EXPECT_NEAR(std::abs(spec.eigenvalue(2) - cd(-gt / 2, -5.0)), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(spec.eigenvalue(3) - cd(-gt / 2, 5.0)), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(spec.eigenvalue(4) - cd(-gt, 0.0)), 0.0, 1e-10);
    EXPECT_TRUE(spec.gap_is_complex());
    check_spectrum_contract(spec, true, &sys.basis);
}

TEST(Decompose, BlockAndDensePathsAgree) {
    const ModelSystem sys = build_system(tfim(3, 1.0, 0.5, 1.0), BuildOptions{false, true});
    const GeneratorSpectrum block = decompose(*sys.block);
    const GeneratorSpectrum dense = decompose(*sys.dense);
    EXPECT_LT(test::multiset_distance(block.eigenvalues(), dense.eigenvalues()), 1e-8);
    check_spectrum_contract(block, true, &sys.basis);
    check_spectrum_contract(dense, true, &sys.basis);
}

TEST(Decompose, TfimFiveSitesOrdering) {
    const ModelSystem sys = build_system(tfim());
    const GeneratorSpectrum spec = decompose(sys);
    ASSERT_EQ(spec.size(), 1024u);
    EXPECT_EQ(spec.dim(), 32u);
    for (std::size_t k = 2; k < 20; ++k)
        EXPECT_LE(std::abs(spec.eigenvalue(k).real()), std::abs(spec.eigenvalue(k + 1).real()) + 1e-9);
    // at these parameters the slowest mode is a population relaxation
    EXPECT_NEAR(spec.eigenvalue(2).real(), -2.0, 1e-3);
    EXPECT_FALSE(spec.gap_is_complex());
    ASSERT_TRUE(slowest_coherent_mode(spec).has_value());
    EXPECT_EQ(*slowest_coherent_mode(spec), 3u);
}

TEST(SpectralGap, Classification) {
    for (double t : {0.5, 10.0, 100.0}) {
        const GeneratorSpectrum spec = decompose(build_system(single_qubit(5.0, t)));
        EXPECT_TRUE(spectral_gap(spec).complex_pair) << "T = " << t;
    }
    // classical stochastic generator: no Hamiltonian part
    Matrix jump = Matrix::Zero(2, 2);
    jump(0, 1) = 1.0;
    const std::vector<Matrix> ops{jump, 0.5 * jump.adjoint()};
    const GeneratorSpectrum classical = decompose(lindblad_dense(Matrix::Zero(2, 2), ops));
    EXPECT_FALSE(spectral_gap(classical).complex_pair);

    const ModelSystem dot = build_system(quantum_dot());
    const GeneratorSpectrum ds = decompose(dot);
    const std::size_t k = leading_mode(dot, ds);
    EXPECT_NEAR(ds.eigenvalue(k).imag(), 0.0, 1e-9);
}

TEST(Amplitude, Examples) {
    const ModelSystem sys = qubit_system();
    const GeneratorSpectrum spec = decompose(sys);
    const DensityMatrix tau = thermal_state(sys.basis, sys.beta());
    for (std::size_t k = 2; k <= 4; ++k) EXPECT_LT(std::abs(amplitude(spec, k, tau)), 1e-9);
    const DensityMatrix diag = bloch_to_state(BlochVector{{0, 0, 0.4}});
    EXPECT_LT(std::abs(amplitude(spec, 2, diag)), 1e-10);
    EXPECT_LT(std::abs(amplitude(spec, 3, diag)), 1e-10);
    EXPECT_GT(mode_overlap(spec, 2, test::skewed_state().matrix()), 0.1);
}

TEST(EvolveSpectral, InitialAndLateTimes) {
    const ModelSystem sys = build_system(tfim(3, 1.0, 0.5, 1.0));
    const GeneratorSpectrum spec = decompose(sys);
    const DensityMatrix rho = random_mixed_state(8, 20, 3);
    const double gap = spectral_gap(spec).value;
    const EvolutionGrid g = evolve_spectral(spec, rho, {0.0, 50.0 / gap});
    EXPECT_LT(max_abs(g.states[0].matrix() - rho.matrix()), 1e-8);
    EXPECT_LT(max_abs(g.states[1].matrix() - thermal_state(sys.basis, sys.beta()).matrix()), 1e-10);
}

TEST(EvolveSpectral, AgreesWithDirectOnTfim3) {
    const ModelSystem sys = build_system(tfim(3, 1.0, 0.5, 1.0), BuildOptions{false, true});
    const GeneratorSpectrum spec = decompose(sys);
    const DensityMatrix rho = random_mixed_state(8, 50, 9);
    const auto times = test::linear_grid(10.0, 200);
    const EvolutionGrid a = evolve_spectral(spec, rho, times);
    const EvolutionGrid b = evolve_direct(*sys.dense, rho, times);
    const EvolutionGrid c = evolve_block(*sys.block, rho, times);
    double worst = 0.0, worst_block = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        worst = std::max(worst, max_abs(a.states[i].matrix() - b.states[i].matrix()));
        worst_block = std::max(worst_block, max_abs(c.states[i].matrix() - b.states[i].matrix()));
    }
    EXPECT_LE(worst, 1e-8);
    EXPECT_LE(worst_block, 1e-8);
}

TEST(EvolveSpectral, RefusesIllConditionedExpansion) {
    const ModelSystem sys = build_system(tfim());
    const GeneratorSpectrum spec = decompose(sys);
    const DensityMatrix rho = random_mixed_state(32, 1000, 7);
    EXPECT_THROW(evolve_spectral(spec, rho, {0.0, 1.0}), NumericalError);
    // the block propagator handles the same state
    const EvolutionGrid g = evolve(sys, spec, rho, {0.0, 1.0, 100.0});
    EXPECT_LT(max_abs(g.states[2].matrix() - sys.thermal()), 1e-9);
}

TEST(EvolveDirect, TracePreservedAndUnitaryLimit) {
    const ModelSystem sys = build_system(tfim(2, 1.0, 0.5, 1.0), BuildOptions{false, true});
    const DensityMatrix rho = random_mixed_state(4, 3, 2);
    const auto times = test::linear_grid(5.0, 50);
    const EvolutionGrid g = evolve_direct(*sys.dense, rho, times);
    for (const auto& s : g.states) EXPECT_NEAR(std::abs(s.matrix().trace() - 1.0), 0.0, 1e-12);

    const Matrix unitary_only = lindblad_dense(sys.model.h.matrix(), std::vector<Matrix>{});
    const EvolutionGrid u = evolve_direct(unitary_only, rho, times);
    const RealVector ev0 = rho.eigenvalues();
    for (const auto& s : u.states) EXPECT_LT((s.eigenvalues() - ev0).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EvolveDirect, TailRateIsTheGap) {
    const ModelSystem sys = build_system(single_qubit(), BuildOptions{false, true});
    const GeneratorSpectrum spec = decompose(sys);
    const DensityMatrix rho = test::skewed_state();
    const auto times = test::linear_grid(8.0, 161);
    const EvolutionGrid g = evolve_direct(*sys.dense, rho, times);
    std::vector<double> dist;
    for (const auto& s : g.states) dist.push_back(trace_norm_distance(s.matrix(), sys.thermal()));
    const double rate = fit_exponential_rate(times, dist, 3.0);
    EXPECT_NEAR(rate, spec.eigenvalue(2).real(), 0.02 * std::abs(spec.eigenvalue(2).real()));
}

TEST(EvolveTimes, Validation) {
    const ModelSystem sys = qubit_system();
    const GeneratorSpectrum spec = decompose(sys);
    EXPECT_THROW(evolve_spectral(spec, test::skewed_state(), {1.0, 0.5}), ValidationError);
    EXPECT_THROW(evolve_spectral(spec, test::skewed_state(), {-1.0}), ValidationError);
}

}  // namespace
}  // namespace qmpemba
