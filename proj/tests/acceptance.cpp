// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include <qmpemba/qmpemba.hpp>

using namespace qmpemba;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<double> grid(double t_max, std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = t_max * static_cast<double>(i) / static_cast<double>(n - 1);
    return t;
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::vector<cd> eigen_multiset(const Matrix& g) {
    Eigen::ComplexEigenSolver<Matrix> s(g, false);
    return {s.eigenvalues().data(), s.eigenvalues().data() + s.eigenvalues().size()};
}

double multiset_distance(std::vector<cd> a, std::vector<cd> b) {
    if (a.size() != b.size()) return kInfinity;
    // greedy nearest matching; the spectra here are small
    double worst = 0.0;
    for (const cd& x : a) {
        auto best = b.begin();
        for (auto it = b.begin(); it != b.end(); ++it)
            if (std::abs(*it - x) < std::abs(*best - x)) best = it;
        worst = std::max(worst, std::abs(*best - x));
        b.erase(best);
    }
    return worst;
}

Outcome fixed_point() {
    const auto t0 = Clock::now();
    const std::vector<ModelInstance> zoo{single_qubit(), tfim(2), tfim(3), tfim(), two_level_atom(), quantum_dot()};
    double worst = 0.0;
    for (const auto& m : zoo) {
        const ModelSystem sys = build_system(m);
        worst = std::max(worst, fixed_point_residual(sys.dense_generator(), sys.thermal()));
    }
    const double s = seconds_since(t0);
    return {worst <= 1e-10 && s < 60.0, "max residual " + fmt("%.2e", worst) + ", " + fmt("%.1f s", s)};
}

Outcome block_dense() {
    double worst = 0.0;
    auto check = [&](const SpectralBasis& b, const BathSpec& bath) {
        const DaviesGenerator g = build_davies_generator(b, bath, true);
        std::vector<cd> blocks;
        Eigen::EigenSolver<RealMatrix> pop(g.pop_block, false);
        for (Eigen::Index i = 0; i < pop.eigenvalues().size(); ++i) blocks.push_back(pop.eigenvalues()(i));
        for (const auto& e : g.coh_diagonal) blocks.push_back(e.value);
        worst = std::max(worst, multiset_distance(blocks, eigen_multiset(*g.dense)));
    };
    check(diagonalize(HermitianOperator(Matrix(2.5 * pauli_z()))), BathSpec{Beta::from_temperature(10.0)});
    for (std::size_t l : {2u, 3u})
        check(diagonalize(HermitianOperator(tfim_hamiltonian(l, 1.0, 0.5))), BathSpec{Beta::from_temperature(0.1)});
    return {worst <= 1e-8, "max eigenvalue mismatch " + fmt("%.2e", worst)};
}

Outcome spectral_direct() {
    double worst = 0.0;
    std::uint64_t seed = 100;
    const auto times = grid(10.0, 200);
    for (const ModelInstance& m : {single_qubit(), tfim(2, 1.0, 0.5, 1.0), tfim(3, 1.0, 0.5, 1.0)}) {
        BuildOptions o;
        o.force_dense = true;
        const ModelSystem sys = build_system(m, o);
        const GeneratorSpectrum spec = decompose(sys);
        for (int r = 0; r < 3; ++r) {
            const DensityMatrix rho = random_mixed_state(sys.basis.dim(), 5, ++seed);
            const EvolutionGrid a = evolve_spectral(spec, rho, times);
            const EvolutionGrid b = evolve_direct(*sys.dense, rho, times);
            for (std::size_t i = 0; i < times.size(); ++i)
                worst = std::max(worst, (a.states[i].matrix() - b.states[i].matrix()).cwiseAbs().maxCoeff());
        }
    }
    return {worst <= 1e-8, "sup-norm discrepancy " + fmt("%.2e", worst) + " over 9 states x 200 points"};
}

Outcome qubit_transform() {
    const auto t0 = Clock::now();
    const ModelSystem sys = build_system(single_qubit());
    const GeneratorSpectrum spec = decompose(sys);
    const DensityMatrix rho = bloch_to_state(BlochVector{{0.276, 0.359, 0.303}});
    const ExactTransform t = exact_transform(rho, sys.basis);
    const BlochVector r = state_to_bloch(t.state);
    const bool a = std::abs(r.r[0]) <= 1e-3 && std::abs(r.r[1]) <= 1e-3 && std::abs(r.r[2] - 0.545) <= 1e-3;

    CertificateInputs in;
    in.spectrum = &spec;
    in.basis = &sys.basis;
    in.beta = sys.beta();
    in.times = grid(8.0, 801);
    const CertificateRun run = certify(in, rho, t.state);
    const MpembaCertificate& c = run.certificate;
    const bool b = c.crossing_time.has_value() && *c.crossing_time > 0.0;
    const double l2 = spec.eigenvalue(2).real();
    const double lp = spec.eigenvalue(slowest_population_mode(spec, sys.basis)).real();
    const bool cc = std::abs(c.rate_before - l2) <= 0.05 * std::abs(l2) && std::abs(c.rate_after - lp) <= 0.05 * std::abs(lp);
    double coh = 0.0;
    for (double v : run.transformed.coherence) coh = std::max(coh, v);
    const bool d = coh <= 1e-12;
    const double s = seconds_since(t0);

    std::ostringstream os;
    os << "r'=(" << fmt("%.4f", r.r[0]) << "," << fmt("%.4f", r.r[1]) << "," << fmt("%.4f", r.r[2]) << ")"
       << " t_m=" << (b ? fmt("%.3f", *c.crossing_time) : std::string("none")) << " rates " << fmt("%.4f", c.rate_before)
       << "/" << fmt("%.4f", l2) << ", " << fmt("%.4f", c.rate_after) << "/" << fmt("%.4f", lp) << " max C "
       << fmt("%.1e", coh) << ", " << fmt("%.2f s", s);
    return {a && b && cc && d && s < 10.0, os.str()};
}

Outcome tfim_crossings() {
    const auto t0 = Clock::now();
    const ModelSystem sys = build_system(tfim());
    const GeneratorSpectrum spec = decompose(sys);
    const DensityMatrix rho = random_mixed_state(32, 1000, 7);
    const auto times = grid(40.0, 801);
    CertificateInputs in;
    in.spectrum = &spec;
    in.basis = &sys.basis;
    in.beta = sys.beta();
    in.times = times;
    in.evolve = [&](const DensityMatrix& s, const std::vector<double>& ts) { return evolve(sys, spec, s, ts); };

    // decay rate of the transformed state against the slowest mode it still excites
    const CertificateRun base = certify(in, rho, exact_transform(rho, sys.basis).state);
    std::size_t surviving = 0;
    for (std::size_t k = 2; k <= spec.size() && !surviving; ++k)
        if (std::abs(amplitude(spec, k, exact_transform(rho, sys.basis).state)) > 1e-9) surviving = k;
    const double expected = spec.eigenvalue(surviving).real();
    const double rate = base.certificate.rate_after;
    const bool rate_ok = std::abs(rate - expected) <= 0.1 * std::abs(expected);

    const std::size_t k = *slowest_coherent_mode(spec);
    std::optional<double> t_low, t_high;
    for (double target : {0.05, 0.75}) {
        const EnrichedState e = enrich_overlap(spec, sys.basis, rho, k, 0, 1, target);
        in.target_mode = k;
        const CertificateRun run = certify(in, e.state, exact_transform(e.state, sys.basis).state);
        (target < 0.5 ? t_low : t_high) = run.certificate.crossing_time;
    }
    const double s = seconds_since(t0);
    bool ratio_ok = false;
    std::ostringstream os;
    os << "tail rate " << fmt("%.4f", rate) << " vs mode " << surviving << " " << fmt("%.4f", expected)
       << (rate_ok ? " ok" : " off") << "; crossings O=0.05: "
       << (t_low ? fmt("%.3f", *t_low) : std::string("none")) << ", O=0.75: "
       << (t_high ? fmt("%.3f", *t_high) : std::string("none"));
    if (t_low && t_high) {
        const double ratio = *t_high / *t_low;
        ratio_ok = ratio >= 0.35 && ratio <= 0.65;
        os << ", ratio " << fmt("%.3f", ratio);
    } else {
        os << " (slowest mode " << fmt("%.3f", spec.eigenvalue(2).real())
           << " is a real population mode the transform cannot remove)";
    }
    os << ", " << fmt("%.1f s", s);
    return {rate_ok && ratio_ok && s < 300.0, os.str()};
}

Outcome identities() {
    std::size_t count = 0;
    double worst6 = 0.0, worst7 = 0.0, worst_mono = 0.0, min_pi = kInfinity;
    const std::vector<ModelInstance> models{single_qubit(), tfim(2, 1.0, 0.5, 1.0), tfim(3, 1.0, 0.5, 0.5)};
    const auto times = grid(6.0, 61);
    std::uint64_t seed = 500;
    for (const auto& m : models) {
        const ModelSystem sys = build_system(m);
        const GeneratorSpectrum spec = decompose(sys);
        const int per_model = m.name == "single_qubit" ? 34 : 33;
        for (int r = 0; r < per_model; ++r, ++count) {
            const DensityMatrix rho = random_mixed_state(sys.basis.dim(), 1 + r % 4, ++seed);
            const ThermoTrajectory t = thermo_trajectory(evolve(sys, spec, rho, times), sys.basis, sys.beta());
            for (std::size_t i = 0; i < t.size(); ++i) {
                worst6 = std::max(worst6, std::abs(t.free_energy[i] - (t.relative[i] / t.beta + t.equilibrium_free_energy)));
                worst7 = std::max(worst7, std::abs(t.relative[i] - t.classical[i] - t.coherence[i]));
                if (i > 0) worst_mono = std::max(worst_mono, t.relative[i] - t.relative[i - 1]);
                min_pi = std::min(min_pi, t.spohn[i]);
            }
        }
    }
    std::ostringstream os;
    os << count << " trajectories: F identity " << fmt("%.1e", worst6) << ", D=P+C " << fmt("%.1e", worst7)
       << ", max D increase " << fmt("%.1e", worst_mono) << ", min Pi " << fmt("%.1e", min_pi);
    return {count == 100 && worst6 <= 1e-9 && worst7 <= 1e-9 && worst_mono <= 1e-12 && min_pi >= -1e-8, os.str()};
}

Outcome majorization() {
    const ModelSystem q = build_system(single_qubit());
    const ModelSystem t = build_system(tfim(3, 1.0, 0.5, 1.0));
    const MajorizationReport a = majorization_check(
        exact_transform(bloch_to_state(BlochVector{{0.276, 0.359, 0.303}}), q.basis).state, q.basis, q.beta(), 100, 1);
    const MajorizationReport b =
        majorization_check(exact_transform(random_mixed_state(8, 5, 11), t.basis).state, t.basis, t.beta(), 100, 2);
    const double excess = std::max(a.max_free_energy_excess, b.max_free_energy_excess);
    return {a.holds() && b.holds() && excess <= 1e-10,
            "max F(V rho' V^dag) - F(rho') = " + fmt("%.3e", excess) + " over 2 x 100 unitaries"};
}

Outcome metropolis() {
    const auto t0 = Clock::now();
    // swap search on populations
    const ModelSystem hot = build_system(tfim(5, 1.0, 1.0, 4.0));
    const GeneratorSpectrum hs = decompose(hot);
    const std::size_t kp = slowest_population_mode(hs, hot.basis);
    const auto modes = diagonal_left_modes(hs, hot.basis, {kp});
    const RealVector p = thermal_populations(hot.basis, Beta::from_temperature(1.0));
    int swap_ok = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        MetropolisConfig c;
        c.cooling_tau = 0.998;
        c.target_modes = {kp};
        c.max_total_iterations = 2 * 5300;
        c.seed = seed;
        c.record_trace = false;
        swap_ok += swap_metropolis(modes, p, c).converged;
    }

    // unitary search on the coherent pair
    const ModelSystem cold = build_system(tfim(5, 1.0, 1.0, 0.1));
    const GeneratorSpectrum cs = decompose(cold);
    const DensityMatrix rho = random_mixed_state(32, 1000, 7);
    int unitary_ok = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        MetropolisConfig c;
        c.target_modes = {2, 3};
        c.max_total_iterations = 2 * 60500;
        c.seed = seed;
        c.record_trace = false;
        unitary_ok += unitary_metropolis(cs, rho, c).converged;
    }
    const double s = seconds_since(t0);
    std::ostringstream os;
    os << "swap " << swap_ok << "/10 within 10600, unitary " << unitary_ok << "/10 within 121000, " << fmt("%.1f s", s);
    return {swap_ok >= 8 && unitary_ok >= 8 && s < 600.0, os.str()};
}

Outcome appendix_models() {
    // atom: complex gap, and the exact transform of |+> relaxes faster
    const ModelSystem atom = build_system(two_level_atom());
    const GeneratorSpectrum as = decompose(atom);
    Vector v(2);
    v << 1.0, 1.0;
    const DensityMatrix plus(Matrix(0.5 * v * v.adjoint()));
    CertificateInputs in;
    in.spectrum = &as;
    in.basis = &atom.basis;
    in.beta = atom.beta();
    in.times = grid(4000.0, 801);
    const CertificateRun run = certify(in, plus, exact_transform(plus, atom.basis).state);
    const bool atom_ok = as.gap_is_complex() && run.certificate.crossing_time.has_value() &&
                         run.certificate.rate_after < 1.5 * run.certificate.rate_before;

    // dot: the slowest mode reachable by physical (parity-even) states is real,
    // and Metropolis drives its overlap below threshold from the cold state
    const ModelSystem dot = build_system(quantum_dot());
    const GeneratorSpectrum ds = decompose(dot);
    const std::size_t k = leading_mode(dot, ds);
    const bool dot_real = std::abs(ds.eigenvalue(k).imag()) <= 1e-9;
    const ModelInstance cold_dot = quantum_dot(242.0, 1189.0, 1.0, 0.1);
    const DensityMatrix start = thermal_state(dot.basis, cold_dot.beta);
    MetropolisConfig c;
    c.target_modes = {k};
    c.threshold_eps = 2e-5;
    const UnitaryMetropolisResult r = unitary_metropolis(ds, start, c, true);
    const double overlap = mode_overlap(ds, k, r.state.matrix());

    std::ostringstream os;
    os << "atom lambda_2 " << fmt("%.5f", as.eigenvalue(2).real()) << fmt("%+.3fi", as.eigenvalue(2).imag())
       << ", rates " << fmt("%.5f", run.certificate.rate_before) << " -> " << fmt("%.5f", run.certificate.rate_after)
       << ", t_m " << (run.certificate.crossing_time ? fmt("%.1f", *run.certificate.crossing_time) : std::string("none"))
       << "; dot leading physical mode " << k << " " << fmt("%.4f", ds.eigenvalue(k).real())
       << fmt("%+.1ei", ds.eigenvalue(k).imag()) << ", overlap " << fmt("%.1e", overlap) << " after "
       << r.iterations << " iterations";
    return {atom_ok && dot_real && overlap < 2e-5, os.str()};
}

Outcome performance() {
    const auto t0 = Clock::now();
    const ModelSystem sys = build_system(tfim());
    const GeneratorSpectrum spec = decompose(sys);
    const double s = seconds_since(t0);
    const bool no_dense = !sys.dense && sys.block && !sys.block->dense;
    return {s < 60.0 && no_dense && spec.size() == 1024,
            "L=5 build + decomposition " + fmt("%.2f s", s) + (no_dense ? ", no dense generator" : ", dense generator built")};
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<Outcome()>>> checks{
        {1, fixed_point},     {2, block_dense}, {3, spectral_direct}, {4, qubit_transform},
        {5, tfim_crossings},  {6, identities},  {7, majorization},    {8, metropolis},
        {9, appendix_models}, {10, performance}};
    int failures = 0;
    for (const auto& [n, check] : checks) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
