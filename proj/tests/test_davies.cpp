#include "support.hpp"

namespace qmpemba {
namespace {

using test::max_abs;

struct Qubit {
    SpectralBasis basis = diagonalize(HermitianOperator(Matrix(2.5 * pauli_z())));
    BathSpec bath{Beta::from_temperature(10.0), Statistics::Bose, 1.0};
};

TEST(JumpMatrix, QubitAmplitudes) {
    Qubit q;
    const JumpMatrix j = build_jump_matrix(q.basis, q.bath);
    const double n = test::qubit_bose();
    EXPECT_NEAR(n, 1.5415, 1e-4);
    EXPECT_NEAR(j.amplitudes(0, 1), std::sqrt(1.0 + n), 1e-12);  // decay into the ground level
    EXPECT_NEAR(j.amplitudes(1, 0), std::sqrt(n), 1e-12);
    EXPECT_NEAR(j.amplitudes(0, 1), 1.5942, 1e-4);
    EXPECT_NEAR(j.amplitudes(1, 0), 1.2416, 1e-4);
    EXPECT_EQ(j.amplitudes(0, 0), 0.0);
}

TEST(JumpMatrix, GammaSitsOutsideTheRoot) {
    Qubit q;
    q.bath.gamma = 3.0;
    const JumpMatrix j = build_jump_matrix(q.basis, q.bath);
    EXPECT_NEAR(j.amplitudes(0, 1), 3.0 * std::sqrt(1.0 + test::qubit_bose()), 1e-12);
}

TEST(JumpMatrix, ZeroTemperatureIsPureDecay) {
    Qubit q;
    q.bath.beta = Beta::infinite();
    const JumpMatrix j = build_jump_matrix(q.basis, q.bath);
    EXPECT_EQ(j.amplitudes(1, 0), 0.0);
    EXPECT_NEAR(j.amplitudes(0, 1), 1.0, 1e-15);
}

TEST(JumpMatrix, TwoQubitLayout) {
    const SpectralBasis b = diagonalize(HermitianOperator(tfim_hamiltonian(2, 1.0, 0.5)));
    const JumpMatrix j = build_jump_matrix(b, BathSpec{Beta::finite(1.0), Statistics::Bose, 1.0});
    EXPECT_EQ(j.amplitudes.rows(), 4);
    int nonzero = 0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            if (r == c) EXPECT_EQ(j.amplitudes(r, c), 0.0);
            if (j.amplitudes(r, c) > 0.0) ++nonzero;
        }
    EXPECT_EQ(nonzero, 12);
}

TEST(JumpMatrix, RefusesDegenerateSpectrum) {
    const SpectralBasis b = diagonalize(HermitianOperator(tfim_hamiltonian(2, 1.0, 0.0)));
    EXPECT_THROW(build_jump_matrix(b, BathSpec{}), DegenerateSpectrumError);
    EXPECT_NO_THROW(build_jump_matrix(b, BathSpec{}, DegeneracyPolicy::SkipDegeneratePairs));
}

TEST(DenseGenerator, QubitSpectrumAndFixedPoint) {
    Qubit q;
    const DaviesGenerator g = build_davies_generator(q.basis, q.bath, true);
    const Matrix tau = thermal_state(q.basis, q.bath.beta).matrix();
    EXPECT_LE(fixed_point_residual(*g.dense, tau), 1e-10);
    const Vector id = vectorize(Matrix::Identity(2, 2));
    EXPECT_LT((g.dense->adjoint() * id).cwiseAbs().maxCoeff(), 1e-10);

    const double gt = test::qubit_gamma_total();
    EXPECT_NEAR(gt, 4.083, 1e-3);
    const std::vector<cd> expected{0.0, -gt, cd(-gt / 2, 5.0), cd(-gt / 2, -5.0)};
    EXPECT_LT(test::multiset_distance(test::dense_eigenvalues(*g.dense), expected), 1e-10);
}

TEST(PopulationBlock, QubitRateMatrix) {
    Qubit q;
    const DaviesGenerator g = build_davies_generator(q.basis, q.bath);
    const double n = test::qubit_bose();
    RealMatrix expected(2, 2);
    expected << -n, 1.0 + n, n, -(1.0 + n);
    EXPECT_LT((g.pop_block - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(g.pop_block.colwise().sum().cwiseAbs().maxCoeff(), 1e-14);
    const RealVector p = thermal_populations(q.basis, q.bath.beta);
    EXPECT_LT((g.pop_block * p).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CoherenceDiagonal, QubitEntries) {
    Qubit q;
    const DaviesGenerator g = build_davies_generator(q.basis, q.bath);
    ASSERT_EQ(g.coh_diagonal.size(), 2u);
    const double gt = test::qubit_gamma_total();
    for (const auto& e : g.coh_diagonal) {
        EXPECT_NEAR(e.value.real(), -gt / 2, 1e-12);
        EXPECT_NEAR(std::abs(e.value.imag()), 5.0, 1e-12);
        EXPECT_EQ(e.position, e.row * 2 + e.col);
    }
    EXPECT_NEAR(std::abs(g.coh_diagonal[0].value - std::conj(g.coh_diagonal[1].value)), 0.0, 1e-14);
}

class TfimInvariants : public ::testing::TestWithParam<std::size_t> {};

TEST_P(TfimInvariants, BlockStructure) {
    const std::size_t sites = GetParam();
    const SpectralBasis b = diagonalize(HermitianOperator(tfim_hamiltonian(sites, 1.0, 0.5)));
    const BathSpec bath{Beta::finite(2.0), Statistics::Bose, 1.0};
    const DaviesGenerator g = build_davies_generator(b, bath, true);
    const auto d = static_cast<Eigen::Index>(b.dim());

    EXPECT_LT(g.pop_block.colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    for (const auto& e : g.coh_diagonal) EXPECT_LE(e.value.real(), 0.0);
    // (n, m) and (m, n) are conjugate
    std::map<std::pair<std::size_t, std::size_t>, cd> by_pair;
    for (const auto& e : g.coh_diagonal) by_pair[{e.row, e.col}] = e.value;
    for (const auto& [key, v] : by_pair) EXPECT_LT(std::abs(v - std::conj(by_pair.at({key.second, key.first}))), 1e-12);

    const Matrix tau = thermal_state(b, bath.beta).matrix();
    EXPECT_LE(fixed_point_residual(*g.dense, tau), 1e-10);
    EXPECT_LE(verify_detailed_balance(*g.dense, b.hamiltonian(), tau), 1e-9);
    EXPECT_LT(test::multiset_distance(test::block_eigenvalues(g), test::dense_eigenvalues(*g.dense)), 1e-8);
    EXPECT_EQ(g.dense->rows(), d * d);
}

INSTANTIATE_TEST_SUITE_P(Sites, TfimInvariants, ::testing::Values(2u, 3u));

TEST(DetailedBalance, CorruptedUpwardRateIsDetected) {
    Qubit q;
    JumpMatrix j = build_jump_matrix(q.basis, q.bath);
    j.amplitudes(1, 0) *= std::sqrt(2.0);  // w_up doubled
    const Matrix g = build_dense_generator(q.basis, q.basis.hamiltonian(), j);
    const Matrix tau = thermal_state(q.basis, q.bath.beta).matrix();
    EXPECT_GT(verify_detailed_balance(g, q.basis.hamiltonian(), tau), 1e-3);
}

TEST(DetailedBalance, InfiniteTemperature) {
    Qubit q;
    q.bath = BathSpec{Beta::finite(0.0), Statistics::Fermi, 1.0};
    const JumpMatrix j = build_jump_matrix(q.basis, q.bath);
    EXPECT_NEAR(j.amplitudes(0, 1), j.amplitudes(1, 0), 1e-15);
    const Matrix g = build_dense_generator(q.basis, q.basis.hamiltonian(), j);
    EXPECT_LE(verify_detailed_balance(g, q.basis.hamiltonian(), 0.5 * Matrix::Identity(2, 2)), 1e-9);
    EXPECT_THROW(build_jump_matrix(q.basis, BathSpec{Beta::finite(0.0), Statistics::Bose, 1.0}), ValidationError);
}

TEST(Vectorization, RowMajorConvention) {
    Matrix m(2, 2);
    m << 1, 2, 3, 4;
    const Vector v = vectorize(m);
    EXPECT_EQ(v(1), cd(2.0));  // |0><1| sits at 0*d + 1
    EXPECT_EQ(v(2), cd(3.0));
    EXPECT_EQ(max_abs(unvectorize(v, 2) - m), 0.0);
}

TEST(LindbladDense, MatchesGeneratorForQubit) {
    Qubit q;
    const JumpMatrix j = build_jump_matrix(q.basis, q.bath);
    const std::vector<Matrix> ops = jump_operators(q.basis, j);
    const Matrix a = lindblad_dense(q.basis.hamiltonian(), ops);
    const Matrix b = build_dense_generator(q.basis, q.basis.hamiltonian(), j);
    EXPECT_LT(max_abs(a - b), 1e-12);
}

}  // namespace
}  // namespace qmpemba
