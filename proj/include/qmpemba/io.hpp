#pragma once

// Plain-text exports: trajectory and spectrum tables, generator dumps.
// Floats are written with 17 significant digits so files round-trip exactly.

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "thermo.hpp"

namespace qmpemba {

inline std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline const std::vector<std::string>& trajectory_columns() {
    static const std::vector<std::string> cols{"t", "F_neq", "D", "P", "C", "L1", "T1", "Pi"};
    return cols;
}

// Columns t,F_neq,D,P,C,L1,T1,Pi; Pi is omitted when the grid is too short
// for a derivative. `keep` selects a subset by name (t is always written).
inline void write_trajectory_csv(std::ostream& os, const ThermoTrajectory& traj,
                                 const std::vector<std::string>& keep = {}) {
    const bool with_pi = !traj.spohn.empty();
    auto wanted = [&](const std::string& name) {
        if (name == "t") return true;
        if (name == "Pi" && !with_pi) return false;
        if (keep.empty()) return true;
        for (const auto& k : keep)
            if (k == name) return true;
        return false;
    };
    const std::vector<const std::vector<double>*> data{&traj.times, &traj.free_energy, &traj.relative,
                                                       &traj.classical, &traj.coherence, &traj.l1,
                                                       &traj.trace_dist, &traj.spohn};
    const auto& cols = trajectory_columns();
    bool first = true;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (!wanted(cols[c])) continue;
        os << (first ? "" : ",") << cols[c];
        first = false;
    }
    os << '\n';
    for (std::size_t i = 0; i < traj.size(); ++i) {
        first = true;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (!wanted(cols[c])) continue;
            os << (first ? "" : ",") << format_real((*data[c])[i]);
            first = false;
        }
        os << '\n';
    }
}

// k,re,im,gap with gap = "complex" / "real" on the row of lambda_2, "-" elsewhere.
inline void write_spectrum_table(std::ostream& os, const GeneratorSpectrum& spec) {
    os << "k,re,im,gap\n";
    for (std::size_t k = 1; k <= spec.size(); ++k) {
        const cd v = spec.eigenvalue(k);
        std::string flag = "-";
        if (k == 2) flag = spec.gap_is_complex() ? "complex" : "real";
        os << k << ',' << format_real(v.real()) << ',' << format_real(v.imag()) << ',' << flag << '\n';
    }
}

// Text dump of the block generator. The header records the conventions needed
// to rebuild the full superoperator.
inline void write_generator(std::ostream& os, const DaviesGenerator& g) {
    const auto d = g.pop_block.rows();
    os << "# qmpemba davies generator\n";
    os << "# vectorization: row-major, vec(|n><m|) = n*d + m, energy eigenbasis, ascending energies\n";
    os << "# populations: d x d real rate matrix acting on (p_0..p_{d-1})\n";
    os << "# coherences: n,m,re,im for every n != m, eigenvalue of |n><m|\n";
    os << "dim " << d << '\n';
    os << "energies";
    for (double e : g.basis.energies) os << ' ' << format_real(e);
    os << "\npopulation_block\n";
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) os << (j ? " " : "") << format_real(g.pop_block(i, j));
        os << '\n';
    }
    os << "coherence_diagonal\n";
    for (const CoherenceEntry& e : g.coh_diagonal)
        os << e.row << ' ' << e.col << ' ' << format_real(e.value.real()) << ' ' << format_real(e.value.imag()) << '\n';
}

// Minimal gnuplot script plotting every column of a CSV against the first.
inline void write_gnuplot_script(std::ostream& os, const std::string& csv_name, const std::vector<std::string>& cols,
                                 bool log_y = false) {
    os << "set datafile separator ','\n";
    os << "set key autotitle columnhead\n";
    if (log_y) os << "set logscale y\n";
    os << "plot ";
    for (std::size_t c = 1; c < cols.size(); ++c)
        os << (c > 1 ? ", " : "") << "'" << csv_name << "' using 1:" << c + 1 << " with lines";
    os << '\n';
}

}  // namespace qmpemba
