#include "experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace qmpemba::cli {

using nlohmann::json;

namespace {

// Object reader that remembers which keys were consumed so leftovers can be
// reported as unknown.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    std::optional<T> opt(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(sub(key) + ": wrong type");
        }
    }

    template <class T>
    T req(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(sub(key) + ": required key missing");
        return *opt<T>(key);
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError(sub(key) + ": unknown key");
    }

    [[nodiscard]] std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[nodiscard]] std::string where() const { return path_.empty() ? "<root>" : path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void check(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path + ": " + what);
}

StateConfig parse_state(const json& j, const std::string& path) {
    Node n(j, path);
    StateConfig s;
    s.type = n.req<std::string>("type");
    if (s.type == "bloch") {
        const auto r = n.req<std::vector<double>>("r");
        check(r.size() == 3, n.sub("r"), "expected three components");
        s.bloch = {r[0], r[1], r[2]};
    } else if (s.type == "thermal") {
        s.temperature = n.opt<double>("T");
        s.temperature_kelvin = n.opt<double>("T_kelvin");
        check(s.temperature.has_value() != s.temperature_kelvin.has_value(), path,
              "thermal state needs exactly one of T, T_kelvin");
    } else if (s.type == "random_mixed") {
        s.samples = n.opt<std::size_t>("n_samples").value_or(1000);
        s.seed = n.opt<std::uint64_t>("seed").value_or(1);
        check(s.samples >= 1, n.sub("n_samples"), "must be positive");
    } else if (s.type == "pure_plus") {
    } else if (s.type == "file") {
        s.path = n.req<std::string>("path");
    } else if (s.type == "mode_enriched") {
        const json* base = n.child("base");
        check(base != nullptr, n.sub("base"), "required key missing");
        s.base = std::make_shared<StateConfig>(parse_state(*base, n.sub("base")));
        s.mode = n.opt<std::size_t>("mode");
        if (auto lv = n.opt<std::vector<std::size_t>>("levels")) {
            check(lv->size() == 2, n.sub("levels"), "expected two energy levels");
            s.levels = {(*lv)[0], (*lv)[1]};
        }
        s.target_overlap = n.req<double>("target_overlap");
    } else {
        throw ConfigError(n.sub("type") + ": unknown initial state type '" + s.type + "'");
    }
    n.finish();
    return s;
}

MetropolisConfig parse_metropolis(const json& j, const std::string& path, bool& auto_modes) {
    Node n(j, path);
    MetropolisConfig c;
    if (auto v = n.opt<double>("cooling_tau")) c.cooling_tau = *v;
    if (auto v = n.opt<double>("threshold_eps")) c.threshold_eps = *v;
    if (auto v = n.opt<std::size_t>("nano_n")) c.nano_n = *v;
    if (auto v = n.opt<std::size_t>("micro_m")) c.micro_m = *v;
    if (auto v = n.opt<std::size_t>("macro_M")) c.macro_M = *v;
    if (auto v = n.opt<std::uint64_t>("seed")) c.seed = *v;
    if (auto v = n.opt<std::size_t>("max_total_iterations")) c.max_total_iterations = *v;
    if (auto v = n.opt<bool>("record_trace")) c.record_trace = *v;
    if (const json* modes = n.child("target_modes")) {
        if (modes->is_string()) {
            check(modes->get<std::string>() == "auto", n.sub("target_modes"), "expected \"auto\" or a list");
        } else {
            try {
                c.target_modes = modes->get<std::vector<std::size_t>>();
            } catch (const json::exception&) {
                throw ConfigError(n.sub("target_modes") + ": wrong type");
            }
            auto_modes = false;
        }
    }
    n.finish();
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return c;
}

Statistics parse_statistics(const std::string& s, const std::string& path) {
    if (s == "bose") return Statistics::Bose;
    if (s == "fermi") return Statistics::Fermi;
    throw ConfigError(path + ": expected \"bose\" or \"fermi\"");
}

double param(const json& params, const char* key, double fallback) {
    return params.contains(key) ? params.at(key).get<double>() : fallback;
}

void resolve_paths(StateConfig& s, const std::filesystem::path& dir) {
    if (s.type == "file" && std::filesystem::path(s.path).is_relative()) s.path = (dir / s.path).string();
    if (s.base) resolve_paths(*s.base, dir);
}

void override_seed(StateConfig& s, std::uint64_t seed) {
    if (s.type == "random_mixed") s.seed = seed;
    if (s.base) override_seed(*s.base, seed);
}

std::filesystem::path output_dir(const ExperimentConfig& cfg, const RunOptions& opts) {
    std::filesystem::path dir = cfg.output.directory;
    if (const char* env = std::getenv("QMPEMBA_OUT_DIR"); env && *env) dir = env;
    if (opts.out_dir) dir = *opts.out_dir;
    std::filesystem::create_directories(dir);
    return dir;
}

std::ofstream open_output(const std::filesystem::path& dir, const std::string& file) {
    std::ofstream os(dir / file);
    if (!os) throw std::runtime_error("cannot write " + (dir / file).string());
    return os;
}

ExperimentConfig effective(ExperimentConfig cfg, const RunOptions& opts) {
    if (opts.seed) {
        override_seed(cfg.initial_state, *opts.seed);
        cfg.transform.metropolis.seed = *opts.seed;
    }
    return cfg;
}

struct Prepared {
    ModelSystem sys;
    GeneratorSpectrum spec;
};

Prepared prepare(const ExperimentConfig& cfg, const RunOptions& opts) {
    BuildOptions build;
    build.dense_fallback = opts.dense_fallback;
    ModelSystem sys = build_system(make_model(cfg.model), build);
    GeneratorSpectrum spec = decompose(sys);
    return {std::move(sys), std::move(spec)};
}

void write_trajectory(const std::filesystem::path& dir, const std::string& stem, const ThermoTrajectory& traj,
                      const OutputConfig& out) {
    std::ofstream os = open_output(dir, stem + ".csv");
    write_trajectory_csv(os, traj, out.observables);
    if (!out.gnuplot) return;
    std::vector<std::string> cols{"t"};
    for (const auto& c : trajectory_columns()) {
        if (c == "t" || (c == "Pi" && traj.spohn.empty())) continue;
        if (out.observables.empty() || std::find(out.observables.begin(), out.observables.end(), c) !=
                                           out.observables.end())
            cols.push_back(c);
    }
    std::ofstream gp = open_output(dir, stem + ".gp");
    write_gnuplot_script(gp, stem + ".csv", cols);
}

void write_states(const std::filesystem::path& dir, const std::string& stem, const EvolutionGrid& grid) {
    std::ofstream os = open_output(dir, stem + "_states.csv");
    os << "t,i,j,re,im\n";
    for (std::size_t s = 0; s < grid.states.size(); ++s) {
        const Matrix& m = grid.states[s].matrix();
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                os << format_real(grid.times[s]) << ',' << i << ',' << j << ',' << format_real(m(i, j).real()) << ','
                   << format_real(m(i, j).imag()) << '\n';
    }
}

std::vector<std::size_t> auto_modes(const TransformConfig& t, const ModelSystem& sys, const GeneratorSpectrum& spec) {
    if (t.type == "swap_metropolis") return {slowest_population_mode(spec, sys.basis)};
    const std::size_t k = leading_mode(sys, spec);
    std::vector<std::size_t> modes{k};
    const cd v = spec.eigenvalue(k);
    const double tol = detail::eigenvalue_tolerance(spec.eigenvalues());
    if (std::abs(v.imag()) > tol && k + 1 <= spec.size() && std::abs(spec.eigenvalue(k + 1) - std::conj(v)) <= tol)
        modes.push_back(k + 1);
    return modes;
}

}  // namespace

std::vector<double> TimeGrid::times() const {
    std::vector<double> out;
    if (n_points == 1) return {0.0};
    if (!log_spacing) {
        for (std::size_t i = 0; i < n_points; ++i)
            out.push_back(t_max * static_cast<double>(i) / static_cast<double>(n_points - 1));
        return out;
    }
    // t = 0 followed by log-spaced points from t_min to t_max
    const double lo = std::log(t_min.value_or(1e-4 * t_max));
    const double hi = std::log(t_max);
    out.push_back(0.0);
    for (std::size_t i = 0; i + 1 < n_points; ++i)
        out.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_points - 2)));
    return out;
}

ExperimentConfig parse_config(const json& j) {
    Node root(j, "");
    ExperimentConfig cfg;
    if (auto name = root.opt<std::string>("name")) {
        check(!name->empty() && name->find_first_of("/\\") == std::string::npos, "name",
              "must be a plain file stem");
        cfg.name = *name;
    }

    const json* model = root.child("model");
    check(model != nullptr, "model", "required key missing");
    {
        Node n(*model, "model");
        cfg.model.name = n.req<std::string>("name");
        if (const json* p = n.child("params")) {
            check(p->is_object(), "model.params", "expected an object");
            cfg.model.params = *p;
        }
        n.finish();
    }
    if (const json* bath = root.child("bath")) {
        Node n(*bath, "bath");
        cfg.model.temperature = n.opt<double>("T");
        cfg.model.beta = n.opt<double>("beta");
        cfg.model.temperature_kelvin = n.opt<double>("T_kelvin");
        cfg.model.gamma = n.opt<double>("gamma");
        if (auto s = n.opt<std::string>("statistics")) cfg.model.statistics = parse_statistics(*s, "bath.statistics");
        const int set = cfg.model.temperature.has_value() + cfg.model.beta.has_value() +
                        cfg.model.temperature_kelvin.has_value();
        check(set <= 1, "bath", "give at most one of T, beta, T_kelvin");
        if (cfg.model.gamma) check(*cfg.model.gamma > 0.0, "bath.gamma", "must be positive");
        n.finish();
    }

    if (const json* st = root.child("initial_state")) cfg.initial_state = parse_state(*st, "initial_state");
    else cfg.initial_state.type = "thermal_default";

    if (const json* tr = root.child("transform")) {
        Node n(*tr, "transform");
        cfg.transform.type = n.req<std::string>("type");
        const std::set<std::string> kinds{"none", "exact", "unitary_metropolis", "swap_metropolis"};
        check(kinds.count(cfg.transform.type) > 0, "transform.type", "unknown transform '" + cfg.transform.type + "'");
        if (const json* m = n.child("metropolis"))
            cfg.transform.metropolis = parse_metropolis(*m, "transform.metropolis", cfg.transform.auto_modes);
        n.finish();
    }

    if (const json* tg = root.child("time_grid")) {
        Node n(*tg, "time_grid");
        cfg.time_grid.t_max = n.req<double>("t_max");
        cfg.time_grid.n_points = n.req<std::size_t>("n_points");
        if (auto s = n.opt<std::string>("spacing")) {
            check(*s == "linear" || *s == "log", "time_grid.spacing", "expected \"linear\" or \"log\"");
            cfg.time_grid.log_spacing = *s == "log";
        }
        cfg.time_grid.t_min = n.opt<double>("t_min");
        check(cfg.time_grid.n_points >= 1, "time_grid.n_points", "must be positive");
        check(cfg.time_grid.t_max > 0.0 || cfg.time_grid.n_points == 1, "time_grid.t_max", "must be positive");
        if (cfg.time_grid.log_spacing) {
            check(cfg.time_grid.n_points >= 3, "time_grid.n_points", "log spacing needs at least 3 points");
            if (cfg.time_grid.t_min)
                check(*cfg.time_grid.t_min > 0.0 && *cfg.time_grid.t_min < cfg.time_grid.t_max, "time_grid.t_min",
                      "must lie in (0, t_max)");
        }
        n.finish();
    }

    if (const json* out = root.child("output")) {
        Node n(*out, "output");
        if (auto d = n.opt<std::string>("directory")) cfg.output.directory = *d;
        if (auto obs = n.opt<std::vector<std::string>>("observables")) {
            const auto& cols = trajectory_columns();
            for (const auto& o : *obs)
                check(std::find(cols.begin(), cols.end(), o) != cols.end(), "output.observables",
                      "unknown observable '" + o + "'");
            cfg.output.observables = *obs;
        }
        cfg.output.state_dumps = n.opt<bool>("state_dumps").value_or(false);
        cfg.output.gnuplot = n.opt<bool>("gnuplot").value_or(false);
        cfg.output.generator_dump = n.opt<bool>("generator_dump").value_or(false);
        n.finish();
    }
    root.finish();

    // model parameters are checked against the model's own key set
    static const std::map<std::string, std::set<std::string>> keys{
        {"single_qubit", {"omega"}},
        {"tfim", {"L", "J", "h"}},
        {"two_level_atom", {"epsilon"}},
        {"quantum_dot", {"epsilon", "E_c", "occupation"}}};
    const auto it = keys.find(cfg.model.name);
    check(it != keys.end(), "model.name", "unknown model '" + cfg.model.name + "'");
    for (const auto& [k, v] : cfg.model.params.items()) {
        check(it->second.count(k) > 0, "model.params." + k, "unknown key");
        if (k == "occupation") {
            check(v.is_string(), "model.params.occupation", "wrong type");
        } else {
            check(v.is_number(), "model.params." + k, "wrong type");
        }
    }
    const bool explicit_model = cfg.model.name == "two_level_atom" || cfg.model.name == "quantum_dot";
    if (explicit_model) {
        check(!cfg.model.statistics, "bath.statistics", "fixed by the model");
        check(!cfg.model.beta && !cfg.model.temperature, "bath", "this model takes its temperature as T_kelvin");
    } else {
        check(!cfg.model.temperature_kelvin, "bath.T_kelvin", "only the atom and dot models use kelvin");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    ExperimentConfig cfg = parse_config(j);
    resolve_paths(cfg.initial_state, path.parent_path());
    return cfg;
}

ModelInstance make_model(const ModelConfig& m) {
    const json& p = m.params;
    std::optional<ModelInstance> model;
    try {
        if (m.name == "single_qubit" || m.name == "tfim") {
            const double t_default = m.name == "tfim" ? 0.1 : 10.0;
            double temperature = m.temperature.value_or(t_default);
            if (m.beta) {
                check(*m.beta >= 0.0, "bath.beta", "must be nonnegative");
                temperature = std::isinf(*m.beta) ? 0.0 : (*m.beta == 0.0 ? kInfinity : 1.0 / *m.beta);
            }
            const double gamma = m.gamma.value_or(1.0);
            if (m.name == "single_qubit") {
                model = single_qubit(param(p, "omega", 5.0), temperature, gamma);
            } else {
                const double l = param(p, "L", 5.0);
                check(l == std::floor(l) && l >= 2 && l <= 6, "model.params.L", "must be an integer in [2, 6]");
                model = tfim(static_cast<std::size_t>(l), param(p, "J", 1.0), param(p, "h", 0.5), temperature, gamma);
            }
            if (m.statistics) std::get<BathSpec>(model->dissipators).statistics = *m.statistics;
        } else if (m.name == "two_level_atom") {
            model = two_level_atom(param(p, "epsilon", 2.0 * kPi * 4.0), m.gamma.value_or(2.0 * kPi * 1.41e-3),
                                   m.temperature_kelvin.value_or(0.1));
        } else if (m.name == "quantum_dot") {
            DotOccupation occ = DotOccupation::TransitionResolved;
            if (p.contains("occupation")) {
                const auto s = p.at("occupation").get<std::string>();
                check(s == "transition_resolved" || s == "single", "model.params.occupation",
                      "expected \"transition_resolved\" or \"single\"");
                if (s == "single") occ = DotOccupation::Single;
            }
            model = quantum_dot(param(p, "epsilon", 242.0), param(p, "E_c", 1189.0), m.gamma.value_or(1.0),
                                m.temperature_kelvin.value_or(2.0), occ);
        } else {
            throw ConfigError("model.name: unknown model '" + m.name + "'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    return *model;
}

DensityMatrix make_state(const StateConfig& s, const ModelSystem& sys, const GeneratorSpectrum& spec) {
    const std::size_t d = sys.basis.dim();
    if (s.type == "thermal_default") return thermal_state(sys.basis, sys.beta());
    if (s.type == "bloch") {
        check(d == 2, "initial_state", "a Bloch vector needs a two-level model");
        return bloch_to_state(BlochVector{s.bloch});
    }
    if (s.type == "thermal") {
        const double t = s.temperature ? *s.temperature : *s.temperature_kelvin * kKelvinToGHz;
        return thermal_state(sys.basis, Beta::from_temperature(t));
    }
    if (s.type == "random_mixed") return random_mixed_state(d, s.samples, s.seed);
    if (s.type == "pure_plus") {
        const Vector psi = Vector::Constant(static_cast<Eigen::Index>(d), 1.0 / std::sqrt(static_cast<double>(d)));
        return DensityMatrix(psi * psi.adjoint());
    }
    if (s.type == "file") {
        std::ifstream is(s.path);
        check(static_cast<bool>(is), "initial_state.path", "cannot open " + s.path);
        json j;
        try {
            j = json::parse(is);
        } catch (const json::parse_error& e) {
            throw ConfigError("initial_state.path: " + std::string(e.what()));
        }
        Node n(j, "initial_state.path");
        const auto re = n.req<std::vector<std::vector<double>>>("real");
        const auto im = n.opt<std::vector<std::vector<double>>>("imag");
        n.finish();
        check(re.size() == d, "initial_state.path", "matrix dimension does not match the model");
        Matrix m = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            check(re[i].size() == d && (!im || ((*im).size() == d && (*im)[i].size() == d)), "initial_state.path",
                  "matrix must be square");
            for (std::size_t k = 0; k < d; ++k)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cd(re[i][k], im ? (*im)[i][k] : 0.0);
        }
        return DensityMatrix(std::move(m));
    }
    if (s.type == "mode_enriched") {
        const DensityMatrix base = make_state(*s.base, sys, spec);
        std::size_t k = 0;
        if (s.mode) {
            check(*s.mode >= 2 && *s.mode <= spec.size(), "initial_state.mode", "mode index out of range");
            k = *s.mode;
        } else {
            auto c = slowest_coherent_mode(spec);
            check(c.has_value(), "initial_state.mode", "the spectrum has no coherent mode");
            k = *c;
        }
        return enrich_overlap(spec, sys.basis, base, k, s.levels[0], s.levels[1], s.target_overlap).state;
    }
    throw ConfigError("initial_state.type: unknown type '" + s.type + "'");
}

TransformOutcome apply_transform(const TransformConfig& t, const ModelSystem& sys, const GeneratorSpectrum& spec,
                                 const DensityMatrix& rho, const RunOptions& opts) {
    TransformOutcome out{rho, std::nullopt, {}, true, 0, t.metropolis.seed, {}};
    if (t.type == "none") return out;
    if (t.type == "exact") {
        out.state = exact_transform(rho, sys.basis).state;
        return out;
    }
    MetropolisConfig base = t.metropolis;
    if (t.auto_modes) base.target_modes = auto_modes(t, sys, spec);
    for (std::size_t k : base.target_modes)
        check(k >= 1 && k <= spec.size(), "transform.metropolis.target_modes", "mode index out of range");
    out.target_modes = base.target_modes;

    const std::size_t chains = std::max<std::size_t>(1, opts.chains);
    struct Chain {
        DensityMatrix state;
        double cost = kInfinity;
        bool converged = false;
        std::size_t iterations = 0;
        OptimizationTrace trace;
    };
    std::vector<std::optional<Chain>> results(chains);

    if (t.type == "unitary_metropolis") {
        check(sys.model.qubits > 0 && (std::size_t(1) << sys.model.qubits) == sys.basis.dim(), "transform.type",
              "the unitary search needs a qubit register model");
        detail::parallel_for(chains, opts.threads, [&](std::size_t c) {
            MetropolisConfig cfg = base;
            cfg.seed = base.seed + c;
            auto r = unitary_metropolis(spec, rho, cfg, sys.model.fermionic);
            results[c] = Chain{r.state, r.cost, r.converged, r.iterations, std::move(r.trace)};
        });
    } else {
        const Matrix e = sys.basis.to_energy_frame(rho.matrix());
        const double off = (e - Matrix(e.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
        check(off <= 1e-12, "initial_state", "swap search needs a state diagonal in the energy basis");
        if (base.max_total_iterations == 0) base.max_total_iterations = base.nano_n * base.micro_m * base.macro_M;
        const auto modes = diagonal_left_modes(spec, sys.basis, base.target_modes);
        const RealVector p = energy_populations(rho.matrix(), sys.basis);
        detail::parallel_for(chains, opts.threads, [&](std::size_t c) {
            MetropolisConfig cfg = base;
            cfg.seed = base.seed + c;
            auto r = swap_metropolis(modes, p, cfg);
            DensityMatrix state(sys.basis.from_energy_frame(r.populations.cast<cd>().asDiagonal().toDenseMatrix()));
            results[c] = Chain{std::move(state), r.cost, r.converged, r.iterations, std::move(r.trace)};
        });
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < chains; ++c)
        if (results[c]->cost < results[best]->cost) best = c;
    Chain& winner = *results[best];
    out.state = winner.state;
    out.converged = winner.converged;
    out.iterations = winner.iterations;
    out.seed = base.seed + best;
    out.trace = std::move(winner.trace);
    out.target_overlap = mode_overlap(spec, out.target_modes.front(), out.state.matrix());
    return out;
}

int cmd_spectrum(const ExperimentConfig& raw, const RunOptions& opts, std::ostream& log) {
    const ExperimentConfig cfg = effective(raw, opts);
    const Prepared p = prepare(cfg, opts);
    const auto dir = output_dir(cfg, opts);
    {
        std::ofstream os = open_output(dir, cfg.name + "_spectrum.csv");
        write_spectrum_table(os, p.spec);
    }
    if (cfg.output.generator_dump && p.sys.block) {
        std::ofstream os = open_output(dir, cfg.name + "_generator.txt");
        write_generator(os, *p.sys.block);
    }
    const cd l2 = p.spec.eigenvalue(2);
    log << "modes: " << p.spec.size() << '\n';
    log << "lambda_2: " << format_real(l2.real()) << " " << format_real(l2.imag()) << "i\n";
    log << "gap: " << format_real(std::abs(l2.real())) << (p.spec.gap_is_complex() ? " (complex)" : " (real)") << '\n';
    if (p.sys.model.superselection) {
        const std::size_t k = leading_mode(p.sys, p.spec);
        const cd v = p.spec.eigenvalue(k);
        log << "leading physical mode: " << k << " (" << format_real(v.real()) << " " << format_real(v.imag())
            << "i)\n";
    }
    log << "wrote " << (dir / (cfg.name + "_spectrum.csv")).string() << '\n';
    return kExitOk;
}

int cmd_evolve(const ExperimentConfig& raw, const RunOptions& opts, std::ostream& log) {
    const ExperimentConfig cfg = effective(raw, opts);
    const Prepared p = prepare(cfg, opts);
    const auto times = cfg.time_grid.times();
    const DensityMatrix rho = make_state(cfg.initial_state, p.sys, p.spec);
    const auto dir = output_dir(cfg, opts);

    auto run_one = [&](const DensityMatrix& state, const std::string& stem) {
        const EvolutionGrid grid = evolve(p.sys, p.spec, state, times);
        const ThermoTrajectory traj = thermo_trajectory(grid, p.sys.basis, p.sys.beta());
        write_trajectory(dir, stem, traj, cfg.output);
        if (cfg.output.state_dumps) write_states(dir, stem, grid);
        log << "wrote " << (dir / (stem + ".csv")).string() << '\n';
    };
    run_one(rho, cfg.name + "_trajectory");
    if (cfg.transform.type == "none") return kExitOk;
    const TransformOutcome t = apply_transform(cfg.transform, p.sys, p.spec, rho, opts);
    run_one(t.state, cfg.name + "_transformed");
    if (!t.converged) {
        log << "optimizer did not converge\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

int cmd_mpemba(const ExperimentConfig& raw, const RunOptions& opts, std::ostream& log) {
    const ExperimentConfig cfg = effective(raw, opts);
    if (cfg.transform.type == "none") throw ConfigError("transform.type: the mpemba command needs a transform");
    const Prepared p = prepare(cfg, opts);
    const DensityMatrix rho = make_state(cfg.initial_state, p.sys, p.spec);
    const TransformOutcome t = apply_transform(cfg.transform, p.sys, p.spec, rho, opts);

    CertificateInputs in;
    in.spectrum = &p.spec;
    in.basis = &p.sys.basis;
    in.beta = p.sys.beta();
    in.times = cfg.time_grid.times();
    if (!t.target_modes.empty()) in.target_mode = t.target_modes.front();
    in.evolve = [&](const DensityMatrix& s, const std::vector<double>& ts) { return evolve(p.sys, p.spec, s, ts); };
    const CertificateRun run = certify(in, rho, t.state);

    const auto dir = output_dir(cfg, opts);
    const std::string report = format_certificate(run.certificate);
    {
        std::ofstream os = open_output(dir, cfg.name + "_certificate.txt");
        os << report;
        if (!t.target_modes.empty()) os << "optimizer_converged: " << (t.converged ? "yes" : "no") << '\n';
    }
    if (run.original.size() > 0) write_trajectory(dir, cfg.name + "_trajectory", run.original, cfg.output);
    if (run.transformed.size() > 0) write_trajectory(dir, cfg.name + "_transformed", run.transformed, cfg.output);
    log << report;
    if (!t.converged) {
        log << "optimizer did not converge\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

int cmd_metropolis(const ExperimentConfig& raw, const RunOptions& opts, std::ostream& log) {
    const ExperimentConfig cfg = effective(raw, opts);
    if (cfg.transform.type != "unitary_metropolis" && cfg.transform.type != "swap_metropolis")
        throw ConfigError("transform.type: the metropolis command needs unitary_metropolis or swap_metropolis");
    const Prepared p = prepare(cfg, opts);
    const DensityMatrix rho = make_state(cfg.initial_state, p.sys, p.spec);
    const TransformOutcome t = apply_transform(cfg.transform, p.sys, p.spec, rho, opts);
    const auto dir = output_dir(cfg, opts);
    {
        std::ofstream os = open_output(dir, cfg.name + "_trace.csv");
        write_trace_csv(os, t.trace);
    }
    log << "target modes:";
    for (std::size_t k : t.target_modes) log << ' ' << k;
    log << "\nseed: " << t.seed << "\niterations: " << t.iterations << '\n';
    log << "overlap: " << format_real(*t.target_overlap) << '\n';
    log << "converged: " << (t.converged ? "yes" : "no") << '\n';
    log << "wrote " << (dir / (cfg.name + "_trace.csv")).string() << '\n';
    return t.converged ? kExitOk : kExitNotConverged;
}

int run(const std::string& command, const std::filesystem::path& config, const RunOptions& opts, std::ostream& log,
        std::ostream& err) {
    try {
        const ExperimentConfig cfg = load_config(config);
        if (command == "spectrum") return cmd_spectrum(cfg, opts, log);
        if (command == "evolve") return cmd_evolve(cfg, opts, log);
        if (command == "mpemba") return cmd_mpemba(cfg, opts, log);
        if (command == "metropolis") return cmd_metropolis(cfg, opts, log);
        err << "unknown command '" << command << "'\n";
        return kExitConfig;
    } catch (const DegenerateSpectrumError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ValidationError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace qmpemba::cli
