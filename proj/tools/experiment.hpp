#pragma once

// Config-driven experiment runner behind the qmpemba command line tool.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>
#include <qmpemba/qmpemba.hpp>

namespace qmpemba::cli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitNotConverged = 4 };

// Schema violation; the message starts with the offending key path.
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct ModelConfig {
    std::string name;
    nlohmann::json params = nlohmann::json::object();
    // bath; exactly one of temperature / beta / temperature_kelvin may be set
    std::optional<double> temperature;
    std::optional<double> beta;
    std::optional<double> temperature_kelvin;
    std::optional<double> gamma;
    std::optional<Statistics> statistics;
};

struct StateConfig {
    std::string type;  // bloch | thermal | random_mixed | pure_plus | file | mode_enriched
    std::array<double, 3> bloch{0, 0, 0};
    std::optional<double> temperature;
    std::optional<double> temperature_kelvin;
    std::size_t samples = 1000;
    std::uint64_t seed = 1;
    std::string path;
    // mode_enriched
    std::shared_ptr<StateConfig> base;
    std::optional<std::size_t> mode;  // default: slowest coherent mode
    std::array<std::size_t, 2> levels{0, 1};
    double target_overlap = 0.0;
};

struct TransformConfig {
    std::string type = "none";  // none | exact | unitary_metropolis | swap_metropolis
    MetropolisConfig metropolis;
    bool auto_modes = true;
};

struct TimeGrid {
    double t_max = 10.0;
    std::size_t n_points = 201;
    bool log_spacing = false;
    std::optional<double> t_min;

    [[nodiscard]] std::vector<double> times() const;
};

struct OutputConfig {
    std::filesystem::path directory = "out";
    std::vector<std::string> observables;  // empty: all columns
    bool state_dumps = false;
    bool gnuplot = false;
    bool generator_dump = false;
};

struct ExperimentConfig {
    std::string name = "run";
    ModelConfig model;
    StateConfig initial_state;
    TransformConfig transform;
    TimeGrid time_grid;
    OutputConfig output;
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  // --out, then QMPEMBA_OUT_DIR, then the config
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::size_t chains = 1;
    bool dense_fallback = false;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

ModelInstance make_model(const ModelConfig& m);
DensityMatrix make_state(const StateConfig& s, const ModelSystem& sys, const GeneratorSpectrum& spec);

struct TransformOutcome {
    DensityMatrix state;
    std::optional<double> target_overlap;
    std::vector<std::size_t> target_modes;
    bool converged = true;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    OptimizationTrace trace;
};

TransformOutcome apply_transform(const TransformConfig& t, const ModelSystem& sys, const GeneratorSpectrum& spec,
                                 const DensityMatrix& rho, const RunOptions& opts);

int cmd_spectrum(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);
int cmd_evolve(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);
int cmd_mpemba(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);
int cmd_metropolis(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);

// Loads the config, runs the subcommand and maps failures to exit codes.
int run(const std::string& command, const std::filesystem::path& config, const RunOptions& opts, std::ostream& log,
        std::ostream& err);

}  // namespace qmpemba::cli
