#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopcert/certify.hpp"
#include "koopcert/dictionary.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/surrogate.hpp"

namespace koopcert {

// ---------------------------------------------------------------------------
// Statistics

struct WilsonInterval {
    double lower = 0.0;
    double upper = 1.0;
};

/// Wilson score interval for `successes` out of `n` (z = 1.96 gives 95%).
WilsonInterval wilson_interval(int successes, int n, double z = 1.96);

/// Median; +inf entries count as larger than any finite value.
double median(std::vector<double> values);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Cell cache: completed sweep cells keyed by a stable string, for --resume.

struct CellStore {
    std::map<std::string, nlohmann::json> completed;
    /// Called once per newly computed cell, serialized across threads.
    std::function<void(const std::string& key, const nlohmann::json& cell)> on_complete;
};

// ---------------------------------------------------------------------------
// Sweeps

struct Scenario {
    ControlAffineSystem system;
    StateDomain domain;
    Dictionary dictionary;
    Vec x0;
    double horizon = 1.0;
    double dt = 1e-3;
    int quadrature_order = 40;
    bool shared_samples = false;
};

struct SweepSpec {
    Scenario scenario;
    std::vector<int> m_values;
    int trials = 1;
    std::uint64_t master_seed = 0;
    std::vector<double> epsilons;

    /// m_values strictly increasing and >= 1, trials >= 1, epsilons > 0.
    void validate() const;
};

/// Sub-seed of a sweep cell; independent of thread count and of cell order.
std::uint64_t cell_seed(std::uint64_t master, int m, int trial);

struct ProbabilityEstimate {
    int m = 0;
    double epsilon = 0.0;
    int successes = 0;
    int n = 0;
    double p = 0.0;
    WilsonInterval ci;
};

struct GeneratorCell {
    int m = 0;
    int trial = 0;
    std::uint64_t seed = 0;
    std::vector<double> errors;  // ||L_V^{e_i} - L~_m^{e_i}||_F, i = 0..nc
    double max_error = 0.0;
    bool failed = false;
    std::string failure;
};

struct GeneratorSweepResult {
    std::vector<GeneratorCell> cells;                 // m-major, then trial
    std::vector<std::vector<double>> median_error;    // [control][m index]
    std::vector<double> median_max_error;             // [m index]
    std::vector<double> slope_per_control;
    double slope_max = 0.0;
    std::vector<ProbabilityEstimate> probabilities;   // P(max error <= eps), m-major
};

GeneratorSweepResult run_generator_sweep(const SweepSpec& spec, CellStore* store = nullptr);

struct TrajectoryCell {
    int m = 0;
    int trial = 0;
    std::uint64_t seed = 0;
    double max_generator_error = 0.0;  // max_t ||L_V^{u(t)} - L~^{u(t)}||_F
    double max_trajectory_error = 0.0; // max_t ||z(t) - z~(t)||_2
    std::vector<double> errors;        // ||z(t_k) - z~(t_k)||_2; inf after divergence
    bool failed = false;
};

struct TrajectorySweepResult {
    std::vector<double> times;
    std::vector<TrajectoryCell> cells;
    std::vector<double> median_max_error;             // [m index]
    std::vector<ProbabilityEstimate> probabilities;   // min over t of P(||z - z~|| <= eps)
    std::vector<double> rank_correlation;             // [m index], generator vs trajectory error
};

TrajectorySweepResult run_trajectory_sweep(const SweepSpec& spec, const ControlSignal& u,
                                           CellStore* store = nullptr);

/// How many samples to draw for a dictionary of size N.
struct MRule {
    enum class Kind { fixed, per_observable };
    Kind kind = Kind::per_observable;
    double value = 10.0;

    int m_for(int N) const;
};

struct FemSweepSpec {
    ControlAffineSystem system;
    Box box;
    std::vector<ScalarObservable> constraints;  // enrich the hat-function dictionary
    ScalarObservable observable;                // predicted quantity
    std::vector<double> mesh_sizes;
    MRule m_rule;
    int trials = 0;  // 0: quadrature-level fits only
    std::uint64_t master_seed = 0;
    Vec x0;
    ControlSignal control;
    double horizon = 1.0;
    double dt = 1e-3;
    int quadrature_order = 40;
    bool shared_samples = false;
};

struct FemCell {
    double mesh_size = 0.0;
    int trial = 0;
    std::uint64_t seed = 0;
    int N = 0;
    int m = 0;
    double error = 0.0;  // sup_t |h(x(t)) - h~(t)|
    bool failed = false;
};

struct FemLevel {
    double mesh_size = 0.0;
    int N = 0;
    int m = 0;
    double quadrature_error = 0.0;
    double median_sampled_error = 0.0;
    double projection_residual = 0.0;
};

struct FemSweepResult {
    std::vector<FemLevel> levels;
    std::vector<FemCell> cells;
    std::vector<double> reduction_factors;  // quadrature_error[i] / quadrature_error[i+1]
    std::optional<double> rate;             // slope of log error vs log mesh size
};

FemSweepResult run_fem_sweep(const FemSweepSpec& spec, CellStore* store = nullptr);

// ---------------------------------------------------------------------------
// Duffing comparison of the bilinear surrogate and eDMDc

struct DuffingBenchmarkSpec {
    int m = 100;
    int edmdc_m = 100;
    int degree = 5;
    int seeds = 20;
    std::uint64_t master_seed = 0;
    double horizon = 3.0;
    double dt = 1e-3;
    double segment_duration = 0.1;
    Box domain = symmetric_box(2, 2.0);
    Box controls = symmetric_box(1, 1.0);
    Vec x0 = Vec::Ones(2);
    EdmdcOptions edmdc;
    bool with_edmdc = true;
    bool zero_control = false;
};

struct BenchmarkSeedResult {
    std::uint64_t seed = 0;
    std::vector<double> truth;            // x1(t), nan after divergence
    std::vector<double> bilinear;         // nan after divergence
    std::vector<double> edmdc;
    std::vector<double> rel_err_bilinear; // |x1~ - x1| / max|x1|; inf when undefined
    std::vector<double> rel_err_edmdc;
    std::optional<double> truth_diverged_at;
    std::optional<double> bilinear_diverged_at;
    std::optional<double> edmdc_diverged_at;
    double scale = 1.0;                   // max_t |x1(t)|
};

struct ThresholdCrossing {
    double threshold = 0.0;
    std::optional<double> bilinear;  // first t with median error above threshold
    std::optional<double> edmdc;
};

struct DuffingBenchmarkResult {
    std::vector<double> times;
    std::vector<BenchmarkSeedResult> seeds;
    std::vector<double> median_bilinear;
    std::vector<double> median_edmdc;
    std::vector<ThresholdCrossing> crossings;  // 1e-3, 1e-2, 1e-1
    int edmdc_diverged_before_1_5 = 0;
    int truth_diverged = 0;
    std::optional<double> median_edmdc_divergence;
};

DuffingBenchmarkResult run_duffing_benchmark(const DuffingBenchmarkSpec& spec);

/// Largest t such that the series stays <= threshold on [0, t] (0 if it starts above).
double time_below(const std::vector<double>& times, const std::vector<double>& values,
                  double threshold);

// ---------------------------------------------------------------------------
// Output

void write_generator_sweep_csv(std::ostream& os, const GeneratorSweepResult& r,
                               const std::string& config_hash);
nlohmann::json generator_sweep_summary(const GeneratorSweepResult& r, const SweepSpec& spec);

void write_trajectory_sweep_csv(std::ostream& os, const TrajectorySweepResult& r,
                                const std::string& config_hash);
nlohmann::json trajectory_sweep_summary(const TrajectorySweepResult& r, const SweepSpec& spec);

void write_fem_sweep_csv(std::ostream& os, const FemSweepResult& r, const std::string& config_hash);
nlohmann::json fem_sweep_summary(const FemSweepResult& r);

void write_benchmark_csv(std::ostream& os, const DuffingBenchmarkResult& r, bool with_edmdc,
                         const std::string& config_hash);
nlohmann::json benchmark_summary(const DuffingBenchmarkResult& r, const DuffingBenchmarkSpec& spec);

}  // namespace koopcert
