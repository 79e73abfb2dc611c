#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopcert/certify.hpp"
#include "koopcert/dictionary.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/experiments.hpp"
#include "koopcert/surrogate.hpp"

namespace koopcert {

/// Scalar observable as written in a config file.
///   coordinate: x_{index+1}
///   affine:     a.x + b
///   ball:       |x - center|^2 - radius^2
///   sine:       amplitude sin(frequency a.x) + quadratic |x|^2 + b
struct ObservableSpec {
    enum class Kind { coordinate, affine, ball, sine };
    Kind kind = Kind::coordinate;
    std::string label;
    int index = 0;
    std::vector<double> a;
    double b = 0.0;
    std::vector<double> center;
    double radius = 1.0;
    double amplitude = 1.0;
    double frequency = 1.0;
    double quadratic = 0.0;

    ScalarObservable build(int dim) const;
};

struct SystemSpec {
    std::string name = "duffing";  // duffing | linear
    double alpha = -1.0, beta = 1.0, delta = 0.0;
    double a = -1.0;
    std::optional<double> b;

    ControlAffineSystem build() const;
};

struct ControlSpec {
    std::string kind = "random_zoh";  // random_zoh | constant | zoh
    double segment_duration = 0.1;
    std::vector<double> lower{-1.0};
    std::vector<double> upper{1.0};
    std::vector<double> value;                // constant
    std::vector<std::vector<double>> values;  // zoh
    std::optional<std::uint64_t> seed;        // random_zoh; derived from the data seed otherwise

    Box bounds() const;
    ControlSignal build(double horizon, std::uint64_t master_seed) const;
};

struct ScenarioSpec {
    SystemSpec system;
    std::vector<double> domain_lower{-2.0, -2.0};
    std::vector<double> domain_upper{2.0, 2.0};
    std::vector<ObservableSpec> constraints;
    ObservableSpec observable;
    std::vector<double> x0{1.0, 1.0};
    double horizon = 3.0;
    double dt = 1e-3;
    ControlSpec control;
};

struct DictionarySpec {
    std::string kind = "monomial";  // monomial | fem | composite
    int degree = 5;
    double mesh_size = 0.1;
    std::string base = "monomial";  // composite base: monomial | fem
    int cap = kMaxDictionarySize;
};

struct DataSpec {
    int m = 100;
    std::uint64_t seed = 0;
    int trials = 50;
    bool shared_samples = false;
    std::vector<int> m_values{100, 1000, 10000};
    int quadrature_order = 40;
};

struct SweepConfig {
    std::string kind = "generator";  // generator | trajectory | fem | duffing-benchmark | soundness
    std::vector<double> epsilons{0.5, 1.0, 2.0};
    std::vector<double> mesh_sizes{0.2, 0.1, 0.05};
    MRule m_rule;
    int sampled_trials = 0;  // fem: sampled fits per mesh level on top of the quadrature fit
    int seeds = 20;          // duffing-benchmark
};

struct OutputSpec {
    std::string directory = "out";
    bool svg = true;
};

struct RunConfig {
    ScenarioSpec scenario;
    DictionarySpec dictionary;
    DataSpec data;
    CertificationConfig certification;
    EdmdcOptions edmdc;
    int edmdc_m = 100;
    bool with_edmdc = true;
    SweepConfig sweep;
    OutputSpec output;
    nlohmann::json source;  // the parsed document, seed override applied

    ControlAffineSystem system() const;
    StateDomain domain() const;
    Box box() const;
    Dictionary dictionary_for() const;
    std::vector<ScalarObservable> constraints() const;
    ScalarObservable observable() const;
    Vec x0() const;
    ControlSignal control() const;
    /// FNV-1a of the canonical (key-sorted, compact) config document.
    std::string hash() const;
};

/// Parses and validates a config document. Unknown keys, type mismatches and
/// out-of-range numbers raise UsageError naming the field; malformed JSON
/// raises UsageError with line and column.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Re-applies the seed (and the copy kept in `source`).
void override_seed(RunConfig& cfg, std::uint64_t seed);

}  // namespace koopcert
