#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "koopcert/dictionary.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/surrogate.hpp"

namespace koopcert {

/// State constraints h_j(x) <= 0, each with an analytic gradient.
class ConstraintSet {
public:
    explicit ConstraintSet(std::vector<ScalarObservable> constraints);

    int size() const { return static_cast<int>(constraints_.size()); }
    const std::vector<ScalarObservable>& constraints() const { return constraints_; }
    const ScalarObservable& operator[](int j) const { return constraints_.at(static_cast<std::size_t>(j)); }

    /// Finite-difference gradient check on `box`, as for dictionaries.
    void check_gradients(const Box& box, int points = 20, std::uint64_t seed = 0) const;

private:
    std::vector<ScalarObservable> constraints_;
};

struct CertificationConfig {
    double epsilon = 0.05;
    double delta = 0.1;
    double dt_check = 1e-3;
    double horizon = 1.0;

    /// Throws UsageError unless eps > 0, 0 < delta < 1, dt_check > 0, horizon >= dt_check.
    void validate() const;
};

/// Coordinates of each h_j in the surrogate dictionary: the unit vector when h_j is a
/// dictionary element (matched by label), otherwise the L2 projection with its residual.
std::vector<ObservableCoeffs> constraint_coeffs(const Dictionary& dict, const ConstraintSet& cs,
                                                const Box& box, int q = 40);

enum class Verdict { certified, rejected };
std::string to_string(Verdict v);

struct ConstraintVerdict {
    std::string label;
    Verdict verdict = Verdict::rejected;
    double worst_margin = 0.0;                // min_t (-eps - h(t))
    std::optional<double> first_failure_time;
    std::optional<double> failure_margin;     // -eps - h(t) at the first failure (< 0)
    std::string reason;                       // empty when certified
    bool exact_representation = false;
    double projection_residual = 0.0;
};

struct Certificate {
    std::vector<ConstraintVerdict> verdicts;
    double epsilon = 0.0;
    double delta = 0.0;
    double dt_check = 0.0;
    double horizon = 0.0;
    std::size_t grid_points = 0;
    int m = 0;
    int N = 0;
    std::vector<std::uint64_t> seeds;
    std::string dictionary_kind;

    bool all_certified() const;
};

/// Certified iff the surrogate prediction satisfies h_j(t_k) <= -eps at every grid time.
Certificate certify_predictions(const std::vector<ObservableSeries>& predictions,
                                const std::vector<std::string>& labels,
                                const std::vector<ObservableCoeffs>& coeffs,
                                const CertificationConfig& cfg);

Certificate certify(const BilinearSurrogate& s, const ConstraintSet& cs,
                    const std::vector<ObservableCoeffs>& coeffs, const Vec& x0,
                    const ControlSignal& u, const CertificationConfig& cfg);

struct GroundTruthVerdict {
    bool satisfied = true;
    std::optional<double> violation_time;
    std::optional<int> violation_index;
    std::optional<double> violation_value;
    std::optional<double> diverged_at;
    std::vector<double> times;
    std::vector<std::vector<double>> values;  // values[j][k] = h_j(x(t_k))
};

/// Integrates the true system and evaluates every h_j on the grid.
GroundTruthVerdict validate_certificate(const ControlAffineSystem& system, const Vec& x0,
                                        const ControlSignal& u, const ConstraintSet& cs,
                                        double horizon, double dt);

/// Data-dependent certification scenario; randomness enters only through the samples.
struct CertificationScenario {
    ControlAffineSystem system;
    StateDomain domain;
    Dictionary dictionary;
    ConstraintSet constraints;
    Vec x0;
    ControlSignal control;
    int m = 100;
    bool shared_samples = false;
    int quadrature_order = 40;
};

struct SoundnessTrialRow {
    int trial = 0;
    std::uint64_t seed = 0;
    bool fit_failed = false;
    bool certified = false;          // all constraints certified
    bool truth_violated = false;
    bool uniformly_close = false;    // |h_j(x(t_k)) - h~_j(t_k)| <= eps for all j, k
    bool implication_holds = true;   // per constraint: tightened pass and close => feasible
    double max_abs_error = 0.0;
};

struct SoundnessReport {
    int trials = 0;
    int unsound = 0;         // certified and truth violated
    int close = 0;
    int implication_holds = 0;
    int fit_failures = 0;
    std::vector<SoundnessTrialRow> rows;

    double unsoundness_rate() const { return trials ? static_cast<double>(unsound) / trials : 0.0; }
    double closeness_rate() const { return trials ? static_cast<double>(close) / trials : 0.0; }
};

SoundnessReport soundness_trial(const CertificationScenario& scenario, int trials,
                                const CertificationConfig& cfg, std::uint64_t master_seed);

}  // namespace koopcert
