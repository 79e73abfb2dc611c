#include "koopcert/certify.hpp"

#include <cmath>
#include <limits>

#include "koopcert/errors.hpp"
#include "koopcert/random.hpp"

namespace koopcert {

ConstraintSet::ConstraintSet(std::vector<ScalarObservable> constraints)
    : constraints_(std::move(constraints)) {
    if (constraints_.empty()) throw UsageError("at least one constraint is required");
    for (const auto& c : constraints_)
        if (!c.value) throw UsageError("constraint '" + c.label + "' has no value function");
}

void ConstraintSet::check_gradients(const Box& box, int points, std::uint64_t seed) const {
    for (const auto& c : constraints_)
        if (!c.gradient) throw UsageError("constraint '" + c.label + "' has no gradient");
    koopcert::check_gradients(composite_dictionary(constraints_, monomial_dictionary(box.dim(), 0)),
                              box, points, seed);
}

void CertificationConfig::validate() const {
    if (!(epsilon > 0.0)) throw UsageError("epsilon must be > 0 (tightening must be strict)");
    if (!(delta > 0.0 && delta < 1.0)) throw UsageError("delta must lie in (0, 1)");
    if (!(dt_check > 0.0)) throw UsageError("dt_check must be > 0");
    if (!(horizon >= dt_check)) throw UsageError("horizon must be >= dt_check");
}

std::vector<ObservableCoeffs> constraint_coeffs(const Dictionary& dict, const ConstraintSet& cs,
                                                const Box& box, int q) {
    std::vector<ObservableCoeffs> out;
    for (const auto& h : cs.constraints()) {
        if (const auto idx = dict.index_of(h.label))
            out.push_back(unit_coeffs(dict, *idx));
        else
            out.push_back(project(dict, h.value, box, q));
    }
    return out;
}

std::string to_string(Verdict v) { return v == Verdict::certified ? "certified" : "rejected"; }

bool Certificate::all_certified() const {
    for (const auto& v : verdicts)
        if (v.verdict != Verdict::certified) return false;
    return !verdicts.empty();
}

Certificate certify_predictions(const std::vector<ObservableSeries>& predictions,
                                const std::vector<std::string>& labels,
                                const std::vector<ObservableCoeffs>& coeffs,
                                const CertificationConfig& cfg) {
    cfg.validate();
    if (predictions.size() != labels.size() || coeffs.size() != labels.size())
        throw UsageError("one prediction and coefficient vector per constraint is required");
    Certificate cert;
    cert.epsilon = cfg.epsilon;
    cert.delta = cfg.delta;
    cert.dt_check = cfg.dt_check;
    cert.horizon = cfg.horizon;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const auto& series = predictions[j];
        cert.grid_points = std::max(cert.grid_points, series.times.size());
        ConstraintVerdict v;
        v.label = labels[j];
        v.exact_representation = coeffs[j].exact;
        v.projection_residual = coeffs[j].residual;
        v.worst_margin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < series.values.size(); ++k) {
            const double margin = -cfg.epsilon - series.values[k];
            v.worst_margin = std::min(v.worst_margin, margin);
            if (margin < 0.0 && !v.first_failure_time) {
                v.first_failure_time = series.times[k];
                v.failure_margin = margin;
            }
        }
        if (series.diverged_at) {
            v.worst_margin = -std::numeric_limits<double>::infinity();
            if (!v.first_failure_time) v.first_failure_time = series.diverged_at;
            v.reason = "surrogate diverged";
        } else if (v.first_failure_time) {
            v.reason = "tightened constraint violated";
        }
        v.verdict = v.first_failure_time ? Verdict::rejected : Verdict::certified;
        cert.verdicts.push_back(std::move(v));
    }
    return cert;
}

Certificate certify(const BilinearSurrogate& s, const ConstraintSet& cs,
                    const std::vector<ObservableCoeffs>& coeffs, const Vec& x0,
                    const ControlSignal& u, const CertificationConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(coeffs.size()) != cs.size())
        throw UsageError("one coefficient vector per constraint is required");
    const auto predictions = predict_observables(s, coeffs, x0, u, cfg.horizon, cfg.dt_check);
    std::vector<std::string> labels;
    for (const auto& h : cs.constraints()) labels.push_back(h.label);
    Certificate cert = certify_predictions(predictions, labels, coeffs, cfg);
    cert.m = s.m();
    cert.N = s.size();
    cert.seeds = s.seeds();
    cert.dictionary_kind = to_string(s.dictionary().kind());
    return cert;
}

GroundTruthVerdict validate_certificate(const ControlAffineSystem& system, const Vec& x0,
                                        const ControlSignal& u, const ConstraintSet& cs,
                                        double horizon, double dt) {
    const Trajectory traj = integrate_until_divergence(system, x0, u, horizon, dt);
    GroundTruthVerdict out;
    out.diverged_at = traj.diverged_at;
    out.times = traj.times;
    out.values.assign(static_cast<std::size_t>(cs.size()), {});
    for (int j = 0; j < cs.size(); ++j) {
        auto& vals = out.values[static_cast<std::size_t>(j)];
        vals.reserve(traj.size());
        for (std::size_t k = 0; k < traj.size(); ++k) vals.push_back(cs[j].value(traj.state(k)));
    }
    for (std::size_t k = 0; k < traj.size() && out.satisfied; ++k) {
        for (int j = 0; j < cs.size(); ++j) {
            const double v = out.values[static_cast<std::size_t>(j)][k];
            if (v > 0.0) {
                out.satisfied = false;
                out.violation_time = traj.times[k];
                out.violation_index = j;
                out.violation_value = v;
                break;
            }
        }
    }
    if (out.diverged_at && out.satisfied) {
        // escaping the blow-up ball is treated as a violation of unknown index
        out.satisfied = false;
        out.violation_time = out.diverged_at;
    }
    return out;
}

SoundnessReport soundness_trial(const CertificationScenario& scenario, int trials,
                                const CertificationConfig& cfg, std::uint64_t master_seed) {
    if (trials < 1) throw UsageError("trials must be >= 1");
    cfg.validate();
    const GroundTruthVerdict truth = validate_certificate(
        scenario.system, scenario.x0, scenario.control, scenario.constraints, cfg.horizon, cfg.dt_check);
    const auto coeffs = constraint_coeffs(scenario.dictionary, scenario.constraints,
                                          scenario.domain.box, scenario.quadrature_order);
    std::vector<std::string> labels;
    for (const auto& h : scenario.constraints.constraints()) labels.push_back(h.label);
    const int p = scenario.constraints.size();

    std::vector<SoundnessTrialRow> rows(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < trials; ++t) {
        SoundnessTrialRow& row = rows[static_cast<std::size_t>(t)];
        row.trial = t;
        row.seed = derive_seed(master_seed, static_cast<std::uint64_t>(t));
        row.truth_violated = !truth.satisfied;
        try {
            const BilinearSurrogate s =
                fit_bilinear(scenario.dictionary, scenario.system, scenario.domain, scenario.m,
                             row.seed, scenario.shared_samples);
            const auto preds =
                predict_observables(s, coeffs, scenario.x0, scenario.control, cfg.horizon, cfg.dt_check);
            const Certificate cert = certify_predictions(preds, labels, coeffs, cfg);
            row.certified = cert.all_certified();

            bool close = true;
            double max_err = 0.0;
            for (int j = 0; j < p; ++j) {
                const auto& pred = preds[static_cast<std::size_t>(j)];
                const auto& tv = truth.values[static_cast<std::size_t>(j)];
                const bool complete = !pred.diverged_at && pred.values.size() == tv.size() && !truth.diverged_at;
                bool close_j = complete;
                bool tight_j = !pred.diverged_at;
                bool feasible_j = !truth.diverged_at;
                const std::size_t n = std::min(pred.values.size(), tv.size());
                for (std::size_t k = 0; k < n; ++k) {
                    const double err = std::abs(tv[k] - pred.values[k]);
                    max_err = std::max(max_err, err);
                    if (err > cfg.epsilon) close_j = false;
                    if (pred.values[k] > -cfg.epsilon) tight_j = false;
                    if (tv[k] > 0.0) feasible_j = false;
                }
                if (!complete) max_err = std::numeric_limits<double>::infinity();
                close = close && close_j;
                if (tight_j && close_j && !feasible_j) row.implication_holds = false;
            }
            row.uniformly_close = close;
            row.max_abs_error = max_err;
        } catch (const NumericalError&) {
            row.fit_failed = true;
            row.max_abs_error = std::numeric_limits<double>::infinity();
        }
    }

    SoundnessReport report;
    report.trials = trials;
    for (const auto& row : rows) {
        if (row.certified && row.truth_violated) ++report.unsound;
        if (row.uniformly_close) ++report.close;
        if (row.implication_holds) ++report.implication_holds;
        if (row.fit_failed) ++report.fit_failures;
    }
    report.rows = std::move(rows);
    return report;
}

}  // namespace koopcert
