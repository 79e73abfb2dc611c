#include "koopcert/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "koopcert/errors.hpp"
#include "koopcert/io.hpp"
#include "koopcert/random.hpp"

namespace koopcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json num(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? nlohmann::json("nan") : nlohmann::json(v > 0 ? "inf" : "-inf");
}

double from_num(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json num_array(const std::vector<double>& v) {
    auto out = nlohmann::json::array();
    for (double x : v) out.push_back(num(x));
    return out;
}

std::vector<double> from_num_array(const nlohmann::json& j) {
    std::vector<double> out;
    for (const auto& x : j) out.push_back(from_num(x));
    return out;
}

template <class Compute>
void run_cells(std::size_t count, const std::function<std::string(std::size_t)>& key_of,
               CellStore* store, Compute compute) {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(count); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const std::string key = key_of(idx);
        if (store) {
            const auto it = store->completed.find(key);
            if (it != store->completed.end()) {
                compute(idx, &it->second);
                continue;
            }
        }
        const nlohmann::json produced = compute(idx, nullptr);
        if (store && store->on_complete) {
#pragma omp critical(koopcert_cell_writer)
            store->on_complete(key, produced);
        }
    }
}

ProbabilityEstimate estimate(int m, double eps, int successes, int n) {
    ProbabilityEstimate p;
    p.m = m;
    p.epsilon = eps;
    p.successes = successes;
    p.n = n;
    p.p = n ? static_cast<double>(successes) / n : 0.0;
    p.ci = wilson_interval(successes, n);
    return p;
}

nlohmann::json probabilities_json(const std::vector<ProbabilityEstimate>& ps) {
    auto out = nlohmann::json::array();
    for (const auto& p : ps)
        out.push_back({{"m", p.m},
                       {"epsilon", p.epsilon},
                       {"successes", p.successes},
                       {"n", p.n},
                       {"p", p.p},
                       {"wilson_lower", p.ci.lower},
                       {"wilson_upper", p.ci.upper}});
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Statistics

WilsonInterval wilson_interval(int successes, int n, double z) {
    if (n <= 0) return {0.0, 1.0};
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::clamp(center - half, 0.0, p), std::clamp(center + half, p, 1.0)};
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    const double a = values[n / 2 - 1], b = values[n / 2];
    if (std::isinf(a) || std::isinf(b)) return std::isinf(a) ? a : b;
    return 0.5 * (a + b);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw UsageError("slope needs at least two points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i]))
            return std::numeric_limits<double>::quiet_NaN();
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw UsageError("rank correlation needs two paired samples");
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// Sweeps

void SweepSpec::validate() const {
    if (m_values.empty()) throw UsageError("m_values must not be empty");
    for (std::size_t i = 0; i < m_values.size(); ++i) {
        if (m_values[i] < 1) throw UsageError("m must be >= 1");
        if (i && m_values[i] <= m_values[i - 1]) throw UsageError("m_values must be strictly increasing");
    }
    if (trials < 1) throw UsageError("trials must be >= 1");
    for (double e : epsilons)
        if (!(e > 0.0)) throw UsageError("epsilons must be > 0");
}

std::uint64_t cell_seed(std::uint64_t master, int m, int trial) {
    return derive_seed(master, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(trial));
}

GeneratorSweepResult run_generator_sweep(const SweepSpec& spec, CellStore* store) {
    spec.validate();
    const Scenario& sc = spec.scenario;
    const int nc = sc.system.control_dim();
    std::vector<Mat> refs;
    for (int i = 0; i <= nc; ++i)
        refs.push_back(galerkin_reference(sc.dictionary, sc.system, basis_control(nc, i),
                                          sc.domain.box, sc.quadrature_order, spec.master_seed)
                           .matrix);

    const auto nm = spec.m_values.size();
    const auto trials = static_cast<std::size_t>(spec.trials);
    GeneratorSweepResult r;
    r.cells.resize(nm * trials);
    auto key_of = [&](std::size_t i) {
        return "generator:m=" + std::to_string(spec.m_values[i / trials]) +
               ":trial=" + std::to_string(i % trials);
    };
    run_cells(r.cells.size(), key_of, store, [&](std::size_t i, const nlohmann::json* cached) {
        GeneratorCell& cell = r.cells[i];
        cell.m = spec.m_values[i / trials];
        cell.trial = static_cast<int>(i % trials);
        cell.seed = cell_seed(spec.master_seed, cell.m, cell.trial);
        if (cached) {
            cell.errors = from_num_array(cached->at("errors"));
            cell.max_error = from_num(cached->at("max_error"));
            cell.failed = cached->at("failed").get<bool>();
            cell.failure = cached->at("failure").get<std::string>();
            return nlohmann::json();
        }
        try {
            std::vector<EdmdFit> fits;
            fit_bilinear(sc.dictionary, sc.system, sc.domain, cell.m, cell.seed, sc.shared_samples, &fits);
            cell.max_error = 0.0;
            for (int c = 0; c <= nc; ++c) {
                cell.errors.push_back(generator_error(refs[static_cast<std::size_t>(c)],
                                                      fits[static_cast<std::size_t>(c)].L_hat));
                cell.max_error = std::max(cell.max_error, cell.errors.back());
            }
        } catch (const NumericalError& e) {
            cell.failed = true;
            cell.failure = e.what();
            cell.errors.assign(static_cast<std::size_t>(nc + 1), kInf);
            cell.max_error = kInf;
        }
        return nlohmann::json{{"m", cell.m},
                              {"trial", cell.trial},
                              {"errors", num_array(cell.errors)},
                              {"max_error", num(cell.max_error)},
                              {"failed", cell.failed},
                              {"failure", cell.failure}};
    });

    r.median_error.assign(static_cast<std::size_t>(nc + 1), std::vector<double>(nm));
    r.median_max_error.resize(nm);
    for (std::size_t mi = 0; mi < nm; ++mi) {
        std::vector<double> mx;
        for (std::size_t t = 0; t < trials; ++t) mx.push_back(r.cells[mi * trials + t].max_error);
        r.median_max_error[mi] = median(mx);
        for (int c = 0; c <= nc; ++c) {
            std::vector<double> e;
            for (std::size_t t = 0; t < trials; ++t)
                e.push_back(r.cells[mi * trials + t].errors[static_cast<std::size_t>(c)]);
            r.median_error[static_cast<std::size_t>(c)][mi] = median(e);
        }
        for (double eps : spec.epsilons) {
            int ok = 0;
            for (std::size_t t = 0; t < trials; ++t) {
                const auto& cell = r.cells[mi * trials + t];
                if (!cell.failed && cell.max_error <= eps) ++ok;
            }
            r.probabilities.push_back(estimate(spec.m_values[mi], eps, ok, spec.trials));
        }
    }
    if (nm >= 2) {
        std::vector<double> ms(spec.m_values.begin(), spec.m_values.end());
        for (int c = 0; c <= nc; ++c)
            r.slope_per_control.push_back(loglog_slope(ms, r.median_error[static_cast<std::size_t>(c)]));
        r.slope_max = loglog_slope(ms, r.median_max_error);
    } else {
        r.slope_per_control.assign(static_cast<std::size_t>(nc + 1), std::numeric_limits<double>::quiet_NaN());
        r.slope_max = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

TrajectorySweepResult run_trajectory_sweep(const SweepSpec& spec, const ControlSignal& u,
                                           CellStore* store) {
    spec.validate();
    const Scenario& sc = spec.scenario;
    const BilinearSurrogate ref =
        reference_surrogate(sc.dictionary, sc.system, sc.domain.box, sc.quadrature_order);
    const Vec z0 = sc.dictionary.eval(sc.x0);
    const LiftedTrajectory zref = propagate(ref, z0, u, sc.horizon, sc.dt);
    if (zref.diverged_at)
        throw NumericalError("reference lifted trajectory diverged at t = " + io::fmt(*zref.diverged_at));

    TrajectorySweepResult r;
    r.times = zref.times;
    const auto K = r.times.size();
    std::vector<Vec> controls_on_grid;
    for (double t : r.times) controls_on_grid.push_back(u.at(t));

    const auto nm = spec.m_values.size();
    const auto trials = static_cast<std::size_t>(spec.trials);
    r.cells.resize(nm * trials);
    auto key_of = [&](std::size_t i) {
        return "trajectory:m=" + std::to_string(spec.m_values[i / trials]) +
               ":trial=" + std::to_string(i % trials);
    };
    run_cells(r.cells.size(), key_of, store, [&](std::size_t i, const nlohmann::json* cached) {
        TrajectoryCell& cell = r.cells[i];
        cell.m = spec.m_values[i / trials];
        cell.trial = static_cast<int>(i % trials);
        cell.seed = cell_seed(spec.master_seed, cell.m, cell.trial);
        if (cached) {
            cell.max_generator_error = from_num(cached->at("max_generator_error"));
            cell.max_trajectory_error = from_num(cached->at("max_trajectory_error"));
            cell.errors = from_num_array(cached->at("errors"));
            cell.failed = cached->at("failed").get<bool>();
            return nlohmann::json();
        }
        cell.errors.assign(K, kInf);
        try {
            const BilinearSurrogate s =
                fit_bilinear(sc.dictionary, sc.system, sc.domain, cell.m, cell.seed, sc.shared_samples);
            const LiftedTrajectory z = propagate(s, z0, u, sc.horizon, sc.dt);
            cell.max_trajectory_error = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                if (static_cast<Eigen::Index>(k) < z.z.cols())
                    cell.errors[k] = (zref.z.col(static_cast<Eigen::Index>(k)) -
                                      z.z.col(static_cast<Eigen::Index>(k))).norm();
                cell.max_trajectory_error = std::max(cell.max_trajectory_error, cell.errors[k]);
            }
            cell.max_generator_error = 0.0;
            const Vec* last = nullptr;
            for (const Vec& uk : controls_on_grid) {
                if (last && *last == uk) continue;
                last = &uk;
                cell.max_generator_error = std::max(
                    cell.max_generator_error, generator_error(ref.generator_at(uk), s.generator_at(uk)));
            }
        } catch (const NumericalError&) {
            cell.failed = true;
            cell.max_generator_error = kInf;
            cell.max_trajectory_error = kInf;
        }
        return nlohmann::json{{"m", cell.m},
                              {"trial", cell.trial},
                              {"max_generator_error", num(cell.max_generator_error)},
                              {"max_trajectory_error", num(cell.max_trajectory_error)},
                              {"errors", num_array(cell.errors)},
                              {"failed", cell.failed}};
    });

    for (std::size_t mi = 0; mi < nm; ++mi) {
        std::vector<double> mx, ge;
        for (std::size_t t = 0; t < trials; ++t) {
            const auto& cell = r.cells[mi * trials + t];
            mx.push_back(cell.max_trajectory_error);
            if (!cell.failed) ge.push_back(cell.max_generator_error);
        }
        r.median_max_error.push_back(median(mx));
        std::vector<double> a, b;
        for (std::size_t t = 0; t < trials; ++t) {
            const auto& cell = r.cells[mi * trials + t];
            if (cell.failed) continue;
            a.push_back(cell.max_generator_error);
            b.push_back(cell.max_trajectory_error);
        }
        r.rank_correlation.push_back(a.size() >= 2 ? spearman(a, b) : 0.0);
        for (double eps : spec.epsilons) {
            int worst = spec.trials;
            for (std::size_t k = 0; k < K; ++k) {
                int ok = 0;
                for (std::size_t t = 0; t < trials; ++t)
                    if (r.cells[mi * trials + t].errors[k] <= eps) ++ok;
                worst = std::min(worst, ok);
            }
            r.probabilities.push_back(estimate(spec.m_values[mi], eps, worst, spec.trials));
        }
    }
    return r;
}

int MRule::m_for(int N) const {
    if (!(value > 0.0)) throw UsageError("m rule value must be > 0");
    if (kind == Kind::fixed) return static_cast<int>(std::lround(value));
    return std::max(1, static_cast<int>(std::ceil(value * N)));
}

FemSweepResult run_fem_sweep(const FemSweepSpec& spec, CellStore* store) {
    if (spec.mesh_sizes.empty()) throw UsageError("mesh size list must not be empty");
    if (spec.trials < 0) throw UsageError("trials must be >= 0");
    if (spec.box.dim() > 2) throw UsageError("finite-element sweeps support d = 1 or 2");
    const Trajectory truth = integrate(spec.system, spec.x0, spec.control, spec.horizon, spec.dt);
    std::vector<double> truth_values;
    for (std::size_t k = 0; k < truth.size(); ++k) truth_values.push_back(spec.observable.value(truth.state(k)));

    auto sup_error = [&](const ObservableSeries& pred) {
        if (pred.diverged_at || pred.values.size() != truth_values.size()) return kInf;
        double e = 0.0;
        for (std::size_t k = 0; k < truth_values.size(); ++k)
            e = std::max(e, std::abs(truth_values[k] - pred.values[k]));
        return e;
    };

    FemSweepResult r;
    const StateDomain domain{spec.box, {}};
    for (double dx : spec.mesh_sizes) {
        const FemMesh mesh(spec.box, dx);
        const Dictionary dict = composite_dictionary(spec.constraints, fem_dictionary(mesh));
        const auto idx = dict.index_of(spec.observable.label);
        const ObservableCoeffs coeffs = idx ? unit_coeffs(dict, *idx)
                                            : project(dict, spec.observable.value, spec.box, spec.quadrature_order);
        FemLevel level;
        level.mesh_size = dx;
        level.N = dict.size();
        level.m = spec.m_rule.m_for(dict.size());
        level.projection_residual = coeffs.residual;
        const BilinearSurrogate ref = reference_surrogate(dict, spec.system, spec.box, spec.quadrature_order);
        level.quadrature_error = sup_error(predict_observable(ref, coeffs, spec.x0, spec.control, spec.horizon, spec.dt));

        const auto trials = static_cast<std::size_t>(spec.trials);
        std::vector<FemCell> cells(trials);
        auto key_of = [&](std::size_t t) {
            return "fem:dx=" + io::fmt(dx) + ":trial=" + std::to_string(t);
        };
        run_cells(trials, key_of, store, [&](std::size_t t, const nlohmann::json* cached) {
            FemCell& cell = cells[t];
            cell.mesh_size = dx;
            cell.trial = static_cast<int>(t);
            cell.seed = derive_seed(spec.master_seed, io::fnv1a64(io::fmt(dx)), t);
            cell.N = level.N;
            cell.m = level.m;
            if (cached) {
                cell.error = from_num(cached->at("error"));
                cell.failed = cached->at("failed").get<bool>();
                return nlohmann::json();
            }
            try {
                const BilinearSurrogate s =
                    fit_bilinear(dict, spec.system, domain, cell.m, cell.seed, spec.shared_samples);
                cell.error = sup_error(predict_observable(s, coeffs, spec.x0, spec.control, spec.horizon, spec.dt));
            } catch (const NumericalError&) {
                cell.failed = true;
                cell.error = kInf;
            }
            return nlohmann::json{{"mesh_size", dx}, {"trial", cell.trial}, {"error", num(cell.error)}, {"failed", cell.failed}};
        });
        std::vector<double> errs;
        for (const auto& c : cells) errs.push_back(c.error);
        level.median_sampled_error = errs.empty() ? std::numeric_limits<double>::quiet_NaN() : median(errs);
        r.levels.push_back(level);
        for (auto& c : cells) r.cells.push_back(std::move(c));
    }
    for (std::size_t i = 0; i + 1 < r.levels.size(); ++i)
        r.reduction_factors.push_back(r.levels[i].quadrature_error / r.levels[i + 1].quadrature_error);
    if (r.levels.size() >= 2) {
        std::vector<double> dxs, errs;
        for (const auto& l : r.levels) {
            dxs.push_back(l.mesh_size);
            errs.push_back(l.quadrature_error);
        }
        r.rate = loglog_slope(dxs, errs);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Duffing benchmark

double time_below(const std::vector<double>& times, const std::vector<double>& values, double threshold) {
    double last = 0.0;
    for (std::size_t k = 0; k < std::min(times.size(), values.size()); ++k) {
        if (!(values[k] <= threshold)) return last;
        last = times[k];
    }
    return last;
}

DuffingBenchmarkResult run_duffing_benchmark(const DuffingBenchmarkSpec& spec) {
    if (spec.seeds < 1) throw UsageError("benchmark needs at least one seed");
    if (spec.m < 1 || spec.edmdc_m < 1) throw UsageError("m must be >= 1");
    const ControlAffineSystem system = duffing(-1.0, 1.0, 0.0);
    const Dictionary dict = monomial_dictionary(2, spec.degree);
    const ObservableCoeffs x1 = unit_coeffs(dict, *dict.index_of("x1"));
    const StateDomain domain{spec.domain, {}};

    DuffingBenchmarkResult r;
    r.times = time_grid(spec.horizon, spec.dt);
    const auto K = r.times.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.seeds.resize(static_cast<std::size_t>(spec.seeds));

#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < spec.seeds; ++s) {
        BenchmarkSeedResult& out = r.seeds[static_cast<std::size_t>(s)];
        out.seed = derive_seed(spec.master_seed, static_cast<std::uint64_t>(s));
        const ControlSignal u = spec.zero_control
                                    ? ControlSignal::constant(Vec::Zero(1), spec.controls)
                                    : random_zoh(spec.controls, spec.segment_duration, spec.horizon,
                                                 derive_seed(out.seed, 1));
        const Trajectory truth = integrate_until_divergence(system, spec.x0, u, spec.horizon, spec.dt);
        out.truth_diverged_at = truth.diverged_at;
        out.truth.assign(K, nan);
        out.scale = 0.0;
        for (std::size_t k = 0; k < truth.size(); ++k) {
            out.truth[k] = truth.states(0, static_cast<Eigen::Index>(k));
            out.scale = std::max(out.scale, std::abs(out.truth[k]));
        }
        auto rel_errors = [&](const std::vector<double>& pred) {
            std::vector<double> e(K, kInf);
            for (std::size_t k = 0; k < K; ++k)
                if (std::isfinite(out.truth[k]) && std::isfinite(pred[k]))
                    e[k] = std::abs(pred[k] - out.truth[k]) / out.scale;
            return e;
        };
        auto to_grid = [&](const ObservableSeries& series) {
            std::vector<double> v(K, nan);
            std::copy(series.values.begin(), series.values.end(), v.begin());
            return v;
        };

        out.bilinear.assign(K, nan);
        try {
            const BilinearSurrogate sur = fit_bilinear(dict, system, domain, spec.m, derive_seed(out.seed, 2));
            const ObservableSeries pred = predict_observable(sur, x1, spec.x0, u, spec.horizon, spec.dt);
            out.bilinear = to_grid(pred);
            out.bilinear_diverged_at = pred.diverged_at;
        } catch (const NumericalError&) {
            out.bilinear_diverged_at = 0.0;
        }
        out.rel_err_bilinear = rel_errors(out.bilinear);

        out.edmdc.assign(K, nan);
        if (spec.with_edmdc) {
            try {
                const EdmdcModel model = fit_edmdc(dict, system, domain, spec.controls, spec.edmdc_m,
                                                   derive_seed(out.seed, 3), spec.edmdc);
                const ObservableSeries pred = predict_edmdc(model, dict, x1, spec.x0, u, spec.horizon, spec.dt);
                out.edmdc = to_grid(pred);
                out.edmdc_diverged_at = pred.diverged_at;
            } catch (const NumericalError&) {
                out.edmdc_diverged_at = 0.0;
            }
            out.rel_err_edmdc = rel_errors(out.edmdc);
        }
    }

    r.median_bilinear.resize(K);
    r.median_edmdc.assign(K, nan);
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> b, e;
        for (const auto& s : r.seeds) {
            b.push_back(s.rel_err_bilinear[k]);
            if (spec.with_edmdc) e.push_back(s.rel_err_edmdc[k]);
        }
        r.median_bilinear[k] = median(b);
        if (spec.with_edmdc) r.median_edmdc[k] = median(e);
    }
    for (double th : {1e-3, 1e-2, 1e-1}) {
        ThresholdCrossing c;
        c.threshold = th;
        for (std::size_t k = 0; k < K; ++k)
            if (!(r.median_bilinear[k] <= th)) {
                c.bilinear = r.times[k];
                break;
            }
        if (spec.with_edmdc)
            for (std::size_t k = 0; k < K; ++k)
                if (!(r.median_edmdc[k] <= th)) {
                    c.edmdc = r.times[k];
                    break;
                }
        r.crossings.push_back(c);
    }
    std::vector<double> div;
    for (const auto& s : r.seeds) {
        if (s.truth_diverged_at) ++r.truth_diverged;
        if (!spec.with_edmdc) continue;
        if (s.edmdc_diverged_at && *s.edmdc_diverged_at < 1.5) ++r.edmdc_diverged_before_1_5;
        div.push_back(s.edmdc_diverged_at.value_or(kInf));
    }
    if (!div.empty() && std::isfinite(median(div))) r.median_edmdc_divergence = median(div);
    return r;
}

// ---------------------------------------------------------------------------
// Output

void write_generator_sweep_csv(std::ostream& os, const GeneratorSweepResult& r, const std::string& config_hash) {
    std::vector<std::string> header{"m", "trial", "seed"};
    const std::size_t controls = r.median_error.size();
    for (std::size_t c = 0; c < controls; ++c) header.push_back(c == 0 ? "err_u0" : "err_e" + std::to_string(c));
    header.insert(header.end(), {"max_error", "failed"});
    io::CsvWriter csv(os, header, config_hash);
    for (const auto& cell : r.cells) {
        std::vector<std::string> row{std::to_string(cell.m), std::to_string(cell.trial), std::to_string(cell.seed)};
        for (double e : cell.errors) row.push_back(io::fmt(e));
        row.push_back(io::fmt(cell.max_error));
        row.push_back(cell.failed ? "1" : "0");
        csv.row(row);
    }
}

nlohmann::json generator_sweep_summary(const GeneratorSweepResult& r, const SweepSpec& spec) {
    nlohmann::json medians = nlohmann::json::array();
    for (const auto& per_control : r.median_error) medians.push_back(num_array(per_control));
    return {{"kind", "generator"},
            {"m_values", spec.m_values},
            {"trials", spec.trials},
            {"master_seed", spec.master_seed},
            {"median_error_per_control", medians},
            {"median_max_error", num_array(r.median_max_error)},
            {"slope_per_control", num_array(r.slope_per_control)},
            {"slope_max", num(r.slope_max)},
            {"probabilities", probabilities_json(r.probabilities)}};
}

void write_trajectory_sweep_csv(std::ostream& os, const TrajectorySweepResult& r, const std::string& config_hash) {
    io::CsvWriter csv(os, {"m", "trial", "seed", "max_generator_error", "max_trajectory_error", "failed"}, config_hash);
    for (const auto& cell : r.cells)
        csv.row({std::to_string(cell.m), std::to_string(cell.trial), std::to_string(cell.seed),
                 io::fmt(cell.max_generator_error), io::fmt(cell.max_trajectory_error), cell.failed ? "1" : "0"});
}

nlohmann::json trajectory_sweep_summary(const TrajectorySweepResult& r, const SweepSpec& spec) {
    return {{"kind", "trajectory"},
            {"m_values", spec.m_values},
            {"trials", spec.trials},
            {"master_seed", spec.master_seed},
            {"median_max_trajectory_error", num_array(r.median_max_error)},
            {"rank_correlation", num_array(r.rank_correlation)},
            {"min_over_time_probabilities", probabilities_json(r.probabilities)}};
}

void write_fem_sweep_csv(std::ostream& os, const FemSweepResult& r, const std::string& config_hash) {
    io::CsvWriter csv(os, {"kind", "mesh_size", "trial", "N", "m", "error", "failed"}, config_hash);
    for (const auto& l : r.levels)
        csv.row({"quadrature", io::fmt(l.mesh_size), "-1", std::to_string(l.N), "0", io::fmt(l.quadrature_error), "0"});
    for (const auto& c : r.cells)
        csv.row({"sampled", io::fmt(c.mesh_size), std::to_string(c.trial), std::to_string(c.N), std::to_string(c.m),
                 io::fmt(c.error), c.failed ? "1" : "0"});
}

nlohmann::json fem_sweep_summary(const FemSweepResult& r) {
    auto levels = nlohmann::json::array();
    for (const auto& l : r.levels)
        levels.push_back({{"mesh_size", l.mesh_size},
                          {"N", l.N},
                          {"m", l.m},
                          {"quadrature_error", num(l.quadrature_error)},
                          {"median_sampled_error", num(l.median_sampled_error)},
                          {"projection_residual", num(l.projection_residual)}});
    nlohmann::json out{{"kind", "fem"}, {"levels", levels}, {"reduction_factors", num_array(r.reduction_factors)}};
    out["rate"] = r.rate ? num(*r.rate) : nlohmann::json(nullptr);
    return out;
}

void write_benchmark_csv(std::ostream& os, const DuffingBenchmarkResult& r, bool with_edmdc,
                         const std::string& config_hash) {
    std::vector<std::string> header{"t", "median_rel_err_bilinear"};
    if (with_edmdc) header.push_back("median_rel_err_edmdc");
    io::CsvWriter csv(os, header, config_hash);
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        std::vector<std::string> row{io::fmt(r.times[k]), io::fmt(r.median_bilinear[k])};
        if (with_edmdc) row.push_back(io::fmt(r.median_edmdc[k]));
        csv.row(row);
    }
}

nlohmann::json benchmark_summary(const DuffingBenchmarkResult& r, const DuffingBenchmarkSpec& spec) {
    auto crossings = nlohmann::json::array();
    for (const auto& c : r.crossings) {
        nlohmann::json j{{"threshold", c.threshold}};
        j["bilinear_exceeds_at"] = c.bilinear ? nlohmann::json(*c.bilinear) : nlohmann::json(nullptr);
        j["edmdc_exceeds_at"] = c.edmdc ? nlohmann::json(*c.edmdc) : nlohmann::json(nullptr);
        crossings.push_back(j);
    }
    auto seeds = nlohmann::json::array();
    for (const auto& s : r.seeds) {
        nlohmann::json j{{"seed", s.seed}, {"scale", s.scale}};
        j["truth_diverged_at"] = s.truth_diverged_at ? nlohmann::json(*s.truth_diverged_at) : nlohmann::json(nullptr);
        j["bilinear_diverged_at"] =
            s.bilinear_diverged_at ? nlohmann::json(*s.bilinear_diverged_at) : nlohmann::json(nullptr);
        j["edmdc_diverged_at"] = s.edmdc_diverged_at ? nlohmann::json(*s.edmdc_diverged_at) : nlohmann::json(nullptr);
        j["bilinear_below_1e-3_until"] = time_below(r.times, s.rel_err_bilinear, 1e-3);
        seeds.push_back(j);
    }
    nlohmann::json out{{"kind", "duffing-benchmark"},
                       {"system", {{"alpha", -1.0}, {"beta", 1.0}, {"delta", 0.0}}},
                       {"x0", {spec.x0[0], spec.x0[1]}},
                       {"m", spec.m},
                       {"edmdc_m", spec.edmdc_m},
                       {"degree", spec.degree},
                       {"seeds", spec.seeds},
                       {"master_seed", spec.master_seed},
                       {"horizon", spec.horizon},
                       {"dt", spec.dt},
                       {"control",
                        {{"kind", spec.zero_control ? "constant" : "random_zoh"},
                         {"segment_duration", spec.segment_duration},
                         {"lower", spec.controls.lower()[0]},
                         {"upper", spec.controls.upper()[0]}}},
                       {"edmdc_sample_interval", spec.edmdc.sample_interval},
                       {"domain_lower", {spec.domain.lower()[0], spec.domain.lower()[1]}},
                       {"domain_upper", {spec.domain.upper()[0], spec.domain.upper()[1]}},
                       {"threshold_crossings", crossings},
                       {"median_bilinear_below_1e-3_until", time_below(r.times, r.median_bilinear, 1e-3)},
                       {"edmdc_diverged_before_1_5", r.edmdc_diverged_before_1_5},
                       {"truth_diverged", r.truth_diverged},
                       {"per_seed", seeds}};
    out["median_edmdc_divergence"] =
        r.median_edmdc_divergence ? nlohmann::json(*r.median_edmdc_divergence) : nlohmann::json(nullptr);
    return out;
}

}  // namespace koopcert
