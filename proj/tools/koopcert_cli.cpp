// koopcert: fit, predict and certify bilinear Koopman-generator surrogates.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "koopcert/certify.hpp"
#include "koopcert/config.hpp"
#include "koopcert/errors.hpp"
#include "koopcert/experiments.hpp"
#include "koopcert/io.hpp"
#include "koopcert/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace koopcert;

namespace {

// console numbers; files keep round-trip precision
std::string brief(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

enum Exit { kOk = 0, kRejected = 1, kUsage = 2, kNumerical = 3 };

struct Options {
    std::string config;
    std::string out;
    std::string surrogate;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool no_edmdc = false;
    bool resume = false;
};

RunConfig load(const Options& opt, bool required = true) {
    if (opt.config.empty() && required) throw UsageError("--config is required");
    RunConfig cfg = opt.config.empty() ? parse_config("{}") : load_config(opt.config);
    if (opt.seed) override_seed(cfg, *opt.seed);
    if (!opt.out.empty()) cfg.output.directory = opt.out;
    if (opt.no_edmdc) cfg.with_edmdc = false;
    fs::create_directories(cfg.output.directory);
    return cfg;
}

std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
    const fs::path p = fs::path(cfg.output.directory) / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw UsageError("cannot write '" + p.string() + "'");
    return os;
}

void write_json(const RunConfig& cfg, const std::string& name, const json& j) {
    auto os = open_out(cfg, name);
    os << j.dump(2) << '\n';
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string control_name(int i) { return i == 0 ? "0" : "e" + std::to_string(i); }
std::string generator_file(int i) { return i == 0 ? "L0.csv" : "L_e" + std::to_string(i) + ".csv"; }

// ---------------------------------------------------------------------------

int cmd_fit(const Options& opt) {
    const RunConfig cfg = load(opt);
    const auto system = cfg.system();
    const auto dict = cfg.dictionary_for();
    std::vector<EdmdFit> fits;
    const BilinearSurrogate s =
        fit_bilinear(dict, system, cfg.domain(), cfg.data.m, cfg.data.seed, cfg.data.shared_samples, &fits);
    const std::string hash = cfg.hash();

    json gens = json::array();
    for (int i = 0; i <= system.control_dim(); ++i) {
        const auto& fit = fits[static_cast<std::size_t>(i)];
        GeneratorMatrix g{fit.L_hat, {Provenance::Kind::empirical, fit.m, s.seeds()[static_cast<std::size_t>(i)], 0}};
        auto os = open_out(cfg, generator_file(i));
        write_generator_csv(os, g, "control=" + control_name(i) + " config_hash=" + hash);
        gens.push_back({{"control", control_name(i)},
                        {"file", generator_file(i)},
                        {"seed", s.seeds()[static_cast<std::size_t>(i)]},
                        {"condition", fit.condition},
                        {"residual", fit.residual}});
        std::cout << "L^" << control_name(i) << ": cond(C) = " << brief(fit.condition)
                  << ", residual = " << brief(fit.residual) << '\n';
    }
    write_json(cfg, "surrogate.json",
               {{"config_hash", hash},
                {"N", dict.size()},
                {"dictionary_kind", to_string(dict.kind())},
                {"labels", dict.labels()},
                {"m", cfg.data.m},
                {"seed", cfg.data.seed},
                {"shared_samples", cfg.data.shared_samples},
                {"generators", gens}});
    std::cout << "wrote " << (fs::path(cfg.output.directory) / "surrogate.json").string() << " (N = " << dict.size()
              << ")\n";
    return kOk;
}

BilinearSurrogate load_surrogate(const Options& opt, const RunConfig& cfg) {
    fs::path path = opt.surrogate.empty() ? fs::path(cfg.output.directory) / "surrogate.json" : fs::path(opt.surrogate);
    if (fs::is_directory(path)) path /= "surrogate.json";
    std::ifstream in(path);
    if (!in) throw UsageError("surrogate manifest '" + path.string() + "' not found");
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError("surrogate manifest '" + path.string() + "': " + e.what());
    }
    const auto dict = cfg.dictionary_for();
    try {
        if (manifest.at("labels").get<std::vector<std::string>>() != dict.labels())
            throw UsageError("surrogate manifest '" + path.string() + "' was fitted on a different dictionary");
        std::vector<Mat> generators;
        std::vector<std::uint64_t> seeds;
        for (const auto& g : manifest.at("generators")) {
            const fs::path file = path.parent_path() / g.at("file").get<std::string>();
            std::ifstream gin(file);
            if (!gin) throw UsageError("generator file '" + file.string() + "' not found");
            generators.push_back(read_generator_csv(gin).matrix);
            seeds.push_back(g.at("seed").get<std::uint64_t>());
        }
        if (static_cast<int>(generators.size()) != cfg.system().control_dim() + 1)
            throw UsageError("surrogate manifest lists " + std::to_string(generators.size()) +
                             " generators, the system needs " + std::to_string(cfg.system().control_dim() + 1));
        return BilinearSurrogate(dict, std::move(generators), manifest.at("m").get<int>(), std::move(seeds));
    } catch (const json::exception& e) {
        throw UsageError("surrogate manifest '" + path.string() + "': " + e.what());
    }
}

ObservableCoeffs coeffs_for(const Dictionary& dict, const ScalarObservable& h, const RunConfig& cfg) {
    if (const auto idx = dict.index_of(h.label)) return unit_coeffs(dict, *idx);
    return project(dict, h.value, cfg.box(), cfg.data.quadrature_order);
}

int cmd_predict(const Options& opt) {
    const RunConfig cfg = load(opt);
    const BilinearSurrogate s = load_surrogate(opt, cfg);
    const auto system = cfg.system();
    const auto h = cfg.observable();
    const auto coeffs = coeffs_for(s.dictionary(), h, cfg);
    const auto u = cfg.control();
    const Vec x0 = cfg.x0();
    const double T = cfg.scenario.horizon, dt = cfg.scenario.dt;

    const Trajectory truth = integrate_until_divergence(system, x0, u, T, dt);
    const ObservableSeries bil = predict_observable(s, coeffs, x0, u, T, dt);
    std::optional<ObservableSeries> edmdc;
    if (cfg.with_edmdc && system.control_dim() > 0) {
        try {
            const EdmdcModel model = fit_edmdc(s.dictionary(), system, cfg.domain(), cfg.scenario.control.bounds(),
                                               cfg.edmdc_m, derive_seed(cfg.data.seed, 3), cfg.edmdc);
            edmdc = predict_edmdc(model, s.dictionary(), coeffs, x0, u, T, dt);
        } catch (const RankDeficiencyError& e) {
            std::cerr << "warning: eDMDc baseline unavailable: " << e.what() << '\n';
            edmdc = ObservableSeries{{}, {}, 0.0};
        }
    }
    const bool with_edmdc = edmdc.has_value();

    const auto times = time_grid(T, dt);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> h_true(times.size(), nan);
    double scale = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        h_true[k] = h.value(truth.state(k));
        scale = std::max(scale, std::abs(h_true[k]));
    }
    if (scale == 0.0) scale = 1.0;
    auto at = [&](const ObservableSeries& series, std::size_t k) { return k < series.values.size() ? series.values[k] : nan; };
    auto rel = [&](double pred, double tru) {
        return std::isfinite(pred) && std::isfinite(tru) ? std::abs(pred - tru) / scale
                                                         : std::numeric_limits<double>::infinity();
    };

    std::vector<std::string> header{"t", "h_true", "h_bilinear"};
    if (with_edmdc) header.push_back("h_edmdc");
    header.push_back("rel_err_bilinear");
    if (with_edmdc) header.push_back("rel_err_edmdc");
    const std::string hash = cfg.hash();
    io::SvgPlot plot{"prediction of " + h.label, "t", "relative error", false, true, {}};
    plot.series.push_back({"bilinear", {}, {}});
    if (with_edmdc) plot.series.push_back({"eDMDc", {}, {}});
    {
        auto os = open_out(cfg, "prediction.csv");
        io::CsvWriter csv(os, header, hash);
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double hb = at(bil, k);
            std::vector<std::string> row{io::fmt(times[k]), io::fmt(h_true[k]), io::fmt(hb)};
            if (with_edmdc) row.push_back(io::fmt(at(*edmdc, k)));
            row.push_back(io::fmt(rel(hb, h_true[k])));
            plot.series[0].x.push_back(times[k]);
            plot.series[0].y.push_back(rel(hb, h_true[k]));
            if (with_edmdc) {
                row.push_back(io::fmt(rel(at(*edmdc, k), h_true[k])));
                plot.series[1].x.push_back(times[k]);
                plot.series[1].y.push_back(rel(at(*edmdc, k), h_true[k]));
            }
            csv.row(row);
        }
    }
    if (cfg.output.svg) {
        auto os = open_out(cfg, "prediction.svg");
        io::write_svg(os, plot, hash);
    }
    if (truth.diverged_at) std::cout << "true trajectory diverged at t = " << brief(*truth.diverged_at) << '\n';
    if (bil.diverged_at) std::cout << "bilinear prediction diverged at t = " << brief(*bil.diverged_at) << '\n';
    if (with_edmdc && edmdc->diverged_at)
        std::cout << "eDMDc prediction diverged at t = " << brief(*edmdc->diverged_at) << '\n';
    std::cout << "wrote " << times.size() << " rows to "
              << (fs::path(cfg.output.directory) / "prediction.csv").string() << '\n';
    return kOk;
}

json certificate_json(const Certificate& c, const std::string& hash) {
    json verdicts = json::array();
    for (const auto& v : c.verdicts) {
        json j{{"label", v.label},
               {"verdict", to_string(v.verdict)},
               {"worst_margin", v.worst_margin},
               {"first_failure_time", opt_json(v.first_failure_time)},
               {"failure_margin", opt_json(v.failure_margin)},
               {"exact_representation", v.exact_representation},
               {"projection_residual", v.projection_residual}};
        if (!v.reason.empty()) j["reason"] = v.reason;
        verdicts.push_back(j);
    }
    return {{"config_hash", hash},
            {"all_certified", c.all_certified()},
            {"epsilon", c.epsilon},
            {"delta", c.delta},
            {"grid", {{"dt_check", c.dt_check}, {"horizon", c.horizon}, {"points", c.grid_points}}},
            {"provenance", {{"m", c.m}, {"N", c.N}, {"seeds", c.seeds}, {"dictionary_kind", c.dictionary_kind}}},
            {"verdicts", verdicts}};
}

int cmd_certify(const Options& opt) {
    const RunConfig cfg = load(opt);
    if (cfg.scenario.constraints.empty()) throw UsageError("scenario.constraints: at least one constraint is required");
    const BilinearSurrogate s = load_surrogate(opt, cfg);
    const ConstraintSet cs(cfg.constraints());
    cs.check_gradients(cfg.box(), 20, cfg.data.seed);
    const auto coeffs = constraint_coeffs(s.dictionary(), cs, cfg.box(), cfg.data.quadrature_order);
    const Certificate cert = certify(s, cs, coeffs, cfg.x0(), cfg.control(), cfg.certification);
    write_json(cfg, "certificate.json", certificate_json(cert, cfg.hash()));
    for (const auto& v : cert.verdicts) {
        std::cout << v.label << ": " << to_string(v.verdict) << " (worst margin " << brief(v.worst_margin) << ")";
        if (v.first_failure_time) std::cout << ", first failure at t = " << brief(*v.first_failure_time);
        std::cout << '\n';
    }
    return cert.all_certified() ? kOk : kRejected;
}

// ---------------------------------------------------------------------------
// Sweeps

// Completed cells are appended to cells.jsonl; --resume reloads them so only
// missing cells are recomputed.
class CellLog {
public:
    CellLog(const RunConfig& cfg, bool resume) : path_(fs::path(cfg.output.directory) / "cells.jsonl") {
        const std::string hash = cfg.hash();
        if (resume) {
            std::ifstream in(path_);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                json j;
                try {
                    j = json::parse(line);
                } catch (const json::parse_error&) {
                    break;  // torn final line from an interrupted run
                }
                if (j.value("config_hash", "") != hash) continue;
                store_.completed[j.at("key").get<std::string>()] = j.at("cell");
            }
        }
        out_.open(path_, resume ? std::ios::app : std::ios::trunc);
        if (!out_) throw UsageError("cannot write '" + path_.string() + "'");
        store_.on_complete = [this, hash](const std::string& key, const json& cell) {
            out_ << json{{"config_hash", hash}, {"key", key}, {"cell", cell}}.dump() << '\n';
            out_.flush();
        };
    }
    CellStore* store() { return &store_; }
    std::size_t reused() const { return store_.completed.size(); }

private:
    fs::path path_;
    std::ofstream out_;
    CellStore store_;
};

Scenario scenario_of(const RunConfig& cfg) {
    return Scenario{cfg.system(),        cfg.domain(),           cfg.dictionary_for(),     cfg.x0(),
                    cfg.scenario.horizon, cfg.scenario.dt,       cfg.data.quadrature_order, cfg.data.shared_samples};
}

SweepSpec sweep_spec(const RunConfig& cfg) {
    SweepSpec spec{scenario_of(cfg), cfg.data.m_values, cfg.data.trials, cfg.data.seed, cfg.sweep.epsilons};
    return spec;
}

DuffingBenchmarkSpec benchmark_spec(const RunConfig& cfg) {
    if (cfg.scenario.system.name != "duffing") throw UsageError("scenario.system.name: the benchmark needs duffing");
    DuffingBenchmarkSpec spec;
    spec.m = cfg.data.m;
    spec.edmdc_m = cfg.edmdc_m;
    spec.degree = cfg.dictionary.degree;
    spec.seeds = cfg.sweep.seeds;
    spec.master_seed = cfg.data.seed;
    spec.horizon = cfg.scenario.horizon;
    spec.dt = cfg.scenario.dt;
    spec.segment_duration = cfg.scenario.control.segment_duration;
    spec.domain = cfg.box();
    spec.controls = cfg.scenario.control.bounds();
    spec.x0 = cfg.x0();
    spec.edmdc = cfg.edmdc;
    spec.with_edmdc = cfg.with_edmdc;
    const auto& c = cfg.scenario.control;
    if (c.kind == "constant") {
        if (std::any_of(c.value.begin(), c.value.end(), [](double v) { return v != 0.0; }))
            throw UsageError("scenario.control: the benchmark supports random_zoh or the zero constant");
        spec.zero_control = true;
    } else if (c.kind != "random_zoh") {
        throw UsageError("scenario.control.kind: the benchmark supports random_zoh or the zero constant");
    }
    return spec;
}

void finish_summary(const RunConfig& cfg, json summary, const std::string& name) {
    summary["config_hash"] = cfg.hash();
    summary["generated_at"] = timestamp();
    write_json(cfg, name, summary);
}

void write_plot(const RunConfig& cfg, const std::string& name, const io::SvgPlot& plot) {
    if (!cfg.output.svg) return;
    auto os = open_out(cfg, name);
    io::write_svg(os, plot, cfg.hash());
}

int run_benchmark(const RunConfig& cfg) {
    const auto spec = benchmark_spec(cfg);
    const auto r = run_duffing_benchmark(spec);
    {
        auto os = open_out(cfg, "benchmark.csv");
        write_benchmark_csv(os, r, spec.with_edmdc, cfg.hash());
    }
    const json summary = benchmark_summary(r, spec);
    finish_summary(cfg, summary, "benchmark_summary.json");
    io::SvgPlot plot{"Duffing benchmark: median relative error of x1", "t", "relative error", false, true, {}};
    plot.series.push_back({"bilinear", r.times, r.median_bilinear});
    if (spec.with_edmdc) plot.series.push_back({"eDMDc", r.times, r.median_edmdc});
    write_plot(cfg, "benchmark.svg", plot);
    for (const auto& c : r.crossings) {
        std::cout << "median error exceeds " << brief(c.threshold) << ": bilinear "
                  << (c.bilinear ? "at t = " + brief(*c.bilinear) : std::string("never"));
        if (spec.with_edmdc) std::cout << ", eDMDc " << (c.edmdc ? "at t = " + brief(*c.edmdc) : std::string("never"));
        std::cout << '\n';
    }
    if (spec.with_edmdc)
        std::cout << "eDMDc diverged before t = 1.5 in " << r.edmdc_diverged_before_1_5 << " of " << spec.seeds
                  << " seeds\n";
    return kOk;
}

int cmd_sweep(const Options& opt) {
    const RunConfig cfg = load(opt);
    const std::string hash = cfg.hash();
    const std::string& kind = cfg.sweep.kind;
    if (kind == "duffing-benchmark") return run_benchmark(cfg);

    CellLog log(cfg, opt.resume);
    if (log.reused()) std::cout << "resuming: " << log.reused() << " cells already complete\n";

    if (kind == "generator") {
        const auto spec = sweep_spec(cfg);
        const auto r = run_generator_sweep(spec, log.store());
        {
            auto os = open_out(cfg, "sweep_generator.csv");
            write_generator_sweep_csv(os, r, hash);
        }
        finish_summary(cfg, generator_sweep_summary(r, spec), "summary.json");
        io::SvgPlot plot{"generator error vs m", "m", "median Frobenius error", true, true, {}};
        const std::vector<double> ms(spec.m_values.begin(), spec.m_values.end());
        for (std::size_t c = 0; c < r.median_error.size(); ++c)
            plot.series.push_back({"u = " + control_name(static_cast<int>(c)), ms, r.median_error[c]});
        write_plot(cfg, "sweep_generator.svg", plot);
        std::cout << "log-log slope of the median max error: " << brief(r.slope_max) << '\n';
    } else if (kind == "trajectory") {
        const auto spec = sweep_spec(cfg);
        const auto r = run_trajectory_sweep(spec, cfg.control(), log.store());
        {
            auto os = open_out(cfg, "sweep_trajectory.csv");
            write_trajectory_sweep_csv(os, r, hash);
        }
        finish_summary(cfg, trajectory_sweep_summary(r, spec), "summary.json");
        io::SvgPlot plot{"lifted trajectory error vs m", "m", "median max_t |z - z~|", true, true, {}};
        plot.series.push_back({"median", {spec.m_values.begin(), spec.m_values.end()}, r.median_max_error});
        write_plot(cfg, "sweep_trajectory.svg", plot);
    } else if (kind == "fem") {
        if (cfg.scenario.x0.size() > 2) throw UsageError("scenario: finite-element sweeps need d <= 2");
        FemSweepSpec spec{cfg.system(),
                          cfg.box(),
                          cfg.constraints(),
                          cfg.observable(),
                          cfg.sweep.mesh_sizes,
                          cfg.sweep.m_rule,
                          cfg.sweep.sampled_trials,
                          cfg.data.seed,
                          cfg.x0(),
                          cfg.control(),
                          cfg.scenario.horizon,
                          cfg.scenario.dt,
                          cfg.data.quadrature_order,
                          cfg.data.shared_samples};
        const auto r = run_fem_sweep(spec, log.store());
        {
            auto os = open_out(cfg, "sweep_fem.csv");
            write_fem_sweep_csv(os, r, hash);
        }
        finish_summary(cfg, fem_sweep_summary(r), "summary.json");
        io::SvgPlot plot{"prediction error vs mesh size", "mesh size", "sup error", true, true, {}};
        io::SvgSeries quad{"quadrature fit", {}, {}}, sampled{"sampled fit (median)", {}, {}};
        for (const auto& l : r.levels) {
            quad.x.push_back(l.mesh_size);
            quad.y.push_back(l.quadrature_error);
            sampled.x.push_back(l.mesh_size);
            sampled.y.push_back(l.median_sampled_error);
        }
        plot.series = {quad, sampled};
        write_plot(cfg, "sweep_fem.svg", plot);
        for (std::size_t i = 0; i < r.reduction_factors.size(); ++i)
            std::cout << "mesh " << r.levels[i].mesh_size << " -> " << r.levels[i + 1].mesh_size
                      << ": error reduced by " << brief(r.reduction_factors[i]) << '\n';
    } else {  // soundness
        if (cfg.scenario.constraints.empty()) throw UsageError("scenario.constraints: soundness sweeps need constraints");
        CertificationScenario sc{cfg.system(), cfg.domain(), cfg.dictionary_for(), ConstraintSet(cfg.constraints()),
                                 cfg.x0(),     cfg.control(), cfg.data.m,          cfg.data.shared_samples,
                                 cfg.data.quadrature_order};
        const auto r = soundness_trial(sc, cfg.data.trials, cfg.certification, cfg.data.seed);
        {
            auto os = open_out(cfg, "sweep_soundness.csv");
            io::CsvWriter csv(os,
                              {"trial", "seed", "fit_failed", "certified", "truth_violated", "uniformly_close",
                               "implication_holds", "max_abs_error"},
                              hash);
            for (const auto& row : r.rows)
                csv.row({std::to_string(row.trial), std::to_string(row.seed), row.fit_failed ? "1" : "0",
                         row.certified ? "1" : "0", row.truth_violated ? "1" : "0", row.uniformly_close ? "1" : "0",
                         row.implication_holds ? "1" : "0", io::fmt(row.max_abs_error)});
        }
        const auto close = wilson_interval(r.close, r.trials);
        finish_summary(cfg,
                       {{"kind", "soundness"},
                        {"trials", r.trials},
                        {"unsound", r.unsound},
                        {"uniformly_close", r.close},
                        {"closeness_wilson_lower", close.lower},
                        {"closeness_wilson_upper", close.upper},
                        {"implication_holds", r.implication_holds},
                        {"fit_failures", r.fit_failures},
                        {"epsilon", cfg.certification.epsilon},
                        {"delta", cfg.certification.delta}},
                       "summary.json");
        std::cout << "unsound trials: " << r.unsound << " of " << r.trials << '\n';
    }
    std::cout << "wrote sweep outputs to " << cfg.output.directory << '\n';
    return kOk;
}

int cmd_duffing_bench(const Options& opt) { return run_benchmark(load(opt, false)); }

void apply_threads(int threads) {
    if (threads <= 0) {
        if (const char* env = std::getenv("KOOPMAN_CERTIFY_THREADS")) {
            try {
                threads = std::stoi(env);
            } catch (const std::exception&) {
                throw UsageError("KOOPMAN_CERTIFY_THREADS must be a positive integer");
            }
            if (threads <= 0) throw UsageError("KOOPMAN_CERTIFY_THREADS must be a positive integer");
        }
    }
    if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven bilinear Koopman surrogates with certified constraint satisfaction"};
    app.require_subcommand(1);
    Options opt;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub, bool surrogate) {
        sub->add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory (overrides output.directory)");
        sub->add_option("--seed", seed, "master seed (overrides data.seed)");
        sub->add_option("--threads", opt.threads, "worker threads (default: KOOPMAN_CERTIFY_THREADS or all cores)")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--no-edmdc", opt.no_edmdc, "skip the eDMDc baseline");
        sub->add_flag("--resume", opt.resume, "reuse completed sweep cells from the output directory");
        if (surrogate) sub->add_option("--surrogate", opt.surrogate, "surrogate manifest (default: <out>/surrogate.json)");
    };
    auto* fit = app.add_subcommand("fit", "fit the bilinear surrogate and write generator matrices");
    auto* predict = app.add_subcommand("predict", "predict an observable with the surrogate and the eDMDc baseline");
    auto* cert = app.add_subcommand("certify", "check tightened constraints along the surrogate prediction");
    auto* sweep = app.add_subcommand("sweep", "run a Monte-Carlo sweep");
    auto* bench = app.add_subcommand("duffing-bench", "bilinear surrogate vs eDMDc on the controlled Duffing oscillator");
    add_common(fit, false);
    add_common(predict, true);
    add_common(cert, true);
    add_common(sweep, false);
    add_common(bench, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        for (auto* sub : {fit, predict, cert, sweep, bench})
            if (sub->parsed() && sub->count("--seed")) opt.seed = seed;
        apply_threads(opt.threads);
        if (fit->parsed()) return cmd_fit(opt);
        if (predict->parsed()) return cmd_predict(opt);
        if (cert->parsed()) return cmd_certify(opt);
        if (sweep->parsed()) return cmd_sweep(opt);
        return cmd_duffing_bench(opt);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
}
