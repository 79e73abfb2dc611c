#include "koopcert/surrogate.hpp"

#include <cmath>

#include "koopcert/errors.hpp"
#include "koopcert/random.hpp"

namespace koopcert {

BilinearSurrogate::BilinearSurrogate(Dictionary dict, std::vector<Mat> generators, int m,
                                     std::vector<std::uint64_t> seeds)
    : dict_(std::move(dict)), generators_(std::move(generators)), m_(m), seeds_(std::move(seeds)) {
    if (generators_.empty()) throw AssemblyError("surrogate needs at least the zero-control generator");
    for (const auto& g : generators_) {
        if (g.rows() != dict_.size() || g.cols() != dict_.size())
            throw AssemblyError("generator shape does not match the dictionary size " +
                                std::to_string(dict_.size()));
        if (!g.allFinite()) throw AssemblyError("generator has non-finite entries");
        transposed_.push_back(g.transpose());
    }
}

Mat BilinearSurrogate::generator_at(const Vec& u) const {
    if (u.size() != control_dim()) throw UsageError("control has wrong dimension for the surrogate");
    if (!u.allFinite()) throw UsageError("control must be finite");
    Mat out = (1.0 - u.sum()) * generators_.front();
    for (int i = 0; i < control_dim(); ++i)
        out += u[i] * generators_[static_cast<std::size_t>(i + 1)];
    return out;
}

Vec BilinearSurrogate::lifted_rhs(const Vec& z, const Vec& u) const {
    Vec out = (1.0 - u.sum()) * (transposed_.front() * z);
    for (int i = 0; i < control_dim(); ++i)
        out.noalias() += u[i] * (transposed_[static_cast<std::size_t>(i + 1)] * z);
    return out;
}

BilinearSurrogate assemble_surrogate(const Dictionary& dict, const std::vector<EdmdFit>& fits,
                                     std::vector<std::uint64_t> seeds) {
    if (fits.empty()) throw AssemblyError("no fits to assemble");
    const auto nc = static_cast<int>(fits.size()) - 1;
    std::vector<Mat> generators(fits.size());
    std::vector<bool> seen(fits.size(), false);
    int m = fits.front().m;
    for (const auto& fit : fits) {
        if (fit.N != dict.size()) throw AssemblyError("fit dictionary size does not match");
        if (fit.control.size() != nc)
            throw AssemblyError("fit control dimension does not match the number of fits");
        int slot = -1;
        if (fit.control.isZero(0.0)) slot = 0;
        for (int i = 0; i < nc && slot < 0; ++i)
            if (fit.control == Vec::Unit(nc, i)) slot = i + 1;
        if (slot < 0) throw AssemblyError("fit control is neither 0 nor a unit vector");
        if (seen[static_cast<std::size_t>(slot)]) throw AssemblyError("duplicate fit for one control");
        seen[static_cast<std::size_t>(slot)] = true;
        generators[static_cast<std::size_t>(slot)] = fit.L_hat;
        m = std::min(m, fit.m);
    }
    return BilinearSurrogate(dict, std::move(generators), m, std::move(seeds));
}

BilinearSurrogate fit_bilinear(const Dictionary& dict, const ControlAffineSystem& system,
                               const StateDomain& domain, int m, std::uint64_t seed,
                               bool shared_samples, std::vector<EdmdFit>* fits) {
    const int nc = system.control_dim();
    std::vector<EdmdFit> out;
    std::vector<std::uint64_t> seeds;
    std::optional<SampleSet> shared;
    for (int i = 0; i <= nc; ++i) {
        const std::uint64_t sub = derive_seed(seed, shared_samples ? 0 : static_cast<std::uint64_t>(i));
        seeds.push_back(sub);
        const Vec u = basis_control(nc, i);
        if (shared_samples) {
            if (!shared) shared = sample_iid(domain, m, sub);
            out.push_back(build_matrices(dict, system, u, *shared));
        } else {
            out.push_back(build_matrices(dict, system, u, sample_iid(domain, m, sub)));
        }
    }
    BilinearSurrogate s = assemble_surrogate(dict, out, std::move(seeds));
    if (fits) *fits = std::move(out);
    return s;
}

BilinearSurrogate reference_surrogate(const Dictionary& dict, const ControlAffineSystem& system,
                                      const Box& box, int q) {
    const int nc = system.control_dim();
    std::vector<Mat> generators;
    for (int i = 0; i <= nc; ++i) {
        const Vec u = basis_control(nc, i);
        generators.push_back(galerkin_reference(dict, system, u, box, q).matrix);
    }
    return BilinearSurrogate(dict, std::move(generators));
}

Mat surrogate_generator_at(const BilinearSurrogate& s, const Vec& u) { return s.generator_at(u); }

LiftedTrajectory propagate(const BilinearSurrogate& s, const Vec& z0, const ControlSignal& u,
                           double horizon, double dt) {
    if (z0.size() != s.size()) throw UsageError("initial lifted state has wrong dimension");
    if (u.dim() != s.control_dim()) throw UsageError("control signal dimension mismatch");
    const auto grid = time_grid(horizon, dt);
    LiftedTrajectory out;
    out.z.resize(s.size(), static_cast<Eigen::Index>(grid.size()));
    out.times.reserve(grid.size());
    Vec z = z0;
    out.times.push_back(grid[0]);
    out.z.col(0) = z;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double t = grid[k];
        const double h = grid[k + 1] - t;
        const Vec u0 = u.at(t, Side::right);
        const Vec um = u.at(t + 0.5 * h);
        const Vec u1 = u.at(t + h, Side::left);
        const Vec k1 = s.lifted_rhs(z, u0);
        const Vec k2 = s.lifted_rhs(z + 0.5 * h * k1, um);
        const Vec k3 = s.lifted_rhs(z + 0.5 * h * k2, um);
        const Vec k4 = s.lifted_rhs(z + h * k3, u1);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!z.allFinite() || z.norm() > kLiftedBlowup) {
            out.diverged_at = grid[k + 1];
            out.z.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(k + 1));
            return out;
        }
        out.times.push_back(grid[k + 1]);
        out.z.col(static_cast<Eigen::Index>(k + 1)) = z;
    }
    return out;
}

std::vector<ObservableSeries> predict_observables(const BilinearSurrogate& s,
                                                  const std::vector<ObservableCoeffs>& hs,
                                                  const Vec& x0, const ControlSignal& u,
                                                  double horizon, double dt) {
    for (const auto& h : hs)
        if (h.coeffs.size() != s.size())
            throw UsageError("observable coefficients do not match the surrogate dictionary");
    const LiftedTrajectory lifted = propagate(s, s.dictionary().eval(x0), u, horizon, dt);
    std::vector<ObservableSeries> out(hs.size());
    for (std::size_t j = 0; j < hs.size(); ++j) {
        out[j].times = lifted.times;
        out[j].diverged_at = lifted.diverged_at;
        const Vec values = lifted.z.transpose() * hs[j].coeffs;
        out[j].values.assign(values.data(), values.data() + values.size());
    }
    return out;
}

ObservableSeries predict_observable(const BilinearSurrogate& s, const ObservableCoeffs& h,
                                    const Vec& x0, const ControlSignal& u, double horizon,
                                    double dt) {
    return predict_observables(s, {h}, x0, u, horizon, dt).front();
}

EdmdcModel fit_edmdc(const Dictionary& dict, const ControlAffineSystem& system,
                     const StateDomain& domain, const Box& controls, int m, std::uint64_t seed,
                     const EdmdcOptions& options) {
    if (m < 1) throw UsageError("m must be >= 1");
    if (!(options.sample_interval > 0.0)) throw UsageError("sample interval must be > 0");
    if (options.integration_substeps < 1) throw UsageError("integration substeps must be >= 1");
    const int nc = system.control_dim();
    if (controls.dim() != nc) throw UsageError("control box dimension mismatch");
    const int N = dict.size();

    const SampleSet xs = sample_iid(domain, m, derive_seed(seed, 0));
    Rng urng(derive_seed(seed, 1));
    Mat Z(N + nc, m), Y(N, m);
    const double step = options.sample_interval / options.integration_substeps;
    for (int k = 0; k < m; ++k) {
        const Vec x = xs.points.col(k);
        const Vec uk = uniform_in(urng, controls);
        const Trajectory flow =
            integrate(system, x, ControlSignal::constant(uk), options.sample_interval, step);
        Z.col(k).head(N) = dict.eval(x);
        Z.col(k).tail(nc) = uk;
        Y.col(k) = dict.eval(flow.state(flow.size() - 1));
    }
    // G Z = Y in the least-squares, minimum-norm sense: Z^T G^T = Y^T
    const Eigen::CompleteOrthogonalDecomposition<Mat> cod(Z.transpose());
    const Eigen::CompleteOrthogonalDecomposition<Mat> state_part(Z.topRows(N).transpose());
    if (state_part.rank() < N)
        throw RankDeficiencyError("eDMDc regression is rank deficient (rank " +
                                  std::to_string(state_part.rank()) + " < N = " +
                                  std::to_string(N) + "); use more data or a smaller dictionary");
    const Mat G = cod.solve(Y.transpose()).transpose();
    EdmdcModel model;
    model.A = G.leftCols(N);
    model.B = G.rightCols(nc);
    model.sample_interval = options.sample_interval;
    model.residual = (Y - G * Z).norm();
    model.m = m;
    return model;
}

ObservableSeries predict_edmdc(const EdmdcModel& model, const Dictionary& dict,
                               const ObservableCoeffs& h, const Vec& x0, const ControlSignal& u,
                               double horizon, double dt) {
    if (h.coeffs.size() != dict.size()) throw UsageError("observable coefficients do not match");
    if (u.dim() != model.B.cols()) throw UsageError("control signal dimension mismatch");
    const auto grid = time_grid(horizon, dt);
    const double step = model.sample_interval;
    const auto coarse = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));

    std::vector<double> nodes{h.coeffs.dot(dict.eval(x0))};
    std::optional<std::size_t> diverged;
    Vec z = dict.eval(x0);
    for (std::size_t k = 0; k < coarse; ++k) {
        z = model.A * z + model.B * u.at(static_cast<double>(k) * step);
        if (!z.allFinite() || z.norm() > kLiftedBlowup) {
            diverged = k + 1;
            break;
        }
        nodes.push_back(h.coeffs.dot(z));
    }

    ObservableSeries out;
    for (double t : grid) {
        const double s = t / step;
        auto i = static_cast<std::size_t>(std::floor(s + 1e-9));
        double frac = s - static_cast<double>(i);
        if (frac < 1e-9) frac = 0.0;
        if (i >= nodes.size() || (frac > 0.0 && i + 1 >= nodes.size())) break;
        const double v = frac == 0.0 ? nodes[i] : (1.0 - frac) * nodes[i] + frac * nodes[i + 1];
        out.times.push_back(t);
        out.values.push_back(v);
    }
    if (diverged) out.diverged_at = static_cast<double>(*diverged) * step;
    return out;
}

}  // namespace koopcert
