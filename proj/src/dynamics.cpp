#include "koopcert/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "koopcert/errors.hpp"
#include "koopcert/random.hpp"

namespace koopcert {

Box::Box(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size() || lower_.size() == 0)
        throw UsageError("box bounds must be non-empty and of equal dimension");
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
        if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(upper_[i] > lower_[i])) {
            std::ostringstream msg;
            msg << "box axis " << i << " must satisfy lower < upper (got [" << lower_[i] << ", "
                << upper_[i] << "])";
            throw UsageError(msg.str());
        }
    }
}

bool Box::contains(const Vec& x) const {
    if (x.size() != lower_.size()) return false;
    return ((x - lower_).array() >= 0.0).all() && ((upper_ - x).array() >= 0.0).all();
}

double Box::excess(const Vec& x) const {
    return std::max((lower_ - x).maxCoeff(), (x - upper_).maxCoeff());
}

Box symmetric_box(int dim, double half_width) {
    return Box(Vec::Constant(dim, -half_width), Vec::Constant(dim, half_width));
}

ControlAffineSystem::ControlAffineSystem(std::string name, int state_dim, VectorField drift,
                                         std::vector<VectorField> control_fields)
    : name_(std::move(name)),
      state_dim_(state_dim),
      drift_(std::move(drift)),
      control_fields_(std::move(control_fields)) {
    if (state_dim_ < 1) throw UsageError("state dimension must be >= 1");
    if (!drift_) throw UsageError("drift vector field is required");
    for (const auto& g : control_fields_)
        if (!g) throw UsageError("control vector fields must be callable");
}

VectorField ControlAffineSystem::frozen(const Vec& u) const {
    if (u.size() != control_dim()) throw UsageError("frozen control has wrong dimension");
    return [self = *this, u](const Vec& x) {
        Vec v = self.drift(x);
        for (int i = 0; i < self.control_dim(); ++i) v += self.control_field(i, x) * u[i];
        return v;
    };
}

ControlAffineSystem duffing(double alpha, double beta, double delta) {
    auto drift = [alpha, delta](const Vec& x) {
        Vec v(2);
        v << x[1], -delta * x[1] - alpha * x[0];
        return v;
    };
    auto g = [beta](const Vec& x) {
        Vec v(2);
        v << 0.0, -2.0 * beta * x[0] * x[0] * x[0];
        return v;
    };
    return ControlAffineSystem("duffing", 2, drift, {g});
}

ControlAffineSystem linear_scalar(double a, std::optional<double> b) {
    auto drift = [a](const Vec& x) { return Vec::Constant(1, a * x[0]); };
    std::vector<VectorField> fields;
    if (b) fields.push_back([bv = *b](const Vec&) { return Vec::Constant(1, bv); });
    return ControlAffineSystem("linear", 1, drift, std::move(fields));
}

void check_finite_on(const ControlAffineSystem& system, const Box& box, int samples,
                     std::uint64_t seed) {
    Rng rng(seed);
    for (int s = 0; s < samples; ++s) {
        const Vec x = uniform_in(rng, box);
        if (!system.drift(x).allFinite())
            throw NumericalError("drift of '" + system.name() + "' is not finite on the box");
        for (int i = 0; i < system.control_dim(); ++i)
            if (!system.control_field(i, x).allFinite())
                throw NumericalError("control field " + std::to_string(i) + " of '" +
                                     system.name() + "' is not finite on the box");
    }
}

Vec eval_rhs(const ControlAffineSystem& system, const Vec& x, const Vec& u) {
    if (x.size() != system.state_dim())
        throw UsageError("state has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(system.state_dim()));
    if (u.size() != system.control_dim())
        throw UsageError("control has dimension " + std::to_string(u.size()) + ", expected " +
                         std::to_string(system.control_dim()));
    Vec v = system.drift(x);
    for (int i = 0; i < system.control_dim(); ++i) v += system.control_field(i, x) * u[i];
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            throw NumericalError("right-hand side coordinate " + std::to_string(i) +
                                 " is not finite");
    return v;
}

Vec basis_control(int control_dim, int index) {
    if (index < 0 || index > control_dim) throw UsageError("basis control index out of range");
    Vec u = Vec::Zero(control_dim);
    if (index > 0) u[index - 1] = 1.0;
    return u;
}

namespace {

void check_in_bounds(const Vec& v, const std::optional<Box>& bounds) {
    if (!bounds) return;
    if (v.size() != bounds->dim()) throw UsageError("control value dimension mismatch");
    if (!bounds->contains(v)) throw UsageError("control value outside the admissible box");
}

}  // namespace

ControlSignal::ControlSignal() = default;

ControlSignal ControlSignal::constant(Vec value, std::optional<Box> bounds) {
    check_in_bounds(value, bounds);
    ControlSignal s;
    s.kind_ = Kind::constant;
    s.dim_ = static_cast<int>(value.size());
    s.values_ = {std::move(value)};
    s.bounds_ = std::move(bounds);
    return s;
}

ControlSignal ControlSignal::zoh(std::vector<Vec> values, double segment_duration,
                                 std::optional<Box> bounds) {
    if (!(segment_duration > 0.0)) throw UsageError("segment_duration must be > 0");
    if (values.empty()) throw UsageError("zero-order hold needs at least one segment");
    const auto dim = values.front().size();
    for (const auto& v : values) {
        if (v.size() != dim) throw UsageError("zero-order hold segments differ in dimension");
        check_in_bounds(v, bounds);
    }
    ControlSignal s;
    s.kind_ = Kind::zoh;
    s.dim_ = static_cast<int>(dim);
    s.values_ = std::move(values);
    s.segment_duration_ = segment_duration;
    s.bounds_ = std::move(bounds);
    return s;
}

ControlSignal ControlSignal::callable(std::function<Vec(double)> fn, int dim,
                                      std::optional<Box> bounds) {
    if (!fn) throw UsageError("callable control must be set");
    ControlSignal s;
    s.kind_ = Kind::callable;
    s.dim_ = dim;
    s.fn_ = std::move(fn);
    s.bounds_ = std::move(bounds);
    return s;
}

Vec ControlSignal::at(double t, Side side) const {
    switch (kind_) {
        case Kind::constant:
            return values_.empty() ? Vec(0) : values_.front();
        case Kind::callable: {
            Vec v = fn_(t);
            if (v.size() != dim_) throw UsageError("callable control returned wrong dimension");
            check_in_bounds(v, bounds_);
            return v;
        }
        case Kind::zoh: {
            const double s = t / segment_duration_;
            const double nearest = std::round(s);
            long k;
            if (std::abs(s - nearest) < 1e-9)
                k = static_cast<long>(nearest) - (side == Side::left ? 1 : 0);
            else
                k = static_cast<long>(std::floor(s));
            const long last = static_cast<long>(values_.size()) - 1;
            k = std::clamp(k, 0L, last);
            return values_[static_cast<std::size_t>(k)];
        }
    }
    return Vec(0);
}

ControlSignal random_zoh(const Box& bounds, double segment_duration, double horizon,
                         std::uint64_t seed) {
    if (!(segment_duration > 0.0)) throw UsageError("segment_duration must be > 0");
    const auto segments =
        static_cast<std::size_t>(std::max(1.0, std::ceil(horizon / segment_duration - 1e-9)));
    Rng rng(seed);
    std::vector<Vec> values;
    values.reserve(segments);
    for (std::size_t k = 0; k < segments; ++k) values.push_back(uniform_in(rng, bounds));
    return ControlSignal::zoh(std::move(values), segment_duration, bounds);
}

bool StateDomain::contains(const Vec& x) const {
    if (!box.contains(x)) return false;
    for (const auto& h : constraints)
        if (h.value(x) > 0.0) return false;
    return true;
}

std::vector<double> time_grid(double horizon, double dt) {
    if (!(dt > 0.0)) throw UsageError("dt must be > 0");
    if (!(horizon >= dt)) throw UsageError("horizon T must be >= dt");
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    std::vector<double> times(steps + 1);
    for (std::size_t k = 0; k < steps; ++k) times[k] = static_cast<double>(k) * dt;
    times[steps] = horizon;
    return times;
}

Trajectory integrate_until_divergence(const ControlAffineSystem& system, const Vec& x0,
                                      const ControlSignal& u, double horizon, double dt,
                                      double blowup) {
    if (x0.size() != system.state_dim()) throw UsageError("initial state dimension mismatch");
    if (u.dim() != system.control_dim()) throw UsageError("control signal dimension mismatch");
    const auto grid = time_grid(horizon, dt);
    const auto n = static_cast<Eigen::Index>(grid.size());
    const int nc = system.control_dim();

    auto rhs = [&](const Vec& x, const Vec& uv) {
        Vec v = system.drift(x);
        for (int i = 0; i < nc; ++i) v += system.control_field(i, x) * uv[i];
        return v;
    };

    Trajectory traj;
    traj.states.resize(system.state_dim(), n);
    traj.controls.resize(nc, n);
    traj.times.reserve(grid.size());
    Vec x = x0;
    traj.times.push_back(grid[0]);
    traj.states.col(0) = x;
    traj.controls.col(0) = u.at(grid[0]);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        const double t = grid[static_cast<std::size_t>(k)];
        const double h = grid[static_cast<std::size_t>(k + 1)] - t;
        const Vec u0 = u.at(t, Side::right);
        const Vec um = u.at(t + 0.5 * h);
        const Vec u1 = u.at(t + h, Side::left);
        const Vec k1 = rhs(x, u0);
        const Vec k2 = rhs(x + 0.5 * h * k1, um);
        const Vec k3 = rhs(x + 0.5 * h * k2, um);
        const Vec k4 = rhs(x + h * k3, u1);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double tn = grid[static_cast<std::size_t>(k + 1)];
        if (!x.allFinite() || x.norm() > blowup) {
            traj.diverged_at = tn;
            traj.states.conservativeResize(Eigen::NoChange, k + 1);
            traj.controls.conservativeResize(Eigen::NoChange, k + 1);
            return traj;
        }
        traj.times.push_back(tn);
        traj.states.col(k + 1) = x;
        traj.controls.col(k + 1) = u.at(tn);
    }
    return traj;
}

Trajectory integrate(const ControlAffineSystem& system, const Vec& x0, const ControlSignal& u,
                     double horizon, double dt, double blowup) {
    auto traj = integrate_until_divergence(system, x0, u, horizon, dt, blowup);
    if (traj.diverged_at) {
        std::ostringstream msg;
        msg << "trajectory of '" << system.name() << "' left the ball of radius " << blowup
            << " at t = " << *traj.diverged_at;
        throw DivergenceError(msg.str(), *traj.diverged_at);
    }
    return traj;
}

DomainReport check_domain(const Trajectory& traj, const StateDomain& domain) {
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const Vec x = traj.state(k);
        for (std::size_t j = 0; j < domain.constraints.size(); ++j) {
            const double v = domain.constraints[j].value(x);
            if (v > 0.0) return {false, traj.times[k], static_cast<int>(j), v};
        }
        const double excess = domain.box.excess(x);
        if (excess > 0.0) return {false, traj.times[k], -1, excess};
    }
    return {};
}

}  // namespace koopcert
