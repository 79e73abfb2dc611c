#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "koopcert/types.hpp"

namespace koopcert {

/// x' = f(x) + sum_i g_i(x) u_i. Immutable after construction.
class ControlAffineSystem {
public:
    ControlAffineSystem(std::string name, int state_dim, VectorField drift,
                        std::vector<VectorField> control_fields = {});

    const std::string& name() const { return name_; }
    int state_dim() const { return state_dim_; }
    int control_dim() const { return static_cast<int>(control_fields_.size()); }

    Vec drift(const Vec& x) const { return drift_(x); }
    Vec control_field(int i, const Vec& x) const { return control_fields_.at(i)(x); }

    /// f + sum g_i u_i for a frozen control, as an autonomous vector field.
    VectorField frozen(const Vec& u) const;

private:
    std::string name_;
    int state_dim_;
    VectorField drift_;
    std::vector<VectorField> control_fields_;
};

/// Duffing oscillator with state-coupled control: (x2, -delta x2 - alpha x1 - 2 beta x1^3 u).
ControlAffineSystem duffing(double alpha = -1.0, double beta = 1.0, double delta = 0.0);

/// Scalar x' = a x + b u; without b the system is autonomous (no control fields).
ControlAffineSystem linear_scalar(double a, std::optional<double> b = std::nullopt);

/// Checks that drift and control fields return finite values at `samples`
/// uniform points of `box`; throws NumericalError otherwise.
void check_finite_on(const ControlAffineSystem& system, const Box& box, int samples,
                     std::uint64_t seed);

Vec eval_rhs(const ControlAffineSystem& system, const Vec& x, const Vec& u);

/// The constant controls of the bilinear construction: index 0 is u = 0, index i is e_i.
Vec basis_control(int control_dim, int index);

/// Which one-sided value to take at a segment boundary of a zero-order hold.
enum class Side { right, left };

class ControlSignal {
public:
    enum class Kind { constant, zoh, callable };

    /// Zero-dimensional signal for autonomous systems.
    ControlSignal();

    static ControlSignal constant(Vec value, std::optional<Box> bounds = std::nullopt);
    static ControlSignal zoh(std::vector<Vec> values, double segment_duration,
                             std::optional<Box> bounds = std::nullopt);
    static ControlSignal callable(std::function<Vec(double)> fn, int dim,
                                  std::optional<Box> bounds = std::nullopt);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    const std::optional<Box>& bounds() const { return bounds_; }
    const std::vector<Vec>& values() const { return values_; }
    double segment_duration() const { return segment_duration_; }

    Vec at(double t, Side side = Side::right) const;

private:
    Kind kind_ = Kind::constant;
    int dim_ = 0;
    std::vector<Vec> values_;
    double segment_duration_ = 0.0;
    std::function<Vec(double)> fn_;
    std::optional<Box> bounds_;
};

/// Uniform i.i.d. values in `bounds` per segment, enough segments to cover `horizon`.
ControlSignal random_zoh(const Box& bounds, double segment_duration, double horizon,
                         std::uint64_t seed);

struct StateDomain {
    Box box;
    std::vector<ScalarObservable> constraints;  // membership: h_j(x) <= 0 for all j

    bool contains(const Vec& x) const;
};

struct Trajectory {
    std::vector<double> times;
    Mat states;    // d x (K+1), one column per time
    Mat controls;  // n_c x (K+1), right-limit control value at each time
    std::optional<double> diverged_at;

    std::size_t size() const { return times.size(); }
    Vec state(std::size_t k) const { return states.col(static_cast<Eigen::Index>(k)); }
};

/// Uniform grid 0, dt, 2dt, ..., T with the last step shortened if dt does not divide T.
std::vector<double> time_grid(double horizon, double dt);

inline constexpr double kStateBlowup = 1e6;

/// Fixed-step RK4. Stops at the first state with norm above `blowup` (or non-finite)
/// and records the time in `diverged_at`; never throws on divergence.
Trajectory integrate_until_divergence(const ControlAffineSystem& system, const Vec& x0,
                                      const ControlSignal& u, double horizon, double dt,
                                      double blowup = kStateBlowup);

/// Same as integrate_until_divergence but throws DivergenceError on escape.
Trajectory integrate(const ControlAffineSystem& system, const Vec& x0, const ControlSignal& u,
                     double horizon, double dt, double blowup = kStateBlowup);

struct DomainReport {
    bool contained = true;
    double time = 0.0;
    int constraint = -1;  // -1 denotes the bounding box
    double value = 0.0;   // h_j(x(t)) > 0, or the box excess
};

DomainReport check_domain(const Trajectory& traj, const StateDomain& domain);

}  // namespace koopcert
