#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "koopcert/dictionary.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/edmd.hpp"

namespace koopcert {

/// Control-affine generator surrogate L(u) = L0 + sum_i u_i (L_i - L0).
/// generators[0] is the zero-control matrix, generators[i] the one for e_i.
class BilinearSurrogate {
public:
    BilinearSurrogate(Dictionary dict, std::vector<Mat> generators, int m = 0,
                      std::vector<std::uint64_t> seeds = {});

    const Dictionary& dictionary() const { return dict_; }
    int size() const { return dict_.size(); }
    int control_dim() const { return static_cast<int>(generators_.size()) - 1; }
    const Mat& L0() const { return generators_.front(); }
    const std::vector<Mat>& generators() const { return generators_; }
    /// B_i = L_i - L0
    Mat difference(int i) const { return generators_.at(static_cast<std::size_t>(i + 1)) - L0(); }
    int m() const { return m_; }
    const std::vector<std::uint64_t>& seeds() const { return seeds_; }

    /// L0 + sum_i u_i B_i, evaluated as (1 - sum u_i) L0 + sum u_i L_i so that
    /// u = 0 and u = e_i return the stored matrices exactly.
    Mat generator_at(const Vec& u) const;

    /// z' = L(u)^T z
    Vec lifted_rhs(const Vec& z, const Vec& u) const;

private:
    Dictionary dict_;
    std::vector<Mat> generators_;
    std::vector<Mat> transposed_;
    int m_;
    std::vector<std::uint64_t> seeds_;
};

/// Builds the surrogate from fits for the controls {0, e_1, ..., e_nc} (any order).
BilinearSurrogate assemble_surrogate(const Dictionary& dict, const std::vector<EdmdFit>& fits,
                                     std::vector<std::uint64_t> seeds = {});

/// Fits one generator per control in {0, e_1, ..., e_nc} on i.i.d. samples and
/// assembles them. Each control draws its own samples from derive_seed(seed, i)
/// unless `shared_samples` is set.
BilinearSurrogate fit_bilinear(const Dictionary& dict, const ControlAffineSystem& system,
                               const StateDomain& domain, int m, std::uint64_t seed,
                               bool shared_samples = false, std::vector<EdmdFit>* fits = nullptr);

/// Surrogate assembled from the Galerkin reference matrices L_V^{e_i}.
BilinearSurrogate reference_surrogate(const Dictionary& dict, const ControlAffineSystem& system,
                                      const Box& box, int q = 40);

Mat surrogate_generator_at(const BilinearSurrogate& s, const Vec& u);

inline constexpr double kLiftedBlowup = 1e9;

struct LiftedTrajectory {
    std::vector<double> times;
    Mat z;  // N x (K+1)
    std::optional<double> diverged_at;
};

/// RK4 on z' = L(u(t))^T z on the same grid as integrate(); truncates and flags
/// divergence once ||z|| exceeds kLiftedBlowup.
LiftedTrajectory propagate(const BilinearSurrogate& s, const Vec& z0, const ControlSignal& u,
                           double horizon, double dt);

struct ObservableSeries {
    std::vector<double> times;
    std::vector<double> values;
    std::optional<double> diverged_at;
};

/// h(t) = coeffs^T z(t) with z(0) = Psi(x0).
ObservableSeries predict_observable(const BilinearSurrogate& s, const ObservableCoeffs& h,
                                    const Vec& x0, const ControlSignal& u, double horizon,
                                    double dt);

/// Reads several observables from one propagation.
std::vector<ObservableSeries> predict_observables(const BilinearSurrogate& s,
                                                  const std::vector<ObservableCoeffs>& hs,
                                                  const Vec& x0, const ControlSignal& u,
                                                  double horizon, double dt);

/// Discrete lifted-linear baseline z+ = A z + B u fitted on snapshot pairs.
struct EdmdcModel {
    Mat A;  // N x N
    Mat B;  // N x nc
    double sample_interval = 0.01;
    bool discrete_time = true;
    double residual = 0.0;  // ||Psi(X+) - A Psi(X) - B U||_F
    int m = 0;
};

struct EdmdcOptions {
    double sample_interval = 0.01;
    int integration_substeps = 10;
};

/// m pairs: x_k i.i.d. in the domain, u_k i.i.d. in `controls`, x_k+ from RK4 over the
/// sample interval under constant u_k; [A B] by minimum-norm least squares.
EdmdcModel fit_edmdc(const Dictionary& dict, const ControlAffineSystem& system,
                     const StateDomain& domain, const Box& controls, int m, std::uint64_t seed,
                     const EdmdcOptions& options = {});

/// Iterates the model from Psi(x0) with u sampled at the start of each interval and
/// interpolates linearly onto the grid of step dt.
ObservableSeries predict_edmdc(const EdmdcModel& model, const Dictionary& dict,
                               const ObservableCoeffs& h, const Vec& x0, const ControlSignal& u,
                               double horizon, double dt);

}  // namespace koopcert
