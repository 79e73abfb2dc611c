#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "koopcert/dictionary.hpp"
#include "koopcert/dynamics.hpp"

namespace koopcert {

/// m i.i.d. uniform points of a state domain, one per column.
struct SampleSet {
    Mat points;  // d x m
    std::uint64_t seed = 0;
    std::uint64_t attempts = 0;
    std::uint64_t accepts = 0;

    int size() const { return static_cast<int>(points.cols()); }
};

/// Rejection sampling from the bounding box; deterministic for a fixed seed.
SampleSet sample_iid(const StateDomain& domain, int m, std::uint64_t seed);

/// ((L psi_1)(x), ..., (L psi_N)(x)) for the vector field frozen at the constant control u.
Vec apply_generator(const Dictionary& dict, const ControlAffineSystem& system, const Vec& u,
                    const Vec& x);

/// Empirical mass/stiffness matrices and the generator estimate L = C^{-1} A.
/// Column j of L holds the coordinates of the projection of L psi_j, so lifted states
/// z = Psi(x) evolve as z' = L^T z.
struct EdmdFit {
    Mat C_hat;
    Mat A_hat;
    Mat L_hat;
    Vec control;
    int m = 0;
    int N = 0;
    double condition = 0.0;  // of the symmetrized mass matrix, before the shift, base block only
    double residual = 0.0;   // ||C_hat L_hat - A_hat||_F
};

inline constexpr double kMaxCondition = 1e14;

/// Solves C L = A through regularized_solve. Throws RankDeficiencyError when
/// cond(C) > kMaxCondition, since the shift alone would hide a singular mass matrix.
/// The first `leading` rows and columns are left out of the condition: composite
/// dictionaries may repeat a constraint that the base already spans.
Mat solve_generator(const Mat& C, const Mat& A, double* condition = nullptr,
                    double* residual = nullptr, int leading = 0);

/// Sample-average assembly. Chunks of a fixed size are accumulated in parallel and
/// summed in chunk order, so results do not depend on the thread count.
EdmdFit build_matrices(const Dictionary& dict, const ControlAffineSystem& system, const Vec& u,
                       const SampleSet& samples);

/// Single-threaded sample-by-sample reference for build_matrices.
EdmdFit build_matrices_serial(const Dictionary& dict, const ControlAffineSystem& system,
                              const Vec& u, const SampleSet& samples);

/// Weighted variant: C = sum_k w_k psi psi^T, A = sum_k w_k psi (L psi)^T.
EdmdFit build_matrices_weighted(const Dictionary& dict, const ControlAffineSystem& system,
                                const Vec& u, const Mat& points, const Vec& weights);

struct Provenance {
    enum class Kind { empirical, reference, dense_reference };
    Kind kind = Kind::empirical;
    int m = 0;
    std::uint64_t seed = 0;
    int quadrature_order = 0;
};

std::string to_string(Provenance::Kind kind);

struct GeneratorMatrix {
    Mat matrix;
    Provenance provenance;
};

GeneratorMatrix as_generator(const EdmdFit& fit, std::uint64_t seed);

inline constexpr int kDenseReferenceSamples = 1000000;

/// Galerkin matrix L_V = C^{-1} A with Lebesgue inner products over `box`.
/// d <= 2: quadrature of order q. d > 2: a dense i.i.d. sample fit (flagged).
GeneratorMatrix galerkin_reference(const Dictionary& dict, const ControlAffineSystem& system,
                                   const Vec& u, const Box& box, int q = 40,
                                   std::uint64_t dense_seed = 0);

double generator_error(const GeneratorMatrix& ref, const GeneratorMatrix& est);
double generator_error(const Mat& ref, const Mat& est);

/// Row-major CSV with a '#' header carrying N and provenance.
void write_generator_csv(std::ostream& os, const GeneratorMatrix& g, const std::string& extra = "");
GeneratorMatrix read_generator_csv(std::istream& is);

}  // namespace koopcert
