#include "koopcert/edmd.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "koopcert/errors.hpp"
#include "koopcert/random.hpp"

namespace koopcert {

SampleSet sample_iid(const StateDomain& domain, int m, std::uint64_t seed) {
    if (m < 1) throw UsageError("m must be >= 1");
    constexpr std::uint64_t kProbe = 100000;
    Rng rng(seed);
    SampleSet out;
    out.seed = seed;
    out.points.resize(domain.box.dim(), m);
    while (out.accepts < static_cast<std::uint64_t>(m)) {
        const Vec x = uniform_in(rng, domain.box);
        ++out.attempts;
        if (domain.contains(x)) out.points.col(static_cast<Eigen::Index>(out.accepts++)) = x;
        if (out.attempts == kProbe && static_cast<double>(out.accepts) < 1e-4 * kProbe)
            throw SamplingError("acceptance ratio below 1e-4 after 1e5 attempts; use a tighter box");
    }
    return out;
}

Vec apply_generator(const Dictionary& dict, const ControlAffineSystem& system, const Vec& u,
                    const Vec& x) {
    return dict.eval_grad(x) * eval_rhs(system, x, u);
}

Mat solve_generator(const Mat& C, const Mat& A, double* condition, double* residual,
                    int leading) {
    const auto n = C.rows();
    const Mat c = 0.5 * (C + C.transpose());
    const auto k = leading > 0 && leading < n ? n - leading : n;
    Eigen::SelfAdjointEigenSolver<Mat> eig(c.bottomRightCorner(k, k), Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (condition) *condition = cond;
    if (!(cond <= kMaxCondition)) {
        std::ostringstream msg;
        msg << "mass matrix is rank deficient (condition " << cond
            << "); use more data or a smaller dictionary";
        throw RankDeficiencyError(msg.str());
    }
    Mat L = regularized_solve(c, A, residual);
    if (!L.allFinite()) throw NumericalError("generator solve produced non-finite entries");
    return L;
}

namespace {

constexpr Eigen::Index kChunk = 256;

void accumulate_chunk(const Dictionary& dict, const ControlAffineSystem& system, const Vec& u,
                      const Mat& points, Eigen::Index begin, Eigen::Index end, Mat& C, Mat& A) {
    const int N = dict.size();
    const auto count = end - begin;
    Mat psi(N, count), lpsi(N, count);
    Mat grad(N, dict.dim());
    for (Eigen::Index k = 0; k < count; ++k) {
        const Vec x = points.col(begin + k);
        Vec v(N);
        dict.eval_into(x, v);
        psi.col(k) = v;
        dict.eval_grad_into(x, grad);
        lpsi.col(k) = grad * eval_rhs(system, x, u);
    }
    C.noalias() += psi * psi.transpose();
    A.noalias() += psi * lpsi.transpose();
}

EdmdFit finish_fit(Mat C, Mat A, const Vec& u, int m, int leading) {
    EdmdFit fit;
    fit.C_hat = 0.5 * (C + C.transpose());
    fit.A_hat = std::move(A);
    fit.control = u;
    fit.m = m;
    fit.N = static_cast<int>(fit.C_hat.rows());
    fit.L_hat = solve_generator(fit.C_hat, fit.A_hat, &fit.condition, &fit.residual, leading);
    return fit;
}

void check_fit_inputs(const Dictionary& dict, const ControlAffineSystem& system, const Vec& u,
                      const Mat& points) {
    if (points.cols() < 1) throw UsageError("m must be >= 1");
    if (dict.dim() != system.state_dim() || points.rows() != system.state_dim())
        throw UsageError("dictionary, system and samples disagree on the state dimension");
    if (u.size() != system.control_dim()) throw UsageError("constant control has wrong dimension");
}

}  // namespace

EdmdFit build_matrices(const Dictionary& dict, const ControlAffineSystem& system, const Vec& u,
                       const SampleSet& samples) {
    check_fit_inputs(dict, system, u, samples.points);
    const int N = dict.size();
    const Eigen::Index m = samples.points.cols();
    const Eigen::Index chunks = (m + kChunk - 1) / kChunk;
    std::vector<Mat> partial_c(static_cast<std::size_t>(chunks), Mat::Zero(N, N));
    std::vector<Mat> partial_a(static_cast<std::size_t>(chunks), Mat::Zero(N, N));
    std::exception_ptr failure;

#pragma omp parallel for schedule(static) if (chunks > 1)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        try {
            const Eigen::Index begin = c * kChunk;
            const Eigen::Index end = std::min(m, begin + kChunk);
            accumulate_chunk(dict, system, u, samples.points, begin, end,
                             partial_c[static_cast<std::size_t>(c)],
                             partial_a[static_cast<std::size_t>(c)]);
        } catch (...) {
#pragma omp critical(koopcert_fit_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    Mat C = Mat::Zero(N, N), A = Mat::Zero(N, N);
    for (Eigen::Index c = 0; c < chunks; ++c) {
        C += partial_c[static_cast<std::size_t>(c)];
        A += partial_a[static_cast<std::size_t>(c)];
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    return finish_fit(C * inv_m, A * inv_m, u, static_cast<int>(m), dict.leading());
}

EdmdFit build_matrices_serial(const Dictionary& dict, const ControlAffineSystem& system,
                              const Vec& u, const SampleSet& samples) {
    check_fit_inputs(dict, system, u, samples.points);
    const int N = dict.size();
    Mat C = Mat::Zero(N, N), A = Mat::Zero(N, N);
    for (Eigen::Index k = 0; k < samples.points.cols(); ++k) {
        const Vec x = samples.points.col(k);
        const Vec psi = dict.eval(x);
        const Vec lpsi = apply_generator(dict, system, u, x);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                C(i, j) += psi[i] * psi[j];
                A(i, j) += psi[i] * lpsi[j];
            }
    }
    const double inv_m = 1.0 / static_cast<double>(samples.size());
    return finish_fit(C * inv_m, A * inv_m, u, samples.size(), dict.leading());
}

EdmdFit build_matrices_weighted(const Dictionary& dict, const ControlAffineSystem& system,
                                const Vec& u, const Mat& points, const Vec& weights) {
    check_fit_inputs(dict, system, u, points);
    if (weights.size() != points.cols()) throw UsageError("one weight per point is required");
    const int N = dict.size();
    Mat C = Mat::Zero(N, N), A = Mat::Zero(N, N);
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
        const Vec x = points.col(k);
        const Vec psi = dict.eval(x);
        const Vec lpsi = apply_generator(dict, system, u, x);
        C.noalias() += weights[k] * psi * psi.transpose();
        A.noalias() += weights[k] * psi * lpsi.transpose();
    }
    return finish_fit(C, A, u, static_cast<int>(points.cols()), dict.leading());
}

std::string to_string(Provenance::Kind kind) {
    switch (kind) {
        case Provenance::Kind::empirical: return "empirical";
        case Provenance::Kind::reference: return "reference";
        case Provenance::Kind::dense_reference: return "dense_reference";
    }
    return "unknown";
}

GeneratorMatrix as_generator(const EdmdFit& fit, std::uint64_t seed) {
    return {fit.L_hat, {Provenance::Kind::empirical, fit.m, seed, 0}};
}

GeneratorMatrix galerkin_reference(const Dictionary& dict, const ControlAffineSystem& system,
                                   const Vec& u, const Box& box, int q, std::uint64_t dense_seed) {
    if (q < 1) throw UsageError("quadrature order must be >= 1");
    if (dict.dim() != system.state_dim() || box.dim() != system.state_dim())
        throw UsageError("dictionary, system and box disagree on the state dimension");
    if (u.size() != system.control_dim()) throw UsageError("constant control has wrong dimension");

    if (dict.dim() > 2) {
        const SampleSet dense = sample_iid(StateDomain{box, {}}, kDenseReferenceSamples, dense_seed);
        const EdmdFit fit = build_matrices(dict, system, u, dense);
        return {fit.L_hat, {Provenance::Kind::dense_reference, fit.m, dense_seed, 0}};
    }

    const QuadratureRule rule = quadrature_for(dict, box, q);
    const int N = dict.size();
    const Eigen::Index n = rule.size();
    Mat psi(N, n), lpsi(N, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Vec x = rule.points.col(k);
        psi.col(k) = dict.eval(x);
        lpsi.col(k) = apply_generator(dict, system, u, x);
    }
    const Mat weighted = psi * rule.weights.asDiagonal();
    Mat C = weighted * psi.transpose();
    C = 0.5 * (C + C.transpose());
    const Mat A = weighted * lpsi.transpose();
    return {solve_generator(C, A, nullptr, nullptr, dict.leading()), {Provenance::Kind::reference, 0, 0, q}};
}

double generator_error(const Mat& ref, const Mat& est) {
    if (ref.rows() != est.rows() || ref.cols() != est.cols())
        throw UsageError("generator matrices differ in shape");
    return (ref - est).norm();
}

double generator_error(const GeneratorMatrix& ref, const GeneratorMatrix& est) {
    return generator_error(ref.matrix, est.matrix);
}

void write_generator_csv(std::ostream& os, const GeneratorMatrix& g, const std::string& extra) {
    os << "# N=" << g.matrix.rows() << " provenance=" << to_string(g.provenance.kind)
       << " m=" << g.provenance.m << " seed=" << g.provenance.seed
       << " quadrature_order=" << g.provenance.quadrature_order;
    if (!extra.empty()) os << ' ' << extra;
    os << '\n';
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < g.matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.matrix.cols(); ++j) {
            if (j) os << ',';
            os << g.matrix(i, j);
        }
        os << '\n';
    }
}

GeneratorMatrix read_generator_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# N=", 0) != 0)
        throw UsageError("generator CSV must start with a '# N=' header");
    GeneratorMatrix g;
    int n = 0;
    std::istringstream header(line.substr(2));
    std::string token;
    while (header >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
        if (key == "N") n = std::stoi(value);
        else if (key == "m") g.provenance.m = std::stoi(value);
        else if (key == "seed") g.provenance.seed = std::stoull(value);
        else if (key == "quadrature_order") g.provenance.quadrature_order = std::stoi(value);
        else if (key == "provenance") {
            if (value == "reference") g.provenance.kind = Provenance::Kind::reference;
            else if (value == "dense_reference") g.provenance.kind = Provenance::Kind::dense_reference;
            else g.provenance.kind = Provenance::Kind::empirical;
        }
    }
    if (n < 1) throw UsageError("generator CSV header has invalid N");
    g.matrix.resize(n, n);
    for (int i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw UsageError("generator CSV has fewer than N rows");
        std::istringstream row(line);
        for (int j = 0; j < n; ++j) {
            std::string cell;
            if (!std::getline(row, cell, ',')) throw UsageError("generator CSV row " + std::to_string(i) + " is short");
            g.matrix(i, j) = std::stod(cell);
        }
    }
    return g;
}

}  // namespace koopcert
