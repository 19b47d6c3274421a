#pragma once

#include <Eigen/Dense>

#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace funnelctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;
using Index = Eigen::Index;

/// Global numerical tolerances. All bands are policy, documented per use site;
/// scale factors are applied where the quantity has a natural scale.
struct Tolerances {
    double axis = 1e-9;       ///< imaginary-axis band (relative to matrix norm)
    double recon = 1e-10;     ///< factorization reconstruction residual (relative)
    double sylvester = 1e-9;  ///< Sylvester residual (relative)
    double zero = 1e-9;       ///< structural-zero detection (relative to scale)
    double inv = 1e-9;        ///< invertibility: condition number must be <= 1/inv
    double swap_sep = 1e-12;  ///< minimal eigenvalue separation for Schur block swaps
    double quad = 1e-10;      ///< quadrature error target
};

// ---------------------------------------------------------------------------
// Error taxonomy.  Structural failures of the plant/assumptions are
// AssumptionError (CLI exit 3); numerical breakdowns are NumericalError
// (CLI exit 4); malformed inputs are ConfigError (CLI exit 2).
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct AssumptionError : Error {
    std::string assumption;  // machine-readable name, e.g. "isolation"
    AssumptionError(std::string name, const std::string& what)
        : Error(what), assumption(std::move(name)) {}
};

struct NumericalError : Error {
    using Error::Error;
};

struct NoStrictRelativeDegree : AssumptionError {
    explicit NoStrictRelativeDegree(const std::string& what)
        : AssumptionError("relative-degree", what) {}
};
struct NearSingularMarkovParameter : AssumptionError {
    explicit NearSingularMarkovParameter(const std::string& what)
        : AssumptionError("relative-degree", what) {}
};
struct NoDecomposition : AssumptionError {
    explicit NoDecomposition(const std::string& what)
        : AssumptionError("isolation", what) {}
};
struct DisturbanceImageViolation : AssumptionError {
    explicit DisturbanceImageViolation(const std::string& what)
        : AssumptionError("isolation", what) {}
};

struct CompletionFailure : NumericalError {
    using NumericalError::NumericalError;
};
struct SpectraNotSeparated : NumericalError {
    using NumericalError::NumericalError;
};
struct SwapFailure : NumericalError {
    using NumericalError::NumericalError;
};
struct ClusterSeparationFailure : NumericalError {
    using NumericalError::NumericalError;
};
struct SlowDecay : NumericalError {
    using NumericalError::NumericalError;
};
struct StepUnderflow : NumericalError {
    using NumericalError::NumericalError;
};
struct FunnelBoundaryReached : NumericalError {
    int level;
    double time;
    FunnelBoundaryReached(int lvl, double t, const std::string& what)
        : NumericalError(what), level(lvl), time(t) {}
};
struct InadmissibleInitialCondition : NumericalError {
    using NumericalError::NumericalError;
};
struct RestartInadmissible : NumericalError {
    using NumericalError::NumericalError;
};

// ---------------------------------------------------------------------------
// Certificates: non-aborting check results, serialized into the run report.
// ---------------------------------------------------------------------------

struct Certificate {
    std::string name;
    bool pass = false;
    std::map<std::string, double> metrics;
    std::string detail;
};

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double norm2(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 || m.cols() == 1) return m.norm();
    return m.jacobiSvd().singularValues()(0);
}

/// 2-norm condition number; +inf for singular/empty-rank input.
inline double cond2(const Matrix& m) {
    if (m.size() == 0) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    double smin = s(s.size() - 1);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

inline Index binomial(Index n, Index k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    Index r = 1;
    for (Index i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace funnelctl
