#pragma once

#include <filesystem>
#include <variant>

#include <Eigen/Dense>

namespace rom::pod {

/// Orthonormal spatial modes and their singular values.
struct PodBasis {
    Eigen::MatrixXd modes;            // J x N, orthonormal columns
    Eigen::VectorXd singular_values;  // nonincreasing, length N
    double total_singular_sum = 0.0;  // sum of every singular value of the source matrix
    double total_squared_sum = 0.0;   // sum of their squares

    std::size_t rank() const noexcept { return static_cast<std::size_t>(singular_values.size()); }
    std::size_t rows() const noexcept { return static_cast<std::size_t>(modes.rows()); }
};

/// T_hat = Sigma T^T. Row j is the coefficient series c_j(t).
struct TemporalModes {
    Eigen::MatrixXd coefficients;  // N x K

    std::size_t rank() const noexcept { return static_cast<std::size_t>(coefficients.rows()); }
    std::size_t snapshots() const noexcept { return static_cast<std::size_t>(coefficients.cols()); }
};

struct PodResult {
    PodBasis basis;
    TemporalModes temporal;
};

/// POD by the snapshot method: eigendecomposition of the K x K Gram matrix X^T X.
///
/// Singular values below the Gram method's resolution (eigenvalue <= K eps lambda_1,
/// or sigma <= 1e-10 sigma_1) are dropped, so N is the numerical rank. Each spatial
/// mode is signed so that its largest-magnitude entry is positive.
PodResult compute_pod(const Eigen::MatrixXd& x);

/// How retained energy is measured. `SingularValueSum` is the literal sum-of-sigma
/// ratio; `SquaredEnergy` uses sigma^2.
enum class EnergyMeasure { SingularValueSum, SquaredEnergy };

double energy_fraction(const PodBasis& basis, std::size_t n,
                       EnergyMeasure measure = EnergyMeasure::SingularValueSum);

struct ModeCount {
    std::size_t n;
};
struct EnergyTarget {
    double fraction;
};
using TruncationCriterion = std::variant<ModeCount, EnergyTarget>;

/// Number of modes the criterion keeps for this basis.
std::size_t select_mode_count(const PodBasis& basis, const TruncationCriterion& criterion,
                              EnergyMeasure measure = EnergyMeasure::SingularValueSum);

PodResult truncate(const PodResult& pod, const TruncationCriterion& criterion,
                   EnergyMeasure measure = EnergyMeasure::SingularValueSum);

/// X_hat = U T_hat.
Eigen::MatrixXd reconstruct(const PodBasis& basis, const TemporalModes& temporal);

/// U^T X: temporal coefficients of arbitrary snapshots in this basis.
TemporalModes project(const PodBasis& basis, const Eigen::MatrixXd& x);

/// ||X - X_hat||_F / ||X||_F.
double rrmse(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat);

// ROMB container: J, N, K, sums, U, sigma, T_hat as little-endian f64.
void write_basis(const std::filesystem::path& path, const PodBasis& basis, const TemporalModes& temporal);
PodResult read_basis(const std::filesystem::path& path);

}  // namespace rom::pod
