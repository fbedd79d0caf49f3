#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rom::data {

/// Spatial layout of one flattened state vector: variable-major, then x, then y.
struct Layout {
    std::size_t n_vars = 0;
    std::size_t nx = 0;
    std::size_t ny = 0;

    std::size_t points() const noexcept { return nx * ny; }
    std::size_t rows() const noexcept { return n_vars * nx * ny; }
    std::size_t row(std::size_t v, std::size_t i, std::size_t j) const noexcept {
        return (v * nx + i) * ny + j;
    }
    std::size_t variable_of(std::size_t row) const noexcept { return row / points(); }

    friend bool operator==(const Layout&, const Layout&) = default;
};

/// Four-axis field data (variable, x, y, time) with per-variable metadata.
///
/// Storage is time-major: snapshot k occupies the contiguous range
/// [k*J, (k+1)*J) in the flatten order of `Layout`. Immutable once built.
class SnapshotTensor {
public:
    SnapshotTensor(Layout layout, std::size_t n_times, std::vector<double> values,
                   std::vector<std::string> var_names, std::vector<bool> is_species, double dt);

    const Layout& layout() const noexcept { return layout_; }
    std::size_t n_vars() const noexcept { return layout_.n_vars; }
    std::size_t nx() const noexcept { return layout_.nx; }
    std::size_t ny() const noexcept { return layout_.ny; }
    std::size_t n_times() const noexcept { return n_times_; }
    double dt() const noexcept { return dt_; }

    const std::vector<std::string>& var_names() const noexcept { return var_names_; }
    const std::vector<bool>& is_species() const noexcept { return is_species_; }
    std::size_t species_count() const noexcept;

    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> snapshot(std::size_t k) const;
    double at(std::size_t v, std::size_t i, std::size_t j, std::size_t k) const;

    /// Columns [begin, end) as a new tensor with the same metadata.
    SnapshotTensor time_slice(std::size_t begin, std::size_t end) const;

private:
    Layout layout_;
    std::size_t n_times_;
    std::vector<double> values_;
    std::vector<std::string> var_names_;
    std::vector<bool> is_species_;
    double dt_;
};

/// J x K matrix whose column k is the flattened state at time k.
struct SnapshotMatrix {
    Eigen::MatrixXd values;
    Layout layout;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

SnapshotMatrix to_snapshot_matrix(const SnapshotTensor& tensor);
SnapshotTensor from_snapshot_matrix(const SnapshotMatrix& matrix, std::vector<std::string> var_names,
                                    std::vector<bool> is_species, double dt);

/// Per-row temporal means and one standard deviation per variable.
struct ScalingStats {
    Eigen::VectorXd mean;
    std::vector<double> sigma;
    double epsilon = 1e-12;
    Layout layout;
};

/// Means are per row; sigma[v] is the population RMS of the fluctuations x - mean
/// pooled over every grid point and time of variable v. Throws DegenerateVariableError
/// when sigma[v] <= epsilon.
ScalingStats compute_scaling_stats(const SnapshotMatrix& x, double epsilon = 1e-12,
                                   std::span<const std::string> var_names = {});
SnapshotMatrix center_scale(const SnapshotMatrix& x, const ScalingStats& stats);
SnapshotMatrix inverse_center_scale(const SnapshotMatrix& scaled, const ScalingStats& stats);

/// Parabolic inlet velocity with a sum of sinusoidal perturbations:
/// v(r,t) = v_max (1 - r^2/R^2) [1 + (sum_m A_m sin(2 pi f_m t)) / divisor].
struct InletProfile {
    struct Term {
        double amplitude;
        double frequency_hz;
    };

    double v_max = 70.0;
    double radius = 1.0;
    std::vector<Term> terms;
    double divisor = 1.0;

    /// v_max = 70 cm/s, A = 0.25, f = 20 Hz.
    static InletProfile single_frequency(double v_max = 70.0, double amplitude = 0.25,
                                         double frequency_hz = 20.0, double radius = 1.0);
    /// Three perturbations averaged: A = (0.9, 0.5, 0.75), f = (10, 40, 80) Hz, divisor 3.
    static InletProfile three_frequency(double v_max = 70.0, double radius = 1.0);
};

double eval_inlet_profile(const InletProfile& profile, double r, double t);

struct GeneratorSettings {
    std::size_t nx = 40;
    std::size_t ny = 30;
    std::size_t n_times = 999;
    double dt = 2.5e-4;
    std::size_t n_species = 5;
    std::size_t rank = 6;
    std::uint64_t seed = 0;
    InletProfile profile = InletProfile::single_frequency();
};

/// Synthetic flame-like dataset: temperature plus `n_species` mass fractions.
///
/// Every field is a smooth base state plus `rank` random smooth spatial patterns
/// times shared temporal coefficients c_k(t). c_k is the k/2+1-th harmonic (sin for
/// even k, cos for odd k) of the inlet modulation, with amplitude 1/h^2. The first
/// n_species-1 mass fractions stay in (0,1) and the last closes the simplex, so the
/// species sum is 1 up to rounding. Deterministic for a given seed.
SnapshotTensor generate_synthetic_flame(const GeneratorSettings& settings);

/// max over grid points and times of |sum_s Y_s - 1|.
double max_mass_balance_deviation(const SnapshotTensor& tensor);
/// Same, per time index.
std::vector<double> mass_balance_deviation_per_time(const SnapshotTensor& tensor);

// ROMF binary container.
void write_dataset(const std::filesystem::path& path, const SnapshotTensor& tensor);
SnapshotTensor read_dataset(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_dataset(const SnapshotTensor& tensor);
SnapshotTensor decode_dataset(std::span<const std::uint8_t> bytes, const std::string& context = "dataset");

/// One (variable, time) slice as CSV: one row per y index, x values comma-separated.
void write_csv_slice(const std::filesystem::path& path, const SnapshotTensor& tensor,
                     std::size_t variable, std::size_t time);
/// Writes <dir>/<name>_t<k>.csv for every time of one variable. Returns the file count.
std::size_t export_variable_csv(const std::filesystem::path& dir, const SnapshotTensor& tensor,
                                std::size_t variable);

// ROMS container for scaling statistics.
void write_scaling_stats(const std::filesystem::path& path, const ScalingStats& stats);
ScalingStats read_scaling_stats(const std::filesystem::path& path);

}  // namespace rom::data
