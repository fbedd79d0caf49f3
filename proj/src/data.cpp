#include "rom/data.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "rom/error.hpp"

namespace rom::data {

SnapshotTensor::SnapshotTensor(Layout layout, std::size_t n_times, std::vector<double> values,
                               std::vector<std::string> var_names, std::vector<bool> is_species,
                               double dt)
    : layout_(layout),
      n_times_(n_times),
      values_(std::move(values)),
      var_names_(std::move(var_names)),
      is_species_(std::move(is_species)),
      dt_(dt) {
    if (layout_.n_vars == 0 || layout_.nx == 0 || layout_.ny == 0 || n_times_ == 0) {
        throw InvalidArgument("snapshot tensor dims must all be >= 1");
    }
    if (values_.size() != layout_.rows() * n_times_) {
        throw ShapeError("snapshot tensor payload has " + std::to_string(values_.size()) +
                         " values, dims require " + std::to_string(layout_.rows() * n_times_));
    }
    if (var_names_.size() != layout_.n_vars || is_species_.size() != layout_.n_vars) {
        throw ShapeError("variable metadata does not match N_v = " + std::to_string(layout_.n_vars));
    }
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InvalidArgument("dt must be positive");
    for (std::size_t n = 0; n < values_.size(); ++n) {
        if (!std::isfinite(values_[n])) {
            throw NumericError("snapshot tensor contains a non-finite value at flat index " +
                               std::to_string(n));
        }
    }
}

std::size_t SnapshotTensor::species_count() const noexcept {
    std::size_t n = 0;
    for (bool s : is_species_) n += s ? 1 : 0;
    return n;
}

std::span<const double> SnapshotTensor::snapshot(std::size_t k) const {
    if (k >= n_times_) throw InvalidArgument("time index out of range");
    const auto j = layout_.rows();
    return std::span<const double>(values_).subspan(k * j, j);
}

double SnapshotTensor::at(std::size_t v, std::size_t i, std::size_t j, std::size_t k) const {
    if (v >= n_vars() || i >= nx() || j >= ny() || k >= n_times_) {
        throw InvalidArgument("tensor index out of range");
    }
    return values_[k * layout_.rows() + layout_.row(v, i, j)];
}

SnapshotTensor SnapshotTensor::time_slice(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > n_times_) throw InvalidArgument("invalid time slice");
    const auto j = layout_.rows();
    std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(begin * j),
                          values_.begin() + static_cast<std::ptrdiff_t>(end * j));
    return SnapshotTensor(layout_, end - begin, std::move(v), var_names_, is_species_, dt_);
}

SnapshotMatrix to_snapshot_matrix(const SnapshotTensor& tensor) {
    const auto j = static_cast<Eigen::Index>(tensor.layout().rows());
    const auto k = static_cast<Eigen::Index>(tensor.n_times());
    SnapshotMatrix m{Eigen::Map<const Eigen::MatrixXd>(tensor.values().data(), j, k), tensor.layout()};
    return m;
}

SnapshotTensor from_snapshot_matrix(const SnapshotMatrix& matrix, std::vector<std::string> var_names,
                                    std::vector<bool> is_species, double dt) {
    if (matrix.rows() != matrix.layout.rows()) {
        throw ShapeError("snapshot matrix rows do not match its layout");
    }
    std::vector<double> v(matrix.values.data(), matrix.values.data() + matrix.values.size());
    return SnapshotTensor(matrix.layout, matrix.cols(), std::move(v), std::move(var_names),
                          std::move(is_species), dt);
}

ScalingStats compute_scaling_stats(const SnapshotMatrix& x, double epsilon,
                                   std::span<const std::string> var_names) {
    if (x.cols() < 2) throw InvalidArgument("scaling statistics need at least 2 snapshots");
    if (x.rows() != x.layout.rows()) throw ShapeError("snapshot matrix rows do not match its layout");
    if (!(epsilon > 0.0)) throw InvalidArgument("sigma floor must be positive");

    ScalingStats stats;
    stats.layout = x.layout;
    stats.epsilon = epsilon;
    stats.mean = x.values.rowwise().mean();

    const auto points = static_cast<Eigen::Index>(x.layout.points());
    const double count = static_cast<double>(x.layout.points() * x.cols());
    stats.sigma.resize(x.layout.n_vars);
    for (std::size_t v = 0; v < x.layout.n_vars; ++v) {
        const auto first = static_cast<Eigen::Index>(v) * points;
        auto block = x.values.middleRows(first, points);
        const double ss = (block.colwise() - stats.mean.segment(first, points)).squaredNorm();
        stats.sigma[v] = std::sqrt(ss / count);
        if (!(stats.sigma[v] > epsilon)) {
            const std::string name =
                v < var_names.size() ? var_names[v] : "#" + std::to_string(v);
            throw DegenerateVariableError(
                name, "variable '" + name + "' has standard deviation " +
                          std::to_string(stats.sigma[v]) + " <= " + std::to_string(epsilon));
        }
    }
    return stats;
}

namespace {

void check_compatible(const SnapshotMatrix& x, const ScalingStats& stats) {
    if (x.layout != stats.layout || x.rows() != static_cast<std::size_t>(stats.mean.size())) {
        throw ShapeError("scaling statistics were computed on a different layout");
    }
}

Eigen::VectorXd row_sigma(const ScalingStats& stats) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(stats.layout.rows()));
    const auto points = static_cast<Eigen::Index>(stats.layout.points());
    for (std::size_t v = 0; v < stats.layout.n_vars; ++v) {
        s.segment(static_cast<Eigen::Index>(v) * points, points).setConstant(stats.sigma[v]);
    }
    return s;
}

}  // namespace

SnapshotMatrix center_scale(const SnapshotMatrix& x, const ScalingStats& stats) {
    check_compatible(x, stats);
    const Eigen::VectorXd inv = row_sigma(stats).cwiseInverse();
    SnapshotMatrix out{(x.values.colwise() - stats.mean).array().colwise() * inv.array(), x.layout};
    return out;
}

SnapshotMatrix inverse_center_scale(const SnapshotMatrix& scaled, const ScalingStats& stats) {
    check_compatible(scaled, stats);
    const Eigen::VectorXd s = row_sigma(stats);
    SnapshotMatrix out{(scaled.values.array().colwise() * s.array()).matrix().colwise() + stats.mean,
                       scaled.layout};
    return out;
}

InletProfile InletProfile::single_frequency(double v_max, double amplitude, double frequency_hz,
                                            double radius) {
    return InletProfile{v_max, radius, {{amplitude, frequency_hz}}, 1.0};
}

InletProfile InletProfile::three_frequency(double v_max, double radius) {
    return InletProfile{v_max, radius, {{0.9, 10.0}, {0.5, 40.0}, {0.75, 80.0}}, 3.0};
}

double eval_inlet_profile(const InletProfile& profile, double r, double t) {
    if (!(profile.radius > 0.0)) throw InvalidArgument("nozzle radius must be positive");
    if (!(profile.divisor > 0.0)) throw InvalidArgument("perturbation divisor must be positive");
    if (r < 0.0 || r > profile.radius) {
        throw InvalidArgument("radial coordinate must lie in [0, R]");
    }
    double perturbation = 0.0;
    for (const auto& term : profile.terms) {
        perturbation += term.amplitude * std::sin(2.0 * std::numbers::pi * term.frequency_hz * t);
    }
    const double shape = 1.0 - (r * r) / (profile.radius * profile.radius);
    return profile.v_max * shape * (1.0 + perturbation / profile.divisor);
}

namespace {

struct SmoothPattern {
    double kx, px, ky, py;

    double operator()(double x, double y) const {
        return std::cos(std::numbers::pi * kx * x + px) * std::cos(std::numbers::pi * ky * y + py);
    }
};

SmoothPattern draw_pattern(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> wave(0.5, 2.5);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    SmoothPattern p{};
    p.kx = wave(rng);
    p.px = phase(rng);
    p.ky = wave(rng);
    p.py = phase(rng);
    return p;
}

}  // namespace

SnapshotTensor generate_synthetic_flame(const GeneratorSettings& s) {
    if (s.nx == 0 || s.ny == 0 || s.n_times == 0) throw InvalidArgument("grid and n_t must be >= 1");
    if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw InvalidArgument("dt must be positive");
    if (s.n_species < 2) throw InvalidArgument("need at least 2 species");
    if (s.rank == 0 || s.rank > std::min(s.n_times, s.nx * s.ny)) {
        throw InvalidArgument("rank " + std::to_string(s.rank) +
                              " must lie in [1, min(n_t, grid size)]");
    }
    double amplitude_sum = 0.0;
    for (const auto& term : s.profile.terms) amplitude_sum += std::abs(term.amplitude);
    if (!(amplitude_sum > 0.0)) throw InvalidArgument("inlet profile has no perturbation");

    const Layout layout{1 + s.n_species, s.nx, s.ny};
    const std::size_t points = layout.points();

    // Temporal coefficients c_k(t): harmonics of the normalized inlet modulation.
    std::vector<double> harmonic(s.rank);
    double bound = 0.0;
    for (std::size_t k = 0; k < s.rank; ++k) {
        harmonic[k] = static_cast<double>(k / 2 + 1);
        bound += 1.0 / (harmonic[k] * harmonic[k]);
    }
    Eigen::MatrixXd coeff(static_cast<Eigen::Index>(s.rank), static_cast<Eigen::Index>(s.n_times));
    for (std::size_t t = 0; t < s.n_times; ++t) {
        const double time = static_cast<double>(t) * s.dt;
        for (std::size_t k = 0; k < s.rank; ++k) {
            double g = 0.0;
            for (const auto& term : s.profile.terms) {
                const double arg = 2.0 * std::numbers::pi * harmonic[k] * term.frequency_hz * time;
                g += term.amplitude * (k % 2 == 0 ? std::sin(arg) : std::cos(arg));
            }
            coeff(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) =
                g / amplitude_sum / (harmonic[k] * harmonic[k]) / bound;
        }
    }

    std::mt19937_64 rng(s.seed);
    auto coord = [](std::size_t i, std::size_t n) {
        return (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    };

    // base[v][point], pattern[v][k][point]; the last species is derived.
    const std::size_t free_vars = s.n_species;  // temperature + first n_species-1 species
    std::vector<std::vector<double>> base(free_vars, std::vector<double>(points));
    std::vector<std::vector<std::vector<double>>> pattern(
        free_vars, std::vector<std::vector<double>>(s.rank, std::vector<double>(points)));

    const double species_scale = 0.6 / static_cast<double>(s.n_species - 1);
    for (std::size_t v = 0; v < free_vars; ++v) {
        const SmoothPattern shape = draw_pattern(rng);
        std::vector<SmoothPattern> modes;
        for (std::size_t k = 0; k < s.rank; ++k) modes.push_back(draw_pattern(rng));
        for (std::size_t i = 0; i < s.nx; ++i) {
            for (std::size_t j = 0; j < s.ny; ++j) {
                const double x = coord(i, s.nx);
                const double y = coord(j, s.ny);
                const std::size_t p = i * s.ny + j;
                if (v == 0) {
                    const double width = 0.15 + 0.4 * x;
                    const double flame = std::exp(-(y / width) * (y / width)) * (1.0 - std::exp(-6.0 * x));
                    base[v][p] = 300.0 + 1700.0 * flame + 50.0 * shape(x, y);
                } else {
                    base[v][p] = species_scale * (0.3 + 0.35 * (1.0 + shape(x, y)));
                }
                const double amplitude = v == 0 ? 150.0 : 0.5 * base[v][p];
                for (std::size_t k = 0; k < s.rank; ++k) {
                    pattern[v][k][p] = amplitude * modes[k](x, y);
                }
            }
        }
    }

    std::vector<double> values(layout.rows() * s.n_times);
    for (std::size_t t = 0; t < s.n_times; ++t) {
        double* snap = values.data() + t * layout.rows();
        for (std::size_t p = 0; p < points; ++p) {
            double species_sum = 0.0;
            for (std::size_t v = 0; v < free_vars; ++v) {
                double value = base[v][p];
                for (std::size_t k = 0; k < s.rank; ++k) {
                    value += pattern[v][k][p] *
                             coeff(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
                }
                snap[v * points + p] = value;
                if (v > 0) species_sum += value;
            }
            snap[free_vars * points + p] = 1.0 - species_sum;
        }
    }

    std::vector<std::string> names{"T"};
    std::vector<bool> species{false};
    for (std::size_t n = 1; n <= s.n_species; ++n) {
        names.push_back("Y" + std::to_string(n));
        species.push_back(true);
    }
    return SnapshotTensor(layout, s.n_times, std::move(values), std::move(names), std::move(species),
                          s.dt);
}

std::vector<double> mass_balance_deviation_per_time(const SnapshotTensor& tensor) {
    if (tensor.species_count() == 0) throw InvalidArgument("tensor has no species variables");
    const auto& layout = tensor.layout();
    std::vector<double> out(tensor.n_times(), 0.0);
    for (std::size_t k = 0; k < tensor.n_times(); ++k) {
        const auto snap = tensor.snapshot(k);
        for (std::size_t p = 0; p < layout.points(); ++p) {
            double sum = 0.0;
            for (std::size_t v = 0; v < layout.n_vars; ++v) {
                if (tensor.is_species()[v]) sum += snap[v * layout.points() + p];
            }
            out[k] = std::max(out[k], std::abs(sum - 1.0));
        }
    }
    return out;
}

double max_mass_balance_deviation(const SnapshotTensor& tensor) {
    double worst = 0.0;
    for (double d : mass_balance_deviation_per_time(tensor)) worst = std::max(worst, d);
    return worst;
}

}  // namespace rom::data
