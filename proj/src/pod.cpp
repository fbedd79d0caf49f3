#include "rom/pod.hpp"

#include <cmath>
#include <limits>

#include "rom/binary_io.hpp"
#include "rom/error.hpp"

namespace rom::pod {

namespace {

constexpr double kRelativeRankTolerance = 1e-10;

// Two passes of modified Gram-Schmidt; columns are already nearly orthonormal.
void reorthonormalize(Eigen::MatrixXd& u) {
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
            for (Eigen::Index i = 0; i < j; ++i) {
                u.col(j) -= u.col(i).dot(u.col(j)) * u.col(i);
            }
            u.col(j).normalize();
        }
    }
}

}  // namespace

PodResult compute_pod(const Eigen::MatrixXd& x) {
    if (x.rows() < 1 || x.cols() < 2) throw InvalidArgument("POD needs J >= 1 and K >= 2");
    if (!x.allFinite()) throw NumericError("POD input contains non-finite entries");

    const Eigen::Index k = x.cols();
    const Eigen::MatrixXd gram = x.transpose() * x;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericError("Gram eigendecomposition failed");

    // Eigen returns ascending eigenvalues.
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double lambda_max = lambda(k - 1);
    if (!(lambda_max > 0.0)) throw NumericError("POD input is identically zero");
    const double sigma_max = std::sqrt(lambda_max);
    const double lambda_floor =
        static_cast<double>(k) * std::numeric_limits<double>::epsilon() * lambda_max;

    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = k - 1; i >= 0; --i) {
        const double sigma = std::sqrt(std::max(lambda(i), 0.0));
        if (lambda(i) <= lambda_floor || sigma <= kRelativeRankTolerance * sigma_max) break;
        kept.push_back(i);
    }
    const auto n = static_cast<Eigen::Index>(kept.size());

    PodResult out;
    auto& basis = out.basis;
    basis.singular_values.resize(n);
    Eigen::MatrixXd right(k, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        basis.singular_values(j) = std::sqrt(lambda(kept[static_cast<std::size_t>(j)]));
        right.col(j) = eig.eigenvectors().col(kept[static_cast<std::size_t>(j)]);
    }
    // Sequential sums, matching energy_fraction's accumulation order.
    for (Eigen::Index j = 0; j < n; ++j) {
        const double s = basis.singular_values(j);
        basis.total_singular_sum += s;
        basis.total_squared_sum += s * s;
    }

    basis.modes = x * right;
    for (Eigen::Index j = 0; j < n; ++j) basis.modes.col(j) /= basis.singular_values(j);
    reorthonormalize(basis.modes);

    out.temporal.coefficients = basis.singular_values.asDiagonal() * right.transpose();

    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index at = 0;
        basis.modes.col(j).cwiseAbs().maxCoeff(&at);
        if (basis.modes(at, j) < 0.0) {
            basis.modes.col(j) *= -1.0;
            out.temporal.coefficients.row(j) *= -1.0;
        }
    }
    return out;
}

double energy_fraction(const PodBasis& basis, std::size_t n, EnergyMeasure measure) {
    if (n < 1 || n > basis.rank()) {
        throw InvalidArgument("mode count " + std::to_string(n) + " outside [1, " +
                              std::to_string(basis.rank()) + "]");
    }
    double partial = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double s = basis.singular_values(static_cast<Eigen::Index>(j));
        partial += measure == EnergyMeasure::SingularValueSum ? s : s * s;
    }
    const double total = measure == EnergyMeasure::SingularValueSum ? basis.total_singular_sum
                                                                    : basis.total_squared_sum;
    return std::min(1.0, partial / total);
}

std::size_t select_mode_count(const PodBasis& basis, const TruncationCriterion& criterion,
                              EnergyMeasure measure) {
    if (const auto* count = std::get_if<ModeCount>(&criterion)) {
        if (count->n < 1 || count->n > basis.rank()) {
            throw InvalidArgument("cannot keep " + std::to_string(count->n) + " modes, basis rank is " +
                                  std::to_string(basis.rank()));
        }
        return count->n;
    }
    const double target = std::get<EnergyTarget>(criterion).fraction;
    if (!(target > 0.0) || target > 1.0) {
        throw InvalidArgument("energy target must lie in (0, 1], got " + std::to_string(target));
    }
    for (std::size_t n = 1; n <= basis.rank(); ++n) {
        if (energy_fraction(basis, n, measure) >= target) return n;
    }
    return basis.rank();
}

PodResult truncate(const PodResult& pod, const TruncationCriterion& criterion, EnergyMeasure measure) {
    const auto n = static_cast<Eigen::Index>(select_mode_count(pod.basis, criterion, measure));
    PodResult out;
    out.basis.modes = pod.basis.modes.leftCols(n);
    out.basis.singular_values = pod.basis.singular_values.head(n);
    out.basis.total_singular_sum = pod.basis.total_singular_sum;
    out.basis.total_squared_sum = pod.basis.total_squared_sum;
    out.temporal.coefficients = pod.temporal.coefficients.topRows(n);
    return out;
}

Eigen::MatrixXd reconstruct(const PodBasis& basis, const TemporalModes& temporal) {
    if (basis.modes.cols() != temporal.coefficients.rows()) {
        throw ShapeError("basis has " + std::to_string(basis.modes.cols()) +
                         " modes but temporal matrix has " +
                         std::to_string(temporal.coefficients.rows()) + " rows");
    }
    return basis.modes * temporal.coefficients;
}

TemporalModes project(const PodBasis& basis, const Eigen::MatrixXd& x) {
    if (x.rows() != basis.modes.rows()) throw ShapeError("projection: row count mismatch");
    return TemporalModes{basis.modes.transpose() * x};
}

double rrmse(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat) {
    if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) throw ShapeError("rrmse: shape mismatch");
    const double ref = x.norm();
    if (!(ref > 0.0)) throw InvalidArgument("rrmse: reference has zero norm");
    return (x - x_hat).norm() / ref;
}

namespace {
constexpr std::uint32_t kBasisVersion = 1;
}

void write_basis(const std::filesystem::path& path, const PodBasis& basis, const TemporalModes& temporal) {
    if (basis.modes.cols() != temporal.coefficients.rows()) throw ShapeError("basis/temporal rank mismatch");
    io::ByteWriter w;
    w.magic("ROMB");
    w.u32(kBasisVersion);
    w.u64(static_cast<std::uint64_t>(basis.modes.rows()));
    w.u64(static_cast<std::uint64_t>(basis.modes.cols()));
    w.u64(static_cast<std::uint64_t>(temporal.coefficients.cols()));
    w.f64(basis.total_singular_sum);
    w.f64(basis.total_squared_sum);
    w.f64s(std::span(basis.modes.data(), static_cast<std::size_t>(basis.modes.size())));
    w.f64s(std::span(basis.singular_values.data(), static_cast<std::size_t>(basis.singular_values.size())));
    w.f64s(std::span(temporal.coefficients.data(), static_cast<std::size_t>(temporal.coefficients.size())));
    io::write_file(path, w.buffer());
}

PodResult read_basis(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    const std::string ctx = path.string();
    io::ByteReader r(bytes, ctx);
    r.expect_magic("ROMB");
    if (r.u32() != kBasisVersion) throw FormatError(ctx + ": unsupported basis version");
    const std::uint64_t j = r.u64(), n = r.u64(), k = r.u64();
    const std::uint64_t dims_u[2] = {j, n};
    const std::uint64_t dims_t[2] = {n, k};
    const auto u_count = io::checked_product(dims_u, ctx);
    const auto t_count = io::checked_product(dims_t, ctx);
    PodResult out;
    out.basis.total_singular_sum = r.f64();
    out.basis.total_squared_sum = r.f64();
    if (r.remaining() != 8 * (u_count + n + t_count)) throw CorruptError(ctx + ": payload size mismatch");
    const auto u = r.f64s(static_cast<std::size_t>(u_count));
    const auto s = r.f64s(static_cast<std::size_t>(n));
    const auto t = r.f64s(static_cast<std::size_t>(t_count));
    const auto rows = static_cast<Eigen::Index>(j);
    const auto rank = static_cast<Eigen::Index>(n);
    out.basis.modes = Eigen::Map<const Eigen::MatrixXd>(u.data(), rows, rank);
    out.basis.singular_values = Eigen::Map<const Eigen::VectorXd>(s.data(), rank);
    out.temporal.coefficients = Eigen::Map<const Eigen::MatrixXd>(t.data(), rank, static_cast<Eigen::Index>(k));
    return out;
}

}  // namespace rom::pod
