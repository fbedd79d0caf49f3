#include "rom/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "rom/error.hpp"

namespace rom::forecast {

std::string_view to_string(ScalingKind kind) {
    return kind == ScalingKind::SumOfMaxima ? "sum_of_maxima" : "range";
}

ScalingKind parse_scaling_kind(std::string_view text) {
    if (text == "sum_of_maxima") return ScalingKind::SumOfMaxima;
    if (text == "range") return ScalingKind::Range;
    throw InvalidArgument("unknown mode scaling '" + std::string(text) + "' (expected sum_of_maxima|range)");
}

ModeScaler::ModeScaler(ScalingKind kind, Eigen::VectorXd offsets, Eigen::VectorXd scales)
    : kind_(kind), offsets_(std::move(offsets)), scales_(std::move(scales)) {
    if (offsets_.size() != scales_.size()) throw ShapeError("scaler offsets/scales length mismatch");
    for (Eigen::Index j = 0; j < scales_.size(); ++j) {
        if (!(scales_(j) > 0.0) || !std::isfinite(scales_(j))) {
            throw NumericError("mode scaler has a zero denominator for mode " + std::to_string(j + 1));
        }
    }
}

ModeScaler ModeScaler::fit(const Eigen::MatrixXd& modes, ScalingKind kind) {
    if (modes.rows() == 0 || modes.cols() == 0) throw InvalidArgument("cannot fit a scaler on empty modes");
    const auto n = modes.rows();
    if (kind == ScalingKind::SumOfMaxima) {
        double denominator = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) denominator += modes.row(j).cwiseAbs().maxCoeff();
        if (!(denominator > 0.0)) throw NumericError("mode scaler has a zero denominator");
        return ModeScaler(kind, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Constant(n, denominator));
    }
    const Eigen::VectorXd lo = modes.rowwise().minCoeff();
    const Eigen::VectorXd hi = modes.rowwise().maxCoeff();
    return ModeScaler(kind, lo, hi - lo);
}

Eigen::MatrixXd ModeScaler::scale(const Eigen::MatrixXd& modes) const {
    if (modes.rows() != scales_.size()) throw ShapeError("scaler: mode count mismatch");
    return (modes.colwise() - offsets_).array().colwise() / scales_.array();
}

Eigen::MatrixXd ModeScaler::unscale(const Eigen::MatrixXd& scaled) const {
    if (scaled.rows() != scales_.size()) throw ShapeError("scaler: mode count mismatch");
    return (scaled.array().colwise() * scales_.array()).matrix().colwise() + offsets_;
}

double ModeScaler::denominator() const {
    if (kind_ != ScalingKind::SumOfMaxima || scales_.size() == 0) {
        throw InvalidArgument("denominator is only defined for sum-of-maxima scaling");
    }
    return scales_(0);
}

SplitPlan split_sequential(std::size_t n_times, double test_frac, double train_frac_of_rest) {
    if (!(test_frac > 0.0 && test_frac < 1.0) || !(train_frac_of_rest > 0.0 && train_frac_of_rest < 1.0)) {
        throw InvalidArgument("split fractions must lie in (0, 1)");
    }
    SplitPlan plan;
    plan.n_test = static_cast<std::size_t>(std::floor(test_frac * static_cast<double>(n_times)));
    const std::size_t rest = n_times - plan.n_test;
    plan.n_train = static_cast<std::size_t>(std::llround(train_frac_of_rest * static_cast<double>(rest)));
    plan.n_val = rest - plan.n_train;
    return plan;
}

SplitPlan split_sequential(std::size_t n_times, std::size_t window, std::size_t horizon, double test_frac,
                           double train_frac_of_rest) {
    const SplitPlan plan = split_sequential(n_times, test_frac, train_frac_of_rest);
    const std::size_t need = window + horizon;
    if (plan.n_train < need || plan.n_val < need || plan.n_test < need) {
        throw InvalidArgument("split of " + std::to_string(n_times) + " snapshots into (" +
                              std::to_string(plan.n_train) + ", " + std::to_string(plan.n_val) + ", " +
                              std::to_string(plan.n_test) + ") is too small: every block needs q + p = " +
                              std::to_string(need));
    }
    return plan;
}

WindowSet make_windows_targeting(const Eigen::MatrixXd& modes, std::size_t window, std::size_t horizon,
                                 std::size_t target_begin, std::size_t target_end) {
    if (window == 0 || horizon == 0) throw InvalidArgument("window and horizon must be >= 1");
    const auto k = static_cast<std::size_t>(modes.cols());
    if (target_end > k || target_begin > target_end) throw InvalidArgument("invalid target range");
    const std::size_t first = std::max(target_begin, window);
    if (target_end < first + horizon) {
        throw InvalidArgument("range too small for a window of q = " + std::to_string(window) +
                              ", p = " + std::to_string(horizon));
    }
    WindowSet set;
    const auto n = modes.rows();
    for (std::size_t s = first; s + horizon <= target_end; ++s) {
        set.inputs.push_back(modes.block(0, static_cast<Eigen::Index>(s - window), n,
                                         static_cast<Eigen::Index>(window)).transpose());
        set.targets.push_back(
            modes.block(0, static_cast<Eigen::Index>(s), n, static_cast<Eigen::Index>(horizon)).transpose());
        set.target_begin.push_back(s);
    }
    return set;
}

WindowSet make_windows(const Eigen::MatrixXd& modes, std::size_t window, std::size_t horizon) {
    if (static_cast<std::size_t>(modes.cols()) < window + horizon) {
        throw InvalidArgument("K = " + std::to_string(modes.cols()) + " is smaller than q + p = " +
                              std::to_string(window + horizon));
    }
    return make_windows_targeting(modes, window, horizon, window, static_cast<std::size_t>(modes.cols()));
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (schedule) {
        if (!(schedule->factor > 0.0 && schedule->factor <= 1.0)) {
            throw InvalidArgument("lr schedule factor must lie in (0, 1]");
        }
        if (schedule->interval == 0) throw InvalidArgument("lr schedule interval must be >= 1");
    }
    if (batch_size == 0) throw InvalidArgument("batch size must be >= 1");
    if (max_epochs == 0) throw InvalidArgument("max epochs must be >= 1");
    if (patience == 0 || patience > max_epochs) throw InvalidArgument("patience must lie in [1, max_epochs]");
    if (!(pa_weight >= 0.0)) throw InvalidArgument("physics-aware weight must be >= 0");
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
    if (epoch < 1) throw InvalidArgument("epochs count from 1");
    if (!config.schedule) return config.learning_rate;
    const auto decays = (epoch - 1) / config.schedule->interval;
    return config.learning_rate * std::pow(config.schedule->factor, static_cast<double>(decays));
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
    if (patience == 0) throw InvalidArgument("patience must be >= 1");
}

bool EarlyStopping::update(std::size_t epoch, double val_loss) {
    if (best_epoch_ == 0 || val_loss <= best_loss_ - 1e-12) {
        best_loss_ = val_loss;
        best_epoch_ = epoch;
        epochs_without_improvement_ = 0;
        return true;
    }
    ++epochs_without_improvement_;
    return false;
}

std::string train_report_csv(const TrainReport& report) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "epoch,train_loss,val_loss,lr\n";
    for (const auto& e : report.epochs) {
        os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.learning_rate << '\n';
    }
    return os.str();
}

std::size_t rollout_calls(std::size_t steps, std::size_t horizon, RolloutStride stride) {
    if (horizon == 0) throw InvalidArgument("horizon must be >= 1");
    return stride == RolloutStride::Full ? (steps + horizon - 1) / horizon : steps;
}

Eigen::MatrixXd rollout(const Forecaster& model, const Eigen::MatrixXd& seed_window, std::size_t steps,
                        RolloutStride stride) {
    if (steps < 1) throw InvalidArgument("rollout needs at least one step");
    if (seed_window.rows() < 1 || seed_window.cols() < 1) throw InvalidArgument("empty seed window");
    const auto q = seed_window.rows();
    const auto n = seed_window.cols();
    Eigen::MatrixXd window = seed_window;
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(steps));
    std::size_t filled = 0;
    while (filled < steps) {
        const Eigen::MatrixXd pred = model(window);
        if (pred.cols() != n || pred.rows() < 1) throw ShapeError("forecaster returned a wrongly shaped block");
        if (!pred.allFinite()) {
            throw NumericError("non-finite prediction at rollout step " + std::to_string(filled));
        }
        const auto p = pred.rows();
        const auto advance = stride == RolloutStride::Full ? p : Eigen::Index{1};
        const auto take = std::min<Eigen::Index>(advance, static_cast<Eigen::Index>(steps - filled));
        out.middleCols(static_cast<Eigen::Index>(filled), take) = pred.topRows(take).transpose();
        filled += static_cast<std::size_t>(take);

        Eigen::MatrixXd extended(q + advance, n);
        extended << window, pred.topRows(advance);
        window = extended.bottomRows(q);
    }
    return out;
}

Eigen::MatrixXd rollout(const nn::NetworkSpec& spec, const nn::Parameters& params,
                        const Eigen::MatrixXd& seed_window, std::size_t steps, RolloutStride stride) {
    return rollout([&](const Eigen::MatrixXd& w) { return nn::forward(spec, params, w); }, seed_window, steps,
                   stride);
}

}  // namespace rom::forecast
