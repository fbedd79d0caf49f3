#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rom/nn.hpp"

namespace rom::forecast {

enum class ScalingKind {
    SumOfMaxima,  // every mode divided by sum_j max_k |T[j,k]|
    Range,        // per-mode min-max to [0, 1]
};

std::string_view to_string(ScalingKind kind);
ScalingKind parse_scaling_kind(std::string_view text);

/// Scaled value = (T[j,k] - offset[j]) / scale[j].
class ModeScaler {
public:
    ModeScaler() = default;
    ModeScaler(ScalingKind kind, Eigen::VectorXd offsets, Eigen::VectorXd scales);

    static ModeScaler fit(const Eigen::MatrixXd& modes, ScalingKind kind);

    Eigen::MatrixXd scale(const Eigen::MatrixXd& modes) const;
    Eigen::MatrixXd unscale(const Eigen::MatrixXd& scaled) const;

    ScalingKind kind() const noexcept { return kind_; }
    /// Sum-of-maxima denominator (equal to every entry of scales() for that kind).
    double denominator() const;
    const Eigen::VectorXd& offsets() const noexcept { return offsets_; }
    /// Per-mode factor d(unscaled)/d(scaled).
    const Eigen::VectorXd& scales() const noexcept { return scales_; }
    std::size_t modes() const noexcept { return static_cast<std::size_t>(scales_.size()); }

private:
    ScalingKind kind_ = ScalingKind::SumOfMaxima;
    Eigen::VectorXd offsets_;
    Eigen::VectorXd scales_;
};

/// Contiguous, sequential train / validation / test blocks.
struct SplitPlan {
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::size_t n_test = 0;

    std::size_t total() const noexcept { return n_train + n_val + n_test; }
    std::size_t val_begin() const noexcept { return n_train; }
    std::size_t test_begin() const noexcept { return n_train + n_val; }
};

/// n_test = floor(test_frac n_t); n_train = round(train_frac (n_t - n_test)); n_val the rest.
SplitPlan split_sequential(std::size_t n_times, double test_frac = 0.2, double train_frac_of_rest = 0.85);
/// Same, additionally requiring every block to hold at least window + horizon snapshots.
SplitPlan split_sequential(std::size_t n_times, std::size_t window, std::size_t horizon,
                           double test_frac = 0.2, double train_frac_of_rest = 0.85);

/// Input/target pairs. inputs[i] is q x N, targets[i] is p x N; target_begin[i] is the
/// column index of the first target snapshot.
struct WindowSet {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> targets;
    std::vector<std::size_t> target_begin;

    std::size_t size() const noexcept { return inputs.size(); }
};

/// Stride-1 sliding windows over all K columns: K - q - p + 1 pairs.
WindowSet make_windows(const Eigen::MatrixXd& modes, std::size_t window, std::size_t horizon);
/// Windows whose targets lie entirely in [target_begin, target_end). Input history may
/// reach back before target_begin (but not below column 0).
WindowSet make_windows_targeting(const Eigen::MatrixXd& modes, std::size_t window, std::size_t horizon,
                                 std::size_t target_begin, std::size_t target_end);

struct LrSchedule {
    double factor = 0.8;
    std::size_t interval = 10;
};

struct TrainConfig {
    nn::LossKind loss = nn::LossKind::Mse;
    nn::Activation hidden = nn::Activation::Relu;
    nn::Activation output = nn::Activation::Sigmoid;
    ScalingKind scaling = ScalingKind::Range;
    double learning_rate = 1e-3;
    std::optional<LrSchedule> schedule;
    nn::AdamConfig adam;  // learning_rate field is overridden per epoch
    std::size_t batch_size = 12;
    std::size_t max_epochs = 100;
    std::size_t patience = 20;
    double pa_weight = 1.0;
    std::uint64_t seed = 0;
    std::string case_label = "0";

    void validate() const;
};

/// lr at a 1-based epoch: lr0 * factor^floor((epoch - 1) / interval).
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

/// Validation-loss bookkeeping: an improvement is a drop of at least 1e-12.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience);

    /// Records one epoch; returns true when it is the new best.
    bool update(std::size_t epoch, double val_loss);
    bool should_stop() const noexcept { return epochs_without_improvement_ >= patience_; }

    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best_loss() const noexcept { return best_loss_; }

private:
    std::size_t patience_;
    std::size_t best_epoch_ = 0;
    double best_loss_;
    std::size_t epochs_without_improvement_ = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t stopping_epoch = 0;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    double wall_seconds = 0.0;
};

/// CSV with header epoch,train_loss,val_loss,lr.
std::string train_report_csv(const TrainReport& report);

struct TrainResult {
    nn::Parameters params;  // best-validation parameters
    TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam with per-epoch validation, lr schedule and early stopping.
/// `spec.hidden` / `spec.output` are used as given; the config's copies are for presets.
TrainResult train(const nn::NetworkSpec& spec, const TrainConfig& config, const WindowSet& train_windows,
                  const WindowSet& val_windows, const nn::LossSpec& loss,
                  const EpochCallback& on_epoch = {});

/// Mean loss over a whole window set, evaluated in chunks of `chunk` windows.
nn::LossTerms evaluate_windows(const nn::NetworkSpec& spec, const nn::Parameters& params,
                               const WindowSet& windows, const nn::LossSpec& loss, std::size_t chunk = 256);

enum class RolloutStride {
    Full,    // append all p predictions, slide by p
    Single,  // append the first prediction, slide by 1
};

/// Maps a q x N window to a p x N prediction.
using Forecaster = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// Autoregressive extrapolation from a q x N seed window. Returns N x steps.
Eigen::MatrixXd rollout(const Forecaster& model, const Eigen::MatrixXd& seed_window, std::size_t steps,
                        RolloutStride stride = RolloutStride::Full);
Eigen::MatrixXd rollout(const nn::NetworkSpec& spec, const nn::Parameters& params,
                        const Eigen::MatrixXd& seed_window, std::size_t steps,
                        RolloutStride stride = RolloutStride::Full);

/// Number of forecaster calls needed for `steps` columns.
std::size_t rollout_calls(std::size_t steps, std::size_t horizon, RolloutStride stride);

}  // namespace rom::forecast
