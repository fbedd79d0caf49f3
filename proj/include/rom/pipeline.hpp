#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rom/data.hpp"
#include "rom/forecast.hpp"
#include "rom/nn.hpp"
#include "rom/pod.hpp"

namespace rom::pipeline {

struct PipelineSettings {
    pod::TruncationCriterion criterion = pod::ModeCount{18};
    pod::EnergyMeasure energy = pod::EnergyMeasure::SingularValueSum;
    /// kind, window, horizon and units are taken from here; modes and activations are filled in.
    nn::NetworkSpec spec;
    forecast::TrainConfig train;
    double test_frac = 0.2;
    double train_frac = 0.85;
    double epsilon = 1e-12;
    /// Previously fitted preprocessing and truncated basis; both must cover the tensor layout.
    std::optional<data::ScalingStats> stats;
    std::optional<pod::PodBasis> basis;
};

/// Everything needed to forecast from a trained model.
///
/// Preprocessing, POD and the mode scaler are fitted on the non-test snapshots
/// (train + validation). `modes` holds the unscaled coefficients of every snapshot
/// of the source dataset in the truncated basis.
struct RomPipeline {
    data::ScalingStats stats;
    pod::PodBasis basis;  // truncated, J x N
    forecast::ModeScaler scaler;
    nn::NetworkSpec spec;
    nn::Parameters params;
    forecast::SplitPlan split;
    forecast::TrainConfig train_config;
    forecast::TrainReport report;
    Eigen::MatrixXd modes;  // N x n_t
    std::vector<std::string> var_names;
    std::vector<bool> is_species;
    double dt = 0.0;

    std::size_t mode_count() const noexcept { return basis.rank(); }
    Eigen::MatrixXd scaled_modes() const { return scaler.scale(modes); }
    /// Throws ShapeError when the components disagree on J or N.
    void check_consistent() const;
};

/// Preprocess, POD, scale, window and train. Errors carry the failing stage in their message.
RomPipeline fit_pipeline(const data::SnapshotTensor& tensor, const PipelineSettings& settings,
                         const forecast::EpochCallback& on_epoch = {});

/// Loss used for training, rebuilt from the pipeline's fitted components.
nn::LossSpec make_loss(const RomPipeline& pipeline, nn::LossKind kind, double weight);

/// Back-transforms scaled coefficients (N x K) into physical snapshots.
data::SnapshotTensor reconstruct_snapshots(const RomPipeline& pipeline, const Eigen::MatrixXd& scaled_modes);

struct PredictOptions {
    /// First predicted snapshot; defaults to the start of the test split.
    std::optional<std::size_t> start;
    forecast::RolloutStride stride = forecast::RolloutStride::Full;
};

/// Scaled coefficients predicted for [start, start + steps), seeded with the q true columns before start.
Eigen::MatrixXd predict_scaled_modes(const RomPipeline& pipeline, std::size_t steps,
                                     const PredictOptions& options = {});
Eigen::MatrixXd predict_scaled_modes(const RomPipeline& pipeline, const forecast::Forecaster& model,
                                     std::size_t steps, const PredictOptions& options = {});
data::SnapshotTensor predict_snapshots(const RomPipeline& pipeline, std::size_t steps,
                                       const PredictOptions& options = {});

/// ||x~pred - x~true|| / ||x~true|| per variable on centered-scaled fields.
std::vector<double> rrmse_per_variable(const data::SnapshotTensor& truth, const data::SnapshotTensor& pred,
                                       const data::ScalingStats& stats);
/// |true_t - pred_t| / (max(true) - min(true)) for every t of `pred_row`.
/// `true_row` may be longer; its first pred_row.size() entries are compared.
Eigen::VectorXd n_mse(const Eigen::VectorXd& true_row, const Eigen::VectorXd& pred_row);

struct EvalReport {
    std::vector<std::string> var_names;
    std::vector<double> rrmse_pred;  // per variable
    std::vector<double> rrmse_pod;   // POD-truncation floor over the same range
    double global_rrmse_pred = 0.0;
    double global_rrmse_pod = 0.0;
    std::size_t begin = 0;
    std::size_t steps = 0;
    Eigen::MatrixXd n_mse;                   // N x steps
    std::vector<double> mass_balance_pred;   // per predicted time, empty without species
    std::vector<double> mass_balance_truth;

    double mean_rrmse_pred() const;
    double max_mass_balance_pred() const;
};

/// Compares a prediction of [begin, begin + steps) with `truth` (the full dataset the
/// pipeline was fitted on, or any dataset sharing its layout and preprocessing).
/// n-MSE ranges are taken over the whole true coefficient series of `truth`.
EvalReport evaluate(const RomPipeline& pipeline, const data::SnapshotTensor& truth,
                    const Eigen::MatrixXd& scaled_prediction, std::size_t begin);

/// Predicts the test split and evaluates it against the full source dataset.
EvalReport evaluate_test(const RomPipeline& pipeline, const data::SnapshotTensor& truth,
                         forecast::RolloutStride stride = forecast::RolloutStride::Full);

struct TransferOptions {
    /// Project onto the source pipeline's preprocessing, basis and scaler instead of refitting.
    bool reuse_source_basis = false;
    /// First seed snapshot; the forecast starts q snapshots later and runs to the end.
    std::size_t seed_start = 0;
    forecast::RolloutStride stride = forecast::RolloutStride::Full;
};

/// Runs the trained network, without retraining, over a new dataset. By default the new
/// dataset gets its own statistics, POD (truncated to the trained N) and mode scaler.
EvalReport transfer_evaluate(const RomPipeline& pipeline, const data::SnapshotTensor& new_tensor,
                             const TransferOptions& options = {});

/// The pipeline with preprocessing, basis and scaler refitted on a whole new dataset.
RomPipeline refit_for_transfer(const RomPipeline& pipeline, const data::SnapshotTensor& new_tensor);

// Persistence: a directory holding stats.roms, basis.romb, weights.romw,
// train_report.csv and pipeline.conf.
void save_pipeline(const std::filesystem::path& dir, const RomPipeline& pipeline);
RomPipeline load_pipeline(const std::filesystem::path& dir);
std::vector<std::filesystem::path> pipeline_files(const std::filesystem::path& dir);

// EvalReport as CSV tables plus summary.txt. Returns the written files.
std::vector<std::filesystem::path> write_eval_report(const std::filesystem::path& dir, const EvalReport& report);
std::string summarize(const EvalReport& report);

}  // namespace rom::pipeline
