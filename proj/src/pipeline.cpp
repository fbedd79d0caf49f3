#include "rom/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "rom/error.hpp"

namespace rom::pipeline {

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        rethrow_with_prefix(e, name);
    }
}

Eigen::MatrixXd scaled_matrix(const data::SnapshotTensor& tensor, const data::ScalingStats& stats) {
    return data::center_scale(data::to_snapshot_matrix(tensor), stats).values;
}

}  // namespace

void RomPipeline::check_consistent() const {
    const auto j = static_cast<Eigen::Index>(stats.layout.rows());
    const auto n = static_cast<Eigen::Index>(basis.rank());
    if (basis.modes.rows() != j) throw ShapeError("pipeline: basis rows differ from the data layout");
    if (stats.mean.size() != j) throw ShapeError("pipeline: scaling stats differ from the data layout");
    if (static_cast<Eigen::Index>(spec.modes) != n) throw ShapeError("pipeline: network width differs from N");
    if (static_cast<Eigen::Index>(scaler.modes()) != n) throw ShapeError("pipeline: scaler width differs from N");
    if (modes.rows() != n) throw ShapeError("pipeline: coefficient rows differ from N");
    if (params.size() != nn::count_parameters(spec)) throw ShapeError("pipeline: parameter count mismatch");
    if (var_names.size() != stats.layout.n_vars || is_species.size() != stats.layout.n_vars) {
        throw ShapeError("pipeline: variable metadata differs from the layout");
    }
}

nn::LossSpec make_loss(const RomPipeline& pipeline, nn::LossKind kind, double weight) {
    if (kind == nn::LossKind::Mse) return nn::LossSpec::mse();
    const std::unique_ptr<bool[]> species(new bool[pipeline.is_species.size()]);
    std::copy(pipeline.is_species.begin(), pipeline.is_species.end(), species.get());
    return nn::make_physics_aware_loss(pipeline.basis.modes, pipeline.stats.layout,
                                       std::span<const bool>(species.get(), pipeline.is_species.size()),
                                       pipeline.stats.sigma, pipeline.scaler.scales(), weight);
}

RomPipeline fit_pipeline(const data::SnapshotTensor& tensor, const PipelineSettings& settings,
                         const forecast::EpochCallback& on_epoch) {
    RomPipeline pl;
    pl.var_names = tensor.var_names();
    pl.is_species = tensor.is_species();
    pl.dt = tensor.dt();
    pl.train_config = settings.train;
    pl.spec = settings.spec;
    pl.spec.hidden = settings.train.hidden;
    pl.spec.output = settings.train.output;

    pl.split = stage("split", [&] {
        return forecast::split_sequential(tensor.n_times(), settings.spec.window, settings.spec.horizon,
                                          settings.test_frac, settings.train_frac);
    });
    const std::size_t fit_end = pl.split.test_begin();

    const data::SnapshotMatrix full = data::to_snapshot_matrix(tensor);
    if (settings.stats.has_value() != settings.basis.has_value()) {
        throw InvalidArgument("prefitted statistics and basis must be supplied together");
    }
    pl.stats = stage("preprocess", [&] {
        if (settings.stats) {
            if (settings.stats->layout != tensor.layout()) {
                throw MismatchError("supplied statistics were fitted on a different layout");
            }
            return *settings.stats;
        }
        const data::SnapshotMatrix fit{full.values.leftCols(static_cast<Eigen::Index>(fit_end)), full.layout};
        return data::compute_scaling_stats(fit, settings.epsilon, tensor.var_names());
    });
    const Eigen::MatrixXd scaled = data::center_scale(full, pl.stats).values;

    pl.basis = stage("pod", [&] {
        if (settings.basis) {
            if (settings.basis->rows() != tensor.layout().rows()) {
                throw MismatchError("supplied basis has " + std::to_string(settings.basis->rows()) +
                                    " rows, the dataset has " + std::to_string(tensor.layout().rows()));
            }
            return *settings.basis;
        }
        const auto pod = pod::compute_pod(scaled.leftCols(static_cast<Eigen::Index>(fit_end)));
        return pod::truncate(pod, settings.criterion, settings.energy).basis;
    });
    pl.modes = pod::project(pl.basis, scaled).coefficients;
    pl.spec.modes = pl.basis.rank();

    pl.scaler = stage("mode scaling", [&] {
        return forecast::ModeScaler::fit(pl.modes.leftCols(static_cast<Eigen::Index>(fit_end)),
                                         settings.train.scaling);
    });
    const Eigen::MatrixXd scaled_modes = pl.scaler.scale(pl.modes);

    const auto q = pl.spec.window;
    const auto p = pl.spec.horizon;
    const auto train_w = stage("windowing", [&] {
        return forecast::make_windows_targeting(scaled_modes, q, p, 0, pl.split.n_train);
    });
    const auto val_w = stage("windowing", [&] {
        return forecast::make_windows_targeting(scaled_modes, q, p, pl.split.val_begin(), fit_end);
    });

    const nn::LossSpec loss =
        stage("loss", [&] { return make_loss(pl, settings.train.loss, settings.train.pa_weight); });
    auto trained = stage("training", [&] {
        return forecast::train(pl.spec, settings.train, train_w, val_w, loss, on_epoch);
    });
    pl.params = std::move(trained.params);
    pl.report = std::move(trained.report);
    pl.check_consistent();
    return pl;
}

data::SnapshotTensor reconstruct_snapshots(const RomPipeline& pipeline, const Eigen::MatrixXd& scaled_modes) {
    if (scaled_modes.rows() != static_cast<Eigen::Index>(pipeline.mode_count())) {
        throw ShapeError("reconstruct: expected " + std::to_string(pipeline.mode_count()) + " mode rows");
    }
    const Eigen::MatrixXd coefficients = pipeline.scaler.unscale(scaled_modes);
    const data::SnapshotMatrix x_tilde{pipeline.basis.modes * coefficients, pipeline.stats.layout};
    return data::from_snapshot_matrix(data::inverse_center_scale(x_tilde, pipeline.stats), pipeline.var_names,
                                      pipeline.is_species, pipeline.dt);
}

Eigen::MatrixXd predict_scaled_modes(const RomPipeline& pipeline, const forecast::Forecaster& model,
                                     std::size_t steps, const PredictOptions& options) {
    if (steps < 1) throw InvalidArgument("predict: steps must be >= 1");
    const std::size_t start = options.start.value_or(pipeline.split.test_begin());
    const std::size_t q = pipeline.spec.window;
    if (start < q || start > static_cast<std::size_t>(pipeline.modes.cols())) {
        throw InvalidArgument("predict: start " + std::to_string(start) + " leaves no room for a seed of " +
                              std::to_string(q) + " snapshots");
    }
    const Eigen::MatrixXd seed =
        pipeline.scaler.scale(pipeline.modes.middleCols(static_cast<Eigen::Index>(start - q),
                                                        static_cast<Eigen::Index>(q)))
            .transpose();
    return forecast::rollout(model, seed, steps, options.stride);
}

Eigen::MatrixXd predict_scaled_modes(const RomPipeline& pipeline, std::size_t steps,
                                     const PredictOptions& options) {
    return predict_scaled_modes(
        pipeline, [&](const Eigen::MatrixXd& w) { return nn::forward(pipeline.spec, pipeline.params, w); },
        steps, options);
}

data::SnapshotTensor predict_snapshots(const RomPipeline& pipeline, std::size_t steps,
                                       const PredictOptions& options) {
    return reconstruct_snapshots(pipeline, predict_scaled_modes(pipeline, steps, options));
}

std::vector<double> rrmse_per_variable(const data::SnapshotTensor& truth, const data::SnapshotTensor& pred,
                                       const data::ScalingStats& stats) {
    if (truth.layout() != pred.layout() || truth.n_times() != pred.n_times()) {
        throw ShapeError("rrmse: truth and prediction dims differ");
    }
    const Eigen::MatrixXd t = scaled_matrix(truth, stats);
    const Eigen::MatrixXd p = scaled_matrix(pred, stats);
    const auto points = static_cast<Eigen::Index>(truth.layout().points());
    std::vector<double> out;
    for (std::size_t v = 0; v < truth.n_vars(); ++v) {
        const auto rows = Eigen::seqN(static_cast<Eigen::Index>(v) * points, points);
        const double ref = t(rows, Eigen::all).norm();
        if (!(ref > 0.0)) {
            throw NumericError("rrmse: variable '" + truth.var_names()[v] + "' has a zero-norm reference");
        }
        out.push_back((p(rows, Eigen::all) - t(rows, Eigen::all)).norm() / ref);
    }
    return out;
}

Eigen::VectorXd n_mse(const Eigen::VectorXd& true_row, const Eigen::VectorXd& pred_row) {
    if (true_row.size() == 0 || pred_row.size() > true_row.size()) {
        throw ShapeError("n-MSE: prediction is longer than the true series");
    }
    const double range = true_row.maxCoeff() - true_row.minCoeff();
    if (!(range > 0.0)) throw NumericError("n-MSE: true mode series is constant (zero range)");
    return (true_row.head(pred_row.size()) - pred_row).cwiseAbs() / range;
}

double EvalReport::mean_rrmse_pred() const {
    double s = 0.0;
    for (double r : rrmse_pred) s += r;
    return rrmse_pred.empty() ? 0.0 : s / static_cast<double>(rrmse_pred.size());
}

double EvalReport::max_mass_balance_pred() const {
    double m = 0.0;
    for (double d : mass_balance_pred) m = std::max(m, d);
    return m;
}

EvalReport evaluate(const RomPipeline& pipeline, const data::SnapshotTensor& truth,
                    const Eigen::MatrixXd& scaled_prediction, std::size_t begin) {
    const auto steps = static_cast<std::size_t>(scaled_prediction.cols());
    if (truth.layout() != pipeline.stats.layout) throw MismatchError("evaluate: truth layout differs from the pipeline");
    if (steps == 0 || begin + steps > truth.n_times()) {
        throw InvalidArgument("evaluate: prediction range exceeds the true dataset");
    }
    EvalReport report;
    report.var_names = truth.var_names();
    report.begin = begin;
    report.steps = steps;

    const data::SnapshotTensor truth_range = truth.time_slice(begin, begin + steps);
    const data::SnapshotTensor pred = reconstruct_snapshots(pipeline, scaled_prediction);
    report.rrmse_pred = rrmse_per_variable(truth_range, pred, pipeline.stats);

    const Eigen::MatrixXd x_full = scaled_matrix(truth, pipeline.stats);
    const Eigen::MatrixXd true_modes = pod::project(pipeline.basis, x_full).coefficients;
    const Eigen::MatrixXd coeff_range =
        true_modes.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(steps));
    const data::SnapshotTensor pod_only = reconstruct_snapshots(pipeline, pipeline.scaler.scale(coeff_range));
    report.rrmse_pod = rrmse_per_variable(truth_range, pod_only, pipeline.stats);

    const Eigen::MatrixXd x_range =
        x_full.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(steps));
    const Eigen::MatrixXd x_pred = scaled_matrix(pred, pipeline.stats);
    report.global_rrmse_pred = pod::rrmse(x_range, x_pred);
    report.global_rrmse_pod = pod::rrmse(x_range, pipeline.basis.modes * coeff_range);

    const Eigen::MatrixXd pred_modes = pipeline.scaler.unscale(scaled_prediction);
    report.n_mse.resize(pred_modes.rows(), pred_modes.cols());
    for (Eigen::Index j = 0; j < pred_modes.rows(); ++j) {
        const Eigen::VectorXd row = true_modes.row(j).transpose();
        const Eigen::VectorXd truth_tail = row.tail(row.size() - static_cast<Eigen::Index>(begin));
        const double range = row.maxCoeff() - row.minCoeff();
        if (!(range > 0.0)) throw NumericError("n-MSE: true mode " + std::to_string(j + 1) + " is constant");
        report.n_mse.row(j) =
            (truth_tail.head(pred_modes.cols()) - pred_modes.row(j).transpose()).cwiseAbs().transpose() / range;
    }

    if (truth.species_count() > 0) {
        report.mass_balance_pred = data::mass_balance_deviation_per_time(pred);
        report.mass_balance_truth = data::mass_balance_deviation_per_time(truth_range);
    }
    return report;
}

EvalReport evaluate_test(const RomPipeline& pipeline, const data::SnapshotTensor& truth,
                         forecast::RolloutStride stride) {
    PredictOptions options;
    options.stride = stride;
    const Eigen::MatrixXd pred = predict_scaled_modes(pipeline, pipeline.split.n_test, options);
    return evaluate(pipeline, truth, pred, pipeline.split.test_begin());
}

RomPipeline refit_for_transfer(const RomPipeline& pipeline, const data::SnapshotTensor& new_tensor) {
    RomPipeline pl = pipeline;
    const std::size_t n = pipeline.mode_count();
    pl.var_names = new_tensor.var_names();
    pl.is_species = new_tensor.is_species();
    pl.dt = new_tensor.dt();
    const data::SnapshotMatrix x = data::to_snapshot_matrix(new_tensor);
    pl.stats = stage("transfer preprocess", [&] {
        return data::compute_scaling_stats(x, pipeline.stats.epsilon, new_tensor.var_names());
    });
    const Eigen::MatrixXd scaled = data::center_scale(x, pl.stats).values;
    pl.basis = stage("transfer pod", [&] {
        const auto pod = pod::compute_pod(scaled);
        if (pod.basis.rank() < n) {
            throw MismatchError("new dataset retains " + std::to_string(pod.basis.rank()) +
                                " modes, the trained network expects " + std::to_string(n));
        }
        return pod::truncate(pod, pod::ModeCount{n}).basis;
    });
    pl.modes = pod::project(pl.basis, scaled).coefficients;
    pl.scaler = stage("transfer mode scaling",
                      [&] { return forecast::ModeScaler::fit(pl.modes, pipeline.scaler.kind()); });
    pl.split = forecast::SplitPlan{0, 0, new_tensor.n_times()};
    pl.check_consistent();
    return pl;
}

EvalReport transfer_evaluate(const RomPipeline& pipeline, const data::SnapshotTensor& new_tensor,
                             const TransferOptions& options) {
    pipeline.check_consistent();
    const std::size_t q = pipeline.spec.window;
    if (options.seed_start + q >= new_tensor.n_times()) {
        throw InvalidArgument("transfer: dataset of " + std::to_string(new_tensor.n_times()) +
                              " snapshots leaves nothing to forecast after the seed window");
    }
    RomPipeline pl;
    if (options.reuse_source_basis) {
        if (new_tensor.layout() != pipeline.stats.layout) {
            throw MismatchError("transfer: dataset layout differs from the trained pipeline");
        }
        pl = pipeline;
        pl.modes = pod::project(pl.basis, scaled_matrix(new_tensor, pl.stats)).coefficients;
    } else {
        pl = refit_for_transfer(pipeline, new_tensor);
    }
    const std::size_t begin = options.seed_start + q;
    PredictOptions po;
    po.start = begin;
    po.stride = options.stride;
    const Eigen::MatrixXd pred = predict_scaled_modes(pl, new_tensor.n_times() - begin, po);
    return evaluate(pl, new_tensor, pred, begin);
}

}  // namespace rom::pipeline
