#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "rom/error.hpp"
#include "rom/forecast.hpp"

namespace rom::forecast {

nn::LossTerms evaluate_windows(const nn::NetworkSpec& spec, const nn::Parameters& params,
                               const WindowSet& windows, const nn::LossSpec& loss, std::size_t chunk) {
    if (windows.size() == 0) throw InvalidArgument("cannot evaluate an empty window set");
    if (chunk == 0) chunk = windows.size();
    nn::LossTerms sum;
    const std::span<const Eigen::MatrixXd> inputs(windows.inputs);
    const std::span<const Eigen::MatrixXd> targets(windows.targets);
    for (std::size_t b = 0; b < windows.size(); b += chunk) {
        const std::size_t count = std::min(chunk, windows.size() - b);
        const auto terms = nn::batch_loss(spec, params, inputs.subspan(b, count), targets.subspan(b, count), loss);
        const double w = static_cast<double>(count);
        sum.total += w * terms.total;
        sum.mse += w * terms.mse;
        sum.mass += w * terms.mass;
    }
    const double n = static_cast<double>(windows.size());
    return {sum.total / n, sum.mse / n, sum.mass / n};
}

TrainResult train(const nn::NetworkSpec& spec, const TrainConfig& config, const WindowSet& train_windows,
                  const WindowSet& val_windows, const nn::LossSpec& loss, const EpochCallback& on_epoch) {
    config.validate();
    spec.validate();
    if (train_windows.size() == 0) throw InvalidArgument("no training windows");
    if (val_windows.size() == 0) throw InvalidArgument("no validation windows");

    const auto started = std::chrono::steady_clock::now();
    TrainResult result{nn::Parameters::initialized(spec, config.seed), {}};
    nn::Parameters& params = result.params;

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    EarlyStopping stopper(config.patience);
    std::vector<double> best_values = params.values;
    std::vector<Eigen::MatrixXd> batch_in;
    std::vector<Eigen::MatrixXd> batch_out;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        nn::AdamConfig adam = config.adam;
        adam.learning_rate = learning_rate_at(config, epoch);

        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[rng() % (i + 1)]);
        }

        double loss_sum = 0.0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, order.size() - b);
            batch_in.clear();
            batch_out.clear();
            for (std::size_t i = b; i < b + count; ++i) {
                batch_in.push_back(train_windows.inputs[order[i]]);
                batch_out.push_back(train_windows.targets[order[i]]);
            }
            auto grad = nn::backward(spec, params, batch_in, batch_out, loss);
            if (!std::isfinite(grad.loss.total)) {
                throw NumericError("training loss diverged at epoch " + std::to_string(epoch));
            }
            params.gradients = std::move(grad.gradient);
            nn::adam_step(params, adam);
            loss_sum += grad.loss.total * static_cast<double>(count);
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = loss_sum / static_cast<double>(order.size());
        record.val_loss = evaluate_windows(spec, params, val_windows, loss).total;
        record.learning_rate = adam.learning_rate;
        if (!std::isfinite(record.val_loss)) {
            throw NumericError("validation loss diverged at epoch " + std::to_string(epoch));
        }
        result.report.epochs.push_back(record);
        if (on_epoch) on_epoch(record);

        if (stopper.update(epoch, record.val_loss)) best_values = params.values;
        if (stopper.should_stop()) break;
    }

    params.values = std::move(best_values);
    result.report.stopping_epoch = result.report.epochs.back().epoch;
    result.report.best_epoch = stopper.best_epoch();
    result.report.best_val_loss = stopper.best_loss();
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace rom::forecast
