#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rom/data.hpp"

namespace rom::nn {

enum class ModelKind { Lstm, Cnn };
enum class Activation { Relu, Elu, Sigmoid, Tanh };

std::string_view to_string(ModelKind kind);
std::string_view to_string(Activation act);
ModelKind parse_model_kind(std::string_view text);
Activation parse_activation(std::string_view text);

/// ReLU = max(0,x); ELU = x for x > 0 else e^x - 1 (alpha = 1); logistic sigmoid; tanh.
double activate(Activation act, double x);
/// Derivative with respect to the pre-activation x.
double activate_derivative(Activation act, double x);

// Fixed layer widths of the two architectures.
inline constexpr std::size_t kStepWidth = 80;       // LSTM model: per-step FC after reshape
inline constexpr std::size_t kConv1Channels = 30;
inline constexpr std::size_t kConv2Channels = 60;
inline constexpr std::size_t kKernel = 3;
inline constexpr std::size_t kDenseWidth = 100;     // CNN model: both FC layers

/// Layer-by-layer architecture description.
///
/// LSTM model: LSTM(units, final state) -> FC(horizon*units) -> reshape(horizon x units)
///   -> per-step FC(80) -> split along steps -> horizon heads FC(80 -> modes).
/// CNN model: Conv1D(modes->30,k3) -> Conv1D(30->60,k3) -> flatten((window-4)*60)
///   -> FC(100) -> FC(100) -> fan-out -> horizon heads FC(100 -> modes).
/// `units` only affects the LSTM model.
struct NetworkSpec {
    ModelKind kind = ModelKind::Lstm;
    std::size_t modes = 1;    // N, input/output feature width
    std::size_t horizon = 6;  // p, output heads
    std::size_t window = 10;  // q, input sequence length
    std::size_t units = 100;
    Activation hidden = Activation::Relu;
    Activation output = Activation::Sigmoid;

    void validate() const;
    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::string describe(const NetworkSpec& spec);

/// One contiguous slice of the flat parameter array, viewed as a column-major matrix.
struct ParameterBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
};

/// Offset table in storage order. LSTM gate rows are ordered (input, forget, cell, output).
std::vector<ParameterBlock> parameter_layout(const NetworkSpec& spec);
std::size_t count_parameters(const NetworkSpec& spec);

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::size_t step = 0;
};

/// Flat trainable weights with a paired gradient buffer and Adam moments.
struct Parameters {
    std::vector<double> values;
    std::vector<double> gradients;
    AdamState adam;
    std::vector<ParameterBlock> blocks;

    Parameters() = default;
    /// All-zero parameters for `spec`.
    explicit Parameters(const NetworkSpec& spec);

    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, LSTM forget bias 1.
    static Parameters initialized(const NetworkSpec& spec, std::uint64_t seed);

    std::size_t size() const noexcept { return values.size(); }
    const ParameterBlock& block(std::string_view name) const;
};

/// One window is q x N (row t = snapshot t); one prediction is p x N.
Eigen::MatrixXd forward(const NetworkSpec& spec, const Parameters& params, const Eigen::MatrixXd& window);
std::vector<Eigen::MatrixXd> forward_batch(const NetworkSpec& spec, const Parameters& params,
                                           std::span<const Eigen::MatrixXd> windows);

enum class LossKind { Mse, PhysicsAware };
std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

/// Loss configuration. For the physics-aware loss, `mass_operator` (P x N) maps a
/// difference of network-space modes to the difference of summed species mass
/// fractions at each of the P grid points.
struct LossSpec {
    LossKind kind = LossKind::Mse;
    Eigen::MatrixXd mass_operator;
    Eigen::MatrixXd mass_gram;  // mass_operator^T mass_operator
    double weight = 1.0;

    static LossSpec mse();
    static LossSpec physics_aware(Eigen::MatrixXd mass_operator, double weight = 1.0);
};

/// Builds the mass operator: for point p and mode j,
/// M[p, j] = mode_scale[j] * sum_{species s} sigma[s] * U[row(s, p), j].
/// Temporal means cancel in a difference of reconstructions, so only this linear part is needed.
LossSpec make_physics_aware_loss(const Eigen::MatrixXd& modes, const data::Layout& layout,
                                 std::span<const bool> is_species, std::span<const double> sigma,
                                 const Eigen::VectorXd& mode_scale, double weight = 1.0);

struct LossTerms {
    double total = 0.0;
    double mse = 0.0;
    double mass = 0.0;
};

/// Rows are snapshots: (1/N_K) sum_t (1/N) ||pred_t - truth_t||^2.
double loss_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);
/// MSE plus weight * (1/N_K) sum_t ||M (truth_t - pred_t)||^2.
LossTerms loss_pa_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, const LossSpec& loss);
LossTerms evaluate_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, const LossSpec& loss);

/// Loss over a batch of windows: every p x N target row counts as one snapshot.
LossTerms batch_loss(const NetworkSpec& spec, const Parameters& params,
                     std::span<const Eigen::MatrixXd> inputs, std::span<const Eigen::MatrixXd> targets,
                     const LossSpec& loss);

struct GradientResult {
    LossTerms loss;
    std::vector<double> gradient;
};

/// Analytic gradient of the batch loss with respect to every parameter.
GradientResult backward(const NetworkSpec& spec, const Parameters& params,
                        std::span<const Eigen::MatrixXd> inputs, std::span<const Eigen::MatrixXd> targets,
                        const LossSpec& loss);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam update; `step_index` counts from 1.
void adam_step(std::span<double> values, std::span<const double> gradients, AdamState& state,
               const AdamConfig& config, std::size_t step_index);
/// Applies params.gradients and advances params.adam.step.
void adam_step(Parameters& params, const AdamConfig& config);

// ROMW checkpoint: spec echo followed by the flat f64 parameter payload.
void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec, const Parameters& params);
std::pair<NetworkSpec, Parameters> load_checkpoint(const std::filesystem::path& path);
/// Rejects checkpoints whose spec differs from `expected`.
Parameters load_checkpoint(const std::filesystem::path& path, const NetworkSpec& expected);

}  // namespace rom::nn
