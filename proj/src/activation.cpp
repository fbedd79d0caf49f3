#include <cmath>
#include <random>
#include <sstream>

#include "rom/error.hpp"
#include "rom/nn.hpp"

namespace rom::nn {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Lstm ? "lstm" : "cnn"; }

std::string_view to_string(Activation act) {
    switch (act) {
        case Activation::Relu: return "relu";
        case Activation::Elu: return "elu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "lstm") return ModelKind::Lstm;
    if (text == "cnn") return ModelKind::Cnn;
    throw InvalidArgument("unknown model kind '" + std::string(text) + "' (expected lstm|cnn)");
}

Activation parse_activation(std::string_view text) {
    if (text == "relu") return Activation::Relu;
    if (text == "elu") return Activation::Elu;
    if (text == "sigmoid") return Activation::Sigmoid;
    if (text == "tanh") return Activation::Tanh;
    throw InvalidArgument("unknown activation '" + std::string(text) + "'");
}

double activate(Activation act, double x) {
    switch (act) {
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Elu: return x > 0.0 ? x : std::expm1(x);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Tanh: return std::tanh(x);
    }
    return x;
}

double activate_derivative(Activation act, double x) {
    switch (act) {
        case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Elu: return x > 0.0 ? 1.0 : std::exp(x);
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case Activation::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

void NetworkSpec::validate() const {
    if (modes == 0 || horizon == 0 || window == 0) {
        throw InvalidArgument("network modes, horizon and window must be >= 1");
    }
    if (kind == ModelKind::Lstm && units == 0) throw InvalidArgument("LSTM units must be >= 1");
    if (kind == ModelKind::Cnn && window < 2 * (kKernel - 1) + 1) {
        throw InvalidArgument("CNN model needs a window of at least " +
                              std::to_string(2 * (kKernel - 1) + 1) + " snapshots");
    }
}

std::string describe(const NetworkSpec& spec) {
    std::ostringstream os;
    os << to_string(spec.kind) << "(N=" << spec.modes << ", p=" << spec.horizon << ", q=" << spec.window;
    if (spec.kind == ModelKind::Lstm) os << ", units=" << spec.units;
    os << ", hidden=" << to_string(spec.hidden) << ", output=" << to_string(spec.output) << ")";
    return os.str();
}

std::vector<ParameterBlock> parameter_layout(const NetworkSpec& spec) {
    spec.validate();
    std::vector<ParameterBlock> blocks;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
        blocks.push_back({std::move(name), offset, rows, cols});
        offset += rows * cols;
    };
    const std::size_t n = spec.modes;
    const std::size_t p = spec.horizon;
    if (spec.kind == ModelKind::Lstm) {
        const std::size_t u = spec.units;
        add("lstm.W", 4 * u, n);
        add("lstm.U", 4 * u, u);
        add("lstm.b", 4 * u, 1);
        add("fc.W", p * u, u);
        add("fc.b", p * u, 1);
        add("step.W", kStepWidth, u);
        add("step.b", kStepWidth, 1);
        for (std::size_t k = 0; k < p; ++k) {
            add("head" + std::to_string(k) + ".W", n, kStepWidth);
            add("head" + std::to_string(k) + ".b", n, 1);
        }
    } else {
        const std::size_t flat = (spec.window - 2 * (kKernel - 1)) * kConv2Channels;
        add("conv1.W", kConv1Channels, kKernel * n);
        add("conv1.b", kConv1Channels, 1);
        add("conv2.W", kConv2Channels, kKernel * kConv1Channels);
        add("conv2.b", kConv2Channels, 1);
        add("fc1.W", kDenseWidth, flat);
        add("fc1.b", kDenseWidth, 1);
        add("fc2.W", kDenseWidth, kDenseWidth);
        add("fc2.b", kDenseWidth, 1);
        for (std::size_t k = 0; k < p; ++k) {
            add("head" + std::to_string(k) + ".W", n, kDenseWidth);
            add("head" + std::to_string(k) + ".b", n, 1);
        }
    }
    return blocks;
}

std::size_t count_parameters(const NetworkSpec& spec) {
    const auto blocks = parameter_layout(spec);
    return blocks.back().offset + blocks.back().size();
}

Parameters::Parameters(const NetworkSpec& spec) : blocks(parameter_layout(spec)) {
    const std::size_t n = blocks.back().offset + blocks.back().size();
    values.assign(n, 0.0);
    gradients.assign(n, 0.0);
    adam.first_moment.assign(n, 0.0);
    adam.second_moment.assign(n, 0.0);
}

Parameters Parameters::initialized(const NetworkSpec& spec, std::uint64_t seed) {
    Parameters params(spec);
    std::mt19937_64 rng(seed);
    // Weight matrices and the bias that follows share the weight's fan-in.
    std::size_t fan_in = 1;
    for (const auto& b : params.blocks) {
        const bool is_bias = b.cols == 1 && b.name.ends_with(".b");
        if (!is_bias) {
            fan_in = b.name == "lstm.W" || b.name == "lstm.U" ? spec.modes + spec.units : b.cols;
        }
        const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t i = 0; i < b.size(); ++i) params.values[b.offset + i] = dist(rng);
        if (b.name == "lstm.b") {
            for (std::size_t i = spec.units; i < 2 * spec.units; ++i) params.values[b.offset + i] = 1.0;
        }
    }
    return params;
}

const ParameterBlock& Parameters::block(std::string_view name) const {
    for (const auto& b : blocks) {
        if (b.name == name) return b;
    }
    throw InvalidArgument("no parameter block named '" + std::string(name) + "'");
}

}  // namespace rom::nn
