#include <cmath>

#include "rom/error.hpp"
#include "rom/nn.hpp"

namespace rom::nn {

void adam_step(std::span<double> values, std::span<const double> gradients, AdamState& state,
               const AdamConfig& config, std::size_t step_index) {
    if (!(config.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (step_index < 1) throw InvalidArgument("Adam step index counts from 1");
    if (gradients.size() != values.size()) throw ShapeError("gradient size mismatch");
    if (state.first_moment.size() != values.size()) {
        state.first_moment.assign(values.size(), 0.0);
        state.second_moment.assign(values.size(), 0.0);
    }
    const double t = static_cast<double>(step_index);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = gradients[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g * g;
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    state.step = step_index;
}

void adam_step(Parameters& params, const AdamConfig& config) {
    adam_step(params.values, params.gradients, params.adam, config, params.adam.step + 1);
}

}  // namespace rom::nn
