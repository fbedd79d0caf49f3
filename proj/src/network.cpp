#include <cmath>

#include "rom/error.hpp"
#include "rom/nn.hpp"

namespace rom::nn {

namespace {

using Matrix = Eigen::MatrixXd;
using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using MutMap = Eigen::Map<Eigen::MatrixXd>;

ConstMap view(const std::vector<double>& flat, const ParameterBlock& b) {
    return ConstMap(flat.data() + b.offset, static_cast<Eigen::Index>(b.rows),
                    static_cast<Eigen::Index>(b.cols));
}

MutMap view(std::vector<double>& flat, const ParameterBlock& b) {
    return MutMap(flat.data() + b.offset, static_cast<Eigen::Index>(b.rows),
                  static_cast<Eigen::Index>(b.cols));
}

Matrix apply(Activation act, const Matrix& z) {
    return z.unaryExpr([act](double v) { return activate(act, v); });
}

Matrix derivative(Activation act, const Matrix& z) {
    return z.unaryExpr([act](double v) { return activate_derivative(act, v); });
}

Matrix sigmoid(const Eigen::Ref<const Matrix>& z) {
    return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

void check_finite(const Matrix& m, int layer, std::string_view what) {
    if (!m.allFinite()) {
        throw NumericError("non-finite activation in layer " + std::to_string(layer) + " (" +
                           std::string(what) + ")");
    }
}

/// Splits B windows (q x N each) into q per-time matrices of shape N x B.
std::vector<Matrix> time_major(const NetworkSpec& spec, std::span<const Matrix> windows) {
    const auto n = static_cast<Eigen::Index>(spec.modes);
    const auto batch = static_cast<Eigen::Index>(windows.size());
    std::vector<Matrix> x(spec.window, Matrix(n, batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
        const auto& w = windows[static_cast<std::size_t>(b)];
        if (w.rows() != static_cast<Eigen::Index>(spec.window) || w.cols() != n) {
            throw ShapeError("window must be " + std::to_string(spec.window) + " x " +
                             std::to_string(spec.modes) + ", got " + std::to_string(w.rows()) + " x " +
                             std::to_string(w.cols()));
        }
        if (!w.allFinite()) throw NumericError("input window contains non-finite values");
        for (std::size_t t = 0; t < spec.window; ++t) x[t].col(b) = w.row(static_cast<Eigen::Index>(t)).transpose();
    }
    return x;
}

/// Forward state of a batch, kept for backpropagation.
struct Trace {
    std::vector<Matrix> x;

    // LSTM model
    std::vector<Matrix> gate_i, gate_f, gate_o, cand_pre, cand, cell, cell_act, hidden;  // cell/hidden: q+1
    Matrix fc_pre, fc_act;
    std::vector<Matrix> step_pre, step_act;

    // CNN model
    std::vector<Matrix> col1, conv1_pre, conv1_act, col2, conv2_pre, conv2_act;
    Matrix flat, fc1_pre, fc1_act, fc2_pre, fc2_act;

    std::vector<Matrix> head_pre, head_out;  // p entries, N x B
};

class Network {
public:
    Network(const NetworkSpec& spec, const Parameters& params) : spec_(spec), params_(params) {
        spec_.validate();
        if (params_.values.size() != count_parameters(spec_)) {
            throw ShapeError("parameter count " + std::to_string(params_.values.size()) +
                             " does not match " + describe(spec_));
        }
    }

    Trace run(std::span<const Matrix> windows) const {
        Trace tr;
        tr.x = time_major(spec_, windows);
        if (spec_.kind == ModelKind::Lstm) {
            run_lstm(tr, static_cast<Eigen::Index>(windows.size()));
        } else {
            run_cnn(tr);
        }
        return tr;
    }

    /// d_out[k] is dLoss/d(head k output), N x B. Accumulates into `grad`.
    void backprop(const Trace& tr, const std::vector<Matrix>& d_out, std::vector<double>& grad) const {
        if (spec_.kind == ModelKind::Lstm) {
            back_lstm(tr, d_out, grad);
        } else {
            back_cnn(tr, d_out, grad);
        }
    }

private:
    ConstMap w(std::string_view name) const { return view(params_.values, params_.block(name)); }
    MutMap g(std::vector<double>& grad, std::string_view name) const { return view(grad, params_.block(name)); }
    static std::string head(std::size_t k, const char* suffix) { return "head" + std::to_string(k) + suffix; }

    void run_heads(Trace& tr, const std::vector<const Matrix*>& features, int layer) const {
        tr.head_pre.resize(spec_.horizon);
        tr.head_out.resize(spec_.horizon);
        for (std::size_t k = 0; k < spec_.horizon; ++k) {
            tr.head_pre[k] = (w(head(k, ".W")) * *features[k]).colwise() + w(head(k, ".b")).col(0);
            tr.head_out[k] = apply(spec_.output, tr.head_pre[k]);
            check_finite(tr.head_out[k], layer, "output head");
        }
    }

    void run_lstm(Trace& tr, Eigen::Index batch) const {
        const auto u = static_cast<Eigen::Index>(spec_.units);
        const auto q = spec_.window;
        const auto W = w("lstm.W");
        const auto U = w("lstm.U");
        const auto b = w("lstm.b").col(0);
        tr.cell.assign(q + 1, Matrix::Zero(u, batch));
        tr.hidden.assign(q + 1, Matrix::Zero(u, batch));
        tr.gate_i.resize(q);
        tr.gate_f.resize(q);
        tr.gate_o.resize(q);
        tr.cand_pre.resize(q);
        tr.cand.resize(q);
        tr.cell_act.resize(q);
        for (std::size_t t = 0; t < q; ++t) {
            const Matrix z = ((W * tr.x[t] + U * tr.hidden[t]).colwise() + b).eval();
            tr.gate_i[t] = sigmoid(z.topRows(u));
            tr.gate_f[t] = sigmoid(z.middleRows(u, u));
            tr.cand_pre[t] = z.middleRows(2 * u, u);
            tr.gate_o[t] = sigmoid(z.bottomRows(u));
            tr.cand[t] = apply(spec_.hidden, tr.cand_pre[t]);
            tr.cell[t + 1] = tr.gate_f[t].cwiseProduct(tr.cell[t]) + tr.gate_i[t].cwiseProduct(tr.cand[t]);
            tr.cell_act[t] = apply(spec_.hidden, tr.cell[t + 1]);
            tr.hidden[t + 1] = tr.gate_o[t].cwiseProduct(tr.cell_act[t]);
        }
        check_finite(tr.hidden[q], 1, "lstm");

        tr.fc_pre = (w("fc.W") * tr.hidden[q]).colwise() + w("fc.b").col(0);
        tr.fc_act = apply(spec_.hidden, tr.fc_pre);
        check_finite(tr.fc_act, 2, "fc");

        tr.step_pre.resize(spec_.horizon);
        tr.step_act.resize(spec_.horizon);
        std::vector<const Matrix*> features;
        for (std::size_t k = 0; k < spec_.horizon; ++k) {
            const auto slice = tr.fc_act.middleRows(static_cast<Eigen::Index>(k) * u, u);
            tr.step_pre[k] = (w("step.W") * slice).colwise() + w("step.b").col(0);
            tr.step_act[k] = apply(spec_.hidden, tr.step_pre[k]);
            check_finite(tr.step_act[k], 4, "step fc");
            features.push_back(&tr.step_act[k]);
        }
        run_heads(tr, features, 6);
    }

    void back_lstm(const Trace& tr, const std::vector<Matrix>& d_out, std::vector<double>& grad) const {
        const auto u = static_cast<Eigen::Index>(spec_.units);
        const auto q = spec_.window;

        Matrix d_fc_act = Matrix::Zero(tr.fc_act.rows(), tr.fc_act.cols());
        for (std::size_t k = 0; k < spec_.horizon; ++k) {
            const Matrix dz = d_out[k].cwiseProduct(derivative(spec_.output, tr.head_pre[k]));
            g(grad, head(k, ".W")) += dz * tr.step_act[k].transpose();
            g(grad, head(k, ".b")) += dz.rowwise().sum();
            const Matrix d_step = w(head(k, ".W")).transpose() * dz;

            const Matrix dz_step = d_step.cwiseProduct(derivative(spec_.hidden, tr.step_pre[k]));
            const auto slice = tr.fc_act.middleRows(static_cast<Eigen::Index>(k) * u, u);
            g(grad, "step.W") += dz_step * slice.transpose();
            g(grad, "step.b") += dz_step.rowwise().sum();
            d_fc_act.middleRows(static_cast<Eigen::Index>(k) * u, u) = w("step.W").transpose() * dz_step;
        }

        const Matrix dz_fc = d_fc_act.cwiseProduct(derivative(spec_.hidden, tr.fc_pre));
        g(grad, "fc.W") += dz_fc * tr.hidden[q].transpose();
        g(grad, "fc.b") += dz_fc.rowwise().sum();

        Matrix dh = w("fc.W").transpose() * dz_fc;
        Matrix dc = Matrix::Zero(u, dh.cols());
        auto gW = g(grad, "lstm.W");
        auto gU = g(grad, "lstm.U");
        auto gb = g(grad, "lstm.b");
        const auto U = w("lstm.U");
        Matrix dz(4 * u, dh.cols());
        for (std::size_t step = q; step-- > 0;) {
            const Matrix& i = tr.gate_i[step];
            const Matrix& f = tr.gate_f[step];
            const Matrix& o = tr.gate_o[step];
            const Matrix d_o = dh.cwiseProduct(tr.cell_act[step]);
            dc += dh.cwiseProduct(o).cwiseProduct(derivative(spec_.hidden, tr.cell[step + 1]));
            const Matrix d_i = dc.cwiseProduct(tr.cand[step]);
            const Matrix d_g = dc.cwiseProduct(i);
            const Matrix d_f = dc.cwiseProduct(tr.cell[step]);
            dz.topRows(u) = d_i.cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
            dz.middleRows(u, u) = d_f.cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
            dz.middleRows(2 * u, u) = d_g.cwiseProduct(derivative(spec_.hidden, tr.cand_pre[step]));
            dz.bottomRows(u) = d_o.cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));
            gW += dz * tr.x[step].transpose();
            gU += dz * tr.hidden[step].transpose();
            gb += dz.rowwise().sum();
            dh = U.transpose() * dz;
            dc = dc.cwiseProduct(f).eval();
        }
    }

    void run_cnn(Trace& tr) const {
        const std::size_t len1 = spec_.window - (kKernel - 1);
        const std::size_t len2 = len1 - (kKernel - 1);
        const auto n = static_cast<Eigen::Index>(spec_.modes);
        const auto c1 = static_cast<Eigen::Index>(kConv1Channels);
        const auto c2 = static_cast<Eigen::Index>(kConv2Channels);
        const auto batch = tr.x[0].cols();

        tr.col1.resize(len1);
        tr.conv1_pre.resize(len1);
        tr.conv1_act.resize(len1);
        for (std::size_t t = 0; t < len1; ++t) {
            tr.col1[t].resize(static_cast<Eigen::Index>(kKernel) * n, batch);
            for (std::size_t k = 0; k < kKernel; ++k) {
                tr.col1[t].middleRows(static_cast<Eigen::Index>(k) * n, n) = tr.x[t + k];
            }
            tr.conv1_pre[t] = (w("conv1.W") * tr.col1[t]).colwise() + w("conv1.b").col(0);
            tr.conv1_act[t] = apply(spec_.hidden, tr.conv1_pre[t]);
            check_finite(tr.conv1_act[t], 1, "conv1d");
        }

        tr.col2.resize(len2);
        tr.conv2_pre.resize(len2);
        tr.conv2_act.resize(len2);
        tr.flat.resize(static_cast<Eigen::Index>(len2) * c2, batch);
        for (std::size_t t = 0; t < len2; ++t) {
            tr.col2[t].resize(static_cast<Eigen::Index>(kKernel) * c1, batch);
            for (std::size_t k = 0; k < kKernel; ++k) {
                tr.col2[t].middleRows(static_cast<Eigen::Index>(k) * c1, c1) = tr.conv1_act[t + k];
            }
            tr.conv2_pre[t] = (w("conv2.W") * tr.col2[t]).colwise() + w("conv2.b").col(0);
            tr.conv2_act[t] = apply(spec_.hidden, tr.conv2_pre[t]);
            check_finite(tr.conv2_act[t], 2, "conv1d");
            tr.flat.middleRows(static_cast<Eigen::Index>(t) * c2, c2) = tr.conv2_act[t];
        }

        tr.fc1_pre = (w("fc1.W") * tr.flat).colwise() + w("fc1.b").col(0);
        tr.fc1_act = apply(spec_.hidden, tr.fc1_pre);
        check_finite(tr.fc1_act, 4, "fc");
        tr.fc2_pre = (w("fc2.W") * tr.fc1_act).colwise() + w("fc2.b").col(0);
        tr.fc2_act = apply(spec_.hidden, tr.fc2_pre);
        check_finite(tr.fc2_act, 5, "fc");

        const std::vector<const Matrix*> features(spec_.horizon, &tr.fc2_act);
        run_heads(tr, features, 7);
    }

    void back_cnn(const Trace& tr, const std::vector<Matrix>& d_out, std::vector<double>& grad) const {
        const auto c1 = static_cast<Eigen::Index>(kConv1Channels);
        const auto c2 = static_cast<Eigen::Index>(kConv2Channels);

        Matrix d_fc2 = Matrix::Zero(tr.fc2_act.rows(), tr.fc2_act.cols());
        for (std::size_t k = 0; k < spec_.horizon; ++k) {
            const Matrix dz = d_out[k].cwiseProduct(derivative(spec_.output, tr.head_pre[k]));
            g(grad, head(k, ".W")) += dz * tr.fc2_act.transpose();
            g(grad, head(k, ".b")) += dz.rowwise().sum();
            d_fc2 += w(head(k, ".W")).transpose() * dz;
        }

        const Matrix dz2 = d_fc2.cwiseProduct(derivative(spec_.hidden, tr.fc2_pre));
        g(grad, "fc2.W") += dz2 * tr.fc1_act.transpose();
        g(grad, "fc2.b") += dz2.rowwise().sum();
        const Matrix d_fc1 = w("fc2.W").transpose() * dz2;

        const Matrix dz1 = d_fc1.cwiseProduct(derivative(spec_.hidden, tr.fc1_pre));
        g(grad, "fc1.W") += dz1 * tr.flat.transpose();
        g(grad, "fc1.b") += dz1.rowwise().sum();
        const Matrix d_flat = w("fc1.W").transpose() * dz1;

        std::vector<Matrix> d_conv1(tr.conv1_act.size(), Matrix::Zero(c1, d_flat.cols()));
        for (std::size_t t = 0; t < tr.conv2_act.size(); ++t) {
            const Matrix dz = d_flat.middleRows(static_cast<Eigen::Index>(t) * c2, c2)
                                  .cwiseProduct(derivative(spec_.hidden, tr.conv2_pre[t]));
            g(grad, "conv2.W") += dz * tr.col2[t].transpose();
            g(grad, "conv2.b") += dz.rowwise().sum();
            const Matrix d_col = w("conv2.W").transpose() * dz;
            for (std::size_t k = 0; k < kKernel; ++k) {
                d_conv1[t + k] += d_col.middleRows(static_cast<Eigen::Index>(k) * c1, c1);
            }
        }
        for (std::size_t t = 0; t < tr.conv1_act.size(); ++t) {
            const Matrix dz = d_conv1[t].cwiseProduct(derivative(spec_.hidden, tr.conv1_pre[t]));
            g(grad, "conv1.W") += dz * tr.col1[t].transpose();
            g(grad, "conv1.b") += dz.rowwise().sum();
        }
    }

    NetworkSpec spec_;
    const Parameters& params_;
};

/// Head outputs of a trace as one (B*p) x N matrix: row b*p + k is step k of window b.
Matrix stack_predictions(const Trace& tr, std::size_t horizon) {
    const auto batch = tr.head_out[0].cols();
    const auto n = tr.head_out[0].rows();
    Matrix out(batch * static_cast<Eigen::Index>(horizon), n);
    for (Eigen::Index b = 0; b < batch; ++b) {
        for (std::size_t k = 0; k < horizon; ++k) {
            out.row(b * static_cast<Eigen::Index>(horizon) + static_cast<Eigen::Index>(k)) =
                tr.head_out[k].col(b).transpose();
        }
    }
    return out;
}

Matrix stack_targets(const NetworkSpec& spec, std::span<const Matrix> targets) {
    const auto p = static_cast<Eigen::Index>(spec.horizon);
    const auto n = static_cast<Eigen::Index>(spec.modes);
    Matrix out(static_cast<Eigen::Index>(targets.size()) * p, n);
    for (std::size_t b = 0; b < targets.size(); ++b) {
        if (targets[b].rows() != p || targets[b].cols() != n) {
            throw ShapeError("target must be " + std::to_string(spec.horizon) + " x " +
                             std::to_string(spec.modes));
        }
        out.middleRows(static_cast<Eigen::Index>(b) * p, p) = targets[b];
    }
    return out;
}

}  // namespace

std::vector<Eigen::MatrixXd> forward_batch(const NetworkSpec& spec, const Parameters& params,
                                           std::span<const Eigen::MatrixXd> windows) {
    if (windows.empty()) return {};
    const Network net(spec, params);
    const Trace tr = net.run(windows);
    std::vector<Eigen::MatrixXd> out(windows.size(), Matrix(spec.horizon, spec.modes));
    for (std::size_t b = 0; b < windows.size(); ++b) {
        for (std::size_t k = 0; k < spec.horizon; ++k) {
            out[b].row(static_cast<Eigen::Index>(k)) = tr.head_out[k].col(static_cast<Eigen::Index>(b)).transpose();
        }
    }
    return out;
}

Eigen::MatrixXd forward(const NetworkSpec& spec, const Parameters& params, const Eigen::MatrixXd& window) {
    return forward_batch(spec, params, std::span(&window, 1)).front();
}

LossTerms batch_loss(const NetworkSpec& spec, const Parameters& params,
                     std::span<const Eigen::MatrixXd> inputs, std::span<const Eigen::MatrixXd> targets,
                     const LossSpec& loss) {
    if (inputs.empty() || inputs.size() != targets.size()) {
        throw ShapeError("batch needs matching, non-empty inputs and targets");
    }
    const Network net(spec, params);
    const Trace tr = net.run(inputs);
    return evaluate_loss(stack_predictions(tr, spec.horizon), stack_targets(spec, targets), loss);
}

GradientResult backward(const NetworkSpec& spec, const Parameters& params,
                        std::span<const Eigen::MatrixXd> inputs, std::span<const Eigen::MatrixXd> targets,
                        const LossSpec& loss) {
    if (inputs.empty() || inputs.size() != targets.size()) {
        throw ShapeError("batch needs matching, non-empty inputs and targets");
    }
    const Network net(spec, params);
    const Trace tr = net.run(inputs);
    const Matrix pred = stack_predictions(tr, spec.horizon);
    const Matrix truth = stack_targets(spec, targets);

    GradientResult result;
    result.loss = evaluate_loss(pred, truth, loss);

    // dL/dpred for every stacked row, then scattered back to the heads.
    const double rows = static_cast<double>(pred.rows());
    const Matrix diff = pred - truth;
    Matrix d_pred = diff * (2.0 / (rows * static_cast<double>(spec.modes)));
    if (loss.kind == LossKind::PhysicsAware) d_pred += diff * loss.mass_gram * (2.0 * loss.weight / rows);

    const auto batch = static_cast<Eigen::Index>(inputs.size());
    std::vector<Matrix> d_out(spec.horizon, Matrix(spec.modes, batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
        for (std::size_t k = 0; k < spec.horizon; ++k) {
            d_out[k].col(b) =
                d_pred.row(b * static_cast<Eigen::Index>(spec.horizon) + static_cast<Eigen::Index>(k)).transpose();
        }
    }

    result.gradient.assign(params.values.size(), 0.0);
    net.backprop(tr, d_out, result.gradient);
    for (std::size_t i = 0; i < result.gradient.size(); ++i) {
        if (!std::isfinite(result.gradient[i])) {
            throw NumericError("non-finite gradient at parameter offset " + std::to_string(i));
        }
    }
    return result;
}

}  // namespace rom::nn
