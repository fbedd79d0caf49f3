#include "rom/error.hpp"
#include "rom/nn.hpp"

namespace rom::nn {

std::string_view to_string(LossKind kind) { return kind == LossKind::Mse ? "mse" : "pa_mse"; }

LossKind parse_loss_kind(std::string_view text) {
    if (text == "mse") return LossKind::Mse;
    if (text == "pa_mse" || text == "pa-mse") return LossKind::PhysicsAware;
    throw InvalidArgument("unknown loss '" + std::string(text) + "' (expected mse|pa_mse)");
}

LossSpec LossSpec::mse() { return LossSpec{}; }

LossSpec LossSpec::physics_aware(Eigen::MatrixXd mass_operator, double weight) {
    if (mass_operator.rows() == 0 || mass_operator.cols() == 0) {
        throw InvalidArgument("physics-aware loss needs at least one species row");
    }
    if (!(weight >= 0.0)) throw InvalidArgument("physics-aware loss weight must be >= 0");
    LossSpec spec;
    spec.kind = LossKind::PhysicsAware;
    spec.mass_gram = mass_operator.transpose() * mass_operator;
    spec.mass_operator = std::move(mass_operator);
    spec.weight = weight;
    return spec;
}

LossSpec make_physics_aware_loss(const Eigen::MatrixXd& modes, const data::Layout& layout,
                                 std::span<const bool> is_species, std::span<const double> sigma,
                                 const Eigen::VectorXd& mode_scale, double weight) {
    if (static_cast<std::size_t>(modes.rows()) != layout.rows()) throw ShapeError("modes do not match layout");
    if (is_species.size() != layout.n_vars || sigma.size() != layout.n_vars) {
        throw ShapeError("species mask / sigma length must equal N_v");
    }
    if (mode_scale.size() != modes.cols()) throw ShapeError("mode scale length must equal N");
    const auto points = static_cast<Eigen::Index>(layout.points());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(points, modes.cols());
    bool any = false;
    for (std::size_t v = 0; v < layout.n_vars; ++v) {
        if (!is_species[v]) continue;
        any = true;
        m += sigma[v] * modes.middleRows(static_cast<Eigen::Index>(v) * points, points);
    }
    if (!any) throw InvalidArgument("physics-aware loss needs at least one species variable");
    m = m * mode_scale.asDiagonal();
    return LossSpec::physics_aware(std::move(m), weight);
}

namespace {

void check_pair(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    if (pred.rows() == 0) throw InvalidArgument("loss over an empty batch");
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw ShapeError("loss: shape mismatch");
}

}  // namespace

double loss_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    check_pair(pred, truth);
    return (pred - truth).squaredNorm() / static_cast<double>(pred.rows() * pred.cols());
}

LossTerms loss_pa_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, const LossSpec& loss) {
    if (loss.kind != LossKind::PhysicsAware || loss.mass_operator.size() == 0) {
        throw InvalidArgument("physics-aware loss requires configured species rows");
    }
    check_pair(pred, truth);
    if (loss.mass_operator.cols() != pred.cols()) throw ShapeError("mass operator width must equal N");
    LossTerms terms;
    terms.mse = loss_mse(pred, truth);
    const Eigen::MatrixXd diff = truth - pred;
    // sum_t ||M d_t||^2 = sum_t d_t^T G d_t
    terms.mass = (diff * loss.mass_gram).cwiseProduct(diff).sum() / static_cast<double>(pred.rows());
    terms.total = terms.mse + loss.weight * terms.mass;
    return terms;
}

LossTerms evaluate_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, const LossSpec& loss) {
    if (loss.kind == LossKind::PhysicsAware) return loss_pa_mse(pred, truth, loss);
    LossTerms terms;
    terms.mse = loss_mse(pred, truth);
    terms.total = terms.mse;
    return terms;
}

}  // namespace rom::nn
