#include <doctest.h>

#include <filesystem>

#include "rom/error.hpp"
#include "rom/pipeline.hpp"

using namespace rom;
using namespace rom::pipeline;

namespace {

data::GeneratorSettings small_flame(std::size_t rank = 4, std::uint64_t seed = 2) {
    data::GeneratorSettings g;
    g.nx = 12;
    g.ny = 8;
    g.n_times = 200;
    g.n_species = 4;
    g.rank = rank;
    g.seed = seed;
    return g;
}

PipelineSettings quick_settings(pod::TruncationCriterion criterion = pod::ModeCount{3}) {
    PipelineSettings s;
    s.criterion = criterion;
    s.spec.units = 6;
    s.train.max_epochs = 2;
    s.train.patience = 2;
    s.train.scaling = forecast::ScalingKind::SumOfMaxima;
    s.train.output = nn::Activation::Tanh;
    s.train.seed = 5;
    return s;
}

const data::SnapshotTensor& flame() {
    static const auto t = data::generate_synthetic_flame(small_flame());
    return t;
}

const RomPipeline& fitted() {
    static const auto pl = fit_pipeline(flame(), quick_settings());
    return pl;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "romkit_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("fitted pipeline shape") {
    const auto& pl = fitted();
    CHECK(pl.mode_count() == 3);
    CHECK(pl.modes.rows() == 3);
    CHECK(pl.modes.cols() == 200);
    CHECK(pl.split.n_train == 136);
    CHECK(pl.split.n_val == 24);
    CHECK(pl.split.n_test == 40);
    CHECK(pl.spec.modes == 3);
    CHECK(pl.report.epochs.size() == 2);
    // The scaler is fitted on the non-test columns only.
    const Eigen::MatrixXd fit_part = pl.scaler.scale(pl.modes.leftCols(160));
    CHECK(fit_part.cwiseAbs().rowwise().maxCoeff().sum() == doctest::Approx(1.0));
}

TEST_CASE("a perfect forecaster reproduces the POD-truncation floor") {
    const auto& pl = fitted();
    const Eigen::MatrixXd truth_scaled = pl.scaled_modes();
    std::size_t next = pl.split.test_begin();
    const forecast::Forecaster oracle = [&](const Eigen::MatrixXd&) {
        Eigen::MatrixXd out(6, 3);
        for (Eigen::Index i = 0; i < 6; ++i) {
            const auto col = std::min<std::size_t>(next + static_cast<std::size_t>(i), 199);
            out.row(i) = truth_scaled.col(static_cast<Eigen::Index>(col)).transpose();
        }
        next += 6;
        return out;
    };
    const auto pred = predict_scaled_modes(pl, oracle, pl.split.n_test);
    const auto report = evaluate(pl, flame(), pred, pl.split.test_begin());
    REQUIRE(report.rrmse_pred.size() == 5);
    for (std::size_t v = 0; v < 5; ++v) {
        CHECK(std::abs(report.rrmse_pred[v] - report.rrmse_pod[v]) <= 1e-10);
    }
    CHECK(std::abs(report.global_rrmse_pred - report.global_rrmse_pod) <= 1e-10);
    CHECK(report.n_mse.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(report.mass_balance_pred.size() == 40);
    CHECK(report.max_mass_balance_pred() < 1e-10);
}

TEST_CASE("per-variable rrmse") {
    const auto& pl = fitted();
    const auto truth = flame().time_slice(160, 200);
    const auto zero = rrmse_per_variable(truth, truth, pl.stats);
    for (double r : zero) CHECK(r == 0.0);

    // The per-point mean field scales to zero, so its error equals the reference norm.
    const data::SnapshotMatrix centered{Eigen::MatrixXd::Zero(truth.layout().rows(), 40), truth.layout()};
    const auto mean_field = data::from_snapshot_matrix(data::inverse_center_scale(centered, pl.stats),
                                                       truth.var_names(), truth.is_species(), truth.dt());
    for (double r : rrmse_per_variable(truth, mean_field, pl.stats)) CHECK(r == doctest::Approx(1.0));

    CHECK_THROWS_AS(rrmse_per_variable(truth, flame().time_slice(0, 10), pl.stats), ShapeError);
}

TEST_CASE("n-MSE") {
    Eigen::VectorXd t(3), p(2);
    t << 0, 2, 1;
    p << 0.3, 2;
    const auto e = n_mse(t, p);
    CHECK(e(0) == doctest::Approx(0.15));
    CHECK(e(1) == 0.0);
    CHECK_THROWS_AS(n_mse(Eigen::VectorXd::Constant(4, 2.0), p), NumericError);
    CHECK_THROWS_AS(n_mse(p, t), ShapeError);
}

TEST_CASE("energy criterion on rank-3 data keeps three modes") {
    const auto t = data::generate_synthetic_flame(small_flame(3, 7));
    auto s = quick_settings(pod::EnergyTarget{0.999});
    s.train.max_epochs = 1;
    s.train.patience = 1;
    const auto pl = fit_pipeline(t, s);
    CHECK(pl.mode_count() == 3);
}

TEST_CASE("transfer on the identical dataset matches the test evaluation") {
    const auto& pl = fitted();
    const auto test = evaluate_test(pl, flame());
    TransferOptions opts;
    opts.reuse_source_basis = true;
    opts.seed_start = pl.split.test_begin() - pl.spec.window;
    const auto tr = transfer_evaluate(pl, flame(), opts);
    CHECK(tr.begin == test.begin);
    CHECK(tr.rrmse_pred == test.rrmse_pred);
    CHECK(tr.global_rrmse_pred == test.global_rrmse_pred);

    // Refit on a new dataset: the forecast covers everything after the seed window.
    const auto other = data::generate_synthetic_flame(small_flame(4, 9));
    const auto r = transfer_evaluate(pl, other);
    CHECK(r.begin == 10);
    CHECK(r.steps == 190);

    auto narrow = small_flame();
    narrow.ny = 6;
    CHECK_THROWS_AS(transfer_evaluate(pl, data::generate_synthetic_flame(narrow), opts), MismatchError);
    auto low = small_flame(2, 3);
    CHECK_THROWS_AS(transfer_evaluate(pl, data::generate_synthetic_flame(low)), MismatchError);
}

TEST_CASE("save and load") {
    const auto& pl = fitted();
    const auto dir = temp_dir("pipeline");
    save_pipeline(dir, pl);
    for (const auto& f : pipeline_files(dir)) CHECK(std::filesystem::exists(f));
    const auto back = load_pipeline(dir);
    CHECK(back.spec == pl.spec);
    CHECK(back.params.values == pl.params.values);
    CHECK(back.basis.modes == pl.basis.modes);
    CHECK(back.modes == pl.modes);
    CHECK(back.scaler.scales() == pl.scaler.scales());
    CHECK(back.split.n_test == pl.split.n_test);
    CHECK(back.report.best_epoch == pl.report.best_epoch);
    CHECK(back.report.epochs.size() == pl.report.epochs.size());
    CHECK(predict_scaled_modes(back, 12) == predict_scaled_modes(pl, 12));

    const auto report_dir = temp_dir("report");
    const auto files = write_eval_report(report_dir, evaluate_test(pl, flame()));
    CHECK(files.size() == 4);

    std::filesystem::remove(dir / "weights.romw");
    CHECK_THROWS_AS(load_pipeline(dir), IoError);
}

TEST_CASE("fit errors name the stage") {
    auto s = quick_settings(pod::ModeCount{20});
    try {
        fit_pipeline(flame(), s);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("pod") != std::string::npos);
    }
    auto few = small_flame();
    few.n_times = 40;
    CHECK_THROWS_AS(fit_pipeline(data::generate_synthetic_flame(few), quick_settings()), InvalidArgument);
}
