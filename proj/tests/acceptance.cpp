// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero if a criterion
// fails that is not listed in --allow-fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "rom/binary_io.hpp"
#include "rom/cli.hpp"
#include "rom/config.hpp"
#include "rom/data.hpp"
#include "rom/pipeline.hpp"
#include "rom/pod.hpp"

using namespace rom;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome parameter_counts() {
    nn::NetworkSpec s;
    s.modes = 18;
    s.horizon = 6;
    s.window = 10;
    s.units = 100;
    const auto small = nn::count_parameters(s);
    s.units = 400;
    const auto large = nn::count_parameters(s);
    return {small == 125028 && large == 1673628,
            "units=100 -> " + std::to_string(small) + ", units=400 -> " + std::to_string(large)};
}

Outcome gradients() {
    double worst = 0.0;
    int checks = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        for (auto kind : {nn::ModelKind::Lstm, nn::ModelKind::Cnn}) {
            for (bool pa : {false, true}) {
                worst = std::max(worst, gradcheck::max_error(gradcheck::make_case(kind, pa, seed)));
                ++checks;
            }
        }
    }
    return {worst <= 1e-4, std::to_string(checks) + " checks, max rel err " + fmt("%.2e", worst)};
}

Outcome pod_oracle() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> rows(2, 50), cols(2, 30);
    double sv = 0.0, ortho = 0.0, recon = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        const int j = rows(rng);
        const int k = std::min(cols(rng), j);
        const Eigen::MatrixXd x = oracle::random_matrix(j, k, rng);
        const auto pod = pod::compute_pod(x);
        const auto ref = oracle::jacobi_svd(x);
        const auto r = static_cast<Eigen::Index>(pod.basis.rank());
        if (r != k) return {false, "rank " + std::to_string(r) + " for a full-rank " + std::to_string(k) + "-column input"};
        for (Eigen::Index n = 0; n < r; ++n) {
            sv = std::max(sv, std::abs(pod.basis.singular_values(n) - ref.s(n)) / ref.s(n));
        }
        ortho = std::max(ortho, (pod.basis.modes.transpose() * pod.basis.modes - Eigen::MatrixXd::Identity(r, r))
                                    .cwiseAbs()
                                    .maxCoeff());
        recon = std::max(recon, pod::rrmse(x, pod::reconstruct(pod.basis, pod.temporal)));
    }
    return {sv <= 1e-8 && ortho <= 1e-8 && recon < 1e-10,
            "sv " + fmt("%.1e", sv) + ", orthogonality " + fmt("%.1e", ortho) + ", reconstruction " + fmt("%.1e", recon)};
}

Outcome scaler_invariant() {
    std::mt19937_64 rng(77);
    double sum_err = 0.0, over = 0.0, trip = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd t = oracle::random_matrix(1 + trial % 18, 5 + trial * 7, rng) * (1.0 + trial);
        const auto s = forecast::ModeScaler::fit(t, forecast::ScalingKind::SumOfMaxima);
        const Eigen::MatrixXd scaled = s.scale(t);
        sum_err = std::max(sum_err, std::abs(scaled.cwiseAbs().rowwise().maxCoeff().sum() - 1.0));
        over = std::max(over, scaled.cwiseAbs().maxCoeff() - 1.0);
        trip = std::max(trip, ((s.unscale(scaled) - t).cwiseAbs().array() / t.cwiseAbs().array().max(1.0)).maxCoeff());
    }
    return {sum_err <= 1e-12 && over <= 0.0 && trip <= 1e-12,
            "|sum - 1| " + fmt("%.1e", sum_err) + ", round trip " + fmt("%.1e", trip)};
}

Outcome split_windows() {
    const auto s = forecast::split_sequential(999);
    const auto w = forecast::make_windows(Eigen::MatrixXd::Zero(18, 800), 10, 6);
    const bool ok = s.n_train == 680 && s.n_val == 120 && s.n_test == 199 && w.size() == 785;
    return {ok, "(" + std::to_string(s.n_train) + ", " + std::to_string(s.n_val) + ", " + std::to_string(s.n_test) +
                    "), " + std::to_string(w.size()) + " windows"};
}

data::GeneratorSettings flame(data::InletProfile profile) {
    data::GeneratorSettings g;
    g.rank = 6;
    g.n_times = 999;
    g.dt = 2.5e-4;
    g.seed = 1;
    g.profile = profile;
    return g;
}

pipeline::PipelineSettings case_e(nn::ModelKind kind, std::uint64_t seed, std::size_t modes) {
    config::RunConfig rc;
    config::apply_case(rc, "E", config::default_cases_file());
    rc.criterion = pod::ModeCount{modes};
    rc.spec.kind = kind;
    rc.spec.units = 100;
    rc.train.max_epochs = 100;
    rc.train.patience = 20;
    rc.train.seed = seed;
    return rc.pipeline_settings();
}

struct Run {
    pipeline::RomPipeline pl;
    pipeline::EvalReport test;
};

Run fit_and_test(const data::SnapshotTensor& t, const pipeline::PipelineSettings& s, const std::string& label) {
    const auto t0 = std::chrono::steady_clock::now();
    Run r{pipeline::fit_pipeline(t, s), {}};
    r.test = pipeline::evaluate_test(r.pl, t);
    std::printf("  [%s] epochs %zu (best %zu), mean rrmse %.4f, max mass dev %.2e, %.1f s\n", label.c_str(),
                r.pl.report.stopping_epoch, r.pl.report.best_epoch, r.test.mean_rrmse_pred(),
                r.test.max_mass_balance_pred(), seconds_since(t0));
    std::fflush(stdout);
    return r;
}

Outcome end_to_end(const Run& r) {
    const double worst_nmse = r.test.n_mse.row(0).maxCoeff();
    double worst_ratio = 0.0;
    std::string ratios;
    for (std::size_t v = 0; v < r.test.rrmse_pred.size(); ++v) {
        const double ratio = r.test.rrmse_pred[v] / r.test.rrmse_pod[v];
        worst_ratio = std::max(worst_ratio, ratio);
        ratios += (v ? " " : "") + r.test.var_names[v] + "=" + fmt("%.3f", ratio);
    }
    return {worst_nmse < 0.02 && worst_ratio <= 2.0,
            "mode-1 n-MSE max " + fmt("%.4f", worst_nmse) + ", rrmse/floor " + ratios};
}

Outcome model_comparison(const std::vector<Run>& lstm, const std::vector<Run>& cnn) {
    int wins = 0;
    std::string detail;
    for (std::size_t i = 0; i < lstm.size(); ++i) {
        const double a = lstm[i].test.mean_rrmse_pred();
        const double b = cnn[i].test.mean_rrmse_pred();
        wins += a <= b;
        detail += (i ? "; " : "") + std::string("seed ") + std::to_string(i + 1) + " lstm " + fmt("%.4f", a) + " cnn " +
                  fmt("%.4f", b);
    }
    return {2 * wins > static_cast<int>(lstm.size()), std::to_string(wins) + "/" + std::to_string(lstm.size()) + " (" + detail + ")"};
}

/// PA-MSE >= its MSE component over every test batch of a PA-trained model.
bool pa_dominates(const pipeline::RomPipeline& pl) {
    const auto loss = pipeline::make_loss(pl, nn::LossKind::PhysicsAware, pl.train_config.pa_weight);
    const auto w = forecast::make_windows_targeting(pl.scaled_modes(), pl.spec.window, pl.spec.horizon, 0,
                                                    static_cast<std::size_t>(pl.modes.cols()));
    const std::size_t b = pl.train_config.batch_size;
    for (std::size_t i = 0; i < w.size(); i += b) {
        const std::size_t n = std::min(b, w.size() - i);
        const auto terms = nn::batch_loss(pl.spec, pl.params, std::span(w.inputs).subspan(i, n),
                                          std::span(w.targets).subspan(i, n), loss);
        if (!(terms.total >= terms.mse)) return false;
    }
    return true;
}

// Mass-balance deviations on this data sit at rounding level; differences below this are noise.
constexpr double kMassTolerance = 1e-12;

Outcome physics_aware(const std::vector<Run>& pa, const std::vector<Run>& mse) {
    int ok = 0;
    bool dominates = true;
    std::string detail;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const double a = pa[i].test.max_mass_balance_pred();
        const double b = mse[i].test.max_mass_balance_pred();
        ok += std::isfinite(a) && a <= b + kMassTolerance;
        dominates = dominates && pa_dominates(pa[i].pl);
        detail += (i ? "; " : "") + std::string("seed ") + std::to_string(i + 1) + " pa " + fmt("%.2e", a) + " mse " +
                  fmt("%.2e", b);
    }
    return {ok >= 2 && dominates, std::to_string(ok) + "/" + std::to_string(pa.size()) + ", PA >= MSE on all batches: " +
                                      (dominates ? "yes" : "no") + " (" + detail + ")"};
}

Outcome transfer(const pipeline::RomPipeline& pl) {
    const auto target = data::generate_synthetic_flame(flame(data::InletProfile::three_frequency()));
    const auto r = pipeline::transfer_evaluate(pl, target);
    const bool complete = r.steps + r.begin == target.n_times() && r.rrmse_pred.size() == target.n_vars() &&
                          static_cast<std::size_t>(r.n_mse.cols()) == r.steps && !r.mass_balance_pred.empty();
    const bool finite = r.n_mse.allFinite();
    const double worst = r.n_mse.row(0).maxCoeff();
    Eigen::Index at = 0;
    r.n_mse.row(0).maxCoeff(&at);
    return {complete && finite && worst < 0.1,
            std::string("report ") + (complete ? "complete" : "incomplete") + ", mode-1 n-MSE max " + fmt("%.4f", worst) +
                " at t=" + std::to_string(r.begin + static_cast<std::size_t>(at)) + ", mean " +
                fmt("%.4f", r.n_mse.row(0).mean()) + ", global rrmse " + fmt("%.3f", r.global_rrmse_pred)};
}

Outcome determinism() {
    const auto dir = fs::temp_directory_path() / "romkit_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cfg = dir / "run.conf";
    std::ofstream(cfg) << "[data]\nnx = 20\nny = 15\nrank = 6\nn_times = 300\n[pod]\nmodes = 4\n"
                          "[neuralnet]\nunits = 16\n[forecast]\ncase = E\nseed = 11\n";
    std::ostringstream out, err;
    auto cli = [&](std::vector<std::string> args) { return cli::run(args, out, err); };
    if (cli({"--config", cfg.string(), "--out", (dir / "gen").string(), "generate"}) != 0) {
        return {false, "generate failed: " + err.str()};
    }
    const auto data = (dir / "gen" / "dataset.romf").string();
    for (const char* name : {"a", "b"}) {
        if (cli({"--config", cfg.string(), "--out", (dir / name).string(), "train", "--data", data, "--epochs", "4"}) != 0) {
            return {false, "train failed: " + err.str()};
        }
    }
    const bool weights = io::read_file(dir / "a" / "weights.romw") == io::read_file(dir / "b" / "weights.romw");
    const bool report = io::read_file(dir / "a" / "train_report.csv") == io::read_file(dir / "b" / "train_report.csv");
    return {weights && report, std::string("checkpoints ") + (weights ? "identical" : "differ") + ", reports " +
                                   (report ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
    // --allow-fail 7,9: those criteria still print FAIL but do not set the exit status.
    std::set<int> allowed;
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::string(argv[i]) != "--allow-fail") {
            std::fprintf(stderr, "usage: %s [--allow-fail N[,N...]]\n", argv[0]);
            return 2;
        }
        std::stringstream list(argv[i + 1]);
        for (std::string item; std::getline(list, item, ',');) allowed.insert(std::stoi(item));
    }

    std::map<int, Outcome> results;
    auto record = [&](int id, const char* name, auto&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        results[id] = o;
        std::printf("criterion %2d %-24s %s  %s (%.1f s)\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    };

    record(1, "parameter counts", parameter_counts);
    record(2, "gradient check", gradients);
    record(3, "pod oracle", pod_oracle);
    record(4, "mode scaler invariant", scaler_invariant);
    record(5, "split and windows", split_windows);

    // Four retained modes leave a visible truncation floor (criteria 6, 8, 9). The model
    // comparison uses all six so the forecast error is not buried under that floor.
    const auto source = data::generate_synthetic_flame(flame(data::InletProfile::single_frequency()));
    std::vector<Run> pa4, mse4, lstm6, cnn6;
    std::string training_error;
    try {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto tag = " N=4 seed " + std::to_string(seed);
            pa4.push_back(fit_and_test(source, case_e(nn::ModelKind::Lstm, seed, 4), "lstm pa-mse" + tag));
            auto plain = case_e(nn::ModelKind::Lstm, seed, 4);
            plain.train.loss = nn::LossKind::Mse;
            mse4.push_back(fit_and_test(source, plain, "lstm mse" + tag));
        }
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto tag = " N=6 seed " + std::to_string(seed);
            lstm6.push_back(fit_and_test(source, case_e(nn::ModelKind::Lstm, seed, 6), "lstm pa-mse" + tag));
            cnn6.push_back(fit_and_test(source, case_e(nn::ModelKind::Cnn, seed, 6), "cnn pa-mse" + tag));
        }
    } catch (const std::exception& e) {
        training_error = e.what();
    }
    auto need_runs = [&](auto f) {
        return [&, f] {
            if (!training_error.empty()) return Outcome{false, "training failed: " + training_error};
            return f();
        };
    };
    record(6, "end-to-end forecast", need_runs([&] { return end_to_end(pa4[0]); }));
    record(7, "lstm vs cnn", need_runs([&] { return model_comparison(lstm6, cnn6); }));
    record(8, "physics-aware loss", need_runs([&] { return physics_aware(pa4, mse4); }));
    record(9, "transfer", need_runs([&] { return transfer(pa4[0].pl); }));
    record(10, "determinism", determinism);

    int failed = 0, blocking = 0;
    for (const auto& [id, o] : results) {
        failed += !o.pass;
        blocking += !o.pass && !allowed.count(id);
    }
    std::printf("%zu criteria, %d passed, %d failed", results.size(), static_cast<int>(results.size()) - failed, failed);
    if (failed > blocking) std::printf(" (%d listed in --allow-fail)", failed - blocking);
    std::printf("\n");
    return blocking == 0 ? 0 : 1;
}
