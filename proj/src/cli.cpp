#include "rom/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>

#include "rom/binary_io.hpp"
#include "rom/config.hpp"
#include "rom/data.hpp"
#include "rom/forecast.hpp"
#include "rom/nn.hpp"
#include "rom/pipeline.hpp"
#include "rom/pod.hpp"

namespace rom::cli {

namespace {

namespace fs = std::filesystem;
using config::format_double;

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string cases;
    bool verbose = false;
};

/// One manifest.txt per output directory.
class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)) {}

    void set_config(const std::string& path) {
        config_ = path.empty() ? "none" : path;
        if (!path.empty()) config_hash_ = io::sha256_file(path);
    }
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    void add_input(const std::string& name, const fs::path& path) {
        inputs_.emplace_back(name, path.string());
        if (fs::is_regular_file(path)) inputs_.emplace_back(name + "_sha256", io::sha256_file(path));
    }
    void add_outputs(const std::vector<fs::path>& paths) {
        for (const auto& p : paths) outputs_.push_back(p);
    }
    template <class F>
    auto time(const std::string& stage, F&& f) -> decltype(f()) {
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            timings_.emplace_back(stage, seconds_since(t0));
        } else {
            auto r = f();
            timings_.emplace_back(stage, seconds_since(t0));
            return r;
        }
    }

    fs::path write(const fs::path& dir) const {
        config::ConfigFile m;
        m.set("run", "command", command_);
        m.set("run", "version", version());
        m.set("run", "seed", seed_ ? std::to_string(*seed_) : "none");
        m.set("run", "config", config_);
        m.set("run", "config_sha256", config_hash_.empty() ? "none" : config_hash_);
        for (const auto& [k, v] : inputs_) m.set("inputs", k, v);
        for (const auto& p : outputs_) m.set("outputs", p.filename().string(), io::sha256_file(p));
        for (const auto& [k, v] : timings_) m.set("timings", k, format_double(v));
        const fs::path path = dir / "manifest.txt";
        io::write_text(path, m.serialize());
        return path;
    }

private:
    static double seconds_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    std::string command_;
    std::string config_ = "none";
    std::string config_hash_;
    std::optional<std::uint64_t> seed_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<fs::path> outputs_;
    std::vector<std::pair<std::string, double>> timings_;
};

config::RunConfig resolve_config(const Globals& g) {
    config::RunConfig rc;
    if (!g.config_path.empty()) {
        config::apply_config(rc, config::ConfigFile::load(g.config_path), g.cases);
    }
    return rc;
}

fs::path require_out(const Globals& g) {
    if (g.out.empty()) throw InvalidArgument("--out DIR is required for this command");
    std::error_code ec;
    fs::create_directories(g.out, ec);
    if (ec) throw IoError("cannot create output directory " + g.out + ": " + ec.message());
    return g.out;
}

forecast::RolloutStride parse_stride(const std::string& s) {
    if (s == "full") return forecast::RolloutStride::Full;
    if (s == "single") return forecast::RolloutStride::Single;
    throw InvalidArgument("--stride must be full or single");
}

std::vector<std::pair<std::size_t, std::size_t>> parse_points(const std::string& text) {
    static const std::regex point(R"(\(\s*(\d+)\s*,\s*(\d+)\s*\))");
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::string rest;
    auto it = std::sregex_iterator(text.begin(), text.end(), point);
    std::size_t consumed = 0;
    for (; it != std::sregex_iterator(); ++it) {
        rest += text.substr(consumed, static_cast<std::size_t>(it->position()) - consumed);
        consumed = static_cast<std::size_t>(it->position() + it->length());
        out.emplace_back(std::stoull((*it)[1]), std::stoull((*it)[2]));
    }
    rest += text.substr(consumed);
    if (out.empty() || rest.find_first_not_of(" \t,;") != std::string::npos) {
        throw InvalidArgument("--export-points expects \"(i1,j1) (i2,j2) ...\"");
    }
    return out;
}

void write_points_csv(const fs::path& path, const data::SnapshotTensor& pred, const data::SnapshotTensor* truth,
                      std::size_t begin, const std::vector<std::pair<std::size_t, std::size_t>>& points) {
    for (const auto& [i, j] : points) {
        if (i >= pred.nx() || j >= pred.ny()) {
            throw InvalidArgument("export point (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") lies outside the " + std::to_string(pred.nx()) + " x " +
                                  std::to_string(pred.ny()) + " grid");
        }
    }
    std::ostringstream os;
    os << "time_index,time";
    for (const auto& [i, j] : points) {
        for (const auto& name : pred.var_names()) {
            os << ',' << name << "@" << i << ':' << j;
            if (truth) os << ',' << name << "@" << i << ':' << j << "_true";
        }
    }
    os << '\n';
    for (std::size_t k = 0; k < pred.n_times(); ++k) {
        os << begin + k << ',' << format_double(static_cast<double>(begin + k) * pred.dt());
        for (const auto& [i, j] : points) {
            for (std::size_t v = 0; v < pred.n_vars(); ++v) {
                os << ',' << format_double(pred.at(v, i, j, k));
                if (truth) os << ',' << format_double(truth->at(v, i, j, begin + k));
            }
        }
        os << '\n';
    }
    io::write_text(path, os.str());
}

void print_eval(std::ostream& out, const pipeline::EvalReport& report) { out << pipeline::summarize(report); }

// ---------------------------------------------------------------- commands

struct GenerateArgs {
    std::string profile;
};

int cmd_generate(const Globals& g, const GenerateArgs& a, std::ostream& out) {
    auto rc = resolve_config(g);
    if (g.seed) rc.generator.seed = *g.seed;
    if (!a.profile.empty()) {
        if (a.profile == "three") rc.generator.profile = data::InletProfile::three_frequency(rc.generator.profile.v_max, rc.generator.profile.radius);
        else if (a.profile != "single") throw InvalidArgument("--profile must be single or three");
        else if (rc.profile == "three") rc.generator.profile = data::InletProfile::single_frequency(rc.generator.profile.v_max);
    }
    const fs::path dir = require_out(g);
    Manifest manifest("generate");
    manifest.set_config(g.config_path);
    manifest.set_seed(rc.generator.seed);
    const auto tensor = manifest.time("generate", [&] { return data::generate_synthetic_flame(rc.generator); });
    const fs::path file = dir / "dataset.romf";
    manifest.time("write", [&] { data::write_dataset(file, tensor); });
    manifest.add_outputs({file});
    manifest.write(dir);

    out << "dataset " << file.string() << ": N_v=" << tensor.n_vars() << " N_x=" << tensor.nx()
        << " N_y=" << tensor.ny() << " n_t=" << tensor.n_times() << " dt=" << format_double(tensor.dt()) << '\n';
    out << "mass balance: max |sum Y - 1| = " << format_double(data::max_mass_balance_deviation(tensor)) << '\n';
    return kExitOk;
}

struct PodArgs {
    std::string data;
    std::optional<std::size_t> modes;
    std::optional<double> energy;
    std::string measure;
};

int cmd_pod(const Globals& g, const PodArgs& a, std::ostream& out) {
    auto rc = resolve_config(g);
    if (a.modes) rc.criterion = pod::ModeCount{*a.modes};
    if (a.energy) rc.criterion = pod::EnergyTarget{*a.energy};
    if (a.measure == "squared") rc.energy = pod::EnergyMeasure::SquaredEnergy;
    else if (a.measure == "sum") rc.energy = pod::EnergyMeasure::SingularValueSum;
    else if (!a.measure.empty()) throw InvalidArgument("--measure must be sum or squared");

    const fs::path dir = require_out(g);
    Manifest manifest("pod");
    manifest.set_config(g.config_path);
    manifest.add_input("data", a.data);
    const auto tensor = manifest.time("read", [&] { return data::read_dataset(a.data); });
    const auto split = forecast::split_sequential(tensor.n_times(), rc.spec.window, rc.spec.horizon,
                                                  rc.test_frac, rc.train_frac);
    const auto fit_end = static_cast<Eigen::Index>(split.test_begin());

    const data::SnapshotMatrix full = data::to_snapshot_matrix(tensor);
    const auto stats = manifest.time("preprocess", [&] {
        return data::compute_scaling_stats(data::SnapshotMatrix{full.values.leftCols(fit_end), full.layout},
                                           rc.epsilon, tensor.var_names());
    });
    const Eigen::MatrixXd scaled = data::center_scale(full, stats).values;
    const auto pod_full = manifest.time("pod", [&] { return pod::compute_pod(scaled.leftCols(fit_end)); });
    const auto truncated = pod::truncate(pod_full, rc.criterion, rc.energy);
    const auto all_modes = pod::project(truncated.basis, scaled);

    const fs::path stats_file = dir / "stats.roms";
    const fs::path basis_file = dir / "basis.romb";
    data::write_scaling_stats(stats_file, stats);
    pod::write_basis(basis_file, truncated.basis, all_modes);

    std::ostringstream energy;
    energy << "mode,singular_value,energy_sum,energy_squared\n";
    for (std::size_t n = 1; n <= pod_full.basis.rank(); ++n) {
        energy << n << ',' << format_double(pod_full.basis.singular_values(static_cast<Eigen::Index>(n - 1))) << ','
               << format_double(pod::energy_fraction(pod_full.basis, n, pod::EnergyMeasure::SingularValueSum)) << ','
               << format_double(pod::energy_fraction(pod_full.basis, n, pod::EnergyMeasure::SquaredEnergy)) << '\n';
    }
    const fs::path energy_file = dir / "energy.csv";
    io::write_text(energy_file, energy.str());

    const Eigen::MatrixXd recon = truncated.basis.modes * all_modes.coefficients;
    const auto points = static_cast<Eigen::Index>(tensor.layout().points());
    std::ostringstream rr;
    rr << "variable,rrmse\n";
    for (std::size_t v = 0; v < tensor.n_vars(); ++v) {
        const auto rows = Eigen::seqN(static_cast<Eigen::Index>(v) * points, points);
        rr << tensor.var_names()[v] << ','
           << format_double(pod::rrmse(scaled(rows, Eigen::all), recon(rows, Eigen::all))) << '\n';
    }
    rr << "global," << format_double(pod::rrmse(scaled, recon)) << '\n';
    const fs::path rrmse_file = dir / "pod_rrmse.csv";
    io::write_text(rrmse_file, rr.str());

    manifest.add_outputs({stats_file, basis_file, energy_file, rrmse_file});
    manifest.write(dir);

    out << "POD on " << split.test_begin() << " of " << tensor.n_times() << " snapshots: rank "
        << pod_full.basis.rank() << ", retained N=" << truncated.basis.rank() << " ("
        << format_double(pod::energy_fraction(pod_full.basis, truncated.basis.rank(), rc.energy)) << " of energy)\n";
    out << energy.str() << rr.str();
    return kExitOk;
}

struct TrainArgs {
    std::string data;
    std::string basis;
    std::string case_label;
    std::string model;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> units;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out, std::ostream& err) {
    auto rc = resolve_config(g);
    if (!a.case_label.empty()) config::apply_case(rc, a.case_label, g.cases);
    if (!a.model.empty()) rc.spec.kind = nn::parse_model_kind(a.model);
    if (a.units) rc.spec.units = *a.units;
    if (a.epochs) {
        rc.train.max_epochs = *a.epochs;
        rc.train.patience = std::min(rc.train.patience, *a.epochs);
    }
    if (g.seed) rc.train.seed = *g.seed;

    const fs::path dir = require_out(g);
    Manifest manifest("train");
    manifest.set_config(g.config_path);
    manifest.set_seed(rc.train.seed);
    manifest.add_input("data", a.data);
    const auto tensor = manifest.time("read", [&] { return data::read_dataset(a.data); });

    auto settings = rc.pipeline_settings();
    if (!a.basis.empty()) {
        manifest.add_input("stats", fs::path(a.basis) / "stats.roms");
        manifest.add_input("basis", fs::path(a.basis) / "basis.romb");
        settings.stats = data::read_scaling_stats(fs::path(a.basis) / "stats.roms");
        settings.basis = pod::read_basis(fs::path(a.basis) / "basis.romb").basis;
    }
    forecast::EpochCallback log;
    if (g.verbose) {
        log = [&err](const forecast::EpochRecord& r) {
            err << "epoch " << r.epoch << " train " << format_double(r.train_loss) << " val "
                << format_double(r.val_loss) << " lr " << format_double(r.learning_rate) << '\n';
        };
    }
    const auto pl = manifest.time("train", [&] { return pipeline::fit_pipeline(tensor, settings, log); });
    manifest.time("write", [&] { pipeline::save_pipeline(dir, pl); });
    manifest.add_outputs(pipeline::pipeline_files(dir));
    manifest.write(dir);

    out << "case " << rc.train.case_label << ": " << nn::describe(pl.spec) << ", "
        << nn::count_parameters(pl.spec) << " parameters, loss " << nn::to_string(rc.train.loss) << ", scaling "
        << forecast::to_string(rc.train.scaling) << '\n';
    out << "split (train, val, test) = (" << pl.split.n_train << ", " << pl.split.n_val << ", " << pl.split.n_test
        << ")\n";
    out << "stopped at epoch " << pl.report.stopping_epoch << ", best epoch " << pl.report.best_epoch
        << ", best validation loss " << format_double(pl.report.best_val_loss) << '\n';
    return kExitOk;
}

struct PredictArgs {
    std::string pipeline;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> start;
    std::string truth;
    std::string stride;
    std::string points;
};

int cmd_predict(const Globals& g, const PredictArgs& a, std::ostream& out) {
    auto rc = resolve_config(g);
    if (!a.stride.empty()) rc.stride = parse_stride(a.stride);
    const auto points = a.points.empty() ? decltype(parse_points("")){} : parse_points(a.points);
    const fs::path dir = require_out(g);
    Manifest manifest("predict");
    manifest.set_config(g.config_path);
    for (const auto& f : pipeline::pipeline_files(a.pipeline)) manifest.add_input(f.filename().string(), f);
    const auto pl = manifest.time("load", [&] { return pipeline::load_pipeline(a.pipeline); });

    pipeline::PredictOptions po;
    po.start = a.start.value_or(pl.split.test_begin());
    po.stride = rc.stride;
    const std::size_t available = static_cast<std::size_t>(pl.modes.cols()) - *po.start;
    const std::size_t steps = a.steps.value_or(available);

    std::optional<data::SnapshotTensor> truth;
    if (!a.truth.empty()) {
        manifest.add_input("truth", a.truth);
        truth = data::read_dataset(a.truth);
        if (truth->layout() != pl.stats.layout) {
            throw MismatchError("truth dataset layout differs from the pipeline's");
        }
        if (*po.start + steps > truth->n_times()) {
            throw MismatchError("truth dataset has " + std::to_string(truth->n_times()) +
                                " snapshots, the prediction needs " + std::to_string(*po.start + steps));
        }
    }

    const Eigen::MatrixXd scaled =
        manifest.time("rollout", [&] { return pipeline::predict_scaled_modes(pl, steps, po); });
    const auto pred = pipeline::reconstruct_snapshots(pl, scaled);
    std::vector<fs::path> outputs{dir / "predictions.romf"};
    data::write_dataset(outputs.back(), pred);

    if (truth) {
        const auto report = manifest.time("evaluate", [&] { return pipeline::evaluate(pl, *truth, scaled, *po.start); });
        for (const auto& f : pipeline::write_eval_report(dir, report)) outputs.push_back(f);
        print_eval(out, report);
    } else {
        out << "no truth dataset supplied; metrics skipped\n";
    }
    if (!points.empty()) {
        outputs.push_back(dir / "points.csv");
        write_points_csv(outputs.back(), pred, truth ? &*truth : nullptr, *po.start, points);
    }
    manifest.add_outputs(outputs);
    manifest.write(dir);
    out << "predicted " << steps << " snapshots from index " << *po.start << " ("
        << forecast::rollout_calls(steps, pl.spec.horizon, rc.stride) << " forward calls)\n";
    return kExitOk;
}

struct TransferArgs {
    std::string pipeline;
    std::string data;
    bool reuse_basis = false;
    std::size_t seed_start = 0;
    std::string stride;
};

int cmd_transfer(const Globals& g, const TransferArgs& a, std::ostream& out) {
    auto rc = resolve_config(g);
    if (!a.stride.empty()) rc.stride = parse_stride(a.stride);
    const fs::path dir = require_out(g);
    Manifest manifest("transfer");
    manifest.set_config(g.config_path);
    for (const auto& f : pipeline::pipeline_files(a.pipeline)) manifest.add_input(f.filename().string(), f);
    manifest.add_input("data", a.data);
    const auto pl = manifest.time("load", [&] { return pipeline::load_pipeline(a.pipeline); });
    const auto tensor = manifest.time("read", [&] { return data::read_dataset(a.data); });

    pipeline::TransferOptions opts;
    opts.reuse_source_basis = a.reuse_basis;
    opts.seed_start = a.seed_start;
    opts.stride = rc.stride;
    const auto report = manifest.time("transfer", [&] { return pipeline::transfer_evaluate(pl, tensor, opts); });
    manifest.add_outputs(pipeline::write_eval_report(dir, report));
    manifest.write(dir);
    print_eval(out, report);
    return kExitOk;
}

}  // namespace

std::string version() { return "0.1.0"; }

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument:
        case ErrorKind::Config: return kExitUsage;
        case ErrorKind::Degenerate:
        case ErrorKind::Numeric: return kExitNumeric;
        case ErrorKind::Format:
        case ErrorKind::Corrupt:
        case ErrorKind::Io: return kExitIo;
        case ErrorKind::Shape:
        case ErrorKind::Mismatch: return kExitMismatch;
    }
    return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reduced-order modelling toolkit: POD plus neural time integrators", "romkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version());

    Globals g;
    g.cases = config::default_cases_file().string();
    app.add_option("--config", g.config_path, "Run config (sectioned key = value)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for data generation or training");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--cases", g.cases, "Case preset file");
    app.add_flag("--verbose", g.verbose, "Log progress to stderr");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic flame dataset");
    generate->add_option("--profile", gen.profile, "Inlet profile: single | three");

    PodArgs pa;
    auto* pod = app.add_subcommand("pod", "Preprocess and decompose a dataset");
    pod->add_option("--data", pa.data, "Dataset file")->required()->check(CLI::ExistingFile);
    auto* modes = pod->add_option("--modes", pa.modes, "Retain this many modes");
    auto* energy = pod->add_option("--energy", pa.energy, "Retain the smallest N reaching this energy fraction");
    modes->excludes(energy);
    pod->add_option("--measure", pa.measure, "Energy measure: sum | squared");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Fit a pipeline and train a forecaster");
    train->add_option("--data", ta.data, "Dataset file")->required()->check(CLI::ExistingFile);
    train->add_option("--basis", ta.basis, "Directory written by `pod` to reuse")->check(CLI::ExistingDirectory);
    train->add_option("--case", ta.case_label, "Case preset label (0, A-E)");
    train->add_option("--model", ta.model, "lstm | cnn");
    train->add_option("--epochs", ta.epochs, "Maximum epochs");
    train->add_option("--units", ta.units, "LSTM units");

    PredictArgs pr;
    auto* predict = app.add_subcommand("predict", "Extrapolate with a trained pipeline");
    predict->add_option("--pipeline", pr.pipeline, "Pipeline directory")->required()->check(CLI::ExistingDirectory);
    predict->add_option("--steps", pr.steps, "Snapshots to predict (default: to the end of the series)");
    predict->add_option("--start", pr.start, "First predicted snapshot (default: test split start)");
    predict->add_option("--truth", pr.truth, "Dataset to evaluate against")->check(CLI::ExistingFile);
    predict->add_option("--stride", pr.stride, "Rollout stride: full | single");
    predict->add_option("--export-points", pr.points, "Probe points, e.g. \"(3,4) (10,2)\"");

    TransferArgs tr;
    auto* transfer = app.add_subcommand("transfer", "Evaluate a trained pipeline on another dataset");
    transfer->add_option("--pipeline", tr.pipeline, "Pipeline directory")->required()->check(CLI::ExistingDirectory);
    transfer->add_option("--data", tr.data, "New dataset")->required()->check(CLI::ExistingFile);
    transfer->add_flag("--reuse-basis", tr.reuse_basis, "Project onto the source basis instead of refitting");
    transfer->add_option("--seed-start", tr.seed_start, "First snapshot of the seed window");
    transfer->add_option("--stride", tr.stride, "Rollout stride: full | single");

    for (auto* sub : {generate, pod, train, predict, transfer}) sub->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*generate) return cmd_generate(g, gen, out);
        if (*pod) return cmd_pod(g, pa, out);
        if (*train) return cmd_train(g, ta, out, err);
        if (*predict) return cmd_predict(g, pr, out);
        if (*transfer) return cmd_transfer(g, tr, out);
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error (i/o): " << e.what() << '\n';
        return kExitIo;
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return kExitNumeric;
    }
    return kExitUsage;
}

}  // namespace rom::cli
