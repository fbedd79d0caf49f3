#include <fstream>
#include <sstream>

#include "rom/binary_io.hpp"
#include "rom/config.hpp"
#include "rom/error.hpp"
#include "rom/pipeline.hpp"

namespace rom::pipeline {

namespace {

namespace fs = std::filesystem;
using config::format_double;

constexpr const char* kStats = "stats.roms";
constexpr const char* kBasis = "basis.romb";
constexpr const char* kWeights = "weights.romw";
constexpr const char* kReport = "train_report.csv";
constexpr const char* kMeta = "pipeline.conf";

std::string join_doubles(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += format_double(v(i));
    }
    return out;
}

Eigen::VectorXd split_doubles(const std::string& text, const std::string& what) {
    std::istringstream in(text);
    std::vector<double> vals;
    std::string tok;
    while (in >> tok) vals.push_back(config::parse_double(tok, what));
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

forecast::TrainReport read_report_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing artifact " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "epoch,train_loss,val_loss,lr") throw FormatError(path.string() + ": unexpected CSV header");
    forecast::TrainReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell[4];
        for (auto& c : cell) {
            if (!std::getline(row, c, ',')) throw FormatError(path.string() + ": short CSV row");
        }
        forecast::EpochRecord r;
        r.epoch = config::parse_size(cell[0], "epoch");
        r.train_loss = config::parse_double(cell[1], "train_loss");
        r.val_loss = config::parse_double(cell[2], "val_loss");
        r.learning_rate = config::parse_double(cell[3], "lr");
        report.epochs.push_back(r);
    }
    return report;
}

}  // namespace

std::vector<fs::path> pipeline_files(const fs::path& dir) {
    return {dir / kStats, dir / kBasis, dir / kWeights, dir / kReport, dir / kMeta};
}

void save_pipeline(const fs::path& dir, const RomPipeline& pl) {
    pl.check_consistent();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

    data::write_scaling_stats(dir / kStats, pl.stats);
    pod::write_basis(dir / kBasis, pl.basis, pod::TemporalModes{pl.modes});
    nn::save_checkpoint(dir / kWeights, pl.spec, pl.params);
    io::write_text(dir / kReport, forecast::train_report_csv(pl.report));

    config::ConfigFile meta;
    meta.set("data", "variables", [&] {
        std::string s;
        for (std::size_t v = 0; v < pl.var_names.size(); ++v) s += (v ? " " : "") + pl.var_names[v];
        return s;
    }());
    meta.set("data", "species", [&] {
        std::string s;
        for (std::size_t v = 0; v < pl.is_species.size(); ++v) s += (v ? " " : "") + std::string(pl.is_species[v] ? "1" : "0");
        return s;
    }());
    meta.set("data", "dt", format_double(pl.dt));
    meta.set("split", "n_train", std::to_string(pl.split.n_train));
    meta.set("split", "n_val", std::to_string(pl.split.n_val));
    meta.set("split", "n_test", std::to_string(pl.split.n_test));
    meta.set("scaler", "kind", std::string(forecast::to_string(pl.scaler.kind())));
    meta.set("scaler", "offsets", join_doubles(pl.scaler.offsets()));
    meta.set("scaler", "scales", join_doubles(pl.scaler.scales()));
    const auto& t = pl.train_config;
    meta.set("train", "case", t.case_label);
    meta.set("train", "loss", std::string(nn::to_string(t.loss)));
    meta.set("train", "learning_rate", format_double(t.learning_rate));
    meta.set("train", "lr_factor", t.schedule ? format_double(t.schedule->factor) : "none");
    meta.set("train", "lr_interval", t.schedule ? std::to_string(t.schedule->interval) : "none");
    meta.set("train", "batch_size", std::to_string(t.batch_size));
    meta.set("train", "max_epochs", std::to_string(t.max_epochs));
    meta.set("train", "patience", std::to_string(t.patience));
    meta.set("train", "pa_weight", format_double(t.pa_weight));
    meta.set("train", "seed", std::to_string(t.seed));
    meta.set("report", "stopping_epoch", std::to_string(pl.report.stopping_epoch));
    meta.set("report", "best_epoch", std::to_string(pl.report.best_epoch));
    meta.set("report", "best_val_loss", format_double(pl.report.best_val_loss));
    io::write_text(dir / kMeta, meta.serialize());
}

RomPipeline load_pipeline(const fs::path& dir) {
    for (const auto& f : pipeline_files(dir)) {
        if (!fs::exists(f)) throw IoError("pipeline directory is missing " + f.string());
    }
    RomPipeline pl;
    const auto meta = config::ConfigFile::load(dir / kMeta);
    meta.check_known({
        {"data", {"variables", "species", "dt"}},
        {"split", {"n_train", "n_val", "n_test"}},
        {"scaler", {"kind", "offsets", "scales"}},
        {"train",
         {"case", "loss", "learning_rate", "lr_factor", "lr_interval", "batch_size", "max_epochs", "patience",
          "pa_weight", "seed"}},
        {"report", {"stopping_epoch", "best_epoch", "best_val_loss"}},
    });
    try {
        pl.stats = data::read_scaling_stats(dir / kStats);
        auto pod_result = pod::read_basis(dir / kBasis);
        pl.basis = std::move(pod_result.basis);
        pl.modes = std::move(pod_result.temporal.coefficients);
        auto [spec, params] = nn::load_checkpoint(dir / kWeights);
        pl.spec = spec;
        pl.params = std::move(params);

        pl.var_names = split_words(meta.require("data", "variables"));
        for (const auto& s : split_words(meta.require("data", "species"))) {
            pl.is_species.push_back(config::parse_bool(s, "data.species"));
        }
        pl.dt = config::parse_double(meta.require("data", "dt"), "data.dt");
        pl.split.n_train = config::parse_size(meta.require("split", "n_train"), "split.n_train");
        pl.split.n_val = config::parse_size(meta.require("split", "n_val"), "split.n_val");
        pl.split.n_test = config::parse_size(meta.require("split", "n_test"), "split.n_test");
        pl.scaler = forecast::ModeScaler(forecast::parse_scaling_kind(meta.require("scaler", "kind")),
                                         split_doubles(meta.require("scaler", "offsets"), "scaler.offsets"),
                                         split_doubles(meta.require("scaler", "scales"), "scaler.scales"));

        auto& t = pl.train_config;
        t.case_label = meta.require("train", "case");
        t.loss = nn::parse_loss_kind(meta.require("train", "loss"));
        t.hidden = spec.hidden;
        t.output = spec.output;
        t.scaling = pl.scaler.kind();
        t.learning_rate = config::parse_double(meta.require("train", "learning_rate"), "train.learning_rate");
        if (meta.require("train", "lr_factor") != "none") {
            t.schedule = forecast::LrSchedule{
                config::parse_double(meta.require("train", "lr_factor"), "train.lr_factor"),
                config::parse_size(meta.require("train", "lr_interval"), "train.lr_interval")};
        }
        t.batch_size = config::parse_size(meta.require("train", "batch_size"), "train.batch_size");
        t.max_epochs = config::parse_size(meta.require("train", "max_epochs"), "train.max_epochs");
        t.patience = config::parse_size(meta.require("train", "patience"), "train.patience");
        t.pa_weight = config::parse_double(meta.require("train", "pa_weight"), "train.pa_weight");
        t.seed = config::parse_u64(meta.require("train", "seed"), "train.seed");

        pl.report = read_report_csv(dir / kReport);
        pl.report.stopping_epoch = config::parse_size(meta.require("report", "stopping_epoch"), "report.stopping_epoch");
        pl.report.best_epoch = config::parse_size(meta.require("report", "best_epoch"), "report.best_epoch");
        pl.report.best_val_loss = config::parse_double(meta.require("report", "best_val_loss"), "report.best_val_loss");
    } catch (const ConfigError& e) {
        throw FormatError(std::string("pipeline metadata: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("pipeline metadata: ") + e.what());
    }
    try {
        pl.check_consistent();
    } catch (const ShapeError& e) {
        throw MismatchError(dir.string() + ": inconsistent artifacts: " + e.what());
    }
    if (pl.split.total() != static_cast<std::size_t>(pl.modes.cols())) {
        throw MismatchError(dir.string() + ": split does not cover the stored coefficient series");
    }
    return pl;
}

std::vector<fs::path> write_eval_report(const fs::path& dir, const EvalReport& report) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    std::vector<fs::path> files;

    std::ostringstream r;
    r << "variable,rrmse_pred,rrmse_pod\n";
    for (std::size_t v = 0; v < report.var_names.size(); ++v) {
        r << report.var_names[v] << ',' << format_double(report.rrmse_pred[v]) << ','
          << format_double(report.rrmse_pod[v]) << '\n';
    }
    r << "global," << format_double(report.global_rrmse_pred) << ',' << format_double(report.global_rrmse_pod)
      << '\n';
    files.push_back(dir / "rrmse.csv");
    io::write_text(files.back(), r.str());

    std::ostringstream n;
    n << "time_index";
    for (Eigen::Index j = 0; j < report.n_mse.rows(); ++j) n << ",mode" << j + 1;
    n << '\n';
    for (Eigen::Index t = 0; t < report.n_mse.cols(); ++t) {
        n << report.begin + static_cast<std::size_t>(t);
        for (Eigen::Index j = 0; j < report.n_mse.rows(); ++j) n << ',' << format_double(report.n_mse(j, t));
        n << '\n';
    }
    files.push_back(dir / "n_mse.csv");
    io::write_text(files.back(), n.str());

    if (!report.mass_balance_pred.empty()) {
        std::ostringstream m;
        m << "time_index,pred,truth\n";
        for (std::size_t t = 0; t < report.mass_balance_pred.size(); ++t) {
            m << report.begin + t << ',' << format_double(report.mass_balance_pred[t]) << ','
              << format_double(report.mass_balance_truth[t]) << '\n';
        }
        files.push_back(dir / "mass_balance.csv");
        io::write_text(files.back(), m.str());
    }

    files.push_back(dir / "summary.txt");
    io::write_text(files.back(), summarize(report));
    return files;
}

std::string summarize(const EvalReport& report) {
    std::ostringstream os;
    os << "evaluated snapshots: [" << report.begin << ", " << report.begin + report.steps << ")\n";
    os << "global rrmse: prediction " << format_double(report.global_rrmse_pred) << ", pod floor "
       << format_double(report.global_rrmse_pod) << '\n';
    for (std::size_t v = 0; v < report.var_names.size(); ++v) {
        os << "  " << report.var_names[v] << ": rrmse " << format_double(report.rrmse_pred[v]) << " (pod floor "
           << format_double(report.rrmse_pod[v]) << ")\n";
    }
    if (report.n_mse.size() > 0) {
        os << "n-MSE max per mode:";
        for (Eigen::Index j = 0; j < report.n_mse.rows(); ++j) os << ' ' << format_double(report.n_mse.row(j).maxCoeff());
        os << '\n';
    }
    if (!report.mass_balance_pred.empty()) {
        os << "max mass-balance deviation: prediction " << format_double(report.max_mass_balance_pred()) << '\n';
    }
    return os.str();
}

}  // namespace rom::pipeline
