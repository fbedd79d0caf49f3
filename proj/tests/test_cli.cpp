#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rom/binary_io.hpp"
#include "rom/cli.hpp"
#include "rom/config.hpp"
#include "rom/error.hpp"

using namespace rom;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "romkit_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path small_config(const fs::path& dir) {
    const auto path = dir / "small.conf";
    std::ofstream(path) << "[data]\nnx = 10\nny = 8\nn_times = 200\nn_species = 3\nrank = 4\n"
                           "[pod]\nmodes = 3\n"
                           "[neuralnet]\nunits = 6\n";
    return path;
}

}  // namespace

TEST_CASE("config parsing is strict") {
    using config::ConfigFile;
    const auto c = ConfigFile::parse("# top\n[a]\nx = 1\ny=two words  # trailing\n\n[b]\nz = 3\n");
    CHECK(c.require("a", "x") == "1");
    CHECK(c.get("a", "y").value() == "two words");
    CHECK(c.sections() == std::vector<std::string>{"a", "b"});
    CHECK_FALSE(c.has("b", "x"));
    CHECK_THROWS_AS(c.require("b", "x"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("x = 1\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("[a]\njust words\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("[a\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(c.check_known({{"a", {"x"}}, {"b", {"z"}}}), ConfigError);
    CHECK_NOTHROW(c.check_known({{"a", {"x", "y"}}, {"b", {"z"}}}));

    const auto again = ConfigFile::parse(c.serialize());
    CHECK(again.require("a", "y") == "two words");

    CHECK(config::parse_double("2.5e-4", "dt") == 2.5e-4);
    CHECK_THROWS_AS(config::parse_double("1.0x", "dt"), ConfigError);
    CHECK_THROWS_AS(config::parse_size("-3", "n"), ConfigError);
    CHECK(config::parse_bool("true", "b"));
    CHECK(config::parse_double(config::format_double(0.1 + 0.2), "v") == 0.1 + 0.2);
}

TEST_CASE("case presets") {
    config::RunConfig rc;
    config::apply_case(rc, "E", config::default_cases_file());
    CHECK(rc.train.loss == nn::LossKind::PhysicsAware);
    CHECK(rc.train.hidden == nn::Activation::Elu);
    CHECK(rc.train.output == nn::Activation::Tanh);
    CHECK(rc.train.scaling == forecast::ScalingKind::SumOfMaxima);
    CHECK(rc.train.learning_rate == 0.005);
    REQUIRE(rc.train.schedule.has_value());
    CHECK(rc.train.schedule->factor == 0.8);
    CHECK(rc.train.schedule->interval == 10);

    config::apply_case(rc, "0", config::default_cases_file());
    CHECK(rc.train.scaling == forecast::ScalingKind::Range);
    CHECK(rc.train.output == nn::Activation::Sigmoid);
    CHECK(rc.train.loss == nn::LossKind::Mse);
    CHECK_FALSE(rc.train.schedule.has_value());
    CHECK_THROWS_AS(config::apply_case(rc, "Z", config::default_cases_file()), ConfigError);

    // Explicit keys win over the case.
    const auto file = config::ConfigFile::parse("[forecast]\ncase = B\nlearning_rate = 0.002\n");
    config::RunConfig over;
    config::apply_config(over, file, config::default_cases_file());
    CHECK(over.train.learning_rate == 0.002);
    CHECK(over.train.hidden == nn::Activation::Elu);
    CHECK_THROWS_AS(config::apply_config(over, config::ConfigFile::parse("[pod]\nmode = 3\n"),
                                         config::default_cases_file()),
                    ConfigError);
}

TEST_CASE("exit codes") {
    CHECK(cli::exit_code_for(ErrorKind::InvalidArgument) == 2);
    CHECK(cli::exit_code_for(ErrorKind::Numeric) == 3);
    CHECK(cli::exit_code_for(ErrorKind::Corrupt) == 4);
    CHECK(cli::exit_code_for(ErrorKind::Mismatch) == 5);

    CHECK(run({"--version"}).code == 0);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"pod", "--data", "/nonexistent/x.romf"}).code == 2);

    const auto dir = workdir("codes");
    const auto junk = dir / "junk.romf";
    std::ofstream(junk) << "not a dataset";
    const auto r = run({"--out", (dir / "o").string(), "pod", "--data", junk.string(), "--modes", "3"});
    CHECK(r.code == 4);
    CHECK(r.err.find("error") != std::string::npos);

    const auto bad = dir / "bad.conf";
    std::ofstream(bad) << "[data]\nnx = ten\n";
    CHECK(run({"--config", bad.string(), "--out", (dir / "g").string(), "generate"}).code == 2);
}

TEST_CASE("generate is deterministic for a seed") {
    const auto dir = workdir("generate");
    const auto cfg = small_config(dir);
    REQUIRE(run({"--config", cfg.string(), "--seed", "7", "--out", (dir / "a").string(), "generate"}).code == 0);
    REQUIRE(run({"--config", cfg.string(), "--seed", "7", "--out", (dir / "b").string(), "generate"}).code == 0);
    REQUIRE(run({"--config", cfg.string(), "--seed", "8", "--out", (dir / "c").string(), "generate"}).code == 0);
    const auto a = io::read_file(dir / "a" / "dataset.romf");
    CHECK(a == io::read_file(dir / "b" / "dataset.romf"));
    CHECK(a != io::read_file(dir / "c" / "dataset.romf"));
    CHECK(fs::exists(dir / "a" / "manifest.txt"));
}

TEST_CASE("end to end with one epoch") {
    const auto dir = workdir("e2e");
    const auto cfg = small_config(dir);
    const auto data = (dir / "gen" / "dataset.romf").string();
    REQUIRE(run({"--config", cfg.string(), "--out", (dir / "gen").string(), "generate"}).code == 0);

    auto r = run({"--config", cfg.string(), "--out", (dir / "pod").string(), "pod", "--data", data});
    REQUIRE(r.code == 0);
    for (const char* f : {"stats.roms", "basis.romb", "energy.csv", "pod_rrmse.csv", "manifest.txt"}) {
        CHECK(fs::exists(dir / "pod" / f));
    }
    CHECK(run({"--out", (dir / "pod2").string(), "pod", "--data", data, "--energy", "1.5"}).code == 2);

    r = run({"--config", cfg.string(), "--out", (dir / "pl").string(), "train", "--data", data, "--basis",
             (dir / "pod").string(), "--case", "E", "--epochs", "1"});
    REQUIRE(r.code == 0);
    for (const char* f : {"stats.roms", "basis.romb", "weights.romw", "train_report.csv", "pipeline.conf"}) {
        CHECK(fs::exists(dir / "pl" / f));
    }

    r = run({"--out", (dir / "pr").string(), "predict", "--pipeline", (dir / "pl").string(), "--truth", data,
             "--export-points", "(2,3) (9,7)"});
    REQUIRE(r.code == 0);
    for (const char* f : {"predictions.romf", "rrmse.csv", "n_mse.csv", "mass_balance.csv", "summary.txt", "points.csv"}) {
        CHECK(fs::exists(dir / "pr" / f));
    }

    r = run({"--out", (dir / "pr2").string(), "predict", "--pipeline", (dir / "pl").string(), "--steps", "12"});
    CHECK(r.code == 0);
    CHECK(r.out.find("no truth dataset supplied") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "pr2" / "rrmse.csv"));

    r = run({"--out", (dir / "tr").string(), "transfer", "--pipeline", (dir / "pl").string(), "--data", data});
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "tr" / "summary.txt"));

    // A dataset on another grid cannot reuse the source basis.
    const auto other = dir / "other.conf";
    std::ofstream(other) << "[data]\nnx = 9\nny = 8\nn_times = 200\nn_species = 3\nrank = 4\n";
    REQUIRE(run({"--config", other.string(), "--out", (dir / "gen2").string(), "generate"}).code == 0);
    r = run({"--out", (dir / "tr2").string(), "transfer", "--pipeline", (dir / "pl").string(), "--data",
             (dir / "gen2" / "dataset.romf").string(), "--reuse-basis"});
    CHECK(r.code == 5);
}
