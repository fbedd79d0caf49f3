#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rom/data.hpp"
#include "rom/forecast.hpp"
#include "rom/nn.hpp"
#include "rom/pipeline.hpp"
#include "rom/pod.hpp"

namespace rom::config {

/// Sectioned `key = value` text. `#` starts a comment; keys before any `[section]`
/// header are rejected. Duplicate keys in one section are errors.
class ConfigFile {
public:
    static ConfigFile parse(std::string_view text, const std::string& origin = "config");
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& section, const std::string& key) const;
    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    /// Throws ConfigError when absent.
    const std::string& require(const std::string& section, const std::string& key) const;
    std::vector<std::string> sections() const;
    std::vector<std::string> keys(const std::string& section) const;
    void set(const std::string& section, const std::string& key, const std::string& value);

    /// Rejects sections or keys outside `allowed` (section -> key set).
    void check_known(const std::map<std::string, std::set<std::string>>& allowed) const;

    std::string serialize() const;
    const std::string& origin() const noexcept { return origin_; }

private:
    struct Entry {
        std::string value;
        std::size_t line = 0;
    };
    std::string where(const std::string& section, const std::string& key) const;

    std::string origin_;
    std::vector<std::string> order_;
    std::map<std::string, std::map<std::string, Entry>> sections_;
};

// Strict value parsers. `what` names the key in error messages.
double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_u64(const std::string& text, const std::string& what);
std::size_t parse_size(const std::string& text, const std::string& what);
bool parse_bool(const std::string& text, const std::string& what);
/// Shortest text that parses back to exactly `value`.
std::string format_double(double value);

/// Every tunable of the five commands, with defaults.
struct RunConfig {
    data::GeneratorSettings generator;
    std::string profile = "single";  // single | three
    pod::TruncationCriterion criterion = pod::ModeCount{18};
    pod::EnergyMeasure energy = pod::EnergyMeasure::SingularValueSum;
    nn::NetworkSpec spec;
    forecast::TrainConfig train;
    double test_frac = 0.2;
    double train_frac = 0.85;
    double epsilon = 1e-12;
    forecast::RolloutStride stride = forecast::RolloutStride::Full;

    pipeline::PipelineSettings pipeline_settings() const;
};

/// Sections and keys accepted in a run config.
const std::map<std::string, std::set<std::string>>& run_config_keys();

/// Applies a case preset (learning rate, schedule, loss, activations, mode scaling).
void apply_case(RunConfig& config, const std::string& label, const std::filesystem::path& cases_file);
/// Applies explicit keys; a `case` key in [forecast] is applied first.
void apply_config(RunConfig& config, const ConfigFile& file, const std::filesystem::path& cases_file);

/// Compiled-in location of the shipped case presets.
std::filesystem::path default_cases_file();

}  // namespace rom::config
