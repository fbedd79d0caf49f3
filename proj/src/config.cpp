#include "rom/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rom/error.hpp"

namespace rom::config {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const std::string at = origin + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) throw ConfigError(at + ": malformed section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(at + ": empty section name");
            if (!cfg.sections_.count(section)) {
                cfg.sections_[section];
                cfg.order_.push_back(section);
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(at + ": expected 'key = value'");
        if (section.empty()) throw ConfigError(at + ": key outside of any [section]");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ConfigError(at + ": empty key");
        auto& entries = cfg.sections_[section];
        if (entries.count(key)) throw ConfigError(at + ": duplicate key '" + key + "' in [" + section + "]");
        entries[key] = Entry{trim(std::string_view(line).substr(eq + 1)), line_no};
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::optional<std::string> ConfigFile::get(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second.value;
}

const std::string& ConfigFile::require(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s != sections_.end()) {
        const auto k = s->second.find(key);
        if (k != s->second.end()) return k->second.value;
    }
    throw ConfigError(origin_ + ": missing key '" + key + "' in [" + section + "]");
}

std::vector<std::string> ConfigFile::sections() const { return order_; }

std::vector<std::string> ConfigFile::keys(const std::string& section) const {
    std::vector<std::string> out;
    const auto s = sections_.find(section);
    if (s == sections_.end()) return out;
    for (const auto& [k, _] : s->second) out.push_back(k);
    return out;
}

void ConfigFile::set(const std::string& section, const std::string& key, const std::string& value) {
    if (!sections_.count(section)) order_.push_back(section);
    sections_[section][key] = Entry{value, 0};
}

std::string ConfigFile::where(const std::string& section, const std::string& key) const {
    const auto& e = sections_.at(section).at(key);
    return origin_ + (e.line ? ":" + std::to_string(e.line) : std::string()) + ": [" + section + "] " + key;
}

void ConfigFile::check_known(const std::map<std::string, std::set<std::string>>& allowed) const {
    for (const auto& name : order_) {
        const auto a = allowed.find(name);
        if (a == allowed.end()) throw ConfigError(origin_ + ": unknown section [" + name + "]");
        for (const auto& [key, _] : sections_.at(name)) {
            if (!a->second.count(key)) throw ConfigError(where(name, key) + ": unknown key");
        }
    }
}

std::string ConfigFile::serialize() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& name : order_) {
        if (!first) os << '\n';
        first = false;
        os << '[' << name << "]\n";
        for (const auto& [k, e] : sections_.at(name)) os << k << " = " << e.value << '\n';
    }
    return os.str();
}

double parse_double(const std::string& text, const std::string& what) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ConfigError(what + ": '" + text + "' is not a finite number");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(what + ": '" + text + "' is not a non-negative integer");
    }
    errno = 0;
    const auto v = std::strtoull(text.c_str(), nullptr, 10);
    if (errno == ERANGE) throw ConfigError(what + ": '" + text + "' is out of range");
    return v;
}

std::size_t parse_size(const std::string& text, const std::string& what) {
    return static_cast<std::size_t>(parse_u64(text, what));
}

bool parse_bool(const std::string& text, const std::string& what) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(what + ": '" + text + "' is not a boolean");
}

std::string format_double(double value) {
    for (int precision = 15; precision <= 17; ++precision) {
        std::ostringstream os;
        os.precision(precision);
        os << value;
        if (precision == 17 || std::strtod(os.str().c_str(), nullptr) == value) return os.str();
    }
    return {};
}

pipeline::PipelineSettings RunConfig::pipeline_settings() const {
    pipeline::PipelineSettings s;
    s.criterion = criterion;
    s.energy = energy;
    s.spec = spec;
    s.spec.hidden = train.hidden;
    s.spec.output = train.output;
    s.train = train;
    s.test_frac = test_frac;
    s.train_frac = train_frac;
    s.epsilon = epsilon;
    return s;
}

const std::map<std::string, std::set<std::string>>& run_config_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"data",
         {"nx", "ny", "n_times", "dt", "n_species", "rank", "seed", "profile", "v_max", "amplitude",
          "frequency_hz", "radius"}},
        {"pod", {"modes", "energy", "energy_measure"}},
        {"neuralnet", {"model", "units", "window", "horizon", "hidden", "output"}},
        {"forecast",
         {"case", "scaling", "loss", "learning_rate", "lr_schedule", "lr_factor", "lr_interval", "batch_size",
          "max_epochs", "patience", "pa_weight", "test_frac", "train_frac", "adam_beta1", "adam_beta2",
          "adam_epsilon", "seed"}},
        {"rom", {"stride", "epsilon"}},
    };
    return keys;
}

std::filesystem::path default_cases_file() {
#ifdef ROMKIT_CASES_FILE
    return ROMKIT_CASES_FILE;
#else
    return "configs/cases.conf";
#endif
}

void apply_case(RunConfig& config, const std::string& label, const std::filesystem::path& cases_file) {
    const ConfigFile cases = ConfigFile::load(cases_file);
    std::map<std::string, std::set<std::string>> allowed;
    for (const auto& s : cases.sections()) {
        allowed[s] = {"description", "scaling", "learning_rate", "lr_factor", "lr_interval", "loss", "hidden",
                      "output"};
    }
    cases.check_known(allowed);
    const std::string section = "case." + label;
    const auto names = cases.sections();
    if (std::find(names.begin(), names.end(), section) == names.end()) {
        throw ConfigError("unknown case preset '" + label + "' (not in " + cases_file.string() + ")");
    }
    auto& t = config.train;
    try {
        t.scaling = forecast::parse_scaling_kind(cases.require(section, "scaling"));
        t.loss = nn::parse_loss_kind(cases.require(section, "loss"));
        t.hidden = nn::parse_activation(cases.require(section, "hidden"));
        t.output = nn::parse_activation(cases.require(section, "output"));
    } catch (const InvalidArgument& e) {
        throw ConfigError(cases_file.string() + " [" + section + "]: " + e.what());
    }
    t.learning_rate = parse_double(cases.require(section, "learning_rate"), section + ".learning_rate");
    const auto factor = cases.get(section, "lr_factor");
    const auto interval = cases.get(section, "lr_interval");
    if (factor.has_value() != interval.has_value()) {
        throw ConfigError(section + ": lr_factor and lr_interval must be given together");
    }
    if (factor) {
        t.schedule = forecast::LrSchedule{parse_double(*factor, section + ".lr_factor"),
                                          parse_size(*interval, section + ".lr_interval")};
    } else {
        t.schedule.reset();
    }
    t.case_label = label;
}

void apply_config(RunConfig& config, const ConfigFile& file, const std::filesystem::path& cases_file) {
    file.check_known(run_config_keys());
    auto key = [&](const char* s, const char* k) { return std::string(s) + "." + k; };
    auto num = [&](const char* s, const char* k, auto& target) {
        if (const auto v = file.get(s, k)) {
            if constexpr (std::is_same_v<std::decay_t<decltype(target)>, double>) {
                target = parse_double(*v, key(s, k));
            } else {
                target = static_cast<std::decay_t<decltype(target)>>(parse_u64(*v, key(s, k)));
            }
        }
    };
    auto parsed = [&](const char* s, const char* k, auto parser, auto& target) {
        if (const auto v = file.get(s, k)) {
            try {
                target = parser(*v);
            } catch (const InvalidArgument& e) {
                throw ConfigError(key(s, k) + ": " + e.what());
            }
        }
    };

    auto& g = config.generator;
    num("data", "nx", g.nx);
    num("data", "ny", g.ny);
    num("data", "n_times", g.n_times);
    num("data", "dt", g.dt);
    num("data", "n_species", g.n_species);
    num("data", "rank", g.rank);
    num("data", "seed", g.seed);
    if (const auto v = file.get("data", "profile")) {
        if (*v != "single" && *v != "three") throw ConfigError("data.profile: expected single|three");
        config.profile = *v;
    }
    {
        double v_max = g.profile.v_max;
        double radius = g.profile.radius;
        double amplitude = 0.25;
        double frequency = 20.0;
        num("data", "v_max", v_max);
        num("data", "radius", radius);
        num("data", "amplitude", amplitude);
        num("data", "frequency_hz", frequency);
        if (config.profile == "three") {
            if (file.has("data", "amplitude") || file.has("data", "frequency_hz")) {
                throw ConfigError("data.amplitude/frequency_hz only apply to the single-frequency profile");
            }
            g.profile = data::InletProfile::three_frequency(v_max, radius);
        } else {
            g.profile = data::InletProfile::single_frequency(v_max, amplitude, frequency, radius);
        }
    }

    if (file.has("pod", "modes") && file.has("pod", "energy")) {
        throw ConfigError("pod.modes and pod.energy are mutually exclusive");
    }
    if (const auto v = file.get("pod", "modes")) config.criterion = pod::ModeCount{parse_size(*v, "pod.modes")};
    if (const auto v = file.get("pod", "energy")) config.criterion = pod::EnergyTarget{parse_double(*v, "pod.energy")};
    if (const auto v = file.get("pod", "energy_measure")) {
        if (*v == "sum") config.energy = pod::EnergyMeasure::SingularValueSum;
        else if (*v == "squared") config.energy = pod::EnergyMeasure::SquaredEnergy;
        else throw ConfigError("pod.energy_measure: expected sum|squared");
    }

    auto& s = config.spec;
    parsed("neuralnet", "model", nn::parse_model_kind, s.kind);
    num("neuralnet", "units", s.units);
    num("neuralnet", "window", s.window);
    num("neuralnet", "horizon", s.horizon);

    auto& t = config.train;
    if (const auto v = file.get("forecast", "case")) apply_case(config, *v, cases_file);
    parsed("neuralnet", "hidden", nn::parse_activation, t.hidden);
    parsed("neuralnet", "output", nn::parse_activation, t.output);
    parsed("forecast", "scaling", forecast::parse_scaling_kind, t.scaling);
    parsed("forecast", "loss", nn::parse_loss_kind, t.loss);
    num("forecast", "learning_rate", t.learning_rate);
    if (const auto v = file.get("forecast", "lr_schedule")) {
        if (!parse_bool(*v, "forecast.lr_schedule")) {
            t.schedule.reset();
        } else if (!t.schedule) {
            t.schedule = forecast::LrSchedule{};
        }
    }
    if (file.has("forecast", "lr_factor") || file.has("forecast", "lr_interval")) {
        if (!t.schedule) t.schedule = forecast::LrSchedule{};
        num("forecast", "lr_factor", t.schedule->factor);
        num("forecast", "lr_interval", t.schedule->interval);
    }
    num("forecast", "batch_size", t.batch_size);
    num("forecast", "max_epochs", t.max_epochs);
    num("forecast", "patience", t.patience);
    num("forecast", "pa_weight", t.pa_weight);
    num("forecast", "seed", t.seed);
    num("forecast", "adam_beta1", t.adam.beta1);
    num("forecast", "adam_beta2", t.adam.beta2);
    num("forecast", "adam_epsilon", t.adam.epsilon);
    num("forecast", "test_frac", config.test_frac);
    num("forecast", "train_frac", config.train_frac);

    if (const auto v = file.get("rom", "stride")) {
        if (*v == "full") config.stride = forecast::RolloutStride::Full;
        else if (*v == "single") config.stride = forecast::RolloutStride::Single;
        else throw ConfigError("rom.stride: expected full|single");
    }
    num("rom", "epsilon", config.epsilon);
}

}  // namespace rom::config
