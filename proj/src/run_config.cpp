#include "labelsift/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "labelsift/errors.hpp"

namespace labelsift {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    s = trim(s);
    if (s.empty()) {
        return out;
    }
    std::size_t begin = 0;
    while (true) {
        const auto comma = s.find(',', begin);
        out.emplace_back(trim(s.substr(begin, comma == std::string_view::npos ? s.npos : comma - begin)));
        if (comma == std::string_view::npos) {
            break;
        }
        begin = comma + 1;
    }
    return out;
}

double to_double(const std::string& key, std::string_view text) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument(fmt::format("run file: '{}' expects a number, got '{}'", key, text));
    }
    return value;
}

std::uint64_t to_uint(const std::string& key, std::string_view text) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument(fmt::format("run file: '{}' expects a non-negative integer, got '{}'", key, text));
    }
    return value;
}

std::string join(const auto& values) {
    std::string out;
    for (const auto& v : values) {
        if (!out.empty()) {
            out += ',';
        }
        out += fmt::format("{}", v);
    }
    return out;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text) {
    RunConfig config;
    std::size_t line_no = 0;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const auto end = text.find('\n', begin);
        std::string_view line = text.substr(begin, end == std::string_view::npos ? text.npos : end - begin);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (!line.empty()) {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw std::invalid_argument(fmt::format("run file line {}: expected 'key = value'", line_no));
            }
            const std::string key(trim(line.substr(0, eq)));
            if (key.empty()) {
                throw std::invalid_argument(fmt::format("run file line {}: empty key", line_no));
            }
            if (config.values_.contains(key)) {
                throw std::invalid_argument(fmt::format("run file line {}: duplicate key '{}'", line_no, key));
            }
            config.values_[key] = std::string(trim(line.substr(eq + 1)));
        }
        if (end == std::string_view::npos) {
            break;
        }
        begin = end + 1;
    }
    return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError(path, "cannot open for reading");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse(buffer.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) {
        return it->second;
    }
    return std::nullopt;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    const auto value = get(key);
    return value ? to_double(key, *value) : fallback;
}

std::uint64_t RunConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto value = get(key);
    return value ? to_uint(key, *value) : fallback;
}

std::vector<std::size_t> RunConfig::get_uint_list(const std::string& key,
                                                  const std::vector<std::size_t>& fallback) const {
    const auto value = get(key);
    if (!value) {
        return fallback;
    }
    std::vector<std::size_t> out;
    for (const auto& item : split_list(*value)) {
        out.push_back(static_cast<std::size_t>(to_uint(key, item)));
    }
    return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key, const std::vector<double>& fallback) const {
    const auto value = get(key);
    if (!value) {
        return fallback;
    }
    std::vector<double> out;
    for (const auto& item : split_list(*value)) {
        out.push_back(to_double(key, item));
    }
    return out;
}

void RunConfig::require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : values_) {
        if (!allowed.contains(key)) {
            throw std::invalid_argument("run file: unknown key '" + key + "'");
        }
    }
}

const std::set<std::string>& trainer_keys() {
    static const std::set<std::string> keys{"hidden",   "optimizer",  "lr",           "momentum", "beta1",
                                            "beta2",    "eps",        "weight_decay", "batch_size", "epochs",
                                            "seed",     "capture",    "lr_milestones", "lr_multipliers"};
    return keys;
}

MlpConfig mlp_config_from(const RunConfig& config, const MlpConfig& defaults) {
    MlpConfig out = defaults;
    out.hidden = config.get_uint_list("hidden", defaults.hidden);
    const auto optimizer = config.get_string("optimizer", defaults.optimizer == OptimizerKind::Adam ? "adam" : "sgd");
    if (optimizer == "adam") {
        out.optimizer = OptimizerKind::Adam;
    } else if (optimizer == "sgd") {
        out.optimizer = OptimizerKind::Sgd;
    } else {
        throw std::invalid_argument("run file: optimizer must be adam or sgd");
    }
    out.lr = config.get_double("lr", defaults.lr);
    out.momentum = config.get_double("momentum", defaults.momentum);
    out.beta1 = config.get_double("beta1", defaults.beta1);
    out.beta2 = config.get_double("beta2", defaults.beta2);
    out.eps = config.get_double("eps", defaults.eps);
    out.weight_decay = config.get_double("weight_decay", defaults.weight_decay);
    out.batch_size = static_cast<std::size_t>(config.get_uint("batch_size", defaults.batch_size));
    out.epochs = static_cast<std::size_t>(config.get_uint("epochs", defaults.epochs));
    out.seed = config.get_uint("seed", defaults.seed);
    const auto capture =
        config.get_string("capture", defaults.capture == CaptureMode::AtStep ? "at_step" : "end_of_epoch");
    if (capture == "at_step") {
        out.capture = CaptureMode::AtStep;
    } else if (capture == "end_of_epoch") {
        out.capture = CaptureMode::EndOfEpoch;
    } else {
        throw std::invalid_argument("run file: capture must be at_step or end_of_epoch");
    }
    out.lr_milestones = config.get_uint_list("lr_milestones", defaults.lr_milestones);
    out.lr_multipliers = config.get_double_list("lr_multipliers", defaults.lr_multipliers);
    out.validate();
    return out;
}

std::string to_run_file(const MlpConfig& config) {
    return fmt::format(
        "hidden = {}\noptimizer = {}\nlr = {}\nmomentum = {}\nbeta1 = {}\nbeta2 = {}\neps = {}\nweight_decay = {}\n"
        "batch_size = {}\nepochs = {}\nseed = {}\ncapture = {}\nlr_milestones = {}\nlr_multipliers = {}\n",
        join(config.hidden), config.optimizer == OptimizerKind::Adam ? "adam" : "sgd", config.lr, config.momentum,
        config.beta1, config.beta2, config.eps, config.weight_decay, config.batch_size, config.epochs, config.seed,
        config.capture == CaptureMode::AtStep ? "at_step" : "end_of_epoch", join(config.lr_milestones),
        join(config.lr_multipliers));
}

}  // namespace labelsift
