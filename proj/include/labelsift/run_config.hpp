#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "labelsift/trainer.hpp"

namespace labelsift {

/// Declarative run file: one `key = value` per line, `#` starts a comment,
/// blank lines ignored. Keys are unique.
///
///   # trainer
///   hidden = 128            # comma-separated widths; empty for a linear model
///   optimizer = adam        # adam | sgd
///   lr = 0.001
///   momentum = 0.9          # sgd
///   beta1 = 0.9
///   beta2 = 0.999
///   eps = 1e-8
///   weight_decay = 0
///   batch_size = 1024
///   epochs = 785
///   seed = 0
///   capture = at_step       # at_step | end_of_epoch
///   lr_milestones = 0,50
///   lr_multipliers = 1.0,0.1
class RunConfig {
public:
    static RunConfig parse(std::string_view text);
    static RunConfig load(const std::filesystem::path& path);

    [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }
    [[nodiscard]] std::optional<std::string> get(const std::string& key) const;
    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
    [[nodiscard]] double get_double(const std::string& key, double fallback) const;
    [[nodiscard]] std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    [[nodiscard]] std::vector<std::size_t> get_uint_list(const std::string& key,
                                                         const std::vector<std::size_t>& fallback) const;
    [[nodiscard]] std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

    /// Throws std::invalid_argument naming the first key not in `allowed`.
    void require_known(const std::set<std::string>& allowed) const;

private:
    std::map<std::string, std::string> values_;
};

/// Keys understood by mlp_config_from.
const std::set<std::string>& trainer_keys();

/// Trainer settings from a run file; unspecified keys keep `defaults`.
MlpConfig mlp_config_from(const RunConfig& config, const MlpConfig& defaults = {});

/// Inverse of mlp_config_from (every trainer key written).
std::string to_run_file(const MlpConfig& config);

}  // namespace labelsift
