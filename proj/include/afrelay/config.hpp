#pragma once
#include "afrelay/model.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace afrelay {

// Plain key=value configuration, one key per line, '#' starts a comment.
//
// Keys: hops, subcarriers, topology, pathloss_exponent, gamma0_db (comma list),
// constraint, scheme (comma list), seed, training_samples, trials, iterations,
// outage_threshold, threads, root_abs_tol, root_rel_tol, root_max_iter,
// constraint_tol, iteration_eps, max_iterations, explicit_gain
// (rows separated by ';', entries by ',').

const std::vector<std::string>& config_keys();

// Throws ConfigError on unknown keys or unparsable values.
void apply_setting(SystemConfig& config, std::string_view key, std::string_view value);

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

SystemConfig parse_config(std::string_view text, SystemConfig base = {});
SystemConfig load_config(const std::filesystem::path& path, SystemConfig base = {});

// Every key, one per line; parse_config(format_config(c)) reproduces c.
std::string format_config(const SystemConfig& config);

} // namespace afrelay
