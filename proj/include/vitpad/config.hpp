// SPDX-License-Identifier: Apache-2.0
//
// Flat `key=value` run configuration. `#` starts a comment, blank lines are
// ignored, unknown keys are errors. One `seed` drives every random stream.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vitpad/evalkit.hpp"
#include "vitpad/model.hpp"

namespace vitpad {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ModelConfig model;
  SynthSpec data;
  TrainOptions train;
  std::string data_dir;  // optional; empty means "generate from the synthetic spec"
  std::string out_dir;
  std::uint64_t seed = 0;

  // Pushes the shared seed and frame geometry into model/data.
  void sync();
};

RunConfig default_run_config();

// Applies `key=value` lines on top of `base`. Throws ConfigError naming the
// line number on malformed lines, unknown keys or bad values.
RunConfig parse_config(const std::string& text, RunConfig base = default_run_config());
RunConfig load_config(const std::filesystem::path& path);

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

// Every key with its current value, in a stable order; re-parses exactly.
std::string dump_config(const RunConfig& cfg);

std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace vitpad
