// SPDX-License-Identifier: Apache-2.0

#include "vitpad/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace vitpad {

void RunConfig::sync() {
  model.seed = seed;
  data.seed = seed;
  data.height = model.height;
  data.width = model.width;
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.sync();
  return cfg;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t v = 0;
    const auto* first = item.data();
    const auto* last = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || item.empty())
      throw std::invalid_argument("expected a comma-separated list of non-negative integers, got '" + text + "'");
    out.push_back(v);
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw std::invalid_argument("expected an unsigned integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("expected 0/1/true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
  // Shortest representation that parses back to the same double.
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Key {
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define SIZE_KEY(key, field) \
  Key{key, [](const RunConfig& c) { return std::to_string(c.field); }, [](RunConfig& c, const std::string& v) { c.field = to_size(v); }}
#define DOUBLE_KEY(key, field) \
  Key{key, [](const RunConfig& c) { return fmt_double(c.field); }, [](RunConfig& c, const std::string& v) { c.field = to_double(v); }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      SIZE_KEY("frames", model.frames),
      Key{"height", [](const RunConfig& c) { return std::to_string(c.model.height); },
          [](RunConfig& c, const std::string& v) { c.model.height = c.data.height = to_size(v); }},
      Key{"width", [](const RunConfig& c) { return std::to_string(c.model.width); },
          [](RunConfig& c, const std::string& v) { c.model.width = c.data.width = to_size(v); }},
      SIZE_KEY("cte_stride", model.cte_stride),
      SIZE_KEY("channels", model.channels),
      Key{"scales", [](const RunConfig& c) { return fmt_list(c.model.scales.scales); },
          [](RunConfig& c, const std::string& v) {
            auto s = parse_size_list(v);
            if (s.empty()) throw std::invalid_argument("scales must not be empty");
            for (auto l : s)
              if (l == 0) throw std::invalid_argument("scales must be >= 1");
            c.model.scales.scales = std::move(s);
          }},
      SIZE_KEY("depth", model.depth),
      SIZE_KEY("ffn_ratio", model.ffn_ratio),
      DOUBLE_KEY("norm_eps", model.norm_eps),
      DOUBLE_KEY("init_std", model.init_std),
      SIZE_KEY("n_train", data.n_train),
      SIZE_KEY("n_dev", data.n_dev),
      SIZE_KEY("n_test", data.n_test),
      SIZE_KEY("source_frames", data.source_frames),
      DOUBLE_KEY("texture_amp", data.texture_amp),
      DOUBLE_KEY("grid_period", data.grid_period),
      DOUBLE_KEY("pulse_amp", data.pulse_amp),
      DOUBLE_KEY("pulse_freq_min", data.pulse_freq_min),
      DOUBLE_KEY("pulse_freq_max", data.pulse_freq_max),
      DOUBLE_KEY("noise_sigma", data.noise_sigma),
      DOUBLE_KEY("jitter_px", data.jitter_px),
      DOUBLE_KEY("lr", train.lr),
      DOUBLE_KEY("beta1", train.adam.beta1),
      DOUBLE_KEY("beta2", train.adam.beta2),
      DOUBLE_KEY("adam_eps", train.adam.eps),
      SIZE_KEY("steps", train.steps),
      SIZE_KEY("batch", train.batch),
      DOUBLE_KEY("warmup_frac", train.warmup_frac),
      Key{"sample_mode", [](const RunConfig& c) { return to_string(c.train.sample_mode); },
          [](RunConfig& c, const std::string& v) { c.train.sample_mode = parse_sample_mode(v); }},
      Key{"augment", [](const RunConfig& c) { return std::string(c.train.augment ? "1" : "0"); },
          [](RunConfig& c, const std::string& v) { c.train.augment = to_bool(v); }},
      Key{"data_dir", [](const RunConfig& c) { return c.data_dir; },
          [](RunConfig& c, const std::string& v) { c.data_dir = v; }},
      Key{"out_dir", [](const RunConfig& c) { return c.out_dir; },
          [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      Key{"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
          [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
  };
  return table;
}

#undef SIZE_KEY
#undef DOUBLE_KEY

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys())
    if (key == k.name) {
      k.set(cfg, value);
      cfg.sync();
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::stringstream ss(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(ss, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const std::exception& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.sync();
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + "=" + k.get(cfg) + "\n";
  return out;
}

}  // namespace vitpad
