// SPDX-License-Identifier: Apache-2.0

#include "vitpad/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "vitpad/config.hpp"
#include "vitpad/cost.hpp"
#include "vitpad/evalkit.hpp"
#include "vitpad/selftest.hpp"
#include "vitpad/vpt1.hpp"

namespace fs = std::filesystem;

namespace vitpad {
namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::string out_dir;
  std::string data_dir;
  bool dump = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "key=value config file");
  cmd->add_option("--set", o.sets, "override one key (key=value), repeatable");
  cmd->add_option("--seed", o.seed, "base seed for every random stream");
  cmd->add_option("--steps", o.steps, "training steps");
  cmd->add_option("--out", o.out_dir, "output directory (config key out_dir)");
  cmd->add_option("--data", o.data_dir, "dataset directory (config key data_dir)");
  cmd->add_flag("--dump-config", o.dump, "print the resolved config and exit");
}

RunConfig resolve(const CommonOpts& o) {
  RunConfig cfg = o.config_path.empty() ? default_run_config() : load_config(o.config_path);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.steps) cfg.train.steps = *o.steps;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  cfg.sync();
  return cfg;
}

const std::string& require_out(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("missing required key: out_dir");
  return cfg.out_dir;
}

ClipStore obtain_dataset(const RunConfig& cfg) {
  if (!cfg.data_dir.empty()) return load_dataset(cfg.data_dir);
  return generate_dataset(cfg.data);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

// Checkpoint = parameter tensors + the config that produced them.
void save_checkpoint(const fs::path& dir, const ModelParams<float>& params, const RunConfig& cfg) {
  save_params(dir, params);
  write_text(dir / "config.cfg", dump_config(cfg));
}

std::pair<RunConfig, ModelParams<float>> load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "config.cfg")) throw std::runtime_error("not a checkpoint: " + dir.string());
  auto cfg = load_config(dir / "config.cfg");
  cfg.model.validate();
  auto params = load_params(dir, cfg.model);
  return {cfg, std::move(params)};
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = require_out(cfg);
  cfg.model.validate();
  fs::create_directories(dir);
  const auto store = obtain_dataset(cfg);
  std::ofstream log(dir / "train_log.csv", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + (dir / "train_log.csv").string());
  log << "step,loss,lr\n";
  const auto t0 = std::chrono::steady_clock::now();
  auto params = train_model(cfg.model, store, cfg.train, [&](const TrainLogRow& r) {
    log << r.step << ',' << format_fixed(r.loss, 8) << ',' << format_fixed(r.lr, 8) << '\n';
  });
  log.close();
  save_checkpoint(dir / "checkpoint", params, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "trained " << cfg.train.steps << " steps in " << format_fixed(secs, 1) << " s; checkpoint "
      << (dir / "checkpoint").string() << '\n';
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& checkpoint, const std::string& split_name,
             const std::string& report_path, std::ostream& out) {
  auto [cfg, params] = load_checkpoint(checkpoint);
  // Command-line overrides win over the stored config (e.g. another dataset).
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  const auto split = parse_split(split_name);
  const auto store = obtain_dataset(cfg);
  if (store.select(split).empty()) throw std::runtime_error("dataset has no clips in split '" + split_name + "'");
  if (store.select(Split::dev).empty()) throw std::runtime_error("dataset has no dev clips for thresholding");
  const auto report = evaluate(params, cfg.model, store, split, Split::dev);
  fs::path path = report_path;
  if (path.empty()) path = fs::path(cfg.out_dir.empty() ? checkpoint : cfg.out_dir) / ("report_" + split_name + ".csv");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_report_csv(path, split_name, report);
  out << "split=" << split_name << " threshold=" << format_fixed(report.threshold) << " apcer="
      << format_fixed(report.apcer, 2) << " bpcer=" << format_fixed(report.bpcer, 2)
      << " acer=" << format_fixed(report.acer, 2) << " hter=" << format_fixed(report.hter, 2) << '\n';
  return 0;
}

void write_pgm(const fs::path& path, const Tensorf& map) {
  const std::size_t H = map.dim(0), W = map.dim(1);
  const auto d = map.data();
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double span = *hi - *lo;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P5\n" << W << ' ' << H << "\n255\n";
  for (float v : d) {
    const double u = span > 0 ? (v - *lo) / span : 0.5;
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * u))));
  }
}

int cmd_export_attention(const CommonOpts& o, const std::string& checkpoint, const std::string& clip_path,
                         const std::string& clip_id, std::size_t layer, std::size_t head, std::ostream& out) {
  auto [cfg, params] = load_checkpoint(checkpoint);
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  const fs::path dir = o.out_dir.empty() ? require_out(cfg) : o.out_dir;
  if (layer >= cfg.model.depth)
    throw std::out_of_range("layer " + std::to_string(layer) + " out of range (depth " +
                            std::to_string(cfg.model.depth) + ")");
  if (head >= cfg.model.scales.head_count())
    throw std::out_of_range("head " + std::to_string(head) + " out of range (" +
                            std::to_string(cfg.model.scales.head_count()) + " heads)");

  Tensorf frames;
  if (!clip_path.empty()) {
    frames = read_vpt1<float>(fs::path(clip_path));
  } else {
    const auto store = obtain_dataset(cfg);
    const StoredClip* found = nullptr;
    for (const auto& c : store.clips)
      if (clip_id.empty() ? c.split == Split::test : c.clip_id == clip_id) {
        found = &c;
        break;
      }
    if (!found) throw std::runtime_error(clip_id.empty() ? "dataset has no test clips" : "unknown clip_id '" + clip_id + "'");
    frames = found->frames;
  }
  if (frames.rank() != 4 || frames.dim(1) != 3) throw ShapeError("clip must be [T,3,H,W], got " + shape_str(frames.shape()));
  const VideoClip<float> clip =
      frames.dim(0) == cfg.model.frames
          ? VideoClip<float>{frames, Label::attack, ""}
          : sample_frames(VideoClip<float>{frames, Label::attack, ""}, cfg.model.frames, SampleMode::uniform);

  AttentionTrace<float> trace;
  forward(clip, params, cfg.model, &trace);
  fs::create_directories(dir);
  const auto& weights = trace.at(layer).at(head);
  for (std::size_t t = 0; t < cfg.model.frames; ++t) {
    const auto map = upsample_nearest(attention_rollout(weights, t), cfg.model.cte_stride);
    const std::string stem = "attn_L" + std::to_string(layer) + "_H" + std::to_string(head) + "_F" + std::to_string(t);
    write_pgm(dir / (stem + ".pgm"), map);
    write_vpt1(dir / (stem + ".vpt1"), map);
  }
  out << "wrote " << cfg.model.frames << " maps to " << dir.string() << '\n';
  return 0;
}

int cmd_count_cost(const RunConfig& cfg, std::ostream& out) {
  cfg.model.validate();
  const auto report = count_cost(cfg.model);
  out << format_cost_table(report);
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_cost_csv(fs::path(cfg.out_dir) / "cost.csv", report);
  }
  return 0;
}

std::vector<std::vector<std::size_t>> parse_scale_grid(const std::string& text) {
  // "1;2;1+2"
  std::vector<std::vector<std::size_t>> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ';')) {
    std::replace(cell.begin(), cell.end(), '+', ',');
    auto s = parse_size_list(cell);
    if (s.empty()) throw std::invalid_argument("empty scale subset in grid");
    out.push_back(std::move(s));
  }
  if (out.empty()) throw std::invalid_argument("empty scale grid");
  return out;
}

int cmd_ablate(const RunConfig& cfg, const std::string& axis, const std::string& grid, std::size_t n_seeds,
               std::size_t jobs, std::ostream& out) {
  if (axis != "scales" && axis != "clip-length")
    throw std::invalid_argument("unknown axis '" + axis + "' (scales | clip-length)");
  const fs::path dir = require_out(cfg);
  if (n_seeds == 0) throw std::invalid_argument("--seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(cfg.seed + i);

  std::vector<AblationRow> rows;
  if (axis == "scales") {
    const auto subsets = grid.empty() ? scale_subsets() : parse_scale_grid(grid);
    rows = ablation_scales(cfg.model, cfg.data, cfg.train, seeds, subsets, jobs);
  } else {
    const auto lengths = parse_size_list(grid.empty() ? "1,2,4,8,16" : grid);
    rows = ablation_clip_length(cfg.model, cfg.data, cfg.train, seeds, lengths, jobs);
  }
  fs::create_directories(dir);
  const std::string stem = axis == "scales" ? "ablation_scales" : "ablation_clip_length";
  write_ablation_csv(dir / (stem + ".csv"), axis, rows);
  write_ablation_runs_csv(dir / (stem + "_runs.csv"), axis, rows);
  for (const auto& r : rows) out << r.cell << " acer=" << format_fixed(r.mean_acer, 2) << '\n';
  return 0;
}

int cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = require_out(cfg);
  const auto store = generate_dataset(cfg.data);
  save_dataset(dir, store);
  out << "wrote " << store.clips.size() << " clips to " << dir.string() << '\n';
  return 0;
}

int cmd_selftest(std::ostream& out) {
  bool ok = true;
  for (const auto& r : run_selftest()) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.passed) out << ": " << r.detail;
    out << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-scale video transformer for face anti-spoofing", "vitpad"};
  app.require_subcommand(1);

  CommonOpts train_o, eval_o, attn_o, cost_o, ablate_o, gen_o;
  auto* train = app.add_subcommand("train", "train a model, write train_log.csv and checkpoint/");
  add_common(train, train_o);

  auto* eval = app.add_subcommand("eval", "score a split, threshold on dev, write a report CSV");
  add_common(eval, eval_o);
  std::string checkpoint, split = "test", report;
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval->add_option("--split", split, "train | dev | test");
  eval->add_option("--report", report, "report CSV path");

  auto* attn = app.add_subcommand("export-attention", "write per-frame attention maps (PGM + VPT1)");
  add_common(attn, attn_o);
  std::string clip_path, clip_id;
  std::size_t layer = 0, head = 0;
  attn->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  attn->add_option("--clip", clip_path, "VPT1 clip [T,3,H,W]");
  attn->add_option("--clip-id", clip_id, "clip id from the dataset (default: first test clip)");
  attn->add_option("--layer", layer, "layer index, 0-based");
  attn->add_option("--head", head, "head index, 0-based");

  auto* cost = app.add_subcommand("count-cost", "analytic MACs/FLOPs/params per layer");
  add_common(cost, cost_o);

  auto* ablate = app.add_subcommand("ablate", "scale-subset or clip-length grid");
  add_common(ablate, ablate_o);
  std::string axis, grid;
  std::size_t n_seeds = 3, jobs = 1;
  ablate->add_option("--axis", axis, "scales | clip-length")->required();
  ablate->add_option("--grid", grid, "clip lengths '1,2,4' or scale subsets '1;2;1+2'");
  ablate->add_option("--seeds", n_seeds, "number of seeds (seed, seed+1, ...)");
  ablate->add_option("--jobs", jobs, "worker threads");

  auto* gen = app.add_subcommand("gen-data", "write the synthetic dataset");
  add_common(gen, gen_o);

  auto* self = app.add_subcommand("selftest", "run the invariant checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    const std::pair<CLI::App*, CommonOpts*> verbs[] = {{train, &train_o}, {eval, &eval_o}, {attn, &attn_o},
                                                        {cost, &cost_o},   {ablate, &ablate_o}, {gen, &gen_o}};
    for (const auto& [cmd, opts] : verbs) {
      if (!cmd->parsed()) continue;
      const auto cfg = resolve(*opts);
      if (opts->dump) {
        out << dump_config(cfg);
        return 0;
      }
      if (cmd == train) return cmd_train(cfg, out);
      if (cmd == eval) return cmd_eval(*opts, checkpoint, split, report, out);
      if (cmd == attn) return cmd_export_attention(*opts, checkpoint, clip_path, clip_id, layer, head, out);
      if (cmd == cost) return cmd_count_cost(cfg, out);
      if (cmd == ablate) return cmd_ablate(cfg, axis, grid, n_seeds, jobs, out);
      if (cmd == gen) return cmd_gen_data(cfg, out);
    }
    if (self->parsed()) return cmd_selftest(out);
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  err << "error: no command\n";
  return 2;
}

}  // namespace vitpad
