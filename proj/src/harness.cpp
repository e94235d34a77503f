// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "vitpad/evalkit.hpp"

namespace vitpad {

double learning_rate_at(std::size_t step, const TrainOptions& opts) {
  const auto warmup = static_cast<std::size_t>(std::ceil(opts.warmup_frac * static_cast<double>(opts.steps)));
  if (warmup > 0 && step <= warmup) return opts.lr * static_cast<double>(step) / static_cast<double>(warmup);
  return opts.lr;
}

VideoClip<float> augment_clip(const VideoClip<float>& clip, Rng& rng) {
  const bool flip = uniform01(rng) < 0.5;
  const double gain = uniform(rng, 0.9, 1.1);
  const double shift = uniform(rng, -0.05, 0.05);
  const auto& s = clip.frames.shape();
  const std::size_t planes = s[0] * s[1], H = s[2], W = s[3];
  Tensorf out(s);
  auto src = clip.frames.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t sx = flip ? W - 1 - x : x;
        const double v = gain * src[(p * H + y) * W + sx] + shift;
        dst[(p * H + y) * W + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  return {out, clip.label, clip.clip_id};
}

void train_model_from(ModelParams<float>& params, const ModelConfig& model, const ClipStore& store,
                      const TrainOptions& opts, const std::function<void(const TrainLogRow&)>& log) {
  if (opts.steps == 0) return;
  if (opts.batch == 0) throw std::invalid_argument("batch must be >= 1");
  const auto train = store.select(Split::train);
  if (train.empty()) throw std::invalid_argument("dataset has no train clips");
  auto order_rng = make_stream(model.seed, "sampling");
  auto frame_rng = make_stream(model.seed, "sampling/frames");
  auto aug_rng = make_stream(model.seed, "augment");
  Adam<float> opt(params.list(), opts.adam);

  std::vector<std::size_t> order(train.size());
  std::size_t cursor = order.size();
  std::vector<VideoClip<float>> batch;
  for (std::size_t step = 1; step <= opts.steps; ++step) {
    batch.clear();
    while (batch.size() < opts.batch) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i-- > 1;)
          std::swap(order[i], order[static_cast<std::size_t>(uniform_int(order_rng, 0, static_cast<std::int64_t>(i)))]);
        cursor = 0;
      }
      const auto* src = train[order[cursor++]];
      auto clip = sample_frames(VideoClip<float>{src->frames, src->label, src->clip_id}, model.frames,
                                opts.sample_mode, &frame_rng);
      batch.push_back(opts.augment ? augment_clip(clip, aug_rng) : std::move(clip));
    }
    const double lr = learning_rate_at(step, opts);
    const double loss = train_step<float>(batch, params, opt, model, lr);
    if (log) log({step, loss, lr});
  }
}

ModelParams<float> train_model(const ModelConfig& model, const ClipStore& store, const TrainOptions& opts,
                               const std::function<void(const TrainLogRow&)>& log) {
  auto params = init_params<float>(model);
  train_model_from(params, model, store, opts, log);
  return params;
}

std::vector<ScoredSample> score_split(const ModelParams<float>& params, const ModelConfig& model,
                                      const ClipStore& store, Split split) {
  std::vector<ScoredSample> out;
  for (const auto* c : store.select(split)) {
    auto clip = sample_frames(VideoClip<float>{c->frames, c->label, c->clip_id}, model.frames, SampleMode::uniform);
    out.push_back({predict_score(clip, params, model), c->label});
  }
  return out;
}

MetricReport evaluate(const ModelParams<float>& params, const ModelConfig& model, const ClipStore& store,
                      Split eval_split, Split threshold_split) {
  const auto dev = score_split(params, model, store, threshold_split);
  const double threshold = select_threshold(dev);
  if (eval_split == threshold_split) return compute_metrics(dev, threshold);
  return compute_metrics(score_split(params, model, store, eval_split), threshold);
}

std::vector<std::vector<std::size_t>> scale_subsets() {
  return {{1}, {2}, {4}, {1, 2}, {1, 4}, {2, 4}, {1, 2, 4}};
}

std::string scale_label(const std::vector<std::size_t>& scales) {
  std::string out;
  for (std::size_t i = 0; i < scales.size(); ++i) out += (i ? "+" : "") + std::to_string(scales[i]);
  return out;
}

namespace {

struct GridTask {
  std::size_t row = 0;
  std::size_t seed_index = 0;
  ModelConfig model;
};

std::vector<AblationRow> run_grid(const std::vector<std::string>& cells, std::vector<GridTask> tasks,
                                  const SynthSpec& data, const TrainOptions& opts,
                                  std::span<const std::uint64_t> seeds, std::size_t jobs) {
  if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  // One dataset per seed, shared by every cell.
  std::vector<ClipStore> stores;
  for (auto s : seeds) {
    auto spec = data;
    spec.seed = s;
    stores.push_back(generate_dataset(spec));
  }
  std::vector<MetricReport> reports(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        const auto& t = tasks[i];
        const auto& store = stores[t.seed_index];
        auto params = train_model(t.model, store, opts);
        reports[i] = evaluate(params, t.model, store, Split::test, Split::dev);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<AblationRow> rows(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) rows[r].cell = cells[r];
  for (std::size_t i = 0; i < tasks.size(); ++i)
    rows[tasks[i].row].runs.push_back({seeds[tasks[i].seed_index], reports[i]});
  for (auto& row : rows) {
    const auto n = static_cast<double>(row.runs.size());
    for (const auto& run : row.runs) {
      row.mean_apcer += run.report.apcer / n;
      row.mean_bpcer += run.report.bpcer / n;
      row.mean_acer += run.report.acer / n;
      row.mean_hter += run.report.hter / n;
    }
  }
  return rows;
}

}  // namespace

std::vector<AblationRow> ablation_scales(const ModelConfig& base, const SynthSpec& data, const TrainOptions& opts,
                                         std::span<const std::uint64_t> seeds,
                                         const std::vector<std::vector<std::size_t>>& subsets, std::size_t jobs) {
  std::vector<std::string> cells;
  std::vector<GridTask> tasks;
  for (std::size_t r = 0; r < subsets.size(); ++r) {
    if (subsets[r].empty()) throw std::invalid_argument("empty scale subset in ablation grid");
    cells.push_back(scale_label(subsets[r]));
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      auto cfg = base;
      cfg.scales.scales = subsets[r];
      cfg.seed = seeds[s];
      cfg.validate();
      tasks.push_back({r, s, cfg});
    }
  }
  return run_grid(cells, std::move(tasks), data, opts, seeds, jobs);
}

std::vector<AblationRow> ablation_clip_length(const ModelConfig& base, const SynthSpec& data,
                                              const TrainOptions& opts, std::span<const std::uint64_t> seeds,
                                              std::span<const std::size_t> lengths, std::size_t jobs) {
  std::vector<std::string> cells;
  std::vector<GridTask> tasks;
  for (std::size_t r = 0; r < lengths.size(); ++r) {
    if (lengths[r] > data.source_frames)
      throw std::invalid_argument("clip length " + std::to_string(lengths[r]) + " exceeds source_frames " +
                                  std::to_string(data.source_frames));
    cells.push_back("T=" + std::to_string(lengths[r]));
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      auto cfg = base;
      cfg.frames = lengths[r];
      cfg.seed = seeds[s];
      cfg.validate();
      tasks.push_back({r, s, cfg});
    }
  }
  return run_grid(cells, std::move(tasks), data, opts, seeds, jobs);
}

void write_ablation_csv(const std::filesystem::path& path, const std::string& axis,
                        const std::vector<AblationRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "run_id,cell,seeds,apcer,bpcer,acer,hter\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << axis << '-' << i << ',' << r.cell << ',' << r.runs.size() << ',' << format_fixed(r.mean_apcer) << ','
       << format_fixed(r.mean_bpcer) << ',' << format_fixed(r.mean_acer) << ',' << format_fixed(r.mean_hter) << '\n';
  }
}

void write_ablation_runs_csv(const std::filesystem::path& path, const std::string& axis,
                             const std::vector<AblationRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "run_id,cell,seed,threshold,apcer,bpcer,acer,hter\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& run : rows[i].runs) {
      const auto& m = run.report;
      os << axis << '-' << i << ',' << rows[i].cell << ',' << run.seed << ',' << format_fixed(m.threshold) << ','
         << format_fixed(m.apcer) << ',' << format_fixed(m.bpcer) << ',' << format_fixed(m.acer) << ','
         << format_fixed(m.hter) << '\n';
    }
}

}  // namespace vitpad
