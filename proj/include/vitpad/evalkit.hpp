// SPDX-License-Identifier: Apache-2.0
//
// Synthetic spoof videos, PAD metrics and the train/evaluate harness used by
// the ablations.
//
// Bona fide clips carry a global sinusoidal intensity pulse (temporal cue).
// Attack clips carry a fine periodic grid (spatial, moire-like cue) and no
// pulse. Both share the same face blob, background and head jitter for a given
// (split, index) pair, so with both amplitudes and the noise at zero the two
// classes are bitwise identical.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vitpad/embed.hpp"
#include "vitpad/model.hpp"
#include "vitpad/optim.hpp"

namespace vitpad {

struct SynthSpec {
  std::size_t n_train = 400;  // per class
  std::size_t n_dev = 100;
  std::size_t n_test = 100;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t source_frames = 16;
  double texture_amp = 0.06;     // attack grid amplitude
  double grid_period = 3.0;      // pixels
  double pulse_amp = 0.08;       // bona fide intensity oscillation
  double pulse_freq_min = 0.05;  // cycles per source frame
  double pulse_freq_max = 0.15;
  double noise_sigma = 0.02;
  double jitter_px = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Split { train, dev, test };
std::string to_string(Split split);
Split parse_split(const std::string& text);
std::string to_string(Label label);

struct StoredClip {
  std::string clip_id;
  Split split = Split::train;
  Label label = Label::attack;
  Tensorf frames;  // [source_frames, 3, H, W]
};

struct ClipStore {
  SynthSpec spec;
  std::vector<StoredClip> clips;

  std::vector<const StoredClip*> select(Split split) const;
};

ClipStore generate_dataset(const SynthSpec& spec);

// Directory of VPT1 clips plus `manifest.csv` (clip_id,path,label,split).
void save_dataset(const std::filesystem::path& dir, const ClipStore& store);
ClipStore load_dataset(const std::filesystem::path& dir);

// ---- metrics -------------------------------------------------------------

struct ScoredSample {
  double score = 0.0;  // bona fide probability
  Label label = Label::attack;
};

struct MetricReport {
  double threshold = 0.5;
  std::size_t attacks_accepted = 0;
  std::size_t attacks_rejected = 0;
  std::size_t bonafide_accepted = 0;
  std::size_t bonafide_rejected = 0;
  double apcer = 0.0;  // percent
  double bpcer = 0.0;
  double acer = 0.0;
  double hter = 0.0;
};

double acer_from(double apcer, double bpcer);

// Bona fide iff score >= threshold. Throws std::invalid_argument unless both
// classes are present.
MetricReport compute_metrics(std::span<const ScoredSample> scores, double threshold);

// Equal-error-rate operating point on dev scores: the midpoint between
// adjacent distinct scores minimising |FAR - FRR|, ties to the lower one.
double select_threshold(std::span<const ScoredSample> dev);

// ---- training harness ----------------------------------------------------

struct TrainOptions {
  std::size_t steps = 2000;
  std::size_t batch = 8;
  double lr = 1e-3;
  double warmup_frac = 0.05;
  AdamConfig adam;
  SampleMode sample_mode = SampleMode::uniform;
  bool augment = true;
};

// Linear warmup over ceil(warmup_frac * steps) steps, then constant.
double learning_rate_at(std::size_t step, const TrainOptions& opts);

struct TrainLogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

// Horizontal flip and a per-clip brightness/contrast jitter, both label
// preserving and identical across frames.
VideoClip<float> augment_clip(const VideoClip<float>& clip, Rng& rng);

// Trains from init_params(model) on the train split. Batches come from
// epoch-wise shuffles on the "sampling" stream of `model.seed`.
ModelParams<float> train_model(const ModelConfig& model, const ClipStore& store, const TrainOptions& opts,
                               const std::function<void(const TrainLogRow&)>& log = {});

// Same, continuing from `params`.
void train_model_from(ModelParams<float>& params, const ModelConfig& model, const ClipStore& store,
                      const TrainOptions& opts, const std::function<void(const TrainLogRow&)>& log = {});

// Eval clips use uniform frame sampling.
std::vector<ScoredSample> score_split(const ModelParams<float>& params, const ModelConfig& model,
                                      const ClipStore& store, Split split);

// Threshold from `threshold_split`, metrics on `eval_split`.
MetricReport evaluate(const ModelParams<float>& params, const ModelConfig& model, const ClipStore& store,
                      Split eval_split, Split threshold_split = Split::dev);

// ---- ablations -----------------------------------------------------------

struct AblationRun {
  std::uint64_t seed = 0;
  MetricReport report;
};

struct AblationRow {
  std::string cell;  // e.g. "1+2" or "T=8"
  std::vector<AblationRun> runs;
  double mean_apcer = 0.0;
  double mean_bpcer = 0.0;
  double mean_acer = 0.0;
  double mean_hter = 0.0;
};

// The seven non-empty subsets of {1, 2, 4} in a fixed order.
std::vector<std::vector<std::size_t>> scale_subsets();
std::string scale_label(const std::vector<std::size_t>& scales);

// One row per scale subset; each seed fixes data, init and sampling for all
// rows. `jobs` > 1 runs grid cells on worker threads; row order is fixed.
std::vector<AblationRow> ablation_scales(const ModelConfig& base, const SynthSpec& data,
                                         const TrainOptions& opts, std::span<const std::uint64_t> seeds,
                                         const std::vector<std::vector<std::size_t>>& subsets,
                                         std::size_t jobs = 1);

std::vector<AblationRow> ablation_clip_length(const ModelConfig& base, const SynthSpec& data,
                                              const TrainOptions& opts, std::span<const std::uint64_t> seeds,
                                              std::span<const std::size_t> lengths, std::size_t jobs = 1);

// Summary: run_id,cell,seeds,apcer,bpcer,acer,hter (means over seeds).
void write_ablation_csv(const std::filesystem::path& path, const std::string& axis,
                        const std::vector<AblationRow>& rows);
// Per-seed detail: run_id,cell,seed,threshold,apcer,bpcer,acer,hter.
void write_ablation_runs_csv(const std::filesystem::path& path, const std::string& axis,
                             const std::vector<AblationRow>& rows);

// Report CSV: run_id,threshold,apcer,bpcer,acer,hter.
void write_report_csv(const std::filesystem::path& path, const std::string& run_id, const MetricReport& r);

std::string format_fixed(double value, int digits = 6);

}  // namespace vitpad
