// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "vitpad/evalkit.hpp"
#include "vitpad/rng.hpp"
#include "vitpad/vpt1.hpp"

namespace vitpad {

void SynthSpec::validate() const {
  if (height == 0 || width == 0 || source_frames == 0)
    throw std::invalid_argument("synthetic frames need positive height, width and source_frames");
  if (texture_amp < 0 || pulse_amp < 0 || noise_sigma < 0 || jitter_px < 0)
    throw std::invalid_argument("synthetic amplitudes must be >= 0");
  if (pulse_freq_min < 0 || pulse_freq_max < pulse_freq_min)
    throw std::invalid_argument("pulse frequency range must satisfy 0 <= min <= max");
  if (grid_period <= 0) throw std::invalid_argument("grid_period must be > 0");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "dev") return Split::dev;
  if (text == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + text + "' (train | dev | test)");
}

std::string to_string(Label label) {
  return label == Label::bona_fide ? "bonafide" : "attack";
}

std::vector<const StoredClip*> ClipStore::select(Split split) const {
  std::vector<const StoredClip*> out;
  for (const auto& c : clips)
    if (c.split == split) out.push_back(&c);
  return out;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct SceneParams {
  double level, tex_amp[2], tex_fx[2], tex_fy[2], tex_phase[2];
  double cx, cy, sx, sy;
  double tint[3];
  std::vector<double> jitter_x, jitter_y;
};

SceneParams draw_scene(const SynthSpec& spec, Rng& rng) {
  const double W = static_cast<double>(spec.width), H = static_cast<double>(spec.height);
  SceneParams s{};
  s.level = uniform(rng, 0.35, 0.6);
  for (int k = 0; k < 2; ++k) {
    s.tex_amp[k] = uniform(rng, 0.02, 0.05);
    s.tex_fx[k] = uniform(rng, 0.5, 1.5) / W;
    s.tex_fy[k] = uniform(rng, 0.5, 1.5) / H;
    s.tex_phase[k] = uniform(rng, 0.0, kTwoPi);
  }
  s.cx = W / 2 + uniform(rng, -0.1, 0.1) * W;
  s.cy = H / 2 + uniform(rng, -0.1, 0.1) * H;
  s.sx = uniform(rng, 0.2, 0.28) * W;
  s.sy = uniform(rng, 0.26, 0.34) * H;
  const double base_tint[3] = {0.16, 0.08, 0.02};
  for (int c = 0; c < 3; ++c) s.tint[c] = base_tint[c] + uniform(rng, -0.03, 0.03);
  s.jitter_x.resize(spec.source_frames);
  s.jitter_y.resize(spec.source_frames);
  for (std::size_t t = 0; t < spec.source_frames; ++t) {
    s.jitter_x[t] = uniform(rng, -spec.jitter_px, spec.jitter_px);
    s.jitter_y[t] = uniform(rng, -spec.jitter_px, spec.jitter_px);
  }
  return s;
}

Tensorf render_clip(const SynthSpec& spec, const SceneParams& scene, Label label, Rng& class_rng,
                    Rng& noise_rng) {
  const std::size_t T = spec.source_frames, H = spec.height, W = spec.width;
  // Class-specific draws happen for both labels so the streams stay aligned.
  const double freq = uniform(class_rng, spec.pulse_freq_min, spec.pulse_freq_max);
  const double phase = uniform(class_rng, 0.0, kTwoPi);
  const double gx = uniform(class_rng, 0.0, spec.grid_period);
  const double gy = uniform(class_rng, 0.0, spec.grid_period);
  const bool live = label == Label::bona_fide;

  Tensorf frames({T, 3, H, W});
  auto out = frames.data();
  for (std::size_t t = 0; t < T; ++t) {
    const double pulse = live ? spec.pulse_amp * std::sin(kTwoPi * freq * static_cast<double>(t) + phase) : 0.0;
    const double cx = scene.cx + scene.jitter_x[t];
    const double cy = scene.cy + scene.jitter_y[t];
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double xf = static_cast<double>(x), yf = static_cast<double>(y);
        double bg = scene.level;
        for (int k = 0; k < 2; ++k)
          bg += scene.tex_amp[k] * std::sin(kTwoPi * (scene.tex_fx[k] * xf + scene.tex_fy[k] * yf) + scene.tex_phase[k]);
        const double dx = (xf - cx) / scene.sx, dy = (yf - cy) / scene.sy;
        const double face = std::exp(-0.5 * (dx * dx + dy * dy));
        const double grid = live ? 0.0
                                 : spec.texture_amp * std::cos(kTwoPi * (xf + gx) / spec.grid_period) *
                                       std::cos(kTwoPi * (yf + gy) / spec.grid_period);
        for (std::size_t c = 0; c < 3; ++c) {
          double v = bg + face * (0.1 + scene.tint[c]) + pulse + grid;
          if (spec.noise_sigma > 0) v += spec.noise_sigma * normal(noise_rng);
          out[((t * 3 + c) * H + y) * W + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
  }
  return frames;
}

std::string clip_name(Split split, Label label, std::size_t index) {
  std::ostringstream os;
  os << to_string(split) << '-' << to_string(label) << '-' << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

}  // namespace

ClipStore generate_dataset(const SynthSpec& spec) {
  spec.validate();
  ClipStore store;
  store.spec = spec;
  for (Split split : {Split::train, Split::dev, Split::test}) {
    const std::size_t n = split == Split::train ? spec.n_train : split == Split::dev ? spec.n_dev : spec.n_test;
    const std::string prefix = "data/" + to_string(split);
    for (std::size_t i = 0; i < n; ++i) {
      auto base_rng = make_stream(spec.seed, prefix + "/scene", i);
      const auto scene = draw_scene(spec, base_rng);
      for (Label label : {Label::attack, Label::bona_fide}) {
        // Class and noise streams are keyed by index only; the label changes
        // how the draws are used, not which draws happen.
        auto class_rng = make_stream(spec.seed, prefix + "/class", i);
        auto noise_rng = make_stream(spec.seed, prefix + "/noise/" + to_string(label), i);
        store.clips.push_back(
            {clip_name(split, label, i), split, label, render_clip(spec, scene, label, class_rng, noise_rng)});
      }
    }
  }
  return store;
}

void save_dataset(const std::filesystem::path& dir, const ClipStore& store) {
  std::filesystem::create_directories(dir / "clips");
  std::ofstream manifest(dir / "manifest.csv", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.csv").string());
  manifest << "clip_id,path,label,split\n";
  for (const auto& c : store.clips) {
    const std::string rel = "clips/" + c.clip_id + ".vpt1";
    write_vpt1(dir / rel, c.frames);
    manifest << c.clip_id << ',' << rel << ',' << static_cast<int>(c.label) << ',' << to_string(c.split) << '\n';
  }
}

ClipStore load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv", std::ios::binary);
  if (!manifest) throw std::runtime_error("missing dataset manifest " + (dir / "manifest.csv").string());
  ClipStore store;
  std::string line;
  std::getline(manifest, line);
  if (line != "clip_id,path,label,split")
    throw FormatError("manifest.csv: unexpected header '" + line + "'");
  std::size_t lineno = 1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 4 || (f[2] != "0" && f[2] != "1"))
      throw FormatError("manifest.csv line " + std::to_string(lineno) + ": malformed row");
    StoredClip clip{f[0], parse_split(f[3]), f[2] == "1" ? Label::bona_fide : Label::attack,
                    read_vpt1<float>(dir / f[1])};
    if (clip.frames.rank() != 4 || clip.frames.dim(1) != 3)
      throw FormatError("clip " + clip.clip_id + " is not [S,3,H,W]");
    store.clips.push_back(std::move(clip));
  }
  if (!store.clips.empty()) {
    const auto& s = store.clips.front().frames.shape();
    store.spec.source_frames = s[0];
    store.spec.height = s[2];
    store.spec.width = s[3];
  }
  return store;
}

}  // namespace vitpad
