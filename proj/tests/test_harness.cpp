// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "vitpad/evalkit.hpp"

using namespace vitpad;

namespace {

ModelConfig toy_model() {
  ModelConfig m;
  m.frames = 2;
  m.height = m.width = 16;
  m.channels = 4;
  m.scales.scales = {1, 2};
  m.depth = 1;
  m.seed = 3;
  return m;
}

SynthSpec toy_data() {
  SynthSpec s;
  s.n_train = 4;
  s.n_dev = 3;
  s.n_test = 3;
  s.height = s.width = 16;
  s.source_frames = 4;
  s.seed = 3;
  return s;
}

TrainOptions toy_opts(std::size_t steps) {
  TrainOptions o;
  o.steps = steps;
  o.batch = 4;
  o.lr = 3e-3;
  return o;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("learning rate: linear warmup over ceil(5%) of steps, then constant") {
  TrainOptions o;
  o.steps = 2000;
  o.lr = 1e-3;
  CHECK(learning_rate_at(1, o) == doctest::Approx(1e-3 / 100));
  CHECK(learning_rate_at(50, o) == doctest::Approx(0.5e-3));
  CHECK(learning_rate_at(100, o) == doctest::Approx(1e-3));
  CHECK(learning_rate_at(101, o) == 1e-3);
  CHECK(learning_rate_at(2000, o) == 1e-3);
  o.steps = 10;  // ceil(0.5) = 1 warmup step
  CHECK(learning_rate_at(1, o) == 1e-3);
  o.warmup_frac = 0;
  CHECK(learning_rate_at(1, o) == 1e-3);
}

TEST_CASE("augmentation preserves label, id, shape and value range") {
  auto rng = make_stream(1, "aug");
  VideoClip<float> c{testing::random_tensor<float>({2, 3, 8, 8}, rng, 0, 1), Label::bona_fide, "id"};
  for (int i = 0; i < 20; ++i) {
    auto a = augment_clip(c, rng);
    CHECK(a.label == c.label);
    CHECK(a.clip_id == "id");
    CHECK(a.frames.shape() == c.frames.shape());
    for (float v : a.frames.data()) CHECK((v >= 0.0f && v <= 1.0f));
  }
}

TEST_CASE("identical seeds give identical training logs") {
  auto store = generate_dataset(toy_data());
  auto run = [&] {
    std::ostringstream log;
    train_model(toy_model(), store, toy_opts(12), [&](const TrainLogRow& r) {
      log << r.step << ',' << format_fixed(r.loss, 10) << ',' << format_fixed(r.lr, 10) << '\n';
    });
    return log.str();
  };
  const auto a = run(), b = run();
  CHECK(a == b);
  CHECK(std::count(a.begin(), a.end(), '\n') == 12);
  auto other = toy_model();
  other.seed = 4;
  std::ostringstream log;
  train_model(other, store, toy_opts(12), [&](const TrainLogRow& r) { log << format_fixed(r.loss, 10) << '\n'; });
  CHECK(log.str() != a);
}

TEST_CASE("zero steps returns the initial parameters") {
  auto store = generate_dataset(toy_data());
  auto p = train_model(toy_model(), store, toy_opts(0));
  auto init = init_params<float>(toy_model());
  const auto a = p.list(), b = init.list();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(testing::bitwise_equal(a[i], b[i]));
}

TEST_CASE("an overfit toy run scores its own train split perfectly") {
  auto data = toy_data();
  auto store = generate_dataset(data);
  auto opts = toy_opts(1500);
  opts.augment = false;
  opts.lr = 1e-2;
  auto params = train_model(toy_model(), store, opts);
  const auto scores = score_split(params, toy_model(), store, Split::train);
  CHECK(scores.size() == 8);
  auto r = evaluate(params, toy_model(), store, Split::train, Split::train);
  CHECK(r.acer == 0.0);
  CHECK(r.acer == (r.apcer + r.bpcer) / 2);
}

TEST_CASE("scale subsets are the seven non-empty subsets of {1,2,4}") {
  auto s = scale_subsets();
  CHECK(s.size() == 7);
  CHECK(scale_label(s[3]) == "1+2");
  CHECK(scale_label(s[6]) == "1+2+4");
}

TEST_CASE("ablation grids: row counts, fixed order, determinism, threads") {
  auto data = toy_data();
  auto model = toy_model();
  model.height = model.width = 32;
  model.channels = 6;
  data.height = data.width = 32;
  auto opts = toy_opts(3);
  const std::vector<std::uint64_t> seeds{1, 2};

  auto scales = ablation_scales(model, data, opts, seeds, scale_subsets(), 1);
  REQUIRE(scales.size() == 7);
  CHECK(scales[0].cell == "1");
  CHECK(scales[6].cell == "1+2+4");
  for (const auto& row : scales) {
    CHECK(row.runs.size() == 2);
    CHECK(row.mean_acer == doctest::Approx((row.runs[0].report.acer + row.runs[1].report.acer) / 2));
  }

  const std::vector<std::size_t> lengths{1, 2, 4};
  auto a = ablation_clip_length(model, data, opts, seeds, lengths, 1);
  auto b = ablation_clip_length(model, data, opts, seeds, lengths, 3);
  REQUIRE(a.size() == 3);
  CHECK(a[0].cell == "T=1");
  auto dir = testing::scratch_dir("ablate");
  write_ablation_csv(dir / "a.csv", "clip-length", a);
  write_ablation_csv(dir / "b.csv", "clip-length", b);
  write_ablation_runs_csv(dir / "ar.csv", "clip-length", a);
  write_ablation_runs_csv(dir / "br.csv", "clip-length", b);
  CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));
  CHECK(read_file(dir / "ar.csv") == read_file(dir / "br.csv"));
  const auto text = read_file(dir / "a.csv");
  CHECK(text.starts_with("run_id,cell,seeds,apcer,bpcer,acer,hter\n"));
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);

  const std::vector<std::size_t> too_long{8};
  CHECK_THROWS(ablation_clip_length(model, data, opts, seeds, too_long, 1));
  CHECK_THROWS(ablation_scales(model, data, opts, seeds, {{}}, 1));
}
