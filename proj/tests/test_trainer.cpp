#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <vector>

#include "efl/metrics.hpp"
#include "efl/synth.hpp"
#include "efl/trainer.hpp"

using namespace efl;

namespace {

DatasetSpec tiny_spec() {
  DatasetSpec s;
  s.num_categories = 4;
  s.zipf_exponent = 1.0;
  s.n_max = 30;
  s.bg_ratio = 3.0;
  s.feature_dim = 6;
  s.class_separation = 3.0;
  s.noise_std = 0.8;
  s.seed = 7;
  return s;
}

TrainConfig tiny_config(Variant v) {
  TrainConfig c;
  c.loss.variant = v;
  c.epochs = 3;
  c.batch_size = 32;
  c.warmup_iters = 5;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("prior-probability bias initialization") {
  const ModelParams m = init_model(4, 3, 0.001, 1);
  for (double b : m.bias)
    CHECK(b == doctest::Approx(-std::log(0.999 / 0.001)).epsilon(1e-12));

  // zero weights + prior bias: every prediction is the prior
  ModelParams zero = m;
  std::fill(zero.weights.begin(), zero.weights.end(), 0.0);
  const std::vector<double> feats(8, 1.3);
  for (double p : predict(zero, feats, 2))
    CHECK(p == doctest::Approx(0.001).epsilon(1e-9));
}

TEST_CASE("predict matches a scalar loop and is monotone in the logit") {
  const ModelParams m = init_model(3, 2, 0.01, 5);
  const std::vector<double> feats = {0.5, -1.0, 2.0, 1.5, 0.0, -0.3};
  const std::vector<double> probs = predict(m, feats, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double z = m.bias[j];
      for (int k = 0; k < 3; ++k)
        z += feats[static_cast<size_t>(i) * 3 + k] *
             m.weights[static_cast<size_t>(k) * 2 + j];
      const double p = 1.0 / (1.0 + std::exp(-z));
      CHECK(probs[static_cast<size_t>(i) * 2 + j] ==
            doctest::Approx(p).epsilon(1e-12));
      CHECK(probs[static_cast<size_t>(i) * 2 + j] > 0.0);
      CHECK(probs[static_cast<size_t>(i) * 2 + j] < 1.0);
    }
  CHECK_THROWS_AS(predict(m, feats, 3), std::invalid_argument);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const SyntheticDataset data = make_dataset(tiny_spec());
  const TrainConfig cfg = tiny_config(Variant::EFL);
  const TrainResult a = train(data, cfg);
  const TrainResult b = train(data, cfg);
  CHECK(a.model.weights == b.model.weights);
  CHECK(a.model.bias == b.model.bias);
  CHECK(a.state.pos_acc == b.state.pos_acc);
  REQUIRE(a.log.rows.size() == b.log.rows.size());
  for (size_t i = 0; i < a.log.rows.size(); ++i)
    CHECK(a.log.rows[i].loss == b.log.rows[i].loss);
}

TEST_CASE("s=0 EFL run is bit-identical to the FL run") {
  const SyntheticDataset data = make_dataset(tiny_spec());
  TrainConfig fl = tiny_config(Variant::FL);
  TrainConfig efl0 = tiny_config(Variant::EFL);
  efl0.loss.s = 0.0;
  const TrainResult a = train(data, fl);
  const TrainResult b = train(data, efl0);
  CHECK(a.model.weights == b.model.weights);
  CHECK(a.model.bias == b.model.bias);
  REQUIRE(a.log.rows.size() == b.log.rows.size());
  for (size_t i = 0; i < a.log.rows.size(); ++i) {
    CHECK(a.log.rows[i].loss == b.log.rows[i].loss);
    CHECK(a.log.rows[i].grad_norm == b.log.rows[i].grad_norm);
  }
}

TEST_CASE("lr=0 leaves the parameters untouched") {
  const SyntheticDataset data = make_dataset(tiny_spec());
  TrainConfig cfg = tiny_config(Variant::EFL);
  cfg.lr = 0.0;
  const TrainResult res = train(data, cfg);
  const ModelParams fresh =
      init_model(data.spec.feature_dim, data.spec.num_categories,
                 cfg.prior_prob, cfg.seed);
  CHECK(res.model.weights == fresh.weights);
  CHECK(res.model.bias == fresh.bias);
}

TEST_CASE("single hand-checked SGD step") {
  // One sample, one category, one iteration: delta = -lr (g + wd * w).
  DatasetSpec spec = tiny_spec();
  spec.num_categories = 1;
  spec.n_max = 1;
  spec.bg_ratio = 0.0;
  spec.feature_dim = 2;
  const SyntheticDataset data = make_dataset(spec);
  REQUIRE(data.num_samples == 1);

  TrainConfig cfg = tiny_config(Variant::FL);
  cfg.epochs = 1;
  cfg.batch_size = 1;
  cfg.warmup_iters = 0;
  cfg.grad_clip_norm = 0.0;  // disabled
  cfg.lr = 0.1;

  const ModelParams m0 =
      init_model(2, 1, cfg.prior_prob, cfg.seed);
  double z = m0.bias[0];
  for (int k = 0; k < 2; ++k) z += data.features[k] * m0.weights[k];
  const BinaryTarget t{1, 1.0};
  const double gl = focal_grad(z, t, cfg.loss, cfg.loss.gamma_b);

  const TrainResult res = train(data, cfg);
  for (int k = 0; k < 2; ++k) {
    const double grad_w = gl * data.features[k];
    const double expect =
        m0.weights[k] -
        cfg.lr * (grad_w + cfg.weight_decay * m0.weights[k]);
    CHECK(res.model.weights[k] == doctest::Approx(expect).epsilon(1e-12));
  }
  const double expect_b =
      m0.bias[0] - cfg.lr * (gl + cfg.weight_decay * m0.bias[0]);
  CHECK(res.model.bias[0] == doctest::Approx(expect_b).epsilon(1e-12));
}

TEST_CASE("warmup contract") {
  const SyntheticDataset data = make_dataset(tiny_spec());
  TrainConfig cfg = tiny_config(Variant::EFL);
  cfg.warmup_iters = 7;
  const TrainResult res = train(data, cfg);
  for (const TrainLogRow& r : res.log.rows) {
    if (r.iteration < cfg.warmup_iters)
      CHECK(r.lr == cfg.lr * (r.iteration + 1) / cfg.warmup_iters);
    else
      CHECK(r.lr == cfg.lr);
  }
}

TEST_CASE("gradient clipping bounds the applied norm") {
  const SyntheticDataset data = make_dataset(tiny_spec());
  TrainConfig cfg = tiny_config(Variant::EFL);
  cfg.grad_clip_norm = 0.05;  // low enough to trigger
  const TrainResult res = train(data, cfg);
  bool triggered = false;
  for (const TrainLogRow& r : res.log.rows)
    if (r.grad_norm > cfg.grad_clip_norm) triggered = true;
  CHECK(triggered);  // pre-clip norm is logged; clipping scales what is applied
}

TEST_CASE("rare-category g stays below the frequent one") {
  DatasetSpec spec = tiny_spec();
  spec.num_categories = 10;
  spec.zipf_exponent = 1.5;
  spec.n_max = 120;
  spec.bg_ratio = 10.0;
  const SyntheticDataset data = make_dataset(spec);
  TrainConfig cfg = tiny_config(Variant::EFL);
  cfg.epochs = 2;
  cfg.warmup_iters = 10;
  const TrainResult res = train(data, cfg);
  const int rare = spec.num_categories - 1;
  int ok = 0, total = 0;
  for (size_t i = 0; i < res.log.rows.size(); ++i) {
    if (res.log.rows[i].iteration < cfg.warmup_iters) continue;
    ++total;
    if (res.log.g_trajectory[i][rare] <= res.log.g_trajectory[i][0]) ++ok;
  }
  REQUIRE(total > 0);
  CHECK(static_cast<double>(ok) / total >= 0.9);
}

TEST_CASE("frozen-model loss recomputation matches the logged loss") {
  // Re-running batch_loss over a frozen model with the final state is the
  // same computation the trainer did on its last iteration only if the
  // parameters did not move; check instead with lr = 0.
  const SyntheticDataset data = make_dataset(tiny_spec());
  TrainConfig cfg = tiny_config(Variant::EFL);
  cfg.lr = 0.0;
  cfg.epochs = 1;
  cfg.sampler = SamplerKind::Random;
  const TrainResult res = train(data, cfg);
  REQUIRE(!res.log.rows.empty());
  // with lr = 0 the model is frozen; recompute the first full batch by hand
  // using the same initial state (g = 1 everywhere)
  const int c = data.spec.num_categories;
  const ModelParams m = res.model;
  const CategoryState st = init_state(c, cfg.loss);
  // reproduce the first batch: same sampler stream as the trainer
  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(data.num_samples);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int bs = std::min<int>(cfg.batch_size, data.num_samples);
  std::vector<double> logits(static_cast<size_t>(bs) * c);
  std::vector<BinaryTarget> targets(logits.size());
  for (int i = 0; i < bs; ++i)
    for (int j = 0; j < c; ++j) {
      double zz = m.bias[j];
      for (int k = 0; k < data.spec.feature_dim; ++k)
        zz += data.features[static_cast<size_t>(order[i]) * data.spec.feature_dim + k] *
              m.weights[static_cast<size_t>(k) * c + j];
      const size_t kk = static_cast<size_t>(i) * c + j;
      logits[kk] = zz;
      targets[kk].y = data.labels[order[i]] == j ? 1 : 0;
      targets[kk].quality = targets[kk].y ? 1.0 : 0.0;
    }
  const BatchLossResult bl = batch_loss(logits, targets, bs, c, cfg.loss, st);
  CHECK(bl.total == doctest::Approx(res.log.rows[0].loss).epsilon(1e-12));
}

TEST_CASE("model checkpoint round trip") {
  namespace fs = std::filesystem;
  const ModelParams m = init_model(5, 3, 0.001, 99);
  const std::string path =
      (fs::temp_directory_path() / "efl_test_model.txt").string();
  save_model(m, path);
  const ModelParams back = load_model(path);
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.feature_dim == 5);
  CHECK(back.num_categories == 3);
  fs::remove(path);
}

TEST_CASE("trainlog csv columns") {
  const SyntheticDataset data = make_dataset(tiny_spec());
  TrainConfig cfg = tiny_config(Variant::EFL);
  cfg.max_iters = 2;
  const TrainResult res = train(data, cfg);
  CHECK(trainlog_csv(res.log).rfind("iteration,loss,lr,grad_norm,g_min,g_max\n",
                                    0) == 0);
  CHECK(trajectory_csv(res.log).rfind("iteration,category,g,gamma\n", 0) == 0);
}
