#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "efl/category_state.hpp"
#include "efl/loss.hpp"
#include "efl/synth.hpp"

namespace efl {

enum class SamplerKind { Random, Rfs };
std::string sampler_name(SamplerKind s);
SamplerKind parse_sampler(const std::string& name);

struct TrainConfig {
  LossHyperParams loss;
  int epochs = 4;
  int batch_size = 256;
  double lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int warmup_iters = 500;
  double grad_clip_norm = 35.0;  // <= 0 disables clipping
  SamplerKind sampler = SamplerKind::Random;
  std::uint64_t seed = 0;
  double prior_prob = 0.001;
  double rfs_threshold = 0.001;
  double state_ema_decay = 0.0;
  int max_iters = 0;  // > 0 caps the total iteration count

  void validate() const;
};

// Linear per-category sigmoid classifiers: logits = features * W + b.
struct ModelParams {
  int feature_dim = 0;
  int num_categories = 0;
  std::vector<double> weights;  // feature_dim x num_categories, row-major
  std::vector<double> bias;     // num_categories
};

struct TrainLogRow {
  int iteration;
  double loss;
  double lr;
  double grad_norm;  // global norm before clipping
  double g_min;
  double g_max;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  // Per-iteration per-category trajectories, rows.size() x C each.
  std::vector<std::vector<double>> g_trajectory;
  std::vector<std::vector<double>> gamma_trajectory;
};

struct TrainResult {
  ModelParams model;
  CategoryState state;
  TrainLog log;
};

// Raised when the loss or a gradient goes non-finite mid-training.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ModelParams init_model(int feature_dim, int c, double prior_prob,
                       std::uint64_t seed);

TrainResult train(const SyntheticDataset& data, const TrainConfig& cfg);

// sigmoid(features * W + b) for every sample and category.
std::vector<double> predict(const ModelParams& model,
                            const std::vector<double>& features, int n);

// Versioned text checkpoint for model parameters (hex floats, bit exact).
void save_model(const ModelParams& model, const std::string& path);
ModelParams load_model(const std::string& path);

std::string trainlog_csv(const TrainLog& log);
std::string trajectory_csv(const TrainLog& log);

}  // namespace efl
