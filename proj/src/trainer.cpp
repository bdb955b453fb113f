#include "efl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "efl/math.hpp"

namespace efl {

std::string sampler_name(SamplerKind s) {
  return s == SamplerKind::Random ? "random" : "rfs";
}

SamplerKind parse_sampler(const std::string& name) {
  if (name == "random") return SamplerKind::Random;
  if (name == "rfs") return SamplerKind::Rfs;
  throw std::invalid_argument("unknown sampler: " + name);
}

void TrainConfig::validate() const {
  loss.validate();
  if (epochs < 0) throw std::invalid_argument("epochs < 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size < 1");
  if (!(lr >= 0.0)) throw std::invalid_argument("lr < 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("momentum out of [0,1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay < 0");
  if (warmup_iters < 0) throw std::invalid_argument("warmup_iters < 0");
  if (!(prior_prob > 0.0 && prior_prob < 1.0))
    throw std::invalid_argument("prior_prob out of (0,1)");
}

ModelParams init_model(int feature_dim, int c, double prior_prob,
                       std::uint64_t seed) {
  ModelParams m;
  m.feature_dim = feature_dim;
  m.num_categories = c;
  m.weights.resize(static_cast<size_t>(feature_dim) * c);
  std::mt19937_64 rng(seed ^ 0xa0761d6478bd642fULL);
  std::normal_distribution<double> normal(0.0, 0.01);
  for (double& w : m.weights) w = normal(rng);
  m.bias.assign(c, -std::log((1.0 - prior_prob) / prior_prob));
  return m;
}

std::vector<double> predict(const ModelParams& model,
                            const std::vector<double>& features, int n) {
  const int d = model.feature_dim;
  const int c = model.num_categories;
  if (features.size() != static_cast<size_t>(n) * d)
    throw std::invalid_argument("predict: feature shape mismatch");
  std::vector<double> probs(static_cast<size_t>(n) * c);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      double z = model.bias[j];
      for (int k = 0; k < d; ++k)
        z += features[static_cast<size_t>(i) * d + k] *
             model.weights[static_cast<size_t>(k) * c + j];
      probs[static_cast<size_t>(i) * c + j] = sigmoid(z);
    }
  }
  return probs;
}

namespace {

std::vector<int> epoch_indices(const SyntheticDataset& data,
                               const TrainConfig& cfg, std::mt19937_64& rng) {
  if (cfg.sampler == SamplerKind::Rfs)
    return rfs_epoch(data, cfg.rfs_threshold, rng);
  std::vector<int> indices(data.num_samples);
  std::iota(indices.begin(), indices.end(), 0);
  std::shuffle(indices.begin(), indices.end(), rng);
  return indices;
}

}  // namespace

TrainResult train(const SyntheticDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const int d = data.spec.feature_dim;
  const int c = data.spec.num_categories;
  const int n = data.num_samples;
  if (n < 1) throw std::invalid_argument("train: empty dataset");

  TrainResult res;
  res.model = init_model(d, c, cfg.prior_prob, cfg.seed);
  res.state = init_state(c, cfg.loss, 1e-12, cfg.state_ema_decay);

  std::vector<double> vel_w(res.model.weights.size(), 0.0);
  std::vector<double> vel_b(res.model.bias.size(), 0.0);
  std::vector<double> grad_w(res.model.weights.size());
  std::vector<double> grad_b(res.model.bias.size());
  std::vector<double> pos_mag, neg_mag;

  std::mt19937_64 sampler_rng(cfg.seed);
  int iter = 0;
  bool done = false;
  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    const std::vector<int> order = epoch_indices(data, cfg, sampler_rng);
    for (size_t start = 0; start < order.size() && !done;
         start += cfg.batch_size) {
      const int bs =
          static_cast<int>(std::min<size_t>(cfg.batch_size, order.size() - start));

      // Assemble the batch.
      std::vector<double> logits(static_cast<size_t>(bs) * c);
      std::vector<BinaryTarget> targets(static_cast<size_t>(bs) * c);
      for (int i = 0; i < bs; ++i) {
        const int row = order[start + i];
        for (int j = 0; j < c; ++j) {
          double z = res.model.bias[j];
          for (int k = 0; k < d; ++k)
            z += data.features[static_cast<size_t>(row) * d + k] *
                 res.model.weights[static_cast<size_t>(k) * c + j];
          const size_t kk = static_cast<size_t>(i) * c + j;
          logits[kk] = z;
          targets[kk].y = data.labels[row] == j ? 1 : 0;
          targets[kk].quality = targets[kk].y == 1 ? 1.0 : 0.0;
        }
      }

      const BatchLossResult bl =
          batch_loss(logits, targets, bs, c, cfg.loss, res.state);
      if (!std::isfinite(bl.total))
        throw NumericalError("non-finite loss at iteration " +
                             std::to_string(iter));

      // Backprop through the linear layer.
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      for (int i = 0; i < bs; ++i) {
        const int row = order[start + i];
        for (int j = 0; j < c; ++j) {
          const double gl = bl.grads[static_cast<size_t>(i) * c + j];
          if (!std::isfinite(gl))
            throw NumericalError("non-finite gradient at iteration " +
                                 std::to_string(iter) + ", category " +
                                 std::to_string(j));
          grad_b[j] += gl;
          for (int k = 0; k < d; ++k)
            grad_w[static_cast<size_t>(k) * c + j] +=
                gl * data.features[static_cast<size_t>(row) * d + k];
        }
      }

      double norm2 = 0.0;
      for (double gv : grad_w) norm2 += gv * gv;
      for (double gv : grad_b) norm2 += gv * gv;
      const double grad_norm = std::sqrt(norm2);
      if (cfg.grad_clip_norm > 0.0 && grad_norm > cfg.grad_clip_norm) {
        const double scale = cfg.grad_clip_norm / grad_norm;
        for (double& gv : grad_w) gv *= scale;
        for (double& gv : grad_b) gv *= scale;
      }

      const double lr_eff = iter < cfg.warmup_iters
                                ? cfg.lr * (iter + 1) / cfg.warmup_iters
                                : cfg.lr;

      // Momentum after clipping; weight decay as a decoupled additive term.
      for (size_t k = 0; k < grad_w.size(); ++k) {
        vel_w[k] = cfg.momentum * vel_w[k] + grad_w[k];
        res.model.weights[k] -=
            lr_eff * vel_w[k] + lr_eff * cfg.weight_decay * res.model.weights[k];
      }
      for (size_t k = 0; k < grad_b.size(); ++k) {
        vel_b[k] = cfg.momentum * vel_b[k] + grad_b[k];
        res.model.bias[k] -=
            lr_eff * vel_b[k] + lr_eff * cfg.weight_decay * res.model.bias[k];
      }

      gather_stats(bl.grads, targets, bs, c, pos_mag, neg_mag);
      res.state.update(pos_mag, neg_mag);

      const auto [gmin, gmax] =
          std::minmax_element(res.state.g.begin(), res.state.g.end());
      res.log.rows.push_back(
          {iter, bl.total, lr_eff, grad_norm, *gmin, *gmax});
      res.log.g_trajectory.push_back(res.state.g);
      res.log.gamma_trajectory.push_back(res.state.gamma);

      ++iter;
      if (cfg.max_iters > 0 && iter >= cfg.max_iters) done = true;
    }
  }
  return res;
}

namespace {

constexpr const char* kModelMagic = "EFLMODEL";

}  // namespace

void save_model(const ModelParams& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s v1 dim=%d C=%d\n", kModelMagic,
                model.feature_dim, model.num_categories);
  f << buf;
  for (double w : model.weights) {
    std::snprintf(buf, sizeof(buf), "%a\n", w);
    f << buf;
  }
  for (double b : model.bias) {
    std::snprintf(buf, sizeof(buf), "%a\n", b);
    f << buf;
  }
}

ModelParams load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open model checkpoint: " + path);
  std::string header;
  if (!std::getline(f, header))
    throw std::runtime_error("model checkpoint: empty file: " + path);
  char magic[16] = {0};
  int version = -1;
  ModelParams m;
  if (std::sscanf(header.c_str(), "%15s v%d dim=%d C=%d", magic, &version,
                  &m.feature_dim, &m.num_categories) != 4 ||
      std::string(magic) != kModelMagic || version != 1 || m.feature_dim < 1 ||
      m.num_categories < 1)
    throw std::runtime_error("model checkpoint: bad header: " + path);
  m.weights.resize(static_cast<size_t>(m.feature_dim) * m.num_categories);
  m.bias.resize(m.num_categories);
  std::string line;
  auto read_val = [&](double& v, size_t idx) {
    if (!std::getline(f, line) || std::sscanf(line.c_str(), "%la", &v) != 1)
      throw std::runtime_error("model checkpoint: truncated at value " +
                               std::to_string(idx));
  };
  for (size_t k = 0; k < m.weights.size(); ++k) read_val(m.weights[k], k);
  for (size_t k = 0; k < m.bias.size(); ++k)
    read_val(m.bias[k], m.weights.size() + k);
  return m;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string trainlog_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "iteration,loss,lr,grad_norm,g_min,g_max\n";
  for (const TrainLogRow& r : log.rows)
    out << r.iteration << ',' << fmt_double(r.loss) << ',' << fmt_double(r.lr)
        << ',' << fmt_double(r.grad_norm) << ',' << fmt_double(r.g_min) << ','
        << fmt_double(r.g_max) << "\n";
  return out.str();
}

std::string trajectory_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "iteration,category,g,gamma\n";
  for (size_t i = 0; i < log.rows.size(); ++i)
    for (size_t j = 0; j < log.g_trajectory[i].size(); ++j)
      out << log.rows[i].iteration << ',' << j << ','
          << fmt_double(log.g_trajectory[i][j]) << ','
          << fmt_double(log.gamma_trajectory[i][j]) << "\n";
  return out.str();
}

}  // namespace efl
