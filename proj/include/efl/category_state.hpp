#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "efl/loss.hpp"

namespace efl {

// Per-category accumulated gradient statistics and the derived focusing /
// weighting factors. g[j] is the clamped ratio of accumulated positive to
// negative gradient magnitude; gamma_v[j] = s * (1 - g[j]);
// gamma[j] = gamma_b + gamma_v[j]; weight[j] = gamma[j] / gamma_b.
struct CategoryState {
  double gamma_b = 2.0;
  double s = 8.0;
  double eps = 1e-12;       // division guard when neg_acc is zero
  double ema_decay = 0.0;   // 0 = cumulative sums; (0,1) = EMA of magnitudes

  std::vector<double> pos_acc;
  std::vector<double> neg_acc;
  std::vector<double> g;
  std::vector<double> gamma_v;
  std::vector<double> gamma;
  std::vector<double> weight;

  int num_categories() const { return static_cast<int>(pos_acc.size()); }

  // Accumulates one step of magnitudes and recomputes all derived fields.
  void update(const std::vector<double>& pos_mag,
              const std::vector<double>& neg_mag);

  // Recomputes g / gamma_v / gamma / weight from the accumulators.
  void refresh();
};

// Fresh state: accumulators zero, g = 1 so training starts as plain FL.
CategoryState init_state(int c, const LossHyperParams& hp, double eps = 1e-12,
                         double ema_decay = 0.0);

// Per-category sums of |grad| split by target sign over an n x c batch.
void gather_stats(const std::vector<double>& grads,
                  const std::vector<BinaryTarget>& targets, int n, int c,
                  std::vector<double>& pos_mag, std::vector<double>& neg_mag);

// Versioned text checkpoint. Accumulators are written as hex floats so the
// round trip is bit exact.
std::string serialize(const CategoryState& state);
CategoryState deserialize_state(const std::string& text);  // throws on damage

void save_state(const CategoryState& state, const std::string& path);
CategoryState load_state(const std::string& path);

}  // namespace efl
