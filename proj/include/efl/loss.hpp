#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace efl {

enum class Variant { FL, EFL, EQLV2_FOCAL, EQFL };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

// Hyper-parameters shared by the whole loss family.
//   alpha_t  — positive-class balance weight; negatives get 1 - alpha_t
//   gamma_b  — base focusing parameter
//   s        — scale factor bounding the per-category gamma_v^j
// use_alpha = false drops the alpha weighting entirely (the convention the
// loss-curve and derivative figures use).
struct LossHyperParams {
  double alpha_t = 0.25;
  double gamma_b = 2.0;
  double s = 8.0;
  Variant variant = Variant::EFL;
  bool use_alpha = true;

  void validate() const;  // throws std::invalid_argument
};

// Ground truth for one category's binary classifier. quality is only
// meaningful for positives under EQFL (an IoU-like soft target).
struct BinaryTarget {
  int y = 0;            // 0 or 1
  double quality = 0.0; // in [0,1]; 0 whenever y = 0
};

inline double alpha_eff(const LossHyperParams& hp, int y) {
  if (!hp.use_alpha) return 1.0;
  return y == 1 ? hp.alpha_t : 1.0 - hp.alpha_t;
}

// Scalar kernels. x is the raw logit; internally everything works on the
// signed logit x_t = (2y - 1) x, with p_t = sigmoid(x_t).

double focal_loss(double x, const BinaryTarget& t, const LossHyperParams& hp,
                  double gamma);
double focal_grad(double x, const BinaryTarget& t, const LossHyperParams& hp,
                  double gamma);

// Single-category EFL term: alpha * (gamma^j / gamma_b) * (1-p_t)^gamma^j *
// (-log p_t) with gamma^j = gamma_b + gamma_v_j. gamma_v_j = 0 reproduces
// focal_loss(x, t, hp, gamma_b) bit-for-bit.
double efl_loss(double x, const BinaryTarget& t, const LossHyperParams& hp,
           double gamma_v_j);
double efl_grad(double x, const BinaryTarget& t, const LossHyperParams& hp,
                double gamma_v_j);

// Focal loss scaled by a gradient-guided weight w_t.
double eqlv2_focal(double x, const BinaryTarget& t, const LossHyperParams& hp,
                   double gamma, double w_t);
double eqlv2_focal_grad(double x, const BinaryTarget& t,
                        const LossHyperParams& hp, double gamma, double w_t);

// Equalized quality focal loss on a probability p in (0,1). The positive
// target is the quality score y' (0 for negatives).
double eqfl(double p, const BinaryTarget& t, const LossHyperParams& hp,
            double gamma_v_j);
double eqfl_from_logit(double x, const BinaryTarget& t,
                       const LossHyperParams& hp, double gamma_v_j);
double eqfl_grad(double x, const BinaryTarget& t, const LossHyperParams& hp,
                 double gamma_v_j);

struct CategoryState;  // category_state.hpp

struct BatchLossResult {
  double total = 0.0;
  std::vector<double> grads;  // n x c, row-major, d(total)/d(logit)
  int num_positives = 0;
};

// Sum of the per-element kernel selected by hp.variant over an n x c batch,
// normalized by max(1, number of positive targets). grads carry the same
// normalization. state supplies gamma_v^j (EFL/EQFL) or w^j (EQLv2&Focal).
BatchLossResult batch_loss(const std::vector<double>& logits,
                           const std::vector<BinaryTarget>& targets, int n,
                           int c, const LossHyperParams& hp,
                           const CategoryState& state);

}  // namespace efl
