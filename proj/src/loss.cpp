#include "efl/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "efl/category_state.hpp"
#include "efl/math.hpp"

namespace efl {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::FL: return "FL";
    case Variant::EFL: return "EFL";
    case Variant::EQLV2_FOCAL: return "EQLV2_FOCAL";
    case Variant::EQFL: return "EQFL";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "FL") return Variant::FL;
  if (name == "EFL") return Variant::EFL;
  if (name == "EQLV2_FOCAL") return Variant::EQLV2_FOCAL;
  if (name == "EQFL") return Variant::EQFL;
  throw std::invalid_argument("unknown loss variant: " + name);
}

void LossHyperParams::validate() const {
  if (!(alpha_t > 0.0 && alpha_t < 1.0))
    throw std::invalid_argument("alpha_t must be in (0,1)");
  if (!(gamma_b > 0.0))
    throw std::invalid_argument("gamma_b must be > 0");
  if (!(s >= 0.0)) throw std::invalid_argument("s must be >= 0");
}

namespace {

void check_input(double x, int y) {
  if (!std::isfinite(x)) throw std::domain_error("logit must be finite");
  if (y != 0 && y != 1) throw std::invalid_argument("target y must be 0 or 1");
}

// Unweighted focal term (1-p_t)^gamma * (-log p_t) and its x-derivative.
// log p_t and (1-p_t)^gamma both come from log-sigmoid so nothing is ever
// a log of a rounded-to-zero probability.
double focal_term(double x_t, double gamma) {
  const double log_pt = log_sigmoid(x_t);
  const double mod = std::exp(gamma * log_sigmoid(-x_t));  // (1-p_t)^gamma
  return -mod * log_pt;
}

double focal_term_grad(double x_t, double gamma) {
  const double pt = sigmoid(x_t);
  const double log_pt = log_sigmoid(x_t);
  const double mod = std::exp(gamma * log_sigmoid(-x_t));
  return mod * (gamma * pt * log_pt + pt - 1.0);
}

}  // namespace

double focal_loss(double x, const BinaryTarget& t, const LossHyperParams& hp,
                  double gamma) {
  check_input(x, t.y);
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  const double x_t = (2 * t.y - 1) * x;
  return alpha_eff(hp, t.y) * focal_term(x_t, gamma);
}

double focal_grad(double x, const BinaryTarget& t, const LossHyperParams& hp,
                  double gamma) {
  check_input(x, t.y);
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  const double sign = 2 * t.y - 1;
  const double x_t = sign * x;
  return alpha_eff(hp, t.y) * sign * focal_term_grad(x_t, gamma);
}

namespace {

void check_gamma_v(const LossHyperParams& hp, double gamma_v_j) {
  if (!(gamma_v_j >= 0.0 && gamma_v_j <= hp.s))
    throw std::invalid_argument("gamma_v_j must be in [0, s]");
}

}  // namespace

double efl_loss(double x, const BinaryTarget& t, const LossHyperParams& hp,
           double gamma_v_j) {
  check_input(x, t.y);
  check_gamma_v(hp, gamma_v_j);
  const double gamma_j = hp.gamma_b + gamma_v_j;
  const double wf = gamma_j / hp.gamma_b;
  const double x_t = (2 * t.y - 1) * x;
  return alpha_eff(hp, t.y) * (wf * focal_term(x_t, gamma_j));
}

double efl_grad(double x, const BinaryTarget& t, const LossHyperParams& hp,
                double gamma_v_j) {
  check_input(x, t.y);
  check_gamma_v(hp, gamma_v_j);
  const double gamma_j = hp.gamma_b + gamma_v_j;
  const double wf = gamma_j / hp.gamma_b;
  const double sign = 2 * t.y - 1;
  const double x_t = sign * x;
  return alpha_eff(hp, t.y) * wf * (sign * focal_term_grad(x_t, gamma_j));
}

double eqlv2_focal(double x, const BinaryTarget& t, const LossHyperParams& hp,
                   double gamma, double w_t) {
  if (!(w_t > 0.0)) throw std::invalid_argument("w_t must be > 0");
  return w_t * focal_loss(x, t, hp, gamma);
}

double eqlv2_focal_grad(double x, const BinaryTarget& t,
                        const LossHyperParams& hp, double gamma, double w_t) {
  if (!(w_t > 0.0)) throw std::invalid_argument("w_t must be > 0");
  return w_t * focal_grad(x, t, hp, gamma);
}

namespace {

double quality_target(const BinaryTarget& t) {
  if (!(t.quality >= 0.0 && t.quality <= 1.0))
    throw std::invalid_argument("quality must be in [0,1]");
  return t.y == 1 ? t.quality : 0.0;
}

}  // namespace

double eqfl(double p, const BinaryTarget& t, const LossHyperParams& hp,
            double gamma_v_j) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("p must be in (0,1)");
  check_gamma_v(hp, gamma_v_j);
  const double yq = quality_target(t);
  const double f = hp.gamma_b + gamma_v_j;
  const double wf = f / hp.gamma_b;
  const double a = std::fabs(yq - p);
  const double mod = wf * std::pow(a, f);
  const double bce = -(yq * std::log(p) + (1.0 - yq) * std::log1p(-p));
  return alpha_eff(hp, t.y) * mod * bce;
}

double eqfl_from_logit(double x, const BinaryTarget& t,
                       const LossHyperParams& hp, double gamma_v_j) {
  check_input(x, t.y);
  check_gamma_v(hp, gamma_v_j);
  const double yq = quality_target(t);
  const double f = hp.gamma_b + gamma_v_j;
  const double wf = f / hp.gamma_b;
  const double p = sigmoid(x);
  const double a = std::fabs(yq - p);
  const double mod = wf * std::pow(a, f);
  const double bce = -(yq * log_sigmoid(x) + (1.0 - yq) * log_sigmoid(-x));
  return alpha_eff(hp, t.y) * mod * bce;
}

double eqfl_grad(double x, const BinaryTarget& t, const LossHyperParams& hp,
                 double gamma_v_j) {
  check_input(x, t.y);
  check_gamma_v(hp, gamma_v_j);
  const double yq = quality_target(t);
  const double f = hp.gamma_b + gamma_v_j;
  const double wf = f / hp.gamma_b;
  const double p = sigmoid(x);
  const double a = std::fabs(yq - p);
  if (a == 0.0) return 0.0;  // loss minimum
  const double sign = p > yq ? 1.0 : -1.0;
  const double bce = -(yq * log_sigmoid(x) + (1.0 - yq) * log_sigmoid(-x));
  // d/dx [a^f * bce] with dp/dx = p(1-p), d(bce)/dx = p - y',
  // da/dx = sign(p-y') p(1-p).
  const double da_part = f * std::pow(a, f - 1.0) * sign * p * (1.0 - p) * bce;
  const double db_part = std::pow(a, f) * (p - yq);
  return alpha_eff(hp, t.y) * wf * (da_part + db_part);
}

BatchLossResult batch_loss(const std::vector<double>& logits,
                           const std::vector<BinaryTarget>& targets, int n,
                           int c, const LossHyperParams& hp,
                           const CategoryState& state) {
  if (n < 0 || c < 0 ||
      logits.size() != static_cast<size_t>(n) * static_cast<size_t>(c) ||
      targets.size() != logits.size())
    throw std::invalid_argument("batch_loss: shape mismatch");
  if (state.num_categories() != c)
    throw std::invalid_argument(
        "batch_loss: state category count does not match batch");

  BatchLossResult out;
  out.grads.assign(logits.size(), 0.0);
  for (const auto& t : targets)
    if (t.y == 1) out.num_positives++;

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      const size_t k = static_cast<size_t>(i) * c + j;
      const double x = logits[k];
      const BinaryTarget& t = targets[k];
      double loss, grad;
      switch (hp.variant) {
        case Variant::FL:
          loss = efl_loss(x, t, hp, 0.0);
          grad = efl_grad(x, t, hp, 0.0);
          break;
        case Variant::EFL:
          loss = efl_loss(x, t, hp, state.gamma_v[j]);
          grad = efl_grad(x, t, hp, state.gamma_v[j]);
          break;
        case Variant::EQLV2_FOCAL:
          loss = eqlv2_focal(x, t, hp, hp.gamma_b, state.weight[j]);
          grad = eqlv2_focal_grad(x, t, hp, hp.gamma_b, state.weight[j]);
          break;
        case Variant::EQFL:
          loss = eqfl_from_logit(x, t, hp, state.gamma_v[j]);
          grad = eqfl_grad(x, t, hp, state.gamma_v[j]);
          break;
        default:
          throw std::invalid_argument("batch_loss: bad variant");
      }
      total += loss;
      out.grads[k] = grad;
    }
  }

  const double norm = static_cast<double>(std::max(1, out.num_positives));
  out.total = total / norm;
  for (double& gv : out.grads) gv /= norm;
  return out;
}

}  // namespace efl
