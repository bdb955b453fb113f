#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "efl/category_state.hpp"
#include "efl/loss.hpp"
#include "efl/math.hpp"

using namespace efl;

namespace {

const LossHyperParams kBare{0.25, 2.0, 8.0, Variant::EFL, false};
const LossHyperParams kAlpha{0.25, 2.0, 8.0, Variant::EFL, true};

const std::vector<double> kXGrid = {-10, -5, -2, 0, 2, 5, 10};

// Test-local finite difference, independent of gradcheck.
template <typename F>
double fd(F f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("focal_loss frozen scalar values") {
  const BinaryTarget pos{1, 0.0};
  const BinaryTarget neg{0, 0.0};
  // x=0, y=1, gamma=2: 0.25 * ln 2
  CHECK(focal_loss(0.0, pos, kBare, 2.0) ==
        doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
  // x -> +inf on a positive: fully suppressed
  CHECK(focal_loss(60.0, pos, kBare, 2.0) == doctest::Approx(0.0).epsilon(1e-12));
  // x=0 is symmetric in y
  CHECK(focal_loss(0.0, neg, kBare, 2.0) == focal_loss(0.0, pos, kBare, 2.0));
}

TEST_CASE("focal_loss applies alpha per class") {
  const BinaryTarget pos{1, 0.0};
  const BinaryTarget neg{0, 0.0};
  CHECK(focal_loss(0.0, pos, kAlpha, 2.0) ==
        doctest::Approx(0.25 * 0.25 * std::log(2.0)));
  CHECK(focal_loss(0.0, neg, kAlpha, 2.0) ==
        doctest::Approx(0.75 * 0.25 * std::log(2.0)));
}

TEST_CASE("focal_grad matches finite differences and frozen values") {
  const BinaryTarget pos{1, 0.0};
  const BinaryTarget neg{0, 0.0};
  // x=0, y=1, gamma=2: 0.25 * (ln 0.5 + 0.5 - 1)
  const double expect = 0.25 * (std::log(0.5) - 0.5);
  CHECK(focal_grad(0.0, pos, kBare, 2.0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(focal_grad(0.0, neg, kBare, 2.0) == doctest::Approx(-expect).epsilon(1e-12));
  CHECK(focal_grad(60.0, pos, kBare, 2.0) == doctest::Approx(0.0).epsilon(1e-12));
  for (double x : kXGrid) {
    for (int y : {0, 1}) {
      const BinaryTarget t{y, 0.0};
      const double num =
          fd([&](double xx) { return focal_loss(xx, t, kAlpha, 2.0); }, x);
      const double ana = focal_grad(x, t, kAlpha, 2.0);
      CHECK(ana == doctest::Approx(num).epsilon(1e-6).scale(1e-9));
    }
  }
}

TEST_CASE("efl with gamma_v=0 is focal loss, bit for bit") {
  for (double x : kXGrid) {
    for (int y : {0, 1}) {
      const BinaryTarget t{y, 0.0};
      CHECK(efl_loss(x, t, kAlpha, 0.0) == focal_loss(x, t, kAlpha, kAlpha.gamma_b));
      CHECK(efl_grad(x, t, kAlpha, 0.0) ==
            focal_grad(x, t, kAlpha, kAlpha.gamma_b));
    }
  }
}

TEST_CASE("efl frozen scalar values") {
  const BinaryTarget pos{1, 0.0};
  // x=0, y=1, gamma_b=2, gamma_v=8: 5 * 0.5^10 * ln 2
  CHECK(efl_loss(0.0, pos, kBare, 8.0) ==
        doctest::Approx(5.0 * std::pow(0.5, 10.0) * std::log(2.0))
            .epsilon(1e-12));
  // hard rare sample dominates the frequent one
  CHECK(efl_loss(-5.0, pos, kBare, 8.0) > efl_loss(-5.0, pos, kBare, 0.0));
}

TEST_CASE("efl_grad frozen value at gamma = 8.4") {
  const BinaryTarget pos{1, 0.0};
  const double g = 8.4;
  const double expect =
      (g / 2.0) * std::pow(0.5, g) * (g * 0.5 * std::log(0.5) + 0.5 - 1.0);
  CHECK(efl_grad(0.0, pos, kBare, 6.4) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(-0.042438).epsilon(1e-4));
}

TEST_CASE("efl_grad matches finite differences across the grid") {
  for (double x : kXGrid) {
    for (double gv : {0.0, 2.0, 6.4, 8.0}) {
      for (int y : {0, 1}) {
        const BinaryTarget t{y, 0.0};
        const double num =
            fd([&](double xx) { return efl_loss(xx, t, kBare, gv); }, x);
        CHECK(efl_grad(x, t, kBare, gv) ==
              doctest::Approx(num).epsilon(1e-6).scale(1e-9));
      }
    }
  }
}

TEST_CASE("eqlv2_focal is a scaled focal loss") {
  const BinaryTarget pos{1, 0.0};
  CHECK(eqlv2_focal(0.0, pos, kBare, 2.0, 1.0) == focal_loss(0.0, pos, kBare, 2.0));
  CHECK(eqlv2_focal_grad(0.0, pos, kBare, 2.0, 1.0) ==
        focal_grad(0.0, pos, kBare, 2.0));
  CHECK(eqlv2_focal(0.0, pos, kBare, 2.0, 2.0) ==
        doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(eqlv2_focal_grad(0.0, pos, kBare, 2.0, 2.0) ==
        doctest::Approx(0.5 * (std::log(0.5) - 0.5)).epsilon(1e-12));
  CHECK(eqlv2_focal(60.0, pos, kBare, 2.0, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("eqfl frozen scalar values") {
  const BinaryTarget neg{0, 0.0};
  const BinaryTarget pos_cal{1, 0.8};
  // perfectly calibrated positive: zero loss
  CHECK(eqfl(0.8, pos_cal, kBare, 0.0) == doctest::Approx(0.0));
  // negative at p=0.5, gamma=2: 0.25 * ln 2
  CHECK(eqfl(0.5, neg, kBare, 0.0) ==
        doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
  // positive with quality 0.8 at p=0.5: 0.09 * ln 2
  CHECK(eqfl(0.5, pos_cal, kBare, 0.0) ==
        doctest::Approx(0.09 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("eqfl_grad matches finite differences") {
  // zero at the loss minimum
  const BinaryTarget pos{1, 0.5};
  CHECK(eqfl_grad(0.0, pos, kBare, 0.0) == 0.0);  // sigmoid(0) = 0.5 = quality
  for (double x : kXGrid) {
    for (double gv : {0.0, 2.0, 6.4}) {
      for (int y : {0, 1}) {
        for (double q : {0.0, 0.3, 0.8, 1.0}) {
          const BinaryTarget t{y, y == 1 ? q : 0.0};
          const double num =
              fd([&](double xx) { return eqfl_from_logit(xx, t, kBare, gv); }, x);
          CHECK(eqfl_grad(x, t, kBare, gv) ==
                doctest::Approx(num).epsilon(1e-6).scale(1e-9));
        }
      }
    }
  }
}

TEST_CASE("parameter and domain errors") {
  const BinaryTarget pos{1, 0.0};
  CHECK_THROWS_AS(focal_loss(std::nan(""), pos, kBare, 2.0), std::domain_error);
  CHECK_THROWS_AS(focal_loss(0.0, pos, kBare, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(efl_loss(0.0, pos, kBare, 9.0), std::invalid_argument);   // > s
  CHECK_THROWS_AS(efl_loss(0.0, pos, kBare, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(eqlv2_focal(0.0, pos, kBare, 2.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(eqfl(1.5, pos, kBare, 0.0), std::domain_error);
  const BinaryTarget bad_quality{1, 1.5};
  CHECK_THROWS_AS(eqfl(0.5, bad_quality, kBare, 0.0), std::invalid_argument);
  LossHyperParams bad = kBare;
  bad.alpha_t = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("non-negativity over the grid") {
  for (double x : kXGrid)
    for (int y : {0, 1})
      for (double gv : {0.0, 2.0, 6.4, 8.0}) {
        const BinaryTarget t{y, 0.0};
        CHECK(efl_loss(x, t, kAlpha, gv) >= 0.0);
        CHECK(eqfl_from_logit(x, BinaryTarget{y, y ? 0.7 : 0.0}, kAlpha, gv) >=
              0.0);
      }
}

TEST_CASE("unweighted loss is strictly decreasing in gamma") {
  const BinaryTarget pos{1, 0.0};
  for (double xt : kXGrid)
    for (auto [lo, hi] : {std::pair{2.0, 4.0}, std::pair{4.0, 10.0}})
      CHECK(focal_loss(xt, pos, kBare, hi) < focal_loss(xt, pos, kBare, lo));
}

TEST_CASE("symmetry: swapping y and negating x with swapped alpha") {
  LossHyperParams swapped = kAlpha;
  swapped.alpha_t = 1.0 - kAlpha.alpha_t;
  for (double x : kXGrid) {
    CHECK(focal_loss(x, BinaryTarget{1, 0}, kAlpha, 2.0) ==
          focal_loss(-x, BinaryTarget{0, 0}, swapped, 2.0));
  }
}

TEST_CASE("batch_loss: easy all-negative batch vanishes") {
  const LossHyperParams hp{0.25, 2.0, 8.0, Variant::FL, true};
  CategoryState st = init_state(3, hp);
  std::vector<double> logits(2 * 3, -50.0);
  std::vector<BinaryTarget> targets(2 * 3);
  const BatchLossResult r = batch_loss(logits, targets, 2, 3, hp, st);
  CHECK(r.total == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r.num_positives == 0);
}

TEST_CASE("batch_loss: 1x1 reduces to the scalar kernel") {
  const LossHyperParams hp{0.25, 2.0, 8.0, Variant::EFL, true};
  CategoryState st = init_state(1, hp);
  st.update({1.0}, {4.0});  // g = 0.25, gamma_v = 6
  std::vector<double> logits = {0.7};
  std::vector<BinaryTarget> targets = {{1, 1.0}};
  const BatchLossResult r = batch_loss(logits, targets, 1, 1, hp, st);
  CHECK(r.total == efl_loss(0.7, targets[0], hp, st.gamma_v[0]));
  CHECK(r.grads[0] == efl_grad(0.7, targets[0], hp, st.gamma_v[0]));
}

TEST_CASE("batch_loss equals the brute-force scalar double loop") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  std::bernoulli_distribution flip(0.3);
  for (Variant v :
       {Variant::FL, Variant::EFL, Variant::EQLV2_FOCAL, Variant::EQFL}) {
    LossHyperParams hp{0.25, 2.0, 8.0, v, true};
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + static_cast<int>(rng() % 5);
      const int c = 1 + static_cast<int>(rng() % 4);
      CategoryState st = init_state(c, hp);
      std::vector<double> pm(c), nm(c);
      for (int j = 0; j < c; ++j) {
        pm[j] = std::fabs(unif(rng));
        nm[j] = std::fabs(unif(rng));
      }
      st.update(pm, nm);
      std::vector<double> logits(static_cast<size_t>(n) * c);
      std::vector<BinaryTarget> targets(logits.size());
      int npos = 0;
      for (size_t k = 0; k < logits.size(); ++k) {
        logits[k] = unif(rng);
        targets[k].y = flip(rng) ? 1 : 0;
        targets[k].quality = targets[k].y ? 0.5 + 0.5 * flip(rng) : 0.0;
        npos += targets[k].y;
      }
      const BatchLossResult r = batch_loss(logits, targets, n, c, hp, st);

      // Brute force: scalar kernels, plain double loop.
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
          const size_t k = static_cast<size_t>(i) * c + j;
          switch (v) {
            case Variant::FL:
              total += focal_loss(logits[k], targets[k], hp, hp.gamma_b);
              break;
            case Variant::EFL:
              total += efl_loss(logits[k], targets[k], hp, st.gamma_v[j]);
              break;
            case Variant::EQLV2_FOCAL:
              total += eqlv2_focal(logits[k], targets[k], hp, hp.gamma_b,
                                   st.weight[j]);
              break;
            case Variant::EQFL:
              total += eqfl_from_logit(logits[k], targets[k], hp, st.gamma_v[j]);
              break;
          }
        }
      }
      total /= std::max(1, npos);
      CHECK(r.total == doctest::Approx(total).epsilon(1e-12));
      CHECK(r.num_positives == npos);
    }
  }
}

TEST_CASE("batch_loss contract errors") {
  const LossHyperParams hp{0.25, 2.0, 8.0, Variant::FL, true};
  CategoryState st = init_state(2, hp);
  std::vector<double> logits(4, 0.0);
  std::vector<BinaryTarget> targets(4);
  CHECK_THROWS_AS(batch_loss(logits, targets, 2, 3, hp, st),
                  std::invalid_argument);
  CategoryState st3 = init_state(3, hp);
  CHECK_THROWS_AS(batch_loss(logits, targets, 2, 2, hp, st3),
                  std::invalid_argument);
}

TEST_CASE("p_t identity: p_t == sigmoid(x_t)") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-30.0, 30.0);
  for (int i = 0; i < 200; ++i) {
    const double x = unif(rng);
    const int y = i % 2;
    const double p = sigmoid(x);
    const double pt = y == 1 ? p : 1.0 - p;
    CHECK(pt == doctest::Approx(sigmoid((2 * y - 1) * x)).epsilon(1e-12));
  }
}
