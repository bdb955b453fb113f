#pragma once

#include <functional>
#include <string>
#include <vector>

#include "efl/loss.hpp"

namespace efl {

// Finite-difference verification grid for one loss variant.
struct CheckSpec {
  Variant variant = Variant::EFL;
  std::vector<double> x_grid = {-10, -5, -2, 0, 2, 5, 10};
  std::vector<double> gamma_v_grid = {0, 2, 6.4, 8};
  std::vector<int> y_grid = {0, 1};
  std::vector<double> w_t_grid = {0.5, 1, 2};       // EQLV2_FOCAL only
  std::vector<double> quality_grid = {0, 0.3, 0.8, 1};  // EQFL only
  double h = 1e-4;
  double rtol = 1e-5;
  double atol = 1e-9;
  LossHyperParams hp{0.25, 2.0, 8.0, Variant::EFL, false};

  void validate() const;
};

struct CheckFailure {
  double x;
  double gamma_v;
  int y;
  double w_t;
  double quality;
  double analytical;
  double numerical;
  double rel_err;
  double abs_err;
};

struct CheckReport {
  int points = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::vector<CheckFailure> failures;
  bool passed() const { return failures.empty() && points > 0; }
};

double central_diff(const std::function<double(double)>& f, double x, double h);

// Compares every analytical gradient in loss_core against central
// differences of the matching forward over the full grid. The difference
// path never touches the analytical gradients.
CheckReport run_checks(const CheckSpec& spec);

std::string report_csv(const CheckReport& report);
std::string report_summary(const CheckSpec& spec, const CheckReport& report);

}  // namespace efl
