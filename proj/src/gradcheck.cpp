#include "efl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace efl {

void CheckSpec::validate() const {
  if (!(h > 0.0)) throw std::invalid_argument("h must be > 0");
  if (!(rtol > 0.0) || !(atol > 0.0))
    throw std::invalid_argument("tolerances must be > 0");
  hp.validate();
}

double central_diff(const std::function<double(double)>& f, double x,
                    double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

namespace {

struct GridPoint {
  double x, gamma_v, w_t, quality;
  int y;
};

void check_point(const CheckSpec& spec, const GridPoint& pt, double analytical,
                 const std::function<double(double)>& forward,
                 CheckReport& report) {
  const double numerical = central_diff(forward, pt.x, spec.h);
  const double abs_err = std::fabs(analytical - numerical);
  report.points++;
  if (!std::isfinite(analytical) || !std::isfinite(numerical)) {
    report.failures.push_back({pt.x, pt.gamma_v, pt.y, pt.w_t, pt.quality,
                               analytical, numerical,
                               std::numeric_limits<double>::infinity(),
                               abs_err});
    return;
  }
  report.max_abs_err = std::max(report.max_abs_err, abs_err);
  // Near-plateau points are judged by absolute error only.
  if (std::fabs(analytical) < 1e-8 && std::fabs(numerical) < 1e-8) {
    if (abs_err > spec.atol)
      report.failures.push_back({pt.x, pt.gamma_v, pt.y, pt.w_t, pt.quality,
                                 analytical, numerical, 0.0, abs_err});
    return;
  }
  const double rel_err =
      abs_err / std::max(std::fabs(analytical), std::fabs(numerical));
  report.max_rel_err = std::max(report.max_rel_err, rel_err);
  if (rel_err > spec.rtol)
    report.failures.push_back({pt.x, pt.gamma_v, pt.y, pt.w_t, pt.quality,
                               analytical, numerical, rel_err, abs_err});
}

}  // namespace

CheckReport run_checks(const CheckSpec& spec) {
  spec.validate();
  CheckReport report;
  const LossHyperParams& hp = spec.hp;

  for (int y : spec.y_grid) {
    for (double x : spec.x_grid) {
      switch (spec.variant) {
        case Variant::FL: {
          for (double gv : spec.gamma_v_grid) {
            const double gamma = hp.gamma_b + gv;
            const BinaryTarget t{y, 0.0};
            const GridPoint pt{x, gv, 1.0, 0.0, y};
            check_point(
                spec, pt, focal_grad(x, t, hp, gamma),
                [&](double xx) { return focal_loss(xx, t, hp, gamma); },
                report);
          }
          break;
        }
        case Variant::EFL: {
          for (double gv : spec.gamma_v_grid) {
            const BinaryTarget t{y, 0.0};
            const GridPoint pt{x, gv, 1.0, 0.0, y};
            check_point(
                spec, pt, efl_grad(x, t, hp, gv),
                [&](double xx) { return efl_loss(xx, t, hp, gv); }, report);
          }
          break;
        }
        case Variant::EQLV2_FOCAL: {
          for (double wt : spec.w_t_grid) {
            const BinaryTarget t{y, 0.0};
            const GridPoint pt{x, 0.0, wt, 0.0, y};
            check_point(
                spec, pt, eqlv2_focal_grad(x, t, hp, hp.gamma_b, wt),
                [&](double xx) {
                  return eqlv2_focal(xx, t, hp, hp.gamma_b, wt);
                },
                report);
          }
          break;
        }
        case Variant::EQFL: {
          for (double gv : spec.gamma_v_grid) {
            for (double q : spec.quality_grid) {
              const BinaryTarget t{y, y == 1 ? q : 0.0};
              const GridPoint pt{x, gv, 1.0, t.quality, y};
              check_point(
                  spec, pt, eqfl_grad(x, t, hp, gv),
                  [&](double xx) { return eqfl_from_logit(xx, t, hp, gv); },
                  report);
            }
          }
          break;
        }
      }
    }
  }
  return report;
}

std::string report_csv(const CheckReport& report) {
  std::ostringstream out;
  out << "x,gamma_v,y,w_t,quality,analytical,numerical,rel_err,abs_err\n";
  char buf[256];
  for (const CheckFailure& f : report.failures) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", f.x,
                  f.gamma_v, f.y, f.w_t, f.quality, f.analytical, f.numerical,
                  f.rel_err, f.abs_err);
    out << buf;
  }
  return out.str();
}

std::string report_summary(const CheckSpec& spec, const CheckReport& report) {
  std::ostringstream out;
  out << "grad-check " << variant_name(spec.variant) << ": " << report.points
      << " points, max_rel_err=" << report.max_rel_err
      << " max_abs_err=" << report.max_abs_err << " -> "
      << (report.passed() ? "PASS" : "FAIL") << "\n";
  for (const CheckFailure& f : report.failures)
    out << "  FAIL at x=" << f.x << " gamma_v=" << f.gamma_v << " y=" << f.y
        << " w_t=" << f.w_t << " quality=" << f.quality
        << " analytical=" << f.analytical << " numerical=" << f.numerical
        << "\n";
  return out.str();
}

}  // namespace efl
