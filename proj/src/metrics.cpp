#include "efl/metrics.hpp"

#include "efl/math.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace efl {

double ap_cls(const std::vector<double>& scores, const std::vector<int>& pos) {
  if (scores.size() != pos.size())
    throw std::invalid_argument("ap_cls: size mismatch");
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[a] > scores[b];  // ties keep ascending sample index
  });
  int num_pos = 0;
  double sum = 0.0;
  int seen_pos = 0;
  for (int rank = 0; rank < n; ++rank) {
    if (pos[order[rank]]) {
      ++seen_pos;
      sum += static_cast<double>(seen_pos) / (rank + 1);
    }
  }
  num_pos = seen_pos;
  if (num_pos == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / num_pos;
}

MetricsReport evaluate(const ModelParams& model, const SyntheticDataset& data) {
  const int c = data.spec.num_categories;
  const int n = data.num_samples;
  if (n < 1) throw std::invalid_argument("evaluate: empty dataset");
  const int d = model.feature_dim;
  // Rank on raw logits: sigmoid saturates to exactly 1.0 for large scores,
  // which would collapse well-separated samples into ties.
  std::vector<double> logits(static_cast<size_t>(n) * c);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      double z = model.bias[j];
      for (int k = 0; k < d; ++k)
        z += data.features[static_cast<size_t>(i) * d + k] *
             model.weights[static_cast<size_t>(k) * c + j];
      logits[static_cast<size_t>(i) * c + j] = z;
    }
  }

  MetricsReport report;
  report.per_category.resize(c);
  std::vector<double> col(n);
  std::vector<int> pos(n);
  for (int j = 0; j < c; ++j) {
    CategoryMetrics& m = report.per_category[j];
    m.category = j;
    m.group = data.groups[j];
    double pos_sum = 0.0, neg_sum = 0.0;
    int np = 0, tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < n; ++i) {
      const double z = logits[static_cast<size_t>(i) * c + j];
      const double sc = sigmoid(z);
      col[i] = z;
      pos[i] = data.labels[i] == j ? 1 : 0;
      if (pos[i]) {
        ++np;
        pos_sum += sc;
        if (sc >= 0.5) ++tp; else ++fn;
      } else {
        neg_sum += sc;
        if (sc >= 0.5) ++fp;
      }
    }
    m.num_positives = np;
    m.mean_pos = np > 0 ? pos_sum / np : 0.0;
    m.mean_neg = n > np ? neg_sum / (n - np) : 0.0;
    m.margin = m.mean_pos - m.mean_neg;
    m.f1 = (2 * tp + fp + fn) > 0 ? 2.0 * tp / (2 * tp + fp + fn) : 0.0;
    if (np == 0) {
      m.ap_valid = false;
      m.ap = std::numeric_limits<double>::quiet_NaN();
    } else {
      m.ap = ap_cls(col, pos);
    }
  }

  // Group means over categories with a valid AP; macro over the same set.
  double macro_sum = 0.0;
  int macro_n = 0;
  for (Group grp : {Group::Rare, Group::Common, Group::Frequent}) {
    GroupMetrics gm;
    gm.group = grp;
    double ap_sum = 0.0, margin_sum = 0.0;
    for (const CategoryMetrics& m : report.per_category) {
      if (m.group != grp || !m.ap_valid) continue;
      ++gm.num_categories;
      ap_sum += m.ap;
      margin_sum += m.margin;
    }
    if (gm.num_categories > 0) {
      gm.ap = ap_sum / gm.num_categories;
      gm.margin = margin_sum / gm.num_categories;
      report.groups.push_back(gm);
      macro_sum += ap_sum;
      macro_n += gm.num_categories;
    }
  }
  report.macro_ap = macro_n > 0 ? macro_sum / macro_n : 0.0;
  return report;
}

std::vector<CurveRow> loss_curves(const LossHyperParams& hp,
                                  const std::vector<double>& gamma_v_list,
                                  const std::vector<double>& x_t_grid,
                                  bool include_weighting) {
  hp.validate();
  LossHyperParams bare = hp;
  bare.use_alpha = false;
  std::vector<CurveRow> rows;
  rows.reserve(gamma_v_list.size() * x_t_grid.size());
  const BinaryTarget positive{1, 1.0};
  for (double gv : gamma_v_list) {
    if (!(gv >= 0.0 && gv <= hp.s))
      throw std::invalid_argument("loss_curves: gamma_v outside [0, s]");
    for (double xt : x_t_grid) {
      if (!std::isfinite(xt))
        throw std::invalid_argument("loss_curves: non-finite x_t");
      double loss;
      if (include_weighting) {
        loss = efl_loss(xt, positive, bare, gv);
      } else {
        loss = focal_loss(xt, positive, bare, hp.gamma_b + gv);
      }
      rows.push_back({xt, gv, include_weighting, loss});
    }
  }
  return rows;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string percat_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "category,group,ap_cls,f1,margin\n";
  for (const CategoryMetrics& m : report.per_category) {
    out << m.category << ',' << group_name(m.group) << ',';
    if (m.ap_valid)
      out << fmt_double(m.ap);
    else
      out << "absent";
    out << ',' << fmt_double(m.f1) << ',' << fmt_double(m.margin) << "\n";
  }
  return out.str();
}

std::string groups_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "group,num_categories,ap_cls,margin\n";
  for (const GroupMetrics& gm : report.groups)
    out << group_name(gm.group) << ',' << gm.num_categories << ','
        << fmt_double(gm.ap) << ',' << fmt_double(gm.margin) << "\n";
  out << "macro," << report.per_category.size() << ','
      << fmt_double(report.macro_ap) << ",\n";
  return out.str();
}

std::string margins_csv(const MetricsReport& report) {
  // Sorted by descending positive count, ties by category index.
  std::vector<const CategoryMetrics*> order;
  order.reserve(report.per_category.size());
  for (const CategoryMetrics& m : report.per_category) order.push_back(&m);
  std::stable_sort(order.begin(), order.end(),
                   [](const CategoryMetrics* a, const CategoryMetrics* b) {
                     return a->num_positives > b->num_positives;
                   });
  std::ostringstream out;
  out << "category,group,margin\n";
  for (const CategoryMetrics* m : order)
    out << m->category << ',' << group_name(m->group) << ','
        << fmt_double(m->margin) << "\n";
  return out.str();
}

std::string curves_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream out;
  out << "x_t,gamma_v,weighted,loss\n";
  for (const CurveRow& r : rows)
    out << fmt_double(r.x_t) << ',' << fmt_double(r.gamma_v) << ','
        << (r.weighted ? 1 : 0) << ',' << fmt_double(r.loss) << "\n";
  return out.str();
}

}  // namespace efl
