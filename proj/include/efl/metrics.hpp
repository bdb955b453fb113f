#pragma once

#include <string>
#include <vector>

#include "efl/loss.hpp"
#include "efl/synth.hpp"
#include "efl/trainer.hpp"

namespace efl {

struct CategoryMetrics {
  int category = 0;
  Group group = Group::Frequent;
  int num_positives = 0;
  double ap = 0.0;       // one-vs-rest rank AP; NaN when no positives
  bool ap_valid = true;
  double f1 = 0.0;       // at threshold 0.5
  double mean_pos = 0.0;
  double mean_neg = 0.0;
  double margin = 0.0;   // mean_pos - mean_neg
};

struct GroupMetrics {
  Group group = Group::Frequent;
  int num_categories = 0;  // categories with a valid AP
  double ap = 0.0;
  double margin = 0.0;
};

struct MetricsReport {
  std::vector<CategoryMetrics> per_category;
  std::vector<GroupMetrics> groups;  // rare, common, frequent (present only)
  double macro_ap = 0.0;
};

// Rank AP over one score column: mean over positives of precision at that
// positive's rank, scores sorted descending with ties broken by sample index.
double ap_cls(const std::vector<double>& scores, const std::vector<int>& pos);

MetricsReport evaluate(const ModelParams& model, const SyntheticDataset& data);

// category, group, margin rows; same per-category pass as evaluate.
std::string margins_csv(const MetricsReport& report);

struct CurveRow {
  double x_t;
  double gamma_v;
  bool weighted;
  double loss;
};

// Loss-value table for the positive branch (y=1) over an x_t grid, with the
// alpha weighting dropped. weighted=false rows use the bare focal term,
// weighted=true rows include the (gamma_b+gamma_v)/gamma_b factor.
std::vector<CurveRow> loss_curves(const LossHyperParams& hp,
                                  const std::vector<double>& gamma_v_list,
                                  const std::vector<double>& x_t_grid,
                                  bool include_weighting);

std::string percat_csv(const MetricsReport& report);
std::string groups_csv(const MetricsReport& report);
std::string curves_csv(const std::vector<CurveRow>& rows);

}  // namespace efl
