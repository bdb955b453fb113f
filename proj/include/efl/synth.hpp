#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace efl {

// Long-tailed synthetic classification corpus: Zipfian positive counts per
// category plus a flood of background negatives.
struct DatasetSpec {
  int num_categories = 50;
  double zipf_exponent = 1.2;
  int n_max = 500;            // positives for the most frequent category
  double bg_ratio = 20.0;     // background negatives per positive
  int feature_dim = 16;
  double class_separation = 3.0;
  double noise_std = 1.0;
  std::uint64_t seed = 1;

  // Category grouping thresholds on positive-sample counts.
  int rare_max = 10;
  int common_max = 100;

  void validate() const;
};

enum class Group { Rare, Common, Frequent };
std::string group_name(Group g);

struct SyntheticDataset {
  DatasetSpec spec;
  int num_samples = 0;
  std::vector<double> features;  // num_samples x feature_dim, row-major
  std::vector<int> labels;       // -1 = background, else 0..C-1
  std::vector<int> counts;       // positives per category
  std::vector<Group> groups;     // per category

  int feature_dim() const { return spec.feature_dim; }
};

// counts[j] = max(1, round(n_max * (j+1)^-exponent)), non-increasing.
std::vector<int> zipf_counts(int c, double zipf_exponent, int n_max);

Group group_of(int count, const DatasetSpec& spec);

// Deterministic generation: per-class Gaussian clusters at separated means
// plus a background cluster at the origin.
SyntheticDataset make_dataset(const DatasetSpec& spec);

// Same feature model with explicit per-category positive counts (used for
// held-out evaluation splits).
SyntheticDataset make_dataset_with_counts(const DatasetSpec& spec,
                                          const std::vector<int>& counts,
                                          std::uint64_t seed);

// Held-out split: derived seed, min(count, cap) positives per category.
SyntheticDataset make_eval_split(const DatasetSpec& spec, int pos_cap = 30);

// Repeat factor r_c = max(1, sqrt(t / f_c)) with f_c = counts[c] / N.
std::vector<double> repeat_factors(const std::vector<int>& counts,
                                   double total_samples, double t);

// One epoch of sample indices under repeat factor sampling: every sample
// appears floor(r) times plus one more with probability frac(r), shuffled.
std::vector<int> rfs_epoch(const SyntheticDataset& data, double t,
                           std::mt19937_64& rng);

// Per-category log10(pos / neg) with neg = N - counts[j].
std::vector<double> imbalance_stats(const SyntheticDataset& data);

// Text container (header echoing the spec + one row per sample) and a plain
// CSV export for inspection.
void save_dataset(const SyntheticDataset& data, const std::string& path);
SyntheticDataset load_dataset(const std::string& path);
std::string dataset_csv(const SyntheticDataset& data);
std::string stats_csv(const SyntheticDataset& data);

}  // namespace efl
