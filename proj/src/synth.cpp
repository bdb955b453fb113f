#include "efl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace efl {

void DatasetSpec::validate() const {
  if (num_categories < 1) throw std::invalid_argument("num_categories < 1");
  if (!(zipf_exponent >= 0.0)) throw std::invalid_argument("zipf_exponent < 0");
  if (n_max < 1) throw std::invalid_argument("n_max < 1");
  if (!(bg_ratio >= 0.0)) throw std::invalid_argument("bg_ratio < 0");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim < 1");
  if (!(class_separation > 0.0))
    throw std::invalid_argument("class_separation <= 0");
  if (!(noise_std > 0.0)) throw std::invalid_argument("noise_std <= 0");
  if (rare_max < 1 || common_max <= rare_max)
    throw std::invalid_argument("bad group thresholds");
}

std::string group_name(Group g) {
  switch (g) {
    case Group::Rare: return "rare";
    case Group::Common: return "common";
    case Group::Frequent: return "frequent";
  }
  return "?";
}

std::vector<int> zipf_counts(int c, double zipf_exponent, int n_max) {
  if (c < 1 || n_max < 1 || !(zipf_exponent >= 0.0))
    throw std::invalid_argument("zipf_counts: invalid parameters");
  std::vector<int> counts(c);
  for (int j = 0; j < c; ++j) {
    const double v = n_max * std::pow(static_cast<double>(j + 1), -zipf_exponent);
    counts[j] = std::max(1, static_cast<int>(std::llround(v)));
  }
  return counts;
}

Group group_of(int count, const DatasetSpec& spec) {
  if (count <= spec.rare_max) return Group::Rare;
  if (count <= spec.common_max) return Group::Common;
  return Group::Frequent;
}

namespace {

// Class means depend only on the spec seed so that train and eval splits of
// the same spec share geometry.
std::vector<double> class_means(const DatasetSpec& spec) {
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int c = spec.num_categories;
  const int d = spec.feature_dim;
  std::vector<double> means(static_cast<size_t>(c) * d);
  for (int j = 0; j < c; ++j) {
    double norm2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double v = normal(rng);
      means[static_cast<size_t>(j) * d + k] = v;
      norm2 += v * v;
    }
    const double scale = spec.class_separation / std::sqrt(std::max(norm2, 1e-30));
    for (int k = 0; k < d; ++k) means[static_cast<size_t>(j) * d + k] *= scale;
  }
  return means;
}

}  // namespace

SyntheticDataset make_dataset_with_counts(const DatasetSpec& spec,
                                          const std::vector<int>& counts,
                                          std::uint64_t seed) {
  spec.validate();
  if (counts.size() != static_cast<size_t>(spec.num_categories))
    throw std::invalid_argument("make_dataset: counts size mismatch");
  const int d = spec.feature_dim;
  const long total_pos = std::accumulate(counts.begin(), counts.end(), 0L);
  const long n_bg = std::lround(spec.bg_ratio * static_cast<double>(total_pos));
  const long n = total_pos + n_bg;

  SyntheticDataset data;
  data.spec = spec;
  data.counts = counts;
  data.num_samples = static_cast<int>(n);
  data.features.resize(static_cast<size_t>(n) * d);
  data.labels.resize(n);
  data.groups.resize(spec.num_categories);
  for (int j = 0; j < spec.num_categories; ++j)
    data.groups[j] = group_of(counts[j], spec);

  const std::vector<double> means = class_means(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  long row = 0;
  for (int j = 0; j < spec.num_categories; ++j) {
    for (int i = 0; i < counts[j]; ++i, ++row) {
      data.labels[row] = j;
      for (int k = 0; k < d; ++k)
        data.features[static_cast<size_t>(row) * d + k] =
            means[static_cast<size_t>(j) * d + k] + spec.noise_std * normal(rng);
    }
  }
  for (long i = 0; i < n_bg; ++i, ++row) {
    data.labels[row] = -1;
    for (int k = 0; k < d; ++k)
      data.features[static_cast<size_t>(row) * d + k] =
          spec.noise_std * normal(rng);
  }

  // Fixed deterministic shuffle of the assembled rows.
  std::vector<long> perm(n);
  std::iota(perm.begin(), perm.end(), 0L);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> feats(data.features.size());
  std::vector<int> labels(n);
  for (long i = 0; i < n; ++i) {
    labels[i] = data.labels[perm[i]];
    std::copy_n(data.features.begin() + perm[i] * d, d,
                feats.begin() + static_cast<size_t>(i) * d);
  }
  data.features = std::move(feats);
  data.labels = std::move(labels);
  return data;
}

SyntheticDataset make_dataset(const DatasetSpec& spec) {
  spec.validate();
  return make_dataset_with_counts(
      spec, zipf_counts(spec.num_categories, spec.zipf_exponent, spec.n_max),
      spec.seed);
}

SyntheticDataset make_eval_split(const DatasetSpec& spec, int pos_cap) {
  spec.validate();
  std::vector<int> counts =
      zipf_counts(spec.num_categories, spec.zipf_exponent, spec.n_max);
  std::vector<int> eval_counts(counts.size());
  for (size_t j = 0; j < counts.size(); ++j)
    eval_counts[j] = std::min(counts[j], pos_cap);
  SyntheticDataset data = make_dataset_with_counts(
      spec, eval_counts, spec.seed ^ 0xc2b2ae3d27d4eb4fULL);
  // Grouping stays tied to the training-split counts.
  for (size_t j = 0; j < counts.size(); ++j)
    data.groups[j] = group_of(counts[j], spec);
  return data;
}

std::vector<double> repeat_factors(const std::vector<int>& counts,
                                   double total_samples, double t) {
  if (!(t > 0.0 && t <= 1.0))
    throw std::invalid_argument("repeat_factors: t must be in (0,1]");
  if (!(total_samples > 0.0))
    throw std::invalid_argument("repeat_factors: empty dataset");
  std::vector<double> r(counts.size());
  for (size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] < 1)
      throw std::invalid_argument("repeat_factors: counts must be >= 1");
    const double f = counts[j] / total_samples;
    r[j] = std::max(1.0, std::sqrt(t / f));
  }
  return r;
}

std::vector<int> rfs_epoch(const SyntheticDataset& data, double t,
                           std::mt19937_64& rng) {
  const std::vector<double> r =
      repeat_factors(data.counts, static_cast<double>(data.num_samples), t);
  std::vector<int> indices;
  indices.reserve(data.num_samples);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < data.num_samples; ++i) {
    const int lbl = data.labels[i];
    const double ri = lbl < 0 ? 1.0 : r[lbl];
    const double fl = std::floor(ri);
    int reps = static_cast<int>(fl);
    if (ri - fl > 0.0 && unit(rng) < ri - fl) reps++;
    for (int k = 0; k < reps; ++k) indices.push_back(i);
  }
  std::shuffle(indices.begin(), indices.end(), rng);
  return indices;
}

std::vector<double> imbalance_stats(const SyntheticDataset& data) {
  if (data.num_samples == 0)
    throw std::invalid_argument("imbalance_stats: empty dataset");
  std::vector<double> out(data.counts.size());
  for (size_t j = 0; j < data.counts.size(); ++j) {
    if (data.counts[j] < 1)
      throw std::invalid_argument("imbalance_stats: category without positives");
    const double neg = static_cast<double>(data.num_samples - data.counts[j]);
    out[j] = std::log10(data.counts[j] / neg);
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_dataset(const SyntheticDataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  const DatasetSpec& s = data.spec;
  f << "EFLDATA v1 C=" << s.num_categories << " zipf=" << fmt_double(s.zipf_exponent)
    << " n_max=" << s.n_max << " bg_ratio=" << fmt_double(s.bg_ratio)
    << " dim=" << s.feature_dim << " sep=" << fmt_double(s.class_separation)
    << " noise=" << fmt_double(s.noise_std) << " seed=" << s.seed
    << " rare_max=" << s.rare_max << " common_max=" << s.common_max
    << " n=" << data.num_samples << "\n";
  f << "counts";
  for (int c : data.counts) f << ' ' << c;
  f << "\n";
  for (int i = 0; i < data.num_samples; ++i) {
    f << data.labels[i];
    for (int k = 0; k < s.feature_dim; ++k)
      f << ' '
        << fmt_double(data.features[static_cast<size_t>(i) * s.feature_dim + k]);
    f << "\n";
  }
}

SyntheticDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open dataset: " + path);
  SyntheticDataset data;
  DatasetSpec& s = data.spec;
  std::string header;
  if (!std::getline(f, header))
    throw std::runtime_error("dataset: empty file: " + path);
  char magic[16] = {0};
  int version = -1;
  if (std::sscanf(header.c_str(),
                  "%15s v%d C=%d zipf=%lg n_max=%d bg_ratio=%lg dim=%d sep=%lg "
                  "noise=%lg seed=%llu rare_max=%d common_max=%d n=%d",
                  magic, &version, &s.num_categories, &s.zipf_exponent,
                  &s.n_max, &s.bg_ratio, &s.feature_dim, &s.class_separation,
                  &s.noise_std,
                  reinterpret_cast<unsigned long long*>(&s.seed), &s.rare_max,
                  &s.common_max, &data.num_samples) != 13 ||
      std::string(magic) != "EFLDATA" || version != 1)
    throw std::runtime_error("dataset: bad header (line 1): " + path);
  std::string tag;
  f >> tag;
  if (tag != "counts") throw std::runtime_error("dataset: missing counts line");
  data.counts.resize(s.num_categories);
  for (int& c : data.counts)
    if (!(f >> c)) throw std::runtime_error("dataset: truncated counts line");
  data.groups.resize(s.num_categories);
  for (int j = 0; j < s.num_categories; ++j)
    data.groups[j] = group_of(data.counts[j], s);
  data.labels.resize(data.num_samples);
  data.features.resize(static_cast<size_t>(data.num_samples) * s.feature_dim);
  for (int i = 0; i < data.num_samples; ++i) {
    if (!(f >> data.labels[i]))
      throw std::runtime_error("dataset: truncated at row " + std::to_string(i));
    for (int k = 0; k < s.feature_dim; ++k)
      if (!(f >> data.features[static_cast<size_t>(i) * s.feature_dim + k]))
        throw std::runtime_error("dataset: truncated at row " +
                                 std::to_string(i));
  }
  return data;
}

std::string dataset_csv(const SyntheticDataset& data) {
  std::ostringstream out;
  out << "label";
  for (int k = 0; k < data.spec.feature_dim; ++k) out << ",f" << k;
  out << "\n";
  for (int i = 0; i < data.num_samples; ++i) {
    out << data.labels[i];
    for (int k = 0; k < data.spec.feature_dim; ++k)
      out << ','
          << fmt_double(
                 data.features[static_cast<size_t>(i) * data.spec.feature_dim + k]);
    out << "\n";
  }
  return out.str();
}

std::string stats_csv(const SyntheticDataset& data) {
  const std::vector<double> ratios = imbalance_stats(data);
  std::ostringstream out;
  out << "category,count,group,log_ratio\n";
  for (size_t j = 0; j < data.counts.size(); ++j)
    out << j << ',' << data.counts[j] << ',' << group_name(data.groups[j])
        << ',' << fmt_double(ratios[j]) << "\n";
  return out.str();
}

}  // namespace efl
