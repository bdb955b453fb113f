#include "efl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace efl {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v, int line) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line) + ": field '" +
                      key + "': not a number: '" + v + "'");
  }
}

long parse_int(const std::string& key, const std::string& v, int line) {
  try {
    size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line) + ": field '" +
                      key + "': not an integer: '" + v + "'");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  dataset.validate();
  train.validate();
  if (variants.empty()) throw ConfigError("config: variants list is empty");
  if (seeds.empty()) throw ConfigError("config: seeds list is empty");
  if (out_dir.empty()) throw ConfigError("config: out directory is empty");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const int ln = line_no;

    if (key == "dataset.categories")
      cfg.dataset.num_categories = static_cast<int>(parse_int(key, val, ln));
    else if (key == "dataset.zipf_exponent")
      cfg.dataset.zipf_exponent = parse_double(key, val, ln);
    else if (key == "dataset.n_max")
      cfg.dataset.n_max = static_cast<int>(parse_int(key, val, ln));
    else if (key == "dataset.bg_ratio")
      cfg.dataset.bg_ratio = parse_double(key, val, ln);
    else if (key == "dataset.feature_dim")
      cfg.dataset.feature_dim = static_cast<int>(parse_int(key, val, ln));
    else if (key == "dataset.class_separation")
      cfg.dataset.class_separation = parse_double(key, val, ln);
    else if (key == "dataset.noise_std")
      cfg.dataset.noise_std = parse_double(key, val, ln);
    else if (key == "dataset.seed")
      cfg.dataset.seed = static_cast<std::uint64_t>(parse_int(key, val, ln));
    else if (key == "dataset.rare_max")
      cfg.dataset.rare_max = static_cast<int>(parse_int(key, val, ln));
    else if (key == "dataset.common_max")
      cfg.dataset.common_max = static_cast<int>(parse_int(key, val, ln));
    else if (key == "loss.variant")
      cfg.train.loss.variant = parse_variant(val);
    else if (key == "loss.alpha_t")
      cfg.train.loss.alpha_t = parse_double(key, val, ln);
    else if (key == "loss.gamma_b")
      cfg.train.loss.gamma_b = parse_double(key, val, ln);
    else if (key == "loss.s")
      cfg.train.loss.s = parse_double(key, val, ln);
    else if (key == "train.epochs")
      cfg.train.epochs = static_cast<int>(parse_int(key, val, ln));
    else if (key == "train.batch_size")
      cfg.train.batch_size = static_cast<int>(parse_int(key, val, ln));
    else if (key == "train.lr")
      cfg.train.lr = parse_double(key, val, ln);
    else if (key == "train.momentum")
      cfg.train.momentum = parse_double(key, val, ln);
    else if (key == "train.weight_decay")
      cfg.train.weight_decay = parse_double(key, val, ln);
    else if (key == "train.warmup_iters")
      cfg.train.warmup_iters = static_cast<int>(parse_int(key, val, ln));
    else if (key == "train.grad_clip_norm")
      cfg.train.grad_clip_norm = parse_double(key, val, ln);
    else if (key == "train.sampler")
      cfg.train.sampler = parse_sampler(val);
    else if (key == "train.seed")
      cfg.train.seed = static_cast<std::uint64_t>(parse_int(key, val, ln));
    else if (key == "train.prior_prob")
      cfg.train.prior_prob = parse_double(key, val, ln);
    else if (key == "train.rfs_threshold")
      cfg.train.rfs_threshold = parse_double(key, val, ln);
    else if (key == "train.state_ema_decay")
      cfg.train.state_ema_decay = parse_double(key, val, ln);
    else if (key == "train.max_iters")
      cfg.train.max_iters = static_cast<int>(parse_int(key, val, ln));
    else if (key == "out")
      cfg.out_dir = val;
    else if (key == "variants") {
      cfg.variants.clear();
      for (const std::string& v : split_list(val))
        cfg.variants.push_back(parse_variant(v));
    } else if (key == "seeds") {
      cfg.seeds.clear();
      for (const std::string& v : split_list(val))
        cfg.seeds.push_back(static_cast<std::uint64_t>(parse_int(key, v, ln)));
    } else if (key == "curves.gamma_v") {
      cfg.curve_gamma_v.clear();
      for (const std::string& v : split_list(val))
        cfg.curve_gamma_v.push_back(parse_double(key, v, ln));
    } else if (key == "curves.x_t") {
      cfg.curve_x_t.clear();
      for (const std::string& v : split_list(val))
        cfg.curve_x_t.push_back(parse_double(key, v, ln));
    } else if (key == "eval.pos_cap")
      cfg.eval_pos_cap = static_cast<int>(parse_int(key, val, ln));
    else
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unknown field '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_echo(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "dataset.categories = " << cfg.dataset.num_categories << "\n"
      << "dataset.zipf_exponent = " << fmt_double(cfg.dataset.zipf_exponent) << "\n"
      << "dataset.n_max = " << cfg.dataset.n_max << "\n"
      << "dataset.bg_ratio = " << fmt_double(cfg.dataset.bg_ratio) << "\n"
      << "dataset.feature_dim = " << cfg.dataset.feature_dim << "\n"
      << "dataset.class_separation = " << fmt_double(cfg.dataset.class_separation) << "\n"
      << "dataset.noise_std = " << fmt_double(cfg.dataset.noise_std) << "\n"
      << "dataset.seed = " << cfg.dataset.seed << "\n"
      << "dataset.rare_max = " << cfg.dataset.rare_max << "\n"
      << "dataset.common_max = " << cfg.dataset.common_max << "\n"
      << "loss.variant = " << variant_name(cfg.train.loss.variant) << "\n"
      << "loss.alpha_t = " << fmt_double(cfg.train.loss.alpha_t) << "\n"
      << "loss.gamma_b = " << fmt_double(cfg.train.loss.gamma_b) << "\n"
      << "loss.s = " << fmt_double(cfg.train.loss.s) << "\n"
      << "train.epochs = " << cfg.train.epochs << "\n"
      << "train.batch_size = " << cfg.train.batch_size << "\n"
      << "train.lr = " << fmt_double(cfg.train.lr) << "\n"
      << "train.momentum = " << fmt_double(cfg.train.momentum) << "\n"
      << "train.weight_decay = " << fmt_double(cfg.train.weight_decay) << "\n"
      << "train.warmup_iters = " << cfg.train.warmup_iters << "\n"
      << "train.grad_clip_norm = " << fmt_double(cfg.train.grad_clip_norm) << "\n"
      << "train.sampler = " << sampler_name(cfg.train.sampler) << "\n"
      << "train.seed = " << cfg.train.seed << "\n"
      << "train.prior_prob = " << fmt_double(cfg.train.prior_prob) << "\n"
      << "train.rfs_threshold = " << fmt_double(cfg.train.rfs_threshold) << "\n"
      << "train.state_ema_decay = " << fmt_double(cfg.train.state_ema_decay) << "\n"
      << "train.max_iters = " << cfg.train.max_iters << "\n"
      << "out = " << cfg.out_dir << "\n"
      << "eval.pos_cap = " << cfg.eval_pos_cap << "\n";
  out << "variants = ";
  for (size_t i = 0; i < cfg.variants.size(); ++i)
    out << (i ? "," : "") << variant_name(cfg.variants[i]);
  out << "\nseeds = ";
  for (size_t i = 0; i < cfg.seeds.size(); ++i)
    out << (i ? "," : "") << cfg.seeds[i];
  out << "\ncurves.gamma_v = ";
  for (size_t i = 0; i < cfg.curve_gamma_v.size(); ++i)
    out << (i ? "," : "") << fmt_double(cfg.curve_gamma_v[i]);
  out << "\n";
  return out.str();
}

void atomic_write(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + tmp.string());
    f << content;
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_manifest(const ExperimentConfig& cfg, const std::string& dir,
                    const std::string& command) {
  const std::string echo = config_echo(cfg);
  std::ostringstream out;
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  out << "tool = " << kToolVersion << "\n"
      << "command = " << command << "\n"
      << "config_hash = " << fnv1a_hash(echo) << "\n"
      << "timestamp_unix = "
      << std::chrono::duration_cast<std::chrono::seconds>(now).count() << "\n"
      << echo;
  atomic_write((fs::path(dir) / "manifest.txt").string(), out.str());
}

namespace {

std::string run_dir(const ExperimentConfig& cfg, Variant v,
                    std::uint64_t seed) {
  return (fs::path(cfg.out_dir) /
          (variant_name(v) + "_seed" + std::to_string(seed)))
      .string();
}

std::string dataset_path(const ExperimentConfig& cfg) {
  return (fs::path(cfg.out_dir) / "dataset.txt").string();
}

}  // namespace

void cmd_gen(const ExperimentConfig& cfg) {
  cfg.validate();
  const SyntheticDataset data = make_dataset(cfg.dataset);
  fs::create_directories(cfg.out_dir);
  // save_dataset streams directly; write to temp then rename for atomicity.
  const std::string path = dataset_path(cfg);
  save_dataset(data, path + ".tmp");
  fs::rename(path + ".tmp", path);
  atomic_write((fs::path(cfg.out_dir) / "dataset.csv").string(),
               dataset_csv(data));
  atomic_write((fs::path(cfg.out_dir) / "stats.csv").string(),
               stats_csv(data));
  write_manifest(cfg, cfg.out_dir, "gen-data");
}

void cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string ds = dataset_path(cfg);
  if (!fs::exists(ds))
    throw std::runtime_error("missing artifact '" + ds +
                             "': run gen-data first");
  const SyntheticDataset data = load_dataset(ds);
  const TrainResult res = train(data, cfg.train);
  const std::string dir =
      run_dir(cfg, cfg.train.loss.variant, cfg.train.seed);
  fs::create_directories(dir);
  save_model(res.model, (fs::path(dir) / "model.txt.tmp").string());
  fs::rename(fs::path(dir) / "model.txt.tmp", fs::path(dir) / "model.txt");
  atomic_write((fs::path(dir) / "state.txt").string(), serialize(res.state));
  atomic_write((fs::path(dir) / "trainlog.csv").string(),
               trainlog_csv(res.log));
  atomic_write((fs::path(dir) / "trajectory.csv").string(),
               trajectory_csv(res.log));
  write_manifest(cfg, dir, "train");
}

void cmd_eval(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string dir =
      run_dir(cfg, cfg.train.loss.variant, cfg.train.seed);
  const std::string model_path = (fs::path(dir) / "model.txt").string();
  if (!fs::exists(model_path))
    throw std::runtime_error("missing artifact '" + model_path +
                             "': run train first");
  const ModelParams model = load_model(model_path);
  const SyntheticDataset eval_set =
      make_eval_split(cfg.dataset, cfg.eval_pos_cap);
  const MetricsReport report = evaluate(model, eval_set);
  atomic_write((fs::path(dir) / "percat.csv").string(), percat_csv(report));
  atomic_write((fs::path(dir) / "groups.csv").string(), groups_csv(report));
  atomic_write((fs::path(dir) / "margins.csv").string(), margins_csv(report));
  write_manifest(cfg, dir, "eval");
}

void cmd_curves(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<double> grid = cfg.curve_x_t;
  if (grid.empty())
    for (double x = -10.0; x <= 10.0 + 1e-9; x += 0.5) grid.push_back(x);
  std::vector<CurveRow> rows =
      loss_curves(cfg.train.loss, cfg.curve_gamma_v, grid, false);
  const std::vector<CurveRow> weighted =
      loss_curves(cfg.train.loss, cfg.curve_gamma_v, grid, true);
  rows.insert(rows.end(), weighted.begin(), weighted.end());
  atomic_write((fs::path(cfg.out_dir) / "curves.csv").string(),
               curves_csv(rows));
  write_manifest(cfg, cfg.out_dir, "curves");
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty list");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 ? values[n / 2]
               : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<CompareCell> run_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<CompareCell> cells;
  for (Variant v : cfg.variants) {
    std::map<std::string, std::vector<double>> ap_by_group;
    std::map<std::string, std::vector<double>> margin_by_group;
    for (std::uint64_t seed : cfg.seeds) {
      DatasetSpec spec = cfg.dataset;
      spec.seed = seed;
      TrainConfig tc = cfg.train;
      tc.loss.variant = v;
      tc.seed = seed;
      const SyntheticDataset data = make_dataset(spec);
      const TrainResult res = train(data, tc);
      const MetricsReport report =
          evaluate(res.model, make_eval_split(spec, cfg.eval_pos_cap));

      ExperimentConfig run_cfg = cfg;
      run_cfg.dataset = spec;
      run_cfg.train = tc;
      const std::string dir = run_dir(cfg, v, seed);
      fs::create_directories(dir);
      save_model(res.model, (fs::path(dir) / "model.txt.tmp").string());
      fs::rename(fs::path(dir) / "model.txt.tmp", fs::path(dir) / "model.txt");
      atomic_write((fs::path(dir) / "state.txt").string(),
                   serialize(res.state));
      atomic_write((fs::path(dir) / "trainlog.csv").string(),
                   trainlog_csv(res.log));
      atomic_write((fs::path(dir) / "percat.csv").string(),
                   percat_csv(report));
      atomic_write((fs::path(dir) / "groups.csv").string(),
                   groups_csv(report));
      atomic_write((fs::path(dir) / "margins.csv").string(),
                   margins_csv(report));
      write_manifest(run_cfg, dir, "compare");

      for (const GroupMetrics& gm : report.groups) {
        ap_by_group[group_name(gm.group)].push_back(gm.ap);
        margin_by_group[group_name(gm.group)].push_back(gm.margin);
      }
      ap_by_group["macro"].push_back(report.macro_ap);
      margin_by_group["macro"].push_back(0.0);
    }
    for (const std::string& grp : {"rare", "common", "frequent", "macro"}) {
      auto it = ap_by_group.find(grp);
      if (it == ap_by_group.end()) continue;
      CompareCell cell;
      cell.variant = v;
      cell.group = grp;
      cell.median_ap = median(it->second);
      cell.min_ap = *std::min_element(it->second.begin(), it->second.end());
      cell.max_ap = *std::max_element(it->second.begin(), it->second.end());
      cell.median_margin = median(margin_by_group[grp]);
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string compare_csv(const std::vector<CompareCell>& cells) {
  std::ostringstream out;
  out << "variant,group,median_ap,min_ap,max_ap,median_margin\n";
  for (const CompareCell& c : cells)
    out << variant_name(c.variant) << ',' << c.group << ','
        << fmt_double(c.median_ap) << ',' << fmt_double(c.min_ap) << ','
        << fmt_double(c.max_ap) << ',' << fmt_double(c.median_margin) << "\n";
  return out.str();
}

void cmd_compare(const ExperimentConfig& cfg) {
  const std::vector<CompareCell> cells = run_compare(cfg);
  atomic_write((fs::path(cfg.out_dir) / "compare.csv").string(),
               compare_csv(cells));
  write_manifest(cfg, cfg.out_dir, "compare");
}

}  // namespace efl
