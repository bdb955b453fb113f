#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "efl/gradcheck.hpp"
#include "efl/metrics.hpp"
#include "efl/synth.hpp"
#include "efl/trainer.hpp"

namespace efl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key = value experiment file. Unknown keys are rejected so typos
// cannot silently fall back to defaults.
struct ExperimentConfig {
  DatasetSpec dataset;
  TrainConfig train;
  std::string out_dir = "out";
  std::vector<Variant> variants = {Variant::FL, Variant::EFL};
  std::vector<std::uint64_t> seeds = {1};
  std::vector<double> curve_gamma_v = {0, 2, 6.4, 8};
  std::vector<double> curve_x_t;  // default grid if empty
  int eval_pos_cap = 30;

  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Every effective value, one key = value per line, in fixed order.
std::string config_echo(const ExperimentConfig& cfg);

// Content written atomically: temp file in the same directory, then rename.
void atomic_write(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

std::uint64_t fnv1a_hash(const std::string& text);
void write_manifest(const ExperimentConfig& cfg, const std::string& dir,
                    const std::string& command);

// Pipeline stages. Artifacts live under cfg.out_dir:
//   dataset.txt / dataset.csv / stats.csv              (gen)
//   <variant>_seed<k>/ model.txt state.txt trainlog.csv trajectory.csv
//   <variant>_seed<k>/ percat.csv groups.csv margins.csv (eval)
//   curves.csv                                          (curves)
//   compare.csv                                         (compare)
void cmd_gen(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_eval(const ExperimentConfig& cfg);
void cmd_curves(const ExperimentConfig& cfg);

struct CompareCell {
  Variant variant;
  std::string group;  // rare/common/frequent/macro
  double median_ap;
  double min_ap;
  double max_ap;
  double median_margin;
};

std::vector<CompareCell> run_compare(const ExperimentConfig& cfg);
void cmd_compare(const ExperimentConfig& cfg);
std::string compare_csv(const std::vector<CompareCell>& cells);

// Median of an unsorted list (copy taken).
double median(std::vector<double> values);

constexpr const char* kToolVersion = "efl-bench 1.0.0";

}  // namespace efl
