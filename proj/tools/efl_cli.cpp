// efl-bench: long-tailed classification loss benchmark driver.
//
// Subcommands: gen-data, train, eval, curves, grad-check, compare.
// Exit codes: 0 success, 2 validation error, 3 numerical failure,
// 4 gradient-check failure.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "efl/experiment.hpp"
#include "efl/gradcheck.hpp"
#include "efl/trainer.hpp"

namespace {

int with_config(const std::string& config_path, const std::string& out_override,
                long seed_override, const std::string& variant_override,
                void (*fn)(const efl::ExperimentConfig&)) {
  efl::ExperimentConfig cfg = efl::load_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_override >= 0) {
    cfg.train.seed = static_cast<std::uint64_t>(seed_override);
    cfg.dataset.seed = static_cast<std::uint64_t>(seed_override);
  }
  if (!variant_override.empty())
    cfg.train.loss.variant = efl::parse_variant(variant_override);
  fn(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equalized focal loss benchmark suite"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  long seed = -1;
  std::string variant;

  auto add_common = [&](CLI::App* sub, bool config_required = true) {
    sub->add_option("--config", config_path, "experiment config file")
        ->required(config_required);
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_option("--seed", seed, "seed override (dataset + training)");
    sub->add_option("--variant", variant, "loss variant override");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen);
  CLI::App* tr = app.add_subcommand("train", "train one model");
  add_common(tr);
  CLI::App* ev = app.add_subcommand("eval", "evaluate a trained checkpoint");
  add_common(ev);
  CLI::App* cu = app.add_subcommand("curves", "emit loss-curve table");
  add_common(cu);
  CLI::App* cmp = app.add_subcommand(
      "compare", "train and evaluate all variants across all seeds");
  add_common(cmp);

  CLI::App* gc = app.add_subcommand("grad-check",
                                    "finite-difference gradient verification");
  std::string gc_variant = "ALL";
  std::string gc_csv;
  double gc_h = 1e-4, gc_rtol = 1e-5, gc_atol = 1e-9;
  gc->add_option("--variant", gc_variant, "FL, EFL, EQLV2_FOCAL, EQFL or ALL");
  gc->add_option("--step", gc_h, "finite-difference step");
  gc->add_option("--rtol", gc_rtol, "relative tolerance");
  gc->add_option("--atol", gc_atol, "absolute tolerance on plateaus");
  gc->add_option("--csv", gc_csv, "write failing points to this CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gc->parsed()) {
      std::vector<efl::Variant> variants;
      if (gc_variant == "ALL")
        variants = {efl::Variant::FL, efl::Variant::EFL,
                    efl::Variant::EQLV2_FOCAL, efl::Variant::EQFL};
      else
        variants = {efl::parse_variant(gc_variant)};
      bool ok = true;
      std::string csv;
      for (efl::Variant v : variants) {
        efl::CheckSpec spec;
        spec.variant = v;
        spec.h = gc_h;
        spec.rtol = gc_rtol;
        spec.atol = gc_atol;
        const efl::CheckReport report = efl::run_checks(spec);
        std::cout << efl::report_summary(spec, report);
        csv += efl::report_csv(report);
        ok = ok && report.passed();
      }
      if (!gc_csv.empty()) efl::atomic_write(gc_csv, csv);
      return ok ? 0 : 4;
    }
    if (gen->parsed())
      return with_config(config_path, out_dir, seed, variant, efl::cmd_gen);
    if (tr->parsed())
      return with_config(config_path, out_dir, seed, variant, efl::cmd_train);
    if (ev->parsed())
      return with_config(config_path, out_dir, seed, variant, efl::cmd_eval);
    if (cu->parsed())
      return with_config(config_path, out_dir, seed, variant, efl::cmd_curves);
    if (cmp->parsed())
      return with_config(config_path, out_dir, seed, variant, efl::cmd_compare);
  } catch (const efl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const efl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
