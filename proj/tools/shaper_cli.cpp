// shaper: calibrate the NLIN model, train shaped constellations and evaluate
// them through the split-step fiber simulation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "shaping/config.hpp"
#include "shaping/errors.hpp"
#include "shaping/pipeline.hpp"

namespace fs = std::filesystem;
using namespace shaping;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string coeffs_path;  // defaults to <out>/nlin_coeffs.json
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "experiment config (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", opt.seed, "master seed, overrides the config");
  cmd->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
}

ExperimentConfig load(const CommonOptions& opt) {
  ExperimentConfig cfg = opt.config_path.empty() ? ExperimentConfig{}
                                                 : load_config(opt.config_path);
  if (opt.seed) cfg.seed = *opt.seed;
  cfg.validate();
  return cfg;
}

NlinCoeffs load_coeffs(const CommonOptions& opt) {
  const auto path = opt.coeffs_path.empty()
                        ? (fs::path(opt.out_dir) / "nlin_coeffs.json").string()
                        : opt.coeffs_path;
  if (!fs::exists(path))
    throw ValidationError("NLIN coefficients not found at " + path +
                          "; run 'shaper calibrate' first or pass --coeffs");
  return load_nlin_coeffs(path);
}

std::string power_label(double dbm) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << dbm << "dBm";
  return s.str();
}

int cmd_calibrate(const CommonOptions& opt) {
  const auto cfg = load(opt);
  fs::create_directories(opt.out_dir);
  const auto result = calibrate(cfg, &std::cerr);
  const fs::path out(opt.out_dir);
  save_nlin_coeffs(result.coeffs, (out / "nlin_coeffs.json").string());
  std::ofstream csv(out / "calibration_probes.csv");
  write_calibration_csv(csv, result);
  const auto& k = result.coeffs;
  std::cout << "sigma2_ase " << k.sigma2_ase << " W\nchi " << k.chi[0] << ' ' << k.chi[1]
            << ' ' << k.chi[2] << ' ' << k.chi[3] << "\nr2 " << k.r2 << '\n';
  if (!(k.r2 >= cfg.calibration.min_r2)) {
    std::cerr << "calibration fit is poor: R^2 = " << k.r2 << " < " << cfg.calibration.min_r2
              << "; see " << (out / "calibration_probes.csv").string()
              << " for measured vs model variances\n";
    return 2;
  }
  return 0;
}

int cmd_train(const CommonOptions& opt, double power_dbm) {
  const auto cfg = load(opt);
  const auto coeffs = load_coeffs(opt);
  fs::create_directories(opt.out_dir);
  const auto result = train_joint(cfg, coeffs, power_dbm,
                                  derive_seed(cfg.seed, kSeedTrain, 0));
  const fs::path out(opt.out_dir);
  const auto label = power_label(power_dbm);
  save_constellation(result.constellation, (out / ("js_" + label + ".json")).string());
  std::ofstream hist(out / ("js_" + label + "_history.csv"));
  write_history_csv(hist, result.history);
  std::cout << "best smoothed objective " << result.best_smoothed_objective
            << " bits/2D\n";
  if (result.diverged) {
    std::cerr << "training diverged; the best constellation before divergence was saved\n";
    return 3;
  }
  return 0;
}

int cmd_mb_baseline(const CommonOptions& opt, double power_dbm) {
  const auto cfg = load(opt);
  const auto coeffs = load_coeffs(opt);
  fs::create_directories(opt.out_dir);
  const auto mb = mb_baseline(cfg, coeffs, power_dbm);
  save_constellation(mb.constellation,
                     (fs::path(opt.out_dir) / ("mb_" + power_label(power_dbm) + ".json"))
                         .string());
  std::cout << "lambda " << mb.lambda << "\nmi_bits_2d " << mb.mi_bits << '\n';
  return 0;
}

int cmd_evaluate(const CommonOptions& opt, const std::string& constellation_path,
                 double power_dbm, const std::string& estimator) {
  const auto cfg = load(opt);
  const auto c = load_constellation(constellation_path);
  const auto e =
      estimator == "nlin"
          ? evaluate_nlin(c, load_coeffs(opt), cfg, power_dbm,
                          derive_seed(cfg.seed, kSeedEvalNlin, 0))
          : evaluate_ssfm(c, cfg, power_dbm, derive_seed(cfg.seed, kSeedEvalSsfm, 0));
  fs::create_directories(opt.out_dir);
  const auto stem = fs::path(constellation_path).stem().string();
  const auto path = fs::path(opt.out_dir) / (stem + "_" + estimator + "_metrics.json");
  std::ofstream out(path);
  out << to_json(e).dump(2) << '\n';
  std::cout << to_json(e).dump(2) << '\n';
  return 0;
}

int cmd_sweep(const CommonOptions& opt) {
  const auto cfg = load(opt);
  const auto coeffs = load_coeffs(opt);
  run_sweep(cfg, coeffs, opt.out_dir, &std::cerr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constellation shaping for nonlinear fiber channels"};
  app.require_subcommand(1);

  CommonOptions opt;
  double power_dbm = 0.0;
  std::string constellation_path;
  std::string estimator = "ssfm";

  auto* cal = app.add_subcommand("calibrate", "fit NLIN coefficients against the SSFM");
  add_common(cal, opt);

  auto* tr = app.add_subcommand("train", "train a joint shaping constellation at one power");
  add_common(tr, opt);
  tr->add_option("--power-dbm", power_dbm, "total launch power")->required();
  tr->add_option("--coeffs", opt.coeffs_path, "NLIN coefficients JSON");

  auto* mb = app.add_subcommand("mb-baseline", "optimize the MB-shaped QAM at one power");
  add_common(mb, opt);
  mb->add_option("--power-dbm", power_dbm, "total launch power")->required();
  mb->add_option("--coeffs", opt.coeffs_path, "NLIN coefficients JSON");

  auto* ev = app.add_subcommand("evaluate",
                                "evaluate a constellation through the SSFM or the NLIN model");
  add_common(ev, opt);
  ev->add_option("--constellation", constellation_path, "constellation JSON")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--power-dbm", power_dbm, "total launch power")->required();
  ev->add_option("--estimator", estimator, "ssfm (split-step + KDE) or nlin (NLIN model)")
      ->check(CLI::IsMember({"ssfm", "nlin"}))
      ->capture_default_str();
  ev->add_option("--coeffs", opt.coeffs_path, "NLIN coefficients JSON (nlin estimator)");

  auto* sw = app.add_subcommand("sweep", "train and evaluate all schemes over the power grid");
  add_common(sw, opt);
  sw->add_option("--coeffs", opt.coeffs_path, "NLIN coefficients JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cal->parsed()) return cmd_calibrate(opt);
    if (tr->parsed()) return cmd_train(opt, power_dbm);
    if (mb->parsed()) return cmd_mb_baseline(opt, power_dbm);
    if (ev->parsed()) return cmd_evaluate(opt, constellation_path, power_dbm, estimator);
    if (sw->parsed()) return cmd_sweep(opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
