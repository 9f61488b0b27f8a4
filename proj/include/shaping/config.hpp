#ifndef SHAPING_CONFIG_HPP
#define SHAPING_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "shaping/link.hpp"
#include "shaping/ssfm.hpp"
#include "shaping/trainer.hpp"

namespace shaping {

/// Probe set used to calibrate the NLIN coefficients against the SSFM.
struct CalibrationConfig {
  std::vector<std::string> formats{"qpsk",
                                   "16qam",
                                   "64qam",
                                   "gaussian",
                                   "two_ring:0.5:0.5",
                                   "two_ring:0.8:0.5",
                                   "two_ring:0.9:0.5",
                                   "two_ring:0.95:0.85",
                                   "mb256:1.5",
                                   "mb256:3"};
  std::vector<double> power_dbm{6.0, 10.0, 14.0};
  std::size_t symbols = 1 << 14;
  double min_r2 = 0.9;
};

/// Power sweep and evaluation settings. Launch powers are totals over both
/// polarizations; each polarization carries half.
struct SweepConfig {
  std::vector<double> power_dbm;  // default 0..14 dBm in 1 dB steps
  int qam_order = 256;
  std::size_t eval_symbols = 1 << 15;       // per polarization, SSFM runs
  std::size_t guard_symbols = 256;          // dropped at each end
  std::size_t nlin_eval_symbols = 100000;   // per polarization, NLIN model
  double mb_lambda_max = 20.0;
  double mb_lambda_tol = 1e-3;

  SweepConfig();
};

struct ExperimentConfig {
  LinkParams link;
  TrainConfig train;  // power_w and seed are set per run
  SsfmConfig ssfm;
  CalibrationConfig calibration;
  SweepConfig sweep;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// Independent 64-bit seed for stream `stream`, item `index` of a run.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index);

}  // namespace shaping

#endif  // SHAPING_CONFIG_HPP
