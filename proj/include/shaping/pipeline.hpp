#ifndef SHAPING_PIPELINE_HPP
#define SHAPING_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "shaping/config.hpp"
#include "shaping/constellation.hpp"
#include "shaping/nlin_channel.hpp"
#include "shaping/trainer.hpp"

namespace shaping {

// Seed streams for derive_seed.
enum SeedStream : std::uint64_t {
  kSeedCalibration = 1,
  kSeedTrain = 2,
  kSeedEvalNlin = 3,
  kSeedEvalSsfm = 4,
};

/// 256 points on 16 rings whose squared radii and weights are the 16-node
/// Gauss-Laguerre rule: |s|^2 matches an exponential law through degree 31,
/// so (mu4, mu6) = (2, 6) as for Gaussian symbols.
Constellation gaussian_ring_probe();

/// 16-PSK rings at squared radii r1^2 and r2^2 (r2 set by unit power) with
/// total probabilities q and 1 - q. Most of the mass on a weak inner ring
/// gives mu4 > 2.
Constellation two_ring_probe(double inner_prob, double inner_energy);

/// "qpsk", "16qam", "64qam", "256qam", "gaussian", "mb256:<lambda>" or
/// "two_ring:<q>:<r1^2>". The MB lambda applies to the unit-power grid.
Constellation probe_constellation(const std::string& name);

struct CalibrationProbe {
  std::string format;
  double power_dbm;  // total launch power
  ChiProbe probe;
};

struct CalibrationResult {
  NlinCoeffs coeffs;
  std::vector<CalibrationProbe> probes;
};

/// Noise variance (W, per polarization) that the SSFM adds to constellation
/// c at the given total launch power, excluding ASE. Measured after CD
/// compensation, matched filtering and a least-squares gain fit.
double measure_nli_variance(const Constellation& c, const ExperimentConfig& cfg,
                            double power_dbm, std::size_t symbols,
                            std::uint64_t seed);

/// Runs every probe format at every calibration power through the SSFM
/// (ASE off) and fits chi. The measured variances include sigma2_ase so the
/// fit subtracts it back out.
CalibrationResult calibrate(const ExperimentConfig& cfg, std::ostream* log = nullptr);

void write_calibration_csv(std::ostream& out, const CalibrationResult& result);

/// Per-polarization launch power (W) for a total power in dBm.
double polarization_power_w(double power_dbm);

/// Joint shaping trained on the NLIN model at one launch power.
TrainResult train_joint(const ExperimentConfig& cfg, const NlinCoeffs& coeffs,
                        double power_dbm, std::uint64_t seed);

/// MB-shaped QAM with lambda maximizing the NLIN-model MI at this power.
MbOptimum mb_baseline(const ExperimentConfig& cfg, const NlinCoeffs& coeffs,
                      double power_dbm);

struct Evaluation {
  double power_dbm = 0.0;
  double mi_bits_4d = 0.0;
  double mi_bits_x = 0.0;
  double mi_bits_y = 0.0;
  double std_error_4d = 0.0;
  double snr_eff_db = 0.0;
  double mu4 = 0.0;
  double mu6 = 0.0;
  double entropy_bits = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const Evaluation& e);

/// Hard-sampled MI through the NLIN Gaussian model (Monte-Carlo posterior
/// estimator), two independent polarization streams.
Evaluation evaluate_nlin(const Constellation& c, const NlinCoeffs& coeffs,
                         const ExperimentConfig& cfg, double power_dbm,
                         std::uint64_t seed);

/// Hard-sampled MI through the SSFM and receiver DSP, estimated with the KDE
/// estimator on two independent polarization streams.
Evaluation evaluate_ssfm(const Constellation& c, const ExperimentConfig& cfg,
                         double power_dbm, std::uint64_t seed);

/// Sweep output columns, in order.
inline constexpr const char* kSweepHeader =
    "power_dbm,scheme,estimator,mi_bits_4d,snr_eff_db,mu4,mu6,entropy_bits,seed";

struct SweepRow {
  double power_dbm;
  std::string scheme;     // js, mb, uniform
  std::string estimator;  // nlin, ssfm
  Evaluation eval;
};

/// Trains, builds baselines and evaluates every scheme at every sweep power.
/// Rows are appended to out_dir/sweep.csv as they complete; constellations
/// and training histories go to out_dir/constellations and out_dir/history.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                const NlinCoeffs& coeffs,
                                const std::filesystem::path& out_dir,
                                std::ostream* log = nullptr);

}  // namespace shaping

#endif  // SHAPING_PIPELINE_HPP
