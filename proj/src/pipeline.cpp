#include "shaping/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "shaping/errors.hpp"
#include "shaping/metrics.hpp"
#include "shaping/quadrature.hpp"
#include "shaping/rx_dsp.hpp"
#include "shaping/ssfm.hpp"

namespace shaping {

namespace {

struct Received {
  std::vector<std::size_t> idx_x, idx_y;
  std::vector<cplx> tx_x, tx_y;
  std::vector<cplx> rx_x, rx_y;  // matched-filter output, edges trimmed
};

// Modulates two independent streams of c, propagates and runs the receiver.
Received transmit_ssfm(const Constellation& c, const LinkParams& link,
                       const SsfmConfig& ssfm, double power_dbm,
                       std::size_t symbols, std::size_t guard, std::uint64_t seed) {
  Received r;
  const auto idx_x = sample_sequence(c, symbols, derive_seed(seed, 0, 0));
  const auto idx_y = sample_sequence(c, symbols, derive_seed(seed, 0, 1));
  const auto sx = symbols_from_indices(c, idx_x);
  const auto sy = symbols_from_indices(c, idx_y);
  const auto field = rrc_modulate(sx, sy, link, dbm_to_watt(power_dbm), ssfm);
  const auto out = ssfm_propagate(field, link, ssfm, derive_seed(seed, 0, 2));
  auto sym = matched_filter_downsample(cd_compensate(out, link), link,
                                       ssfm.samples_per_symbol);
  r.idx_x = trim_edges<std::size_t>(idx_x, guard);
  r.idx_y = trim_edges<std::size_t>(idx_y, guard);
  r.tx_x = trim_edges<cplx>(sx, guard);
  r.tx_y = trim_edges<cplx>(sy, guard);
  r.rx_x = trim_edges<cplx>(sym.x, guard);
  r.rx_y = trim_edges<cplx>(sym.y, guard);
  return r;
}

// 10 log10 of signal over error energy pooled over both polarizations.
double pooled_snr_db(std::span<const cplx> ax, std::span<const cplx> tx,
                     std::span<const cplx> ay, std::span<const cplx> ty) {
  double signal = 0.0, error = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) {
    signal += std::norm(tx[i]);
    error += std::norm(ax[i] - tx[i]);
  }
  for (std::size_t i = 0; i < ty.size(); ++i) {
    signal += std::norm(ty[i]);
    error += std::norm(ay[i] - ty[i]);
  }
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / error);
}

void fill_shape(Evaluation& e, const Constellation& c) {
  const auto m = standardized_moments(c);
  e.mu4 = m.mu4;
  e.mu6 = m.mu6;
  e.entropy_bits = entropy_bits(c.probs());
}

std::string power_tag(double power_dbm) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << power_dbm << "dBm";
  return s.str();
}

}  // namespace

Constellation gaussian_ring_probe() {
  constexpr int kRings = 16, kPhases = 16;
  const auto rule = gauss_laguerre(kRings);
  std::vector<cplx> points;
  std::vector<double> probs;
  for (int r = 0; r < kRings; ++r) {
    const double radius = std::sqrt(rule.nodes[r]);
    // Stagger neighboring rings by half a phase step.
    const double offset = (r % 2) * std::numbers::pi / kPhases;
    for (int k = 0; k < kPhases; ++k) {
      points.push_back(std::polar(radius, offset + 2.0 * std::numbers::pi * k / kPhases));
      probs.push_back(rule.weights[r] / kPhases);
    }
  }
  double total = 0.0;
  for (double p : probs) total += p;
  for (double& p : probs) p /= total;
  return normalize_power(points, probs);
}

Constellation two_ring_probe(double inner_prob, double inner_energy) {
  if (!(inner_prob > 0.0 && inner_prob < 1.0) || !(inner_energy > 0.0 && inner_energy < 1.0))
    throw ValidationError("two-ring probe needs 0 < q < 1 and 0 < r1^2 < 1");
  constexpr int kPhases = 16;
  const double outer_energy = (1.0 - inner_prob * inner_energy) / (1.0 - inner_prob);
  std::vector<cplx> points;
  std::vector<double> probs;
  for (int r = 0; r < 2; ++r) {
    const double radius = std::sqrt(r == 0 ? inner_energy : outer_energy);
    const double offset = r * std::numbers::pi / kPhases;
    for (int k = 0; k < kPhases; ++k) {
      points.push_back(std::polar(radius, offset + 2.0 * std::numbers::pi * k / kPhases));
      probs.push_back((r == 0 ? inner_prob : 1.0 - inner_prob) / kPhases);
    }
  }
  return normalize_power(points, probs);
}

Constellation probe_constellation(const std::string& name) {
  if (name == "qpsk") return make_qam(4);
  if (name == "16qam") return make_qam(16);
  if (name == "64qam") return make_qam(64);
  if (name == "256qam") return make_qam(256);
  if (name == "gaussian") return gaussian_ring_probe();
  std::vector<double> args;
  const auto colon = name.find(':');
  const std::string head = name.substr(0, colon);
  for (auto pos = colon; pos != std::string::npos;) {
    const auto next = name.find(':', pos + 1);
    const auto field = name.substr(pos + 1, next == std::string::npos ? next : next - pos - 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != field.size())
      throw ValidationError("bad parameter '" + field + "' in probe format '" + name + "'");
    args.push_back(v);
    pos = next;
  }
  if (head == "mb256" && args.size() == 1) {
    if (!(args[0] >= 0.0)) throw ValidationError("mb256 probe needs lambda >= 0");
    return maxwell_boltzmann(make_qam(256).points(), args[0]);
  }
  if (head == "two_ring" && args.size() == 2) return two_ring_probe(args[0], args[1]);
  throw ValidationError("unknown probe format '" + name + "'");
}

double polarization_power_w(double power_dbm) { return dbm_to_watt(power_dbm) / 2.0; }

double measure_nli_variance(const Constellation& c, const ExperimentConfig& cfg,
                            double power_dbm, std::size_t symbols,
                            std::uint64_t seed) {
  SsfmConfig ssfm = cfg.ssfm;
  ssfm.add_ase = false;
  const auto r = transmit_ssfm(c, cfg.link, ssfm, power_dbm, symbols,
                               cfg.sweep.guard_symbols, seed);
  const double p_pol = polarization_power_w(power_dbm);
  // residual_variance is in unit-power symbol units; the matched filter
  // returns sqrt(P_pol)-scaled symbols.
  return 0.5 * (residual_variance(r.rx_x, r.tx_x) + residual_variance(r.rx_y, r.tx_y)) *
         p_pol;
}

CalibrationResult calibrate(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const double sigma2_ase = ase_variance(cfg.link);
  CalibrationResult result;
  std::vector<ChiProbe> probes;
  std::uint64_t index = 0;
  for (const auto& format : cfg.calibration.formats) {
    const auto c = probe_constellation(format);
    const auto m = standardized_moments(c);
    for (double p_dbm : cfg.calibration.power_dbm) {
      const double nli = measure_nli_variance(
          c, cfg, p_dbm, cfg.calibration.symbols,
          derive_seed(cfg.seed, kSeedCalibration, index++));
      ChiProbe probe{m.mu4, m.mu6, polarization_power_w(p_dbm), nli + sigma2_ase};
      result.probes.push_back({format, p_dbm, probe});
      probes.push_back(probe);
      if (log)
        *log << "calibrate: " << format << " at " << p_dbm
             << " dBm, NLI variance " << nli << " W\n";
    }
  }
  result.coeffs = fit_chi(probes, sigma2_ase);
  return result;
}

void write_calibration_csv(std::ostream& out, const CalibrationResult& result) {
  out << "format,power_dbm,mu4,mu6,power_w_per_pol,measured_variance_w,model_variance_w\n";
  out << std::setprecision(12);
  for (const auto& p : result.probes)
    out << p.format << ',' << p.power_dbm << ',' << p.probe.mu4 << ',' << p.probe.mu6
        << ',' << p.probe.power_w << ',' << p.probe.measured_variance << ','
        << nlin_variance(result.coeffs, p.probe.power_w, p.probe.mu4, p.probe.mu6)
        << '\n';
}

TrainResult train_joint(const ExperimentConfig& cfg, const NlinCoeffs& coeffs,
                        double power_dbm, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.power_w = polarization_power_w(power_dbm);
  t.seed = seed;
  return train(t, coeffs, make_qam(cfg.sweep.qam_order));
}

MbOptimum mb_baseline(const ExperimentConfig& cfg, const NlinCoeffs& coeffs,
                      double power_dbm) {
  const double p = polarization_power_w(power_dbm);
  // The search uses one quadrature order; the optimum is rechecked against
  // the finer rule below.
  const QuadratureOptions fast{32, 0, 0.0};
  auto score = [&](const Constellation& c, const QuadratureOptions& q) {
    const auto m = standardized_moments(c);
    return mi_exact_awgn(c, normalized_variance(coeffs, p, m.mu4, m.mu6), q);
  };
  auto best = optimize_mb_lambda(
      qam_grid(cfg.sweep.qam_order),
      [&](const Constellation& c) { return score(c, fast); }, cfg.sweep.mb_lambda_max,
      cfg.sweep.mb_lambda_tol);
  best.mi_bits = score(best.constellation, QuadratureOptions{});
  return best;
}

nlohmann::json to_json(const Evaluation& e) {
  return {{"power_dbm", e.power_dbm},     {"mi_bits_4d", e.mi_bits_4d},
          {"mi_bits_x", e.mi_bits_x},     {"mi_bits_y", e.mi_bits_y},
          {"std_error_4d", e.std_error_4d}, {"snr_eff_db", e.snr_eff_db},
          {"mu4", e.mu4},                 {"mu6", e.mu6},
          {"entropy_bits", e.entropy_bits}, {"seed", e.seed},
          {"warnings", e.warnings}};
}

Evaluation evaluate_nlin(const Constellation& c, const NlinCoeffs& coeffs,
                         const ExperimentConfig& cfg, double power_dbm,
                         std::uint64_t seed) {
  Evaluation e;
  e.power_dbm = power_dbm;
  e.seed = seed;
  fill_shape(e, c);
  const double sigma2 =
      normalized_variance(coeffs, polarization_power_w(power_dbm), e.mu4, e.mu6);
  const std::size_t n = cfg.sweep.nlin_eval_symbols;
  std::vector<cplx> aligned[2], sent[2];
  double mi[2], se[2];
  for (int pol = 0; pol < 2; ++pol) {
    const auto idx = sample_sequence(c, n, derive_seed(seed, 1, 2 * pol));
    sent[pol] = symbols_from_indices(c, idx);
    const auto rx = channel_apply(sent[pol], sigma2, derive_seed(seed, 1, 2 * pol + 1));
    const auto est = mi_monte_carlo(idx, rx, c, sigma2);
    mi[pol] = est.bits;
    se[pol] = est.std_error;
    if (est.clamped)
      e.warnings.push_back(std::to_string(est.clamped) +
                           " posterior value(s) clamped at 1e-300");
    aligned[pol] = align(rx, sent[pol]);
  }
  e.mi_bits_x = mi[0];
  e.mi_bits_y = mi[1];
  e.mi_bits_4d = report_4d(mi[0], mi[1]);
  e.std_error_4d = std::hypot(se[0], se[1]);
  e.snr_eff_db = pooled_snr_db(aligned[0], sent[0], aligned[1], sent[1]);
  return e;
}

Evaluation evaluate_ssfm(const Constellation& c, const ExperimentConfig& cfg,
                         double power_dbm, std::uint64_t seed) {
  Evaluation e;
  e.power_dbm = power_dbm;
  e.seed = seed;
  fill_shape(e, c);
  const auto r = transmit_ssfm(c, cfg.link, cfg.ssfm, power_dbm, cfg.sweep.eval_symbols,
                               cfg.sweep.guard_symbols, seed);
  const auto ax = align(r.rx_x, r.tx_x);
  const auto ay = align(r.rx_y, r.tx_y);
  const auto kx = mi_kde(r.idx_x, ax, c);
  const auto ky = mi_kde(r.idx_y, ay, c);
  e.mi_bits_x = kx.bits;
  e.mi_bits_y = ky.bits;
  e.mi_bits_4d = report_4d(kx.bits, ky.bits);
  e.std_error_4d = std::hypot(kx.std_error, ky.std_error);
  e.snr_eff_db = pooled_snr_db(ax, r.tx_x, ay, r.tx_y);
  for (const auto* k : {&kx, &ky})
    e.warnings.insert(e.warnings.end(), k->warnings.begin(), k->warnings.end());
  // Both polarizations see the same channel statistics.
  if (std::abs(kx.bits - ky.bits) >= 0.05) {
    std::ostringstream msg;
    msg << "polarization MI estimates differ by " << std::abs(kx.bits - ky.bits)
        << " bits";
    e.warnings.push_back(msg.str());
  }
  return e;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const NlinCoeffs& coeffs,
                                const std::filesystem::path& out_dir, std::ostream* log) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "constellations");
  fs::create_directories(out_dir / "history");
  save_config(cfg, (out_dir / "config.json").string());

  std::ofstream csv(out_dir / "sweep.csv");
  if (!csv) throw Error("cannot write " + (out_dir / "sweep.csv").string());
  csv << "# seed=" << cfg.seed << " seed_column=evaluation stream seed\n"
      << kSweepHeader << '\n';
  csv << std::setprecision(10);

  std::vector<SweepRow> rows;
  auto emit = [&](double p, const std::string& scheme, const std::string& estimator,
                  const Evaluation& e) {
    rows.push_back({p, scheme, estimator, e});
    csv << p << ',' << scheme << ',' << estimator << ',' << e.mi_bits_4d << ','
        << e.snr_eff_db << ',' << e.mu4 << ',' << e.mu6 << ',' << e.entropy_bits << ','
        << e.seed << '\n';
    csv.flush();
    if (log) {
      *log << "sweep: " << p << " dBm " << scheme << '/' << estimator << " MI "
           << e.mi_bits_4d << " bits/4D, SNR " << e.snr_eff_db << " dB\n";
      for (const auto& w : e.warnings) *log << "  warning: " << w << '\n';
    }
  };

  for (std::size_t i = 0; i < cfg.sweep.power_dbm.size(); ++i) {
    const double p = cfg.sweep.power_dbm[i];
    const auto tag = power_tag(p);

    const auto trained = train_joint(cfg, coeffs, p, derive_seed(cfg.seed, kSeedTrain, i));
    if (trained.diverged && log) *log << "sweep: training diverged at " << p << " dBm\n";
    {
      std::ofstream hist(out_dir / "history" / ("js_" + tag + ".csv"));
      write_history_csv(hist, trained.history);
    }
    const auto mb = mb_baseline(cfg, coeffs, p);
    const auto uniform = make_qam(cfg.sweep.qam_order);

    const std::pair<const char*, const Constellation*> schemes[] = {
        {"js", &trained.constellation}, {"mb", &mb.constellation}, {"uniform", &uniform}};
    for (std::size_t s = 0; s < 3; ++s) {
      const auto& [name, c] = schemes[s];
      save_constellation(*c, (out_dir / "constellations" /
                              (std::string(name) + "_" + tag + ".json"))
                                 .string());
      // Every scheme at one power shares the evaluation seeds.
      emit(p, name, "nlin",
           evaluate_nlin(*c, coeffs, cfg, p, derive_seed(cfg.seed, kSeedEvalNlin, i)));
      emit(p, name, "ssfm",
           evaluate_ssfm(*c, cfg, p, derive_seed(cfg.seed, kSeedEvalSsfm, i)));
    }
  }
  return rows;
}

}  // namespace shaping
