#include "shaping/config.hpp"

#include <bit>
#include <fstream>
#include <set>

#include "shaping/errors.hpp"

namespace shaping {

namespace {

using nlohmann::json;

// Reads known keys of one JSON section and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ValidationError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("config key '" + name_ + "." + key + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ValidationError("unknown config key '" + name_ + "." + item.key() + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

json link_json(const LinkParams& l) {
  return {{"dispersion_ps_nm_km", l.dispersion_ps_nm_km},
          {"gamma_per_w_km", l.gamma_per_w_km},
          {"alpha_db_per_km", l.alpha_db_per_km},
          {"span_length_km", l.span_length_km},
          {"noise_figure_db", l.noise_figure_db},
          {"symbol_rate_gbd", l.symbol_rate_gbd},
          {"rolloff", l.rolloff},
          {"carrier_freq_thz", l.carrier_freq_thz}};
}

void read_link(const json& j, LinkParams& l) {
  Section s(j, "link");
  s.read("dispersion_ps_nm_km", l.dispersion_ps_nm_km);
  s.read("gamma_per_w_km", l.gamma_per_w_km);
  s.read("alpha_db_per_km", l.alpha_db_per_km);
  s.read("span_length_km", l.span_length_km);
  s.read("noise_figure_db", l.noise_figure_db);
  s.read("symbol_rate_gbd", l.symbol_rate_gbd);
  s.read("rolloff", l.rolloff);
  s.read("carrier_freq_thz", l.carrier_freq_thz);
  s.finish();
}

json train_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},     {"learning_rate", t.learning_rate},
          {"iterations", t.iterations},     {"tau0", t.tau0},
          {"tau_min", t.tau_min},           {"tau_decay", t.tau_decay},
          {"train_points", t.train_points}, {"train_probs", t.train_probs},
          {"smoothing", t.smoothing},       {"log_every", t.log_every},
          {"straight_through", t.straight_through}};
}

void read_train(const json& j, TrainConfig& t) {
  Section s(j, "train");
  s.read("batch_size", t.batch_size);
  s.read("learning_rate", t.learning_rate);
  s.read("iterations", t.iterations);
  s.read("tau0", t.tau0);
  s.read("tau_min", t.tau_min);
  s.read("tau_decay", t.tau_decay);
  s.read("train_points", t.train_points);
  s.read("train_probs", t.train_probs);
  s.read("smoothing", t.smoothing);
  s.read("log_every", t.log_every);
  s.read("straight_through", t.straight_through);
  s.finish();
}

json ssfm_json(const SsfmConfig& c) {
  return {{"samples_per_symbol", c.samples_per_symbol},
          {"step_km", c.step_km},
          {"adaptive", c.adaptive},
          {"max_nonlinear_phase", c.max_nonlinear_phase},
          {"add_ase", c.add_ase}};
}

void read_ssfm(const json& j, SsfmConfig& c) {
  Section s(j, "ssfm");
  s.read("samples_per_symbol", c.samples_per_symbol);
  s.read("step_km", c.step_km);
  s.read("adaptive", c.adaptive);
  s.read("max_nonlinear_phase", c.max_nonlinear_phase);
  s.read("add_ase", c.add_ase);
  s.finish();
}

}  // namespace

SweepConfig::SweepConfig() {
  for (int p = 0; p <= 14; ++p) power_dbm.push_back(p);
}

void ExperimentConfig::validate() const {
  link.validate();
  ssfm.validate();
  TrainConfig t = train;
  t.power_w = 1e-3;
  t.validate();
  if (calibration.formats.empty() || calibration.power_dbm.empty())
    throw ValidationError("calibration needs at least one format and one power");
  if (calibration.symbols < 4 * sweep.guard_symbols)
    throw ValidationError("calibration.symbols too small for the edge guard");
  if (sweep.power_dbm.empty()) throw ValidationError("sweep.power_dbm is empty");
  if (sweep.eval_symbols <= 2 * sweep.guard_symbols + 4)
    throw ValidationError("sweep.eval_symbols too small for the edge guard");
  if (!std::has_single_bit(sweep.eval_symbols * static_cast<std::size_t>(ssfm.samples_per_symbol)) ||
      !std::has_single_bit(calibration.symbols * static_cast<std::size_t>(ssfm.samples_per_symbol)))
    throw ValidationError("symbols x samples_per_symbol must be a power of two");
  if (sweep.nlin_eval_symbols < 4) throw ValidationError("sweep.nlin_eval_symbols too small");
  if (!(sweep.mb_lambda_max > 0.0) || !(sweep.mb_lambda_tol > 0.0))
    throw ValidationError("MB search range and tolerance must be positive");
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"seed", cfg.seed},
          {"link", link_json(cfg.link)},
          {"train", train_json(cfg.train)},
          {"ssfm", ssfm_json(cfg.ssfm)},
          {"calibration",
           {{"formats", cfg.calibration.formats},
            {"power_dbm", cfg.calibration.power_dbm},
            {"symbols", cfg.calibration.symbols},
            {"min_r2", cfg.calibration.min_r2}}},
          {"sweep",
           {{"power_dbm", cfg.sweep.power_dbm},
            {"qam_order", cfg.sweep.qam_order},
            {"eval_symbols", cfg.sweep.eval_symbols},
            {"guard_symbols", cfg.sweep.guard_symbols},
            {"nlin_eval_symbols", cfg.sweep.nlin_eval_symbols},
            {"mb_lambda_max", cfg.sweep.mb_lambda_max},
            {"mb_lambda_tol", cfg.sweep.mb_lambda_tol}}}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  Section top(j, "config");
  top.read("seed", cfg.seed);
  if (const auto* s = top.child("link")) read_link(*s, cfg.link);
  if (const auto* s = top.child("train")) read_train(*s, cfg.train);
  if (const auto* s = top.child("ssfm")) read_ssfm(*s, cfg.ssfm);
  if (const auto* s = top.child("calibration")) {
    Section c(*s, "calibration");
    c.read("formats", cfg.calibration.formats);
    c.read("power_dbm", cfg.calibration.power_dbm);
    c.read("symbols", cfg.calibration.symbols);
    c.read("min_r2", cfg.calibration.min_r2);
    c.finish();
  }
  if (const auto* s = top.child("sweep")) {
    Section w(*s, "sweep");
    w.read("power_dbm", cfg.sweep.power_dbm);
    w.read("qam_order", cfg.sweep.qam_order);
    w.read("eval_symbols", cfg.sweep.eval_symbols);
    w.read("guard_symbols", cfg.sweep.guard_symbols);
    w.read("nlin_eval_symbols", cfg.sweep.nlin_eval_symbols);
    w.read("mb_lambda_max", cfg.sweep.mb_lambda_max);
    w.read("mb_lambda_tol", cfg.sweep.mb_lambda_tol);
    w.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json(cfg).dump(2) << '\n';
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index) {
  // splitmix64 finalizer over a mix of the three inputs.
  std::uint64_t z = master * 0x9E3779B97F4A7C15ULL + stream * 0xBF58476D1CE4E5B9ULL +
                    index * 0x94D049BB133111EBULL + 0x2545F4914F6CDD1DULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace shaping
