// File formats: trajectory and ensemble CSV dumps, run metadata, the
// summary.json report, config parsing, and markdown rendering of reports.
// All numeric output is printed with %.17g so identical runs produce
// byte-identical files.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "qsme/ensemble.hpp"
#include "qsme/operator_set.hpp"
#include "qsme/simulate.hpp"

namespace qsme {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sha1_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha1(), nullptr) !=
      1)
    throw Error("sha1_hex: digest failure");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << content;
  if (!f) throw Error("failed writing " + path);
}

/// Trajectory dump: time, re/im of each state entry, cumulative jump count
/// per channel.
inline std::string trajectory_csv(const TrajectoryPath& path) {
  std::ostringstream os;
  os << "time";
  for (int i = 0; i < path.dim; ++i)
    for (int j = 0; j < path.dim; ++j)
      os << ",rho_" << i << j << "_re,rho_" << i << j << "_im";
  for (const auto& label : path.channel_labels) os << ",njumps_" << label;
  os << "\n";
  const std::size_t entries = std::size_t(path.dim) * path.dim;
  std::vector<std::size_t> cumulative(path.channel_labels.size(), 0);
  std::size_t next_jump = 0;
  for (std::size_t k = 0; k < path.n_times(); ++k) {
    while (next_jump < path.jumps.size() &&
           path.jumps[next_jump].time <= path.times[k] + 1e-15) {
      cumulative[std::size_t(path.jumps[next_jump].channel)]++;
      ++next_jump;
    }
    os << format_double(path.times[k]);
    for (std::size_t e = 0; e < entries; ++e) {
      const Complex v = path.data[k * entries + e];
      os << ',' << format_double(v.real()) << ',' << format_double(v.imag());
    }
    for (std::size_t c = 0; c < cumulative.size(); ++c)
      os << ',' << cumulative[c];
    os << "\n";
  }
  return os.str();
}

/// Ensemble mean against the ODE oracle: per time, mean entries, ODE
/// entries, Frobenius error and 3x Monte-Carlo standard error.
inline std::string mean_path_csv(const EnsembleSummary& ens,
                                 const TrajectoryPath& ode) {
  if (ode.times.size() != ens.times.size())
    throw Error("mean_path_csv: grid mismatch");
  std::ostringstream os;
  os << "time";
  for (int i = 0; i < ens.dim; ++i)
    for (int j = 0; j < ens.dim; ++j)
      os << ",mean_" << i << j << "_re,mean_" << i << j << "_im";
  for (int i = 0; i < ens.dim; ++i)
    for (int j = 0; j < ens.dim; ++j)
      os << ",ode_" << i << j << "_re,ode_" << i << j << "_im";
  os << ",fro_error,se3\n";
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    os << format_double(ens.times[k]);
    const Mat mean = ens.mean_state(k);
    const Mat ref = ode.state(k);
    for (int i = 0; i < ens.dim; ++i)
      for (int j = 0; j < ens.dim; ++j)
        os << ',' << format_double(mean(i, j).real()) << ','
           << format_double(mean(i, j).imag());
    for (int i = 0; i < ens.dim; ++i)
      for (int j = 0; j < ens.dim; ++j)
        os << ',' << format_double(ref(i, j).real()) << ','
           << format_double(ref(i, j).imag());
    os << ',' << format_double(fro_norm(Mat(mean - ref))) << ','
       << format_double(3.0 * ens.se_fro[k]) << "\n";
  }
  return os.str();
}

inline std::string samples_csv(const ObservableSamples& s) {
  std::ostringstream os;
  os << "trajectory," << s.label << "\n";
  for (std::size_t i = 0; i < s.values.size(); ++i)
    os << i << ',' << format_double(s.values[i]) << "\n";
  return os.str();
}

inline nlohmann::json report_to_json(const ConvergenceReport& rep) {
  nlohmann::json j;
  j["study"] = rep.study;
  j["n_traj"] = rep.n_traj;
  j["params"] = rep.params;
  j["primary_observable"] = rep.primary_observable;
  j["primary_time"] = rep.primary_time;
  j["ks_noise"] = rep.ks_noise;
  j["w1_allowance"] = rep.w1_allowance;
  j["final_ks"] = rep.final_ks;
  j["final_ks_threshold"] = rep.final_ks_threshold;
  j["fitted_ks_trend"] = rep.fitted_ks_trend;
  j["has_trend"] = rep.has_trend;
  j["verdicts"] = {{"trend_ok", rep.trend_ok},
                   {"mean_ok", rep.mean_ok},
                   {"final_ok", rep.final_ok},
                   {"all_ok", rep.all_ok()}};
  j["distances"] = nlohmann::json::array();
  for (const auto& d : rep.distances)
    j["distances"].push_back({{"param", d.param},
                              {"observable", d.observable},
                              {"time", d.time},
                              {"ks", d.ks},
                              {"w1", d.w1}});
  j["mean_checks"] = nlohmann::json::array();
  for (const auto& m : rep.mean_checks)
    j["mean_checks"].push_back({{"model", m.model},
                                {"sup_error", m.sup_err},
                                {"worst_margin", m.worst_margin},
                                {"ok", m.ok}});
  // Thresholds here are calibration choices at finite dt and finite n; the
  // KS allowance combines the two-sample null scale with discretization
  // headroom.
  j["threshold_notes"] = {
      {"ks_trend_allowance", 2.0 * rep.ks_noise},
      {"final_ks_null_99", ks_null_quantile_99(std::size_t(rep.n_traj),
                                               std::size_t(rep.n_traj))}};
  return j;
}

inline std::string render_report_markdown(const nlohmann::json& j) {
  std::ostringstream os;
  os << "# " << j.value("study", "study") << " report\n\n";
  os << "- trajectories per ensemble: " << j.value("n_traj", 0) << "\n";
  os << "- primary observable: " << j.value("primary_observable", "")
     << " at t=" << j.value("primary_time", 0.0) << "\n";
  os << "- final KS: " << j.value("final_ks", 0.0) << " (threshold "
     << j.value("final_ks_threshold", 0.0) << ")\n";
  if (j.value("has_trend", false))
    os << "- fitted KS trend (log-log slope): "
       << j.value("fitted_ks_trend", 0.0) << "\n";
  os << "\n## Verdicts\n\n| check | result |\n|---|---|\n";
  const auto& v = j["verdicts"];
  for (auto it = v.begin(); it != v.end(); ++it)
    os << "| " << it.key() << " | " << (it.value().get<bool>() ? "pass" : "FAIL")
       << " |\n";
  os << "\n## Distances to the limit ensemble\n\n"
     << "| param | observable | time | KS | W1 |\n|---|---|---|---|---|\n";
  for (const auto& d : j["distances"])
    os << "| " << d.value("param", 0.0) << " | " << d.value("observable", "")
       << " | " << d.value("time", 0.0) << " | " << d.value("ks", 0.0)
       << " | " << d.value("w1", 0.0) << " |\n";
  os << "\n## Ensemble mean vs Lindblad ODE\n\n"
     << "| model | sup error | worst margin | ok |\n|---|---|---|---|\n";
  for (const auto& m : j["mean_checks"])
    os << "| " << m.value("model", "") << " | " << m.value("sup_error", 0.0)
       << " | " << m.value("worst_margin", 0.0) << " | "
       << (m.value("ok", false) ? "pass" : "FAIL") << " |\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Run configuration (CLI + JSON config file).

struct RunConfig {
  std::string model = "homodyne-limit";
  double gamma0 = 1.0;
  double theta = 0.0;
  double rabi = 1.0;
  double epsilon = 0.1;
  double delta = 20.0;
  std::vector<double> epsilon_list = {0.4, 0.2, 0.1};
  std::vector<double> delta_list = {10.0, 40.0, 160.0};
  double t_final = 2.0;
  double dt = 1e-3;
  int n_traj = 10000;
  std::uint64_t seed = 20240917;
  Scheme scheme = Scheme::thinning_exact;
  int record_stride = 10;
  int threads = 0;
  std::vector<Observable> observables;     // empty: Bloch defaults for N=2
  std::vector<double> record_times;        // empty: {T/2, T}

  std::vector<Observable> effective_observables(int dim) const {
    if (!observables.empty()) return observables;
    if (dim == 2) return bloch_observables();
    return {};
  }

  std::vector<double> effective_record_times() const {
    if (!record_times.empty()) return record_times;
    return {t_final / 2.0, t_final};
  }
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  if (j.contains("model")) cfg.model = j["model"].get<std::string>();
  if (j.contains("gamma0")) cfg.gamma0 = j["gamma0"].get<double>();
  if (j.contains("theta")) cfg.theta = j["theta"].get<double>();
  if (j.contains("rabi")) cfg.rabi = j["rabi"].get<double>();
  if (j.contains("epsilon")) cfg.epsilon = j["epsilon"].get<double>();
  if (j.contains("delta")) cfg.delta = j["delta"].get<double>();
  if (j.contains("epsilon_list"))
    cfg.epsilon_list = j["epsilon_list"].get<std::vector<double>>();
  if (j.contains("delta_list"))
    cfg.delta_list = j["delta_list"].get<std::vector<double>>();
  if (j.contains("t_final")) cfg.t_final = j["t_final"].get<double>();
  if (j.contains("dt")) cfg.dt = j["dt"].get<double>();
  if (j.contains("n_traj")) cfg.n_traj = j["n_traj"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("record_stride"))
    cfg.record_stride = j["record_stride"].get<int>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  if (j.contains("scheme")) {
    const std::string s = j["scheme"].get<std::string>();
    if (s == "euler_bernoulli")
      cfg.scheme = Scheme::euler_bernoulli;
    else if (s == "thinning_exact")
      cfg.scheme = Scheme::thinning_exact;
    else
      throw Error("config: unknown scheme '" + s + "'");
  }
  if (j.contains("record_times"))
    cfg.record_times = j["record_times"].get<std::vector<double>>();
  if (j.contains("observables")) {
    for (const auto& o : j["observables"]) {
      if (o.is_string()) {
        const std::string name = o.get<std::string>();
        bool found = false;
        for (const auto& b : bloch_observables())
          if (b.label == name) {
            cfg.observables.push_back(b);
            found = true;
          }
        if (!found) throw Error("config: unknown observable '" + name + "'");
      } else {
        if (!o.contains("label") || !o.contains("matrix") || !o.contains("dim"))
          throw Error("config: observable objects need label, dim, matrix");
        const int dim = o["dim"].get<int>();
        Observable obs{o["label"].get<std::string>(),
                       matrix_from_json(o["matrix"], dim, "observable")};
        obs.validate();
        cfg.observables.push_back(obs);
      }
    }
  }
  return cfg;
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["model"] = cfg.model;
  j["gamma0"] = cfg.gamma0;
  j["theta"] = cfg.theta;
  j["rabi"] = cfg.rabi;
  j["epsilon"] = cfg.epsilon;
  j["delta"] = cfg.delta;
  j["epsilon_list"] = cfg.epsilon_list;
  j["delta_list"] = cfg.delta_list;
  j["t_final"] = cfg.t_final;
  j["dt"] = cfg.dt;
  j["n_traj"] = cfg.n_traj;
  j["seed"] = cfg.seed;
  j["scheme"] = scheme_name(cfg.scheme);
  j["record_stride"] = cfg.record_stride;
  j["record_times"] = cfg.effective_record_times();
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : cfg.observables) obs.push_back(o.label);
  j["observables"] = obs;
  return j;
}

/// Run metadata written next to every output set; the content hash makes
/// configs addressable like immutable objects.
inline nlohmann::json run_metadata(const RunConfig& cfg) {
  nlohmann::json meta;
  meta["seed"] = cfg.seed;
  meta["dt"] = cfg.dt;
  meta["scheme"] = scheme_name(cfg.scheme);
  meta["epsilon"] = cfg.epsilon;
  meta["config_sha1"] = sha1_hex(run_config_to_json(cfg).dump());
  return meta;
}

}  // namespace qsme
