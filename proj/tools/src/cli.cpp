#include "spinmetro/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include "spinmetro/analytic.hpp"
#include "spinmetro/errors.hpp"
#include "spinmetro/estimator.hpp"
#include "spinmetro/fitting.hpp"
#include "spinmetro/moments.hpp"
#include "spinmetro/robustness.hpp"
#include "spinmetro/schedule.hpp"

#ifndef SPINMETRO_VERSION
#define SPINMETRO_VERSION "unknown"
#endif

namespace spinmetro::cli {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json RunConfig::to_json() const {
  json j;
  j["subcommand"] = subcommand;
  j["n_grid"] = n_grid;
  j["sigma_grid"] = sigma_grid;
  j["depth"] = depth;
  j["c"] = c;
  j["angle"] = angle;
  j["rotation"] = rotation;
  j["carry"] = carry;
  j["ensembles"] = ensembles;
  j["mode"] = mode;
  j["samples"] = samples;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["first_sampled"] = first_sampled;
  j["gaussian_from"] = gaussian_from;
  j["quadrature_nodes"] = quadrature_nodes;
  j["optimize_last"] = optimize_last;
  j["study"] = study;
  j["distributions"] = distributions;
  j["binomial_p"] = binomial_p;
  j["number_samples"] = number_samples;
  j["gammas"] = gammas;
  j["feedback_sigmas"] = feedback_sigmas;
  j["outer_samples"] = outer_samples;
  j["inner_samples"] = inner_samples;
  j["feedback_estimator"] = feedback_estimator;
  j["feedback_model"] = feedback_model;
  j["fit_kind"] = fit_kind;
  j["input"] = input;
  j["window_min"] = window_min;
  j["window_max"] = window_max;
  j["c_min"] = c_min;
  j["c_max"] = c_max;
  j["c_points"] = c_points;
  j["formula"] = formula;
  j["s2"] = s2;
  j["chi"] = chi;
  j["xi2"] = xi2;
  j["carry_value"] = carry_value;
  j["stage"] = stage;
  j["w_z"] = w_z;
  j["polar_points"] = polar_points;
  j["azimuth_points"] = azimuth_points;
  j["threads"] = threads;
  j["out"] = out;
  return j;
}

std::string config_hash(const RunConfig& config) {
  json j = config.to_json();
  j.erase("threads");
  j.erase("out");
  const std::string text = j.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", digest[i]);
    hex += b;
  }
  return hex;
}

namespace {

const std::set<std::string> kSubcommands{"squeeze", "estimate", "robustness",
                                         "fit",     "predict",  "qdist"};
const std::set<std::string> kFormulas{"chi-star",    "xi2-min",    "min-variance", "tg-moments",
                                      "state1",      "state3",     "recursion",    "chi-rotated",
                                      "s2-pattern",  "chi-pattern", "weakly-ng",   "xibar2-tg",
                                      "xibar2-gss"};

bool uses_monte_carlo(const RunConfig& c) {
  if (c.subcommand == "estimate" && c.mode == "monte_carlo") return true;
  if (c.subcommand == "robustness" && (c.study == "number" || c.study == "feedback")) return true;
  return false;
}

bool needs_n_grid(const RunConfig& c) { return c.subcommand != "fit" || c.fit_kind == "kurtosis"; }

double default_c(const RunConfig& c) {
  if (c.c > 0.0) return c.c;
  return c.ensembles == 3 ? 0.35 : 0.7;
}

AngleSource parse_angle(const std::string& s) {
  if (s == "pre_c") return AngleSource::pre_c;
  if (s == "exact") return AngleSource::exact_min_variance;
  return AngleSource::post_c;
}

RotationMethod parse_rotation(const std::string& s) {
  if (s == "eigenbasis") return RotationMethod::eigenbasis;
  if (s == "chebyshev") return RotationMethod::chebyshev;
  return RotationMethod::automatic;
}

ScheduleOptions schedule_options(const RunConfig& c) {
  return {parse_angle(c.angle), parse_rotation(c.rotation)};
}

std::filesystem::path csv_path(const RunConfig& c) {
  return c.out.empty() ? std::filesystem::path(c.subcommand + ".csv")
                       : std::filesystem::path(c.out);
}

std::filesystem::path record_path(const RunConfig& c) {
  auto p = csv_path(c);
  p.replace_extension(".json");
  return p;
}

class CsvWriter {
 public:
  CsvWriter(std::vector<std::string> header, std::string hash)
      : header_(std::move(header)), hash_(std::move(hash)) {}

  void row(const std::vector<std::string>& cells) { rows_.push_back(cells); }

  std::string str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header_.size(); ++i) os << header_[i] << ',';
    os << "config_hash\n";
    for (const auto& r : rows_) {
      for (const auto& cell : r) os << cell << ',';
      os << hash_ << '\n';
    }
    return os.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::string hash_;
};

std::string f17(double v) { return format_double(v); }
std::string i2s(long long v) { return std::to_string(v); }

void write_outputs(const RunConfig& c, const CsvWriter& csv, const json& summary) {
  const auto path = csv_path(c);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << csv.str();
  }
  json rec;
  rec["config"] = c.to_json();
  rec["config_hash"] = config_hash(c);
  rec["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  rec["version"] = SPINMETRO_VERSION;
  rec["results_file"] = path.filename().string();
  rec["summary"] = summary;
  std::ofstream f(record_path(c), std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + record_path(c).string());
  f << rec.dump(2) << '\n';
}

std::vector<Point> to_points(const std::vector<int>& n, const std::vector<double>& y) {
  std::vector<Point> p;
  for (std::size_t i = 0; i < n.size(); ++i) p.push_back({static_cast<double>(n[i]), y[i]});
  return p;
}

int run_squeeze(const RunConfig& c, const std::string& hash) {
  const double cc = default_c(c);
  std::vector<double> xi2;
  std::vector<double> total;
  for (int n : c.n_grid) {
    const auto s = build_schedule(n, c.depth, cc, ScheduleContext::standalone(), schedule_options(c));
    xi2.push_back(wineland_xi2(compute_moments(prepare_state(s, parse_rotation(c.rotation)), false)));
    total.push_back(total_twist(s));
  }
  double mu = std::nan("");
  if (c.n_grid.size() >= 3) mu = -powerlaw_fit(to_points(c.n_grid, xi2)).exponent;
  CsvWriter csv({"N", "depth", "c", "xi2", "xi2_single_twist_closed_form", "total_twist", "mu"},
                hash);
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    csv.row({i2s(c.n_grid[i]), i2s(c.depth), f17(cc), f17(xi2[i]), f17(xi2_min_star(c.n_grid[i], 1.0)),
             f17(total[i]), f17(mu)});
  }
  write_outputs(c, csv, {{"mu", mu}});
  return 0;
}

ProtocolSpec make_protocol(const RunConfig& c, int n, double sigma) {
  ProtocolOptions o;
  o.c = default_c(c);
  o.single_depth = c.depth;
  o.carry = c.carry == "literal" ? CarryConvention::literal_product
                                 : CarryConvention::residual_variance;
  o.schedule = schedule_options(c);
  o.quadrature_nodes = c.quadrature_nodes;
  o.mode = c.mode == "monte_carlo" ? EstimatorMode::monte_carlo : EstimatorMode::exact;
  o.mc.samples = c.samples;
  o.mc.seed = c.seed.value_or(0);
  o.mc.first_sampled = c.first_sampled;
  o.mc.gaussian_from = c.gaussian_from;
  o.threads = c.threads;
  ProtocolSpec p = build_protocol(n, c.ensembles, sigma, o);
  if (c.optimize_last && p.ensembles.back().schedule) {
    const auto opt = optimize_last_ensemble(p, *p.ensembles.back().schedule);
    p.ensembles.back() = EnsembleSpec::squeezed(opt.schedule, o.schedule.rotation);
  }
  return p;
}

int run_estimate(const RunConfig& c, const std::string& hash) {
  struct Row {
    int n;
    double sigma;
    EstimationResult r;
  };
  std::vector<Row> rows;
  for (int n : c.n_grid) {
    for (double sigma : c.sigma_grid) {
      rows.push_back({n, sigma, estimate_error(make_protocol(c, n, sigma))});
    }
  }
  json fits = json::array();
  std::vector<double> nu(c.sigma_grid.size(), std::nan(""));
  if (c.n_grid.size() >= 3) {
    for (std::size_t s = 0; s < c.sigma_grid.size(); ++s) {
      NuSeries series{c.sigma_grid[s], {}};
      for (const auto& r : rows) {
        if (r.sigma == c.sigma_grid[s]) series.n_vs_error.push_back({double(r.n), r.r.delta_phi2});
      }
      const auto est = nu_vs_sigma(std::span<const NuSeries>(&series, 1), c.window_min, c.window_max);
      nu[s] = est[0].nu;
      fits.push_back({{"sigma", est[0].sigma},
                      {"nu", est[0].nu},
                      {"nu_stderr", est[0].nu_stderr},
                      {"window", {est[0].n_min, est[0].n_max}},
                      {"points", est[0].points}});
    }
  }
  CsvWriter csv({"N_total", "sigma", "ensembles", "mode", "delta_phi2", "stderr", "seed", "nu"},
                hash);
  for (const auto& r : rows) {
    std::size_t s = 0;
    while (c.sigma_grid[s] != r.sigma) ++s;
    csv.row({i2s(r.n), f17(r.sigma), i2s(c.ensembles), c.mode, f17(r.r.delta_phi2),
             f17(r.r.standard_error), c.seed ? std::to_string(*c.seed) : "", f17(nu[s])});
  }
  write_outputs(c, csv, {{"fits", fits}});
  return 0;
}

int run_robustness(const RunConfig& c, const std::string& hash) {
  CsvWriter csv({"study", "variant", "N_target", "parameter", "mean", "std", "seed"}, hash);
  const std::string seed = c.seed ? std::to_string(*c.seed) : "";
  const double cc = default_c(c);
  if (c.study == "number" || c.study == "contrast") {
    for (int n : c.n_grid) {
      const auto s = build_schedule(n, c.depth, cc, ScheduleContext::standalone(), schedule_options(c));
      const double xi2 = wineland_xi2(compute_moments(prepare_state(s), false));
      if (c.study == "number") {
        csv.row({"number", "noiseless", i2s(n), f17(0.0), f17(xi2), f17(0.0), seed});
        for (const auto& d : c.distributions) {
          const auto dist = d == "poisson"    ? NumberDistribution::poisson(n)
                            : d == "binomial" ? NumberDistribution::binomial(n, c.binomial_p)
                                              : NumberDistribution::delta(n);
          const auto st = number_fluctuation_xi2(s, dist, c.number_samples, c.seed.value_or(0),
                                                 c.threads);
          csv.row({"number", d, i2s(n), f17(d == "binomial" ? c.binomial_p : 0.0), f17(st.mean),
                   f17(st.std), seed});
        }
      } else {
        for (double g : c.gammas) {
          csv.row({"contrast", "gamma", i2s(n), f17(g), f17(contrast_adjusted_xi2(xi2, s, g)),
                   f17(0.0), seed});
        }
      }
    }
  } else {
    FeedbackNoise fb;
    fb.outer_samples = c.outer_samples;
    fb.inner_samples = c.inner_samples;
    fb.seed = c.seed.value_or(0);
    fb.estimator = c.feedback_estimator == "est1"   ? FeedbackEstimator::est1
                   : c.feedback_estimator == "est2" ? FeedbackEstimator::est2
                   : c.feedback_estimator == "est3" ? FeedbackEstimator::est3
                                                    : FeedbackEstimator::est4;
    fb.model = c.feedback_model == "recorded_applied" ? FeedbackModel::recorded_applied
                                                      : FeedbackModel::counter_rotation_only;
    for (int n : c.n_grid) {
      const auto p = make_protocol(c, n, c.sigma_grid.front());
      for (double sf : c.feedback_sigmas) {
        fb.sigma_fb = sf;
        const auto r = feedback_error(p, fb);
        csv.row({"feedback", c.feedback_estimator, i2s(n), f17(sf), f17(r.delta_phi2),
                 f17(r.standard_error), seed});
      }
    }
  }
  write_outputs(c, csv, json::object());
  return 0;
}

std::vector<Point> read_xy(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("fit: cannot read input " + path);
  std::vector<Point> pts;
  std::string line;
  std::getline(f, line);  // header
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',')) {
      throw InvalidArgument("fit: " + path + " line " + std::to_string(lineno) +
                            ": expected x,y");
    }
    pts.push_back({std::stod(a), std::stod(b)});
  }
  return pts;
}

int run_fit(const RunConfig& c, const std::string& hash) {
  if (c.fit_kind == "powerlaw") {
    auto pts = read_xy(c.input);
    std::erase_if(pts, [&](const Point& p) { return p.x < c.window_min || p.x > c.window_max; });
    const auto f = powerlaw_fit(pts);
    CsvWriter csv({"kind", "exponent", "exponent_stderr", "log_prefactor", "residual_rms",
                   "points", "window_min", "window_max"},
                  hash);
    csv.row({"powerlaw", f17(f.exponent), f17(f.exponent_stderr), f17(f.log_prefactor),
             f17(f.residual_rms), i2s(f.points), f17(c.window_min), f17(c.window_max)});
    write_outputs(c, csv, {{"exponent", f.exponent}});
    return 0;
  }
  // Sigmoid-exponential fit of Kurt[J_y] against c, read from a file or swept.
  std::vector<std::pair<int, std::vector<Point>>> series;
  if (c.fit_kind == "sigmoid") {
    series.push_back({0, read_xy(c.input)});
  } else {
    for (int n : c.n_grid) {
      std::vector<Point> pts;
      for (int i = 0; i < c.c_points; ++i) {
        const double cc =
            c.c_points == 1 ? c.c_min : c.c_min + (c.c_max - c.c_min) * i / (c.c_points - 1);
        const auto s = build_single_twist(n, cc, schedule_options(c));
        pts.push_back({cc, kurtosis(prepare_state(s), Axis::y)});
      }
      series.push_back({n, pts});
    }
  }
  CsvWriter csv({"kind", "N", "c", "kurtosis", "p1", "p2", "p3", "p4", "converged", "residual_rms"},
                hash);
  json summary = json::array();
  for (const auto& [n, pts] : series) {
    const auto f = sigmoid_exp_fit(pts);
    for (const auto& p : pts) {
      csv.row({c.fit_kind, i2s(n), f17(p.x), f17(p.y), f17(f.p1), f17(f.p2), f17(f.p3), f17(f.p4),
               f.converged ? "1" : "0", f17(f.residual_rms)});
    }
    summary.push_back({{"N", n}, {"p4", f.p4}, {"converged", f.converged}});
  }
  write_outputs(c, csv, summary);
  return 0;
}

int run_predict(const RunConfig& c, const std::string& hash) {
  CsvWriter csv({"formula", "N", "sigma", "quantity", "value"}, hash);
  for (int n : c.n_grid) {
    for (double sigma : c.sigma_grid) {
      std::vector<std::pair<std::string, double>> q;
      const std::string& f = c.formula;
      if (f == "chi-star") {
        const auto v = chi_star_unrotated(n, c.s2);
        q = {{"chi_star", v.value}, {"out_of_regime", v.out_of_regime ? 1.0 : 0.0}};
      } else if (f == "xi2-min") {
        q = {{"xi2_min", xi2_min_star(n, c.s2)}};
      } else if (f == "min-variance") {
        q = {{"min_variance", min_variance_star(n, c.s2)}};
      } else if (f == "tg-moments") {
        const auto t = tg_moments(n, c.s2, c.chi);
        q = {{"jx_mean", t.jx_mean}, {"a_coef", t.a_coef},   {"b_coef", t.b_coef},
             {"v_plus", t.v_plus},   {"v_minus", t.v_minus}, {"theta_star", t.theta_star},
             {"var_x", t.var_x}};
      } else if (f == "state1") {
        q = {{"chi_root", solve_state1(n, c.xi2)}};
      } else if (f == "state3") {
        q = {{"chi_root", solve_state3(n, c.xi2, c.carry_value)}};
      } else if (f == "recursion") {
        const auto r = tg_recursion(n, c.s2, sigma, c.stage);
        q = {{"s2_next", r.s2}, {"xibar2", r.xibar2}, {"chi_star", r.chi_star}};
      } else if (f == "chi-rotated") {
        q = {{"chi_star", chi_star_rotated(n, c.s2, sigma)}};
      } else if (f == "s2-pattern") {
        q = {{"s2", s2_pattern(c.stage, n)}};
      } else if (f == "chi-pattern") {
        q = {{"chi", chi_pattern(c.stage, n)}};
      } else if (f == "weakly-ng") {
        const auto o = weakly_ng_optimum(n, sigma, c.w_z);
        q = {{"delta_jy2_opt", o.delta_jy2_opt}, {"xi2_opt", o.xi2_opt}, {"xibar2_opt", o.xibar2_opt}};
      } else if (f == "xibar2-tg") {
        q = {{"xibar2", xibar2_tg(n, c.s2, c.chi, sigma)},
             {"xibar2_taylor", xibar2_tg_taylor(n, c.s2, c.chi, sigma)}};
      } else if (f == "xibar2-gss") {
        q = {{"xibar2", xibar2_gss(n, c.s2, sigma)}};
      }
      for (const auto& [name, v] : q) {
        csv.row({f, i2s(n), f17(sigma), name, f17(v)});
        std::cout << f << " N=" << n << " sigma=" << sigma << ' ' << name << " = " << f17(v)
                  << '\n';
      }
    }
  }
  write_outputs(c, csv, json::object());
  return 0;
}

int run_qdist(const RunConfig& c, const std::string& hash) {
  const int n = c.n_grid.front();
  const CollectiveState psi =
      c.depth == 0 ? coherent_x(n)
                   : prepare_state(build_schedule(n, c.depth, default_c(c),
                                                  ScheduleContext::standalone(), schedule_options(c)));
  std::vector<SpherePoint> grid;
  for (int i = 0; i < c.polar_points; ++i) {
    const double pol = c.polar_points == 1 ? 0.5 * std::numbers::pi
                                           : std::numbers::pi * i / (c.polar_points - 1);
    for (int k = 0; k < c.azimuth_points; ++k) {
      const double az = c.azimuth_points == 1
                            ? 0.0
                            : -std::numbers::pi + 2.0 * std::numbers::pi * k / (c.azimuth_points - 1);
      grid.push_back({pol, az});
    }
  }
  const auto q = husimi_q(psi, grid);
  CsvWriter csv({"polar", "azimuth", "q"}, hash);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv.row({f17(grid[i].polar), f17(grid[i].azimuth), f17(q[i])});
  }
  write_outputs(c, csv, {{"N", n}, {"depth", c.depth}});
  return 0;
}

}  // namespace

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> d;
  if (!kSubcommands.count(c.subcommand)) d.push_back("subcommand: unknown '" + c.subcommand + "'");
  if (needs_n_grid(c) && c.n_grid.empty()) d.push_back("n: grid is empty");
  for (int n : c.n_grid) {
    if (n < 2) d.push_back("n: every N must be >= 2 (got " + std::to_string(n) + ")");
  }
  if (c.sigma_grid.empty()) d.push_back("sigma: grid is empty");
  for (double s : c.sigma_grid) {
    if (!(s >= 0.0)) d.push_back("sigma: values must be >= 0");
  }
  if (c.c > 1.0 || c.c == 0.0) d.push_back("c: must lie in (0, 1]");
  if (c.depth < 0) d.push_back("depth: must be >= 0");
  if (c.subcommand != "qdist" && c.subcommand != "predict" && c.depth < 1) {
    d.push_back("depth: must be >= 1");
  }
  if (c.quadrature_nodes < 1) d.push_back("quadrature-nodes: must be >= 1");
  if (c.threads < 1) d.push_back("threads: must be >= 1");
  if (c.samples < 1) d.push_back("samples: must be >= 1");
  if (c.mode != "exact" && c.mode != "monte_carlo") d.push_back("mode: exact or monte_carlo");
  if (uses_monte_carlo(c) && !c.seed) d.push_back("seed: required by the selected sampling mode");
  if (c.subcommand == "estimate" || (c.subcommand == "robustness" && c.study == "feedback")) {
    if (c.ensembles < 1 || c.ensembles > 4) {
      d.push_back("ensembles: must be 1, 2, 3 or 4");
    } else {
      for (int n : c.n_grid) {
        try {
          allocate_ensembles(n, c.ensembles);
        } catch (const InvalidAllocation&) {
          d.push_back("n: N=" + std::to_string(n) + " cannot be split into " +
                      std::to_string(c.ensembles) +
                      " ensembles (allocation floor(N/5), floor(N/20), floor(N/50) rule needs every size >= 2)");
        }
      }
    }
    if (c.subcommand == "robustness" && c.ensembles < 2) d.push_back("ensembles: feedback needs >= 2");
  }
  if (c.subcommand == "robustness") {
    if (c.study != "number" && c.study != "feedback" && c.study != "contrast") {
      d.push_back("study: number, feedback or contrast");
    }
    if (!(c.binomial_p > 0.0 && c.binomial_p <= 1.0)) d.push_back("binomial-p: must lie in (0, 1]");
    for (const auto& k : c.distributions) {
      if (k != "poisson" && k != "binomial" && k != "delta") {
        d.push_back("distributions: unknown kind '" + k + "'");
      }
    }
    for (double g : c.gammas) {
      if (!(g >= 0.0)) d.push_back("gamma: values must be >= 0");
    }
    for (double s : c.feedback_sigmas) {
      if (!(s >= 0.0)) d.push_back("feedback-sigma: values must be >= 0");
    }
    if (c.outer_samples < 1 || c.inner_samples < 1) d.push_back("outer/inner samples: must be >= 1");
  }
  if (c.subcommand == "fit") {
    if (c.fit_kind != "powerlaw" && c.fit_kind != "sigmoid" && c.fit_kind != "kurtosis") {
      d.push_back("kind: powerlaw, sigmoid or kurtosis");
    }
    if ((c.fit_kind == "powerlaw" || c.fit_kind == "sigmoid") && c.input.empty()) {
      d.push_back("input: required for kind " + c.fit_kind);
    }
    if (c.fit_kind == "kurtosis" && c.c_points < 8) d.push_back("c-points: need at least 8");
  }
  if (c.window_min > c.window_max) d.push_back("window: min exceeds max");
  if (c.subcommand == "predict" && !kFormulas.count(c.formula)) {
    d.push_back("formula: unknown '" + c.formula + "'");
  }
  if (c.subcommand == "qdist" && (c.polar_points < 1 || c.azimuth_points < 1)) {
    d.push_back("polar/azimuth points: must be >= 1");
  }
  return d;
}

int run(const RunConfig& config) {
  const auto diagnostics = validate(config);
  if (!diagnostics.empty()) {
    for (const auto& m : diagnostics) std::cerr << "invalid config: " << m << '\n';
    return 2;
  }
  const std::string hash = config_hash(config);
  const auto& s = config.subcommand;
  try {
    if (s == "squeeze") return run_squeeze(config, hash);
    if (s == "estimate") return run_estimate(config, hash);
    if (s == "robustness") return run_robustness(config, hash);
    if (s == "fit") return run_fit(config, hash);
    if (s == "predict") return run_predict(config, hash);
    if (s == "qdist") return run_qdist(config, hash);
  } catch (const NoRootError& e) {
    std::cerr << "analytic/schedule: " << e.what() << " bracket [" << e.bracket_lo() << ", "
              << e.bracket_hi() << "]\n";
    return 3;
  } catch (const BudgetExceeded& e) {
    std::cerr << "estimator: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << s << ": " << e.what() << '\n';
    return 3;
  }
  return 2;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Collective-spin squeezing and adaptive phase-estimation toolkit"};
  app.set_config("--config", "", "Key-value configuration file (flags override it)");
  app.require_subcommand(1);
  RunConfig cfg;
  std::uint64_t seed = 0;
  bool dry_run = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--n", cfg.n_grid, "Particle numbers")->delimiter(',');
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--threads", cfg.threads, "Worker threads");
    sub->add_option("--quadrature-nodes", cfg.quadrature_nodes, "Gauss-Hermite nodes");
    sub->add_option("--out", cfg.out, "Results CSV path (record written next to it as .json)");
    sub->add_flag("--dry-run,--validate", dry_run, "Only validate the configuration");
    sub->add_option("--depth", cfg.depth, "Twists per ensemble");
    sub->add_option("--c", cfg.c, "Scale applied to all but the last twist");
    sub->add_option("--angle", cfg.angle, "post_c | pre_c | exact");
    sub->add_option("--rotation", cfg.rotation, "automatic | eigenbasis | chebyshev");
    sub->add_option("--sigma", cfg.sigma_grid, "Prior standard deviations")->delimiter(',');
  };

  auto* sq = app.add_subcommand("squeeze", "xi^2 of multi-twist states over an N grid");
  common(sq);
  auto* est = app.add_subcommand("estimate", "Bayesian mean squared error of adaptive protocols");
  common(est);
  for (auto* sub : {est}) {
    sub->add_option("--ensembles", cfg.ensembles, "Number of ensembles M");
    sub->add_option("--mode", cfg.mode, "exact | monte_carlo");
    sub->add_option("--samples", cfg.samples, "Monte Carlo samples per branch (L)");
    sub->add_option("--first-sampled", cfg.first_sampled, "First sampled ensemble (1-based)");
    sub->add_option("--gaussian-from", cfg.gaussian_from,
                    "First ensemble sampled from the Gaussian approximation (0 = none)");
    sub->add_option("--carry", cfg.carry, "residual | literal");
    sub->add_flag("--optimize-last", cfg.optimize_last, "Nelder-Mead polish of the last ensemble");
    sub->add_option("--n-grid", cfg.n_grid, "Alias of --n")->delimiter(',');
    sub->add_option("--window-min", cfg.window_min, "Lower N bound of the nu fit");
    sub->add_option("--window-max", cfg.window_max, "Upper N bound of the nu fit");
  }
  auto* rob = app.add_subcommand("robustness", "Number, feedback and contrast imperfections");
  common(rob);
  rob->add_option("--study", cfg.study, "number | feedback | contrast");
  rob->add_option("--distributions", cfg.distributions, "poisson,binomial,delta")->delimiter(',');
  rob->add_option("--binomial-p", cfg.binomial_p, "Binomial success probability");
  rob->add_option("--number-samples", cfg.number_samples, "Particle-number draws");
  rob->add_option("--gamma", cfg.gammas, "Contrast-loss rates")->delimiter(',');
  rob->add_option("--feedback-sigma", cfg.feedback_sigmas, "Feedback noise levels")->delimiter(',');
  rob->add_option("--outer-samples", cfg.outer_samples, "L_O");
  rob->add_option("--inner-samples", cfg.inner_samples, "L_I");
  rob->add_option("--estimator", cfg.feedback_estimator, "est1 | est2 | est3 | est4");
  rob->add_option("--feedback-model", cfg.feedback_model, "counter_rotation | recorded_applied");
  rob->add_option("--ensembles", cfg.ensembles, "Number of ensembles M");
  rob->add_option("--mode", cfg.mode, "exact | monte_carlo");
  rob->add_option("--samples", cfg.samples, "Monte Carlo samples per branch (L)");
  rob->add_option("--carry", cfg.carry, "residual | literal");

  auto* fit = app.add_subcommand("fit", "Power-law and sigmoid-exponential fits");
  common(fit);
  fit->add_option("--kind", cfg.fit_kind, "powerlaw | sigmoid | kurtosis");
  fit->add_option("--input", cfg.input, "CSV with header and x,y columns");
  fit->add_option("--window-min", cfg.window_min, "Lower x bound");
  fit->add_option("--window-max", cfg.window_max, "Upper x bound");
  fit->add_option("--c-min", cfg.c_min, "Sweep start");
  fit->add_option("--c-max", cfg.c_max, "Sweep end");
  fit->add_option("--c-points", cfg.c_points, "Sweep points");

  auto* pred = app.add_subcommand("predict", "Closed-form predictions");
  common(pred);
  pred->add_option("--formula", cfg.formula, "chi-star | xi2-min | tg-moments | state1 | ...");
  pred->add_option("--s2", cfg.s2, "GSS width s^2");
  pred->add_option("--chi", cfg.chi, "Twist angle");
  pred->add_option("--xi2", cfg.xi2, "Previous xi^2 for root equations");
  pred->add_option("--carry", cfg.carry_value, "Carry coefficient for state3");
  pred->add_option("--stage", cfg.stage, "Recursion stage / pattern index j");
  pred->add_option("--w-z", cfg.w_z, "Kurtosis bound W_z");

  auto* qd = app.add_subcommand("qdist", "Husimi Q distribution on a sphere grid");
  common(qd);
  qd->add_option("--polar-points", cfg.polar_points, "Polar grid size");
  qd->add_option("--azimuth-points", cfg.azimuth_points, "Azimuth grid size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (auto* sub : app.get_subcommands()) cfg.subcommand = sub->get_name();
  auto* chosen = app.get_subcommands().front();
  if (chosen->count("--seed") > 0) cfg.seed = seed;
  if (cfg.subcommand == "qdist" && chosen->count("--depth") == 0) cfg.depth = 0;

  if (dry_run) {
    const auto diagnostics = validate(cfg);
    for (const auto& m : diagnostics) std::cout << m << '\n';
    if (diagnostics.empty()) std::cout << "ok " << config_hash(cfg) << '\n';
    return diagnostics.empty() ? 0 : 2;
  }
  return run(cfg);
}

}  // namespace spinmetro::cli
