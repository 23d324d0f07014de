#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace spinmetro::cli {

struct RunConfig {
  std::string subcommand;

  // grids
  std::vector<int> n_grid;
  std::vector<double> sigma_grid{0.1};

  // circuits
  int depth = 1;
  double c = -1.0;  // negative: per-protocol default
  std::string angle = "post_c";
  std::string rotation = "automatic";
  std::string carry = "residual";

  // estimation
  int ensembles = 2;
  std::string mode = "exact";
  int samples = 10;
  std::optional<std::uint64_t> seed;
  int first_sampled = 2;
  int gaussian_from = 0;
  int quadrature_nodes = 101;
  bool optimize_last = false;

  // robustness
  std::string study = "number";
  std::vector<std::string> distributions{"poisson", "binomial"};
  double binomial_p = 0.98;
  int number_samples = 200;
  std::vector<double> gammas{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> feedback_sigmas{0.0, 0.001, 0.01};
  int outer_samples = 10;
  int inner_samples = 1;
  std::string feedback_estimator = "est4";
  std::string feedback_model = "counter_rotation";

  // fit
  std::string fit_kind = "powerlaw";
  std::string input;
  double window_min = 0.0;
  double window_max = 1e300;
  double c_min = 0.1;
  double c_max = 1.3;
  int c_points = 25;

  // predict
  std::string formula = "chi-star";
  double s2 = 1.0;
  double chi = 0.0;
  double xi2 = 1.0;
  double carry_value = 0.0;
  int stage = 1;
  double w_z = 2.0;

  // qdist
  int polar_points = 91;
  int azimuth_points = 181;

  // execution and output
  int threads = 1;
  std::string out;

  nlohmann::json to_json() const;
};

// Every violated constraint as "field: message"; empty when valid.
std::vector<std::string> validate(const RunConfig& config);

// SHA-256 of the canonical JSON of every setting that affects results
// (threads and output paths excluded).
std::string config_hash(const RunConfig& config);

// Runs the configured study and writes the results CSV and the JSON record.
int run(const RunConfig& config);

// Full command-line entry point.
int main_entry(int argc, char** argv);

// "%.17g"
std::string format_double(double v);

}  // namespace spinmetro::cli
