#include "spinmetro/estimator.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "spinmetro/errors.hpp"
#include "spinmetro/parallel.hpp"
#include "spinmetro/quadrature.hpp"
#include "spinmetro/random.hpp"

namespace spinmetro {

namespace {

constexpr std::size_t kChunk = 128;

struct Branch {
  double w;
  double e;    // phi minus the recorded estimate so far
  double rho;  // phi minus the counter-rotation applied so far
  std::size_t path;
  std::uint64_t key;
};

struct Coeffs {
  double a = 0, sc = 0, ss = 0, cc = 0, s2 = 0, sx = 0, weight = 0;
  std::size_t count = 0;

  void add(double w, double e, double rho) {
    const double c = std::cos(rho);
    const double s = std::sin(rho);
    a += w * e * e;
    sc += w * e * c;
    ss += w * e * s;
    cc += w * c * c;
    s2 += w * s * s;
    sx += w * s * c;
    weight += w;
    ++count;
  }
  Coeffs& operator+=(const Coeffs& o) {
    a += o.a;
    sc += o.sc;
    ss += o.ss;
    cc += o.cc;
    s2 += o.s2;
    sx += o.sx;
    weight += o.weight;
    count += o.count;
    return *this;
  }
};

ErrorOperator to_operator(const Coeffs& k, int n, double scale = 1.0) {
  const double nn = n;
  ErrorOperator w;
  w.n_particles = n;
  w.a = scale * k.a;
  w.by = -scale * 4.0 / nn * k.sc;
  w.bx = -scale * 4.0 / nn * k.ss;
  w.cyy = scale * 4.0 / (nn * nn) * k.cc;
  w.cxx = scale * 4.0 / (nn * nn) * k.s2;
  w.cxy = scale * 4.0 / (nn * nn) * k.sx;
  return w;
}

struct Level {
  int n = 0;
  const Eigen::VectorXcd* psi = nullptr;
  std::shared_ptr<const RotationCache> cache;
  MomentSet moments;
};

Level make_level(const EnsembleSpec& ens, bool need_cache) {
  Level l;
  l.n = ens.n_particles;
  l.psi = &ens.state.amplitudes();
  if (need_cache) l.cache = RotationCache::shared(l.n);
  l.moments = compute_moments(ens.state, false);
  return l;
}

// P(i, b) = |<J_y = m_i| R_z(rho_b) |psi>|^2 for `count` consecutive branches.
Eigen::MatrixXd outcome_probabilities(const Level& lv, const Branch* br, std::size_t count) {
  const int n = lv.n;
  const Eigen::Index d = n + 1;
  const Eigen::Index cols = static_cast<Eigen::Index>(count);
  Eigen::MatrixXd z(d, 2 * cols);
  const auto& psi = *lv.psi;
  for (Eigen::Index b = 0; b < cols; ++b) {
    const double alpha = 0.5 * std::numbers::pi - br[b].rho;
    for (Eigen::Index k = 0; k < d; ++k) {
      const cplx v = std::polar(1.0, alpha * (static_cast<double>(k) - 0.5 * n)) * psi[k];
      z(k, b) = v.real();
      z(k, cols + b) = v.imag();
    }
  }
  const Eigen::MatrixXd r = lv.cache->x_basis().transpose() * z;
  return r.leftCols(cols).cwiseAbs2() + r.rightCols(cols).cwiseAbs2();
}

template <class Sink>
void emit(const Branch& parent, double weight, double estimate, int level,
          std::size_t parent_index, std::uint64_t tag, const CounterRotationNoise* noise,
          Sink&& sink) {
  const double e = parent.e - estimate;
  const double rho = parent.rho - estimate;
  const std::uint64_t key = hash_combine(parent.key, tag);
  if (noise == nullptr || (noise->fanout <= 1 && !noise->offset)) {
    sink(Branch{weight, e, rho, parent.path, key});
    return;
  }
  const int f = std::max(1, noise->fanout);
  for (int c = 0; c < f; ++c) {
    const double r = noise->offset ? noise->offset(level, parent_index, c) : 0.0;
    sink(Branch{weight / f, noise->corrupt_estimate ? e - r : e, rho - r, parent.path,
                hash_combine(key, static_cast<std::uint64_t>(c))});
  }
}

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

// Sums every outcome of one ensemble. With `acc` set the children are folded
// into error-operator coefficients instead of being stored.
void expand_exact(const std::vector<Branch>& parents, const Level& lv, int level, double threshold,
                  const CounterRotationNoise* noise, int threads, std::vector<Branch>* out,
                  Coeffs* acc) {
  const std::size_t chunks = chunk_count(parents.size());
  std::vector<std::vector<Branch>> outs(acc ? 0 : chunks);
  std::vector<Coeffs> accs(acc ? chunks : 0);
  const int n = lv.n;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t cnt = std::min(kChunk, parents.size() - begin);
    const Eigen::MatrixXd p = outcome_probabilities(lv, parents.data() + begin, cnt);
    auto sink_store = [&](const Branch& b) { outs[c].push_back(b); };
    auto sink_fold = [&](const Branch& b) { accs[c].add(b.w, b.e, b.rho); };
    for (std::size_t b = 0; b < cnt; ++b) {
      const Branch& pb = parents[begin + b];
      for (int i = 0; i <= n; ++i) {
        const double cw = pb.w * p(i, static_cast<Eigen::Index>(b));
        if (cw < threshold) continue;
        const double est = 2.0 * (i - 0.5 * n) / n;
        if (acc) {
          emit(pb, cw, est, level, begin + b, static_cast<std::uint64_t>(i), noise, sink_fold);
        } else {
          emit(pb, cw, est, level, begin + b, static_cast<std::uint64_t>(i), noise, sink_store);
        }
      }
    }
  });
  if (acc) {
    for (const auto& a : accs) *acc += a;
  } else {
    out->clear();
    std::size_t total = 0;
    for (const auto& o : outs) total += o.size();
    out->reserve(total);
    for (auto& o : outs) out->insert(out->end(), o.begin(), o.end());
  }
}

int sample_inverse_cdf(const Eigen::MatrixXd& p, Eigen::Index col, double u) {
  const Eigen::Index d = p.rows();
  Eigen::Index mode = 0;
  p.col(col).maxCoeff(&mode);
  const double target = u * p.col(col).sum();
  double cum = p(mode, col);
  if (cum >= target) return static_cast<int>(mode);
  Eigen::Index lo = mode - 1, hi = mode + 1;
  Eigen::Index last = mode;
  while (lo >= 0 || hi < d) {
    if (hi < d) {
      cum += p(hi, col);
      last = hi++;
      if (cum >= target) return static_cast<int>(last);
    }
    if (lo >= 0) {
      cum += p(lo, col);
      last = lo--;
      if (cum >= target) return static_cast<int>(last);
    }
  }
  return static_cast<int>(last);
}

// One sampled outcome per branch.
void expand_sampled(const std::vector<Branch>& parents, const Level& lv, int level, bool gaussian,
                    std::uint64_t seed, const CounterRotationNoise* noise, int threads,
                    std::vector<Branch>* out) {
  const std::size_t chunks = chunk_count(parents.size());
  std::vector<std::vector<Branch>> outs(chunks);
  const int n = lv.n;
  const auto& mo = lv.moments;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t cnt = std::min(kChunk, parents.size() - begin);
    Eigen::MatrixXd p;
    if (!gaussian) p = outcome_probabilities(lv, parents.data() + begin, cnt);
    auto sink = [&](const Branch& b) { outs[c].push_back(b); };
    for (std::size_t b = 0; b < cnt; ++b) {
      const Branch& pb = parents[begin + b];
      int i = 0;
      if (gaussian) {
        const double cr = std::cos(pb.rho), sr = std::sin(pb.rho);
        const double mean = cr * mo.jy + sr * mo.jx;
        const double second = cr * cr * mo.jy2 + sr * sr * mo.jx2 + 2.0 * sr * cr * mo.sym_xy;
        const double sd = std::sqrt(std::max(0.0, second - mean * mean));
        const double x = mean + 0.5 * n + sd * standard_normal(seed, pb.key, level);
        i = static_cast<int>(std::clamp(std::nearbyint(x), 0.0, static_cast<double>(n)));
      } else {
        i = sample_inverse_cdf(p, static_cast<Eigen::Index>(b), uniform_open(seed, pb.key, level));
      }
      const double est = 2.0 * (i - 0.5 * n) / n;
      emit(pb, pb.w, est, level, begin + b, 0x5a5a0000ULL + static_cast<std::uint64_t>(level),
           noise, sink);
    }
  });
  out->clear();
  for (auto& o : outs) out->insert(out->end(), o.begin(), o.end());
}

void validate(const ProtocolSpec& p) {
  if (p.ensembles.empty()) throw InvalidArgument("protocol: no ensembles");
  if (!(p.prior_sigma >= 0.0)) throw InvalidArgument("protocol: prior_sigma must be >= 0");
  if (p.quadrature_nodes < 1) throw InvalidArgument("protocol: quadrature_nodes must be >= 1");
  for (std::size_t k = 0; k < p.ensembles.size(); ++k) {
    const auto& e = p.ensembles[k];
    if (e.n_particles != e.state.n_particles()) {
      throw InvalidArgument("protocol: ensemble " + std::to_string(k + 1) + " size mismatch");
    }
    if (k > 0 && e.n_particles < p.ensembles[k - 1].n_particles) {
      throw InvalidArgument("protocol: ensemble sizes must be nondecreasing");
    }
  }
}

std::vector<Branch> prior_branches(const ProtocolSpec& p) {
  const auto rule = gaussian_prior_rule(p.quadrature_nodes, p.prior_sigma, p.prior_mean);
  std::vector<Branch> out;
  out.reserve(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double r = rule[q].phi - p.initial_estimate;
    out.push_back({rule[q].weight, r, r, 0, mix64(q)});
  }
  return out;
}

Coeffs exact_coeffs(const ProtocolSpec& p, const CounterRotationNoise* noise) {
  validate(p);
  const std::size_t m = p.ensembles.size();
  std::vector<Branch> branches = prior_branches(p);
  Coeffs acc;
  if (m == 1) {
    for (const auto& b : branches) acc.add(b.w, b.e, b.rho);
    return acc;
  }
  double terms = 0.0;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const Level lv = make_level(p.ensembles[k], true);
    terms += static_cast<double>(branches.size()) * (lv.n + 1);
    if (terms > p.branch_budget) {
      throw BudgetExceeded("exact evaluation needs more than " + std::to_string(p.branch_budget) +
                           " branch terms; use monte_carlo mode");
    }
    const bool fold = k + 2 == m;
    std::vector<Branch> next;
    expand_exact(branches, lv, static_cast<int>(k + 1), p.prune_threshold, noise, p.threads,
                 fold ? nullptr : &next, fold ? &acc : nullptr);
    if (!fold) branches.swap(next);
  }
  return acc;
}

struct PathCoeffs {
  std::vector<Coeffs> paths;
  std::size_t roots = 0;
  int samples = 1;
};

PathCoeffs monte_carlo_coeffs(const ProtocolSpec& p, const CounterRotationNoise* noise) {
  validate(p);
  const int m = static_cast<int>(p.ensembles.size());
  const int fs = std::max(1, p.mc.first_sampled);
  const int lsz = p.mc.samples;
  if (lsz < 1) throw InvalidArgument("monte_carlo: samples must be >= 1");
  std::vector<Branch> branches = prior_branches(p);
  // Ensembles 1 .. fs-1 are summed exactly.
  for (int k = 1; k < fs && k < m; ++k) {
    const Level lv = make_level(p.ensembles[k - 1], true);
    std::vector<Branch> next;
    expand_exact(branches, lv, k, p.prune_threshold, noise, p.threads, &next, nullptr);
    branches.swap(next);
  }
  PathCoeffs out;
  out.roots = branches.size();
  out.samples = lsz;
  std::vector<Branch> paths;
  paths.reserve(branches.size() * lsz);
  for (std::size_t r = 0; r < branches.size(); ++r) {
    for (int l = 0; l < lsz; ++l) {
      Branch b = branches[r];
      b.path = r * lsz + l;
      b.key = hash_combine(mix64(r), static_cast<std::uint64_t>(l));
      paths.push_back(b);
    }
  }
  for (int k = fs; k < m; ++k) {
    const bool gaussian = p.mc.gaussian_from > 0 && k >= p.mc.gaussian_from;
    const Level lv = make_level(p.ensembles[k - 1], !gaussian);
    std::vector<Branch> next;
    expand_sampled(paths, lv, k, gaussian, p.mc.seed, noise, p.threads, &next);
    paths.swap(next);
  }
  out.paths.assign(out.roots * lsz, Coeffs{});
  for (const auto& b : paths) out.paths[b.path].add(b.w, b.e, b.rho);
  return out;
}

}  // namespace

int ProtocolSpec::total_particles() const {
  int t = 0;
  for (const auto& e : ensembles) t += e.n_particles;
  return t;
}

EnsembleSpec EnsembleSpec::unsqueezed(int n_particles) {
  return {n_particles, std::nullopt, coherent_x(n_particles)};
}

EnsembleSpec EnsembleSpec::squeezed(TwistSchedule schedule, RotationMethod method) {
  const int n = schedule.n_particles;
  CollectiveState s = prepare_state(schedule, method);
  return {n, std::move(schedule), std::move(s)};
}

std::vector<int> allocate_ensembles(int n_total, int m) {
  std::vector<int> sizes;
  switch (m) {
    case 1:
      sizes = {n_total};
      break;
    case 2:
      sizes = {n_total / 5, n_total - n_total / 5};
      break;
    case 3: {
      const int n1 = n_total / 20;
      sizes = {n1, 4 * n1, n_total - 5 * n1};
      break;
    }
    case 4: {
      const int n1 = n_total / 50;
      sizes = {n1, 4 * n1, 12 * n1, n_total - 17 * n1};
      break;
    }
    default:
      throw InvalidAllocation("allocate_ensembles: M must be 1, 2, 3 or 4");
  }
  for (int s : sizes) {
    if (s < 2) {
      throw InvalidAllocation("allocate_ensembles: N=" + std::to_string(n_total) +
                              " with M=" + std::to_string(m) + " gives an ensemble below 2");
    }
  }
  return sizes;
}

ProtocolSpec build_protocol(int n_total, int m, double prior_sigma,
                            const ProtocolOptions& options) {
  const auto sizes = allocate_ensembles(n_total, m);
  ProtocolSpec p;
  p.prior_sigma = prior_sigma;
  p.quadrature_nodes = options.quadrature_nodes;
  p.mode = options.mode;
  p.mc = options.mc;
  p.threads = options.threads;
  if (m == 1) {
    p.ensembles.push_back(EnsembleSpec::squeezed(
        build_schedule(sizes[0], options.single_depth, options.c, ScheduleContext::standalone(),
                       options.schedule),
        options.schedule.rotation));
    return p;
  }
  p.ensembles.push_back(EnsembleSpec::unsqueezed(sizes[0]));
  // Residual prior variance after ensemble 1; Xi^2 of a coherent state is 1.
  double xibar2 = 1.0;
  double v = xibar2 / sizes[0];
  for (int k = 1; k < m; ++k) {
    const double carry = options.carry == CarryConvention::residual_variance
                             ? v
                             : sizes[k - 1] * xibar2;
    auto sched = build_schedule(sizes[k], k, options.c,
                                ScheduleContext::chained(prior_sigma, carry), options.schedule);
    p.ensembles.push_back(EnsembleSpec::squeezed(std::move(sched), options.schedule.rotation));
    xibar2 = rotated_xibar2(compute_moments(p.ensembles.back().state, false), std::sqrt(v));
    v = xibar2 / sizes[k];
  }
  return p;
}

std::vector<double> conditional_outcome_dist(const CollectiveState& state, double residual) {
  Level lv;
  lv.n = state.n_particles();
  lv.psi = &state.amplitudes();
  lv.cache = RotationCache::shared(lv.n);
  const Branch b{1.0, residual, residual, 0, 0};
  const Eigen::MatrixXd p = outcome_probabilities(lv, &b, 1);
  std::vector<double> out(p.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) total += p(i, 0);
  for (Eigen::Index i = 0; i < p.rows(); ++i) out[i] = p(i, 0) / total;
  return out;
}

double ErrorOperator::expectation(const MomentSet& m) const {
  return a + bx * m.jx + by * m.jy + cxx * m.jx2 + cyy * m.jy2 + cxy * 2.0 * m.sym_xy;
}

double ErrorOperator::expectation(const CollectiveState& s) const {
  return expectation(compute_moments(s, false));
}

Eigen::MatrixXcd ErrorOperator::dense() const {
  const int d = n_particles + 1;
  Eigen::MatrixXcd jp = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 0; i + 1 < d; ++i) jp(i + 1, i) = ladder_coefficient(n_particles, i);
  const Eigen::MatrixXcd jm = jp.adjoint();
  const Eigen::MatrixXcd jx = 0.5 * (jp + jm);
  const Eigen::MatrixXcd jy = cplx(0.0, -0.5) * (jp - jm);
  Eigen::MatrixXcd w = a * Eigen::MatrixXcd::Identity(d, d);
  w += bx * jx + by * jy + cxx * jx * jx + cyy * jy * jy + cxy * (jx * jy + jy * jx);
  return w;
}

ErrorOperator error_operator(const ProtocolSpec& protocol, const CounterRotationNoise* noise) {
  const int n = protocol.ensembles.empty() ? 0 : protocol.ensembles.back().n_particles;
  if (protocol.mode == EstimatorMode::exact) return to_operator(exact_coeffs(protocol, noise), n);
  const PathCoeffs pc = monte_carlo_coeffs(protocol, noise);
  Coeffs sum;
  for (const auto& c : pc.paths) sum += c;
  return to_operator(sum, n, 1.0 / pc.samples);
}

EstimationResult error_exact(const ProtocolSpec& protocol, const CounterRotationNoise* noise) {
  const Coeffs acc = exact_coeffs(protocol, noise);
  const auto& last = protocol.ensembles.back();
  EstimationResult r;
  r.delta_phi2 = to_operator(acc, last.n_particles).expectation(last.state);
  r.standard_error = 0.0;
  r.branches = acc.count;
  r.retained_weight = acc.weight;
  return r;
}

EstimationResult error_monte_carlo(const ProtocolSpec& protocol, const CounterRotationNoise* noise) {
  const int m = static_cast<int>(protocol.ensembles.size());
  if (std::max(1, protocol.mc.first_sampled) >= m) return error_exact(protocol, noise);
  const PathCoeffs pc = monte_carlo_coeffs(protocol, noise);
  const auto& last = protocol.ensembles.back();
  const MomentSet mo = compute_moments(last.state, false);
  const int lsz = pc.samples;
  double total = 0.0, var = 0.0, weight = 0.0;
  for (std::size_t r = 0; r < pc.roots; ++r) {
    double mean = 0.0;
    std::vector<double> v(lsz);
    for (int l = 0; l < lsz; ++l) {
      const Coeffs& c = pc.paths[r * lsz + l];
      v[l] = to_operator(c, last.n_particles).expectation(mo);
      mean += v[l];
      weight += c.weight;
    }
    mean /= lsz;
    total += mean;
    if (lsz > 1) {
      double s = 0.0;
      for (double x : v) s += (x - mean) * (x - mean);
      var += s / (lsz - 1) / lsz;
    }
  }
  EstimationResult res;
  res.delta_phi2 = total;
  res.standard_error = lsz > 1 ? std::sqrt(var) : std::nan("");
  res.branches = pc.paths.size();
  res.retained_weight = weight / lsz;
  return res;
}

EstimationResult estimate_error(const ProtocolSpec& protocol, const CounterRotationNoise* noise) {
  return protocol.mode == EstimatorMode::exact ? error_exact(protocol, noise)
                                               : error_monte_carlo(protocol, noise);
}

namespace {

struct NmContext {
  const ErrorOperator* w;
  TwistSchedule sched;
  int evaluations = 0;
};

double nm_objective(const gsl_vector* x, void* params) {
  auto* ctx = static_cast<NmContext*>(params);
  for (std::size_t k = 0; k < ctx->sched.steps.size(); ++k) {
    ctx->sched.steps[k].chi = gsl_vector_get(x, 2 * k);
    ctx->sched.steps[k].theta = gsl_vector_get(x, 2 * k + 1);
  }
  ++ctx->evaluations;
  return ctx->w->expectation(prepare_state(ctx->sched));
}

}  // namespace

OptimizedSchedule optimize_last_ensemble(const ProtocolSpec& protocol, const TwistSchedule& initial,
                                         const OptimizeSettings& settings) {
  if (protocol.ensembles.empty()) throw InvalidArgument("optimize_last_ensemble: no ensembles");
  if (initial.steps.empty()) throw InvalidArgument("optimize_last_ensemble: empty schedule");
  if (initial.n_particles != protocol.ensembles.back().n_particles) {
    throw InvalidArgument("optimize_last_ensemble: schedule size differs from last ensemble");
  }
  ProtocolSpec exact = protocol;
  exact.mode = EstimatorMode::exact;
  const ErrorOperator w = error_operator(exact);

  const std::size_t dim = 2 * initial.steps.size();
  NmContext ctx{&w, initial, 0};
  gsl_multimin_function fn{&nm_objective, dim, &ctx};
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(dim), &gsl_vector_free);
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(dim),
                                                               &gsl_vector_free);
  for (std::size_t k = 0; k < initial.steps.size(); ++k) {
    const auto& st = initial.steps[k];
    gsl_vector_set(x.get(), 2 * k, st.chi);
    gsl_vector_set(x.get(), 2 * k + 1, st.theta);
    gsl_vector_set(step.get(), 2 * k, std::max(0.2 * std::abs(st.chi), 1e-5));
    gsl_vector_set(step.get(), 2 * k + 1, 0.02);
  }

  OptimizedSchedule out;
  out.initial_objective = w.expectation(prepare_state(initial));
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim),
      &gsl_multimin_fminimizer_free);
  gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), step.get());

  double best = s->fval;
  int stall = 0;
  while (ctx.evaluations < settings.max_evaluations) {
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    const double f = s->fval;
    stall = (best - f < settings.objective_tolerance) ? stall + 1 : 0;
    best = std::min(best, f);
    if (stall >= settings.stall_iterations ||
        gsl_multimin_fminimizer_size(s.get()) < 1e-13) {
      out.converged = true;
      break;
    }
  }

  out.schedule = initial;
  if (s->fval < out.initial_objective) {
    for (std::size_t k = 0; k < initial.steps.size(); ++k) {
      out.schedule.steps[k].chi = gsl_vector_get(s->x, 2 * k);
      out.schedule.steps[k].theta = gsl_vector_get(s->x, 2 * k + 1);
    }
    out.objective = w.expectation(prepare_state(out.schedule));
  } else {
    out.objective = out.initial_objective;
  }
  out.evaluations = ctx.evaluations;
  return out;
}

}  // namespace spinmetro
