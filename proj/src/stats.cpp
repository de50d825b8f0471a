#include "rfcw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "rfcw/error.hpp"
#include "rfcw/rng.hpp"

namespace rfcw {

double EnsembleResult::truncation_rate() const {
  const double tot = static_cast<double>(samples.size() + truncation_count);
  return tot > 0 ? truncation_count / tot : 0.0;
}

EnsembleResult summarize(std::vector<double> samples, std::uint64_t truncations, std::string start_spec) {
  EnsembleResult r;
  r.samples = std::move(samples);
  r.truncation_count = truncations;
  r.start_spec = std::move(start_spec);
  const double n = static_cast<double>(r.samples.size());
  if (n == 0) return r;
  // two-pass for accuracy
  r.mean = std::accumulate(r.samples.begin(), r.samples.end(), 0.0) / n;
  double ss = 0;
  for (double x : r.samples) ss += (x - r.mean) * (x - r.mean);
  r.variance = n > 1 ? ss / (n - 1) : 0.0;
  r.standard_error = std::sqrt(r.variance / n);
  if (r.mean > 0) {
    std::vector<double> z(r.samples);
    for (double& v : z) v /= r.mean;
    r.ks_statistic = ks_distance_exp1(std::move(z));
  }
  return r;
}

EnsembleResult summarize(const std::vector<HittingRecord>& records, std::string start_spec) {
  std::vector<double> s;
  s.reserve(records.size());
  std::uint64_t trunc = 0;
  for (const auto& r : records) {
    if (r.truncated) ++trunc;
    else s.push_back(static_cast<double>(r.time));
  }
  return summarize(std::move(s), trunc, std::move(start_spec));
}

double kolmogorov_cdf(double x) {
  if (x <= 0) return 0.0;
  if (x < 1.18) {
    // theta-function form converges fast for small x
    const double pi2 = M_PI * M_PI;
    double s = 0;
    for (int k = 1; k <= 50; k += 2) s += std::exp(-k * k * pi2 / (8 * x * x));
    return std::sqrt(2 * M_PI) / x * s;
  }
  double s = 0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return 1.0 - 2.0 * s;
}

double ks_critical(double level) { return std::sqrt(-0.5 * std::log(level / 2.0)); }

double ks_distance_exp1(std::vector<double> x) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = x[i] > 0 ? -std::expm1(-x[i]) : 0.0;
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Inconclusive: return "inconclusive";
    default: return "fail";
  }
}

ExpLawReport exponential_law_test(const std::vector<double>& samples, std::uint64_t truncations, double level,
                                  double slack) {
  if (samples.size() < 100) throw ContractViolation("exponential law test needs at least 100 samples");
  ExpLawReport r;
  r.n = samples.size();
  r.truncations = truncations;
  r.level = level;
  r.slack = slack;
  r.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / r.n;
  if (!(r.mean > 0)) throw DomainError("exponential law test: nonpositive sample mean");
  std::vector<double> z(samples);
  for (double& v : z) v /= r.mean;
  r.ks = ks_distance_exp1(std::move(z));
  r.critical = ks_critical(level) / std::sqrt(static_cast<double>(r.n));
  r.threshold = slack * r.critical;
  if (r.ks <= r.critical) r.verdict = Verdict::Pass;
  else if (r.ks <= r.threshold) r.verdict = Verdict::Inconclusive;
  else r.verdict = Verdict::Fail;
  r.note = "normalized by the sample mean; the asymptotic critical value ignores the estimated scale, threshold widened "
           "by the slack factor; a global KS check at fixed N, not a pointwise limit statement";
  const double trate = static_cast<double>(truncations) / static_cast<double>(truncations + r.n);
  if (trate > 0.01) {
    r.verdict = Verdict::Inconclusive;
    r.note += "; truncation rate above 1%";
  }
  return r;
}

TwoSampleKs two_sample_ks(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ContractViolation("two-sample KS on an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = a.size(), m = b.size();
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(i / n - j / m));
  }
  TwoSampleKs r;
  r.D = d;
  const double ne = n * m / (n + m);
  const double se = std::sqrt(ne);
  r.p_value = std::clamp(1.0 - kolmogorov_cdf((se + 0.12 + 0.11 / se) * d), 0.0, 1.0);
  return r;
}

ChiSquare chi_square_gof(const std::vector<double>& observed, const std::vector<double>& probs, double min_expected) {
  if (observed.size() != probs.size()) throw ContractViolation("chi-square: size mismatch");
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  double stat = 0, pool_o = 0, pool_e = 0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = probs[i] * total;
    if (e < min_expected) {
      pool_o += observed[i];
      pool_e += e;
      continue;
    }
    stat += (observed[i] - e) * (observed[i] - e) / e;
    ++cells;
  }
  if (pool_e > 0) {
    stat += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
    ++cells;
  } else if (pool_o > 0) {
    throw NumericalError("chi-square: observations in cells of zero probability");
  }
  ChiSquare r;
  r.statistic = stat;
  r.dof = cells - 1;
  if (r.dof <= 0) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, stat));
  return r;
}

LinearFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractViolation("ols needs two or more paired points");
  const double n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw DomainError("ols: all x values equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - f.intercept - f.slope * x[i];
    sse += e * e;
  }
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  f.slope_se = x.size() > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  return f;
}

KramersFit kramers_regression(const std::vector<int>& Ns, const std::vector<double>& means, double exponent) {
  if (Ns.size() != means.size()) throw ContractViolation("kramers_regression: size mismatch");
  if (Ns.size() < 4) throw ContractViolation("kramers_regression needs at least four system sizes");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (!(means[i] > 0)) throw DomainError("kramers_regression: nonpositive mean hitting time");
    x.push_back(Ns[i]);
    y.push_back(std::log(means[i]) - std::log(static_cast<double>(Ns[i])));
  }
  KramersFit k;
  k.fit = ols(x, y);
  k.exponent = exponent;
  k.relative_error = std::abs(k.fit.slope / exponent - 1.0);
  return k;
}

RatioEstimate ratio_deviation(const EnsembleResult& a, const EnsembleResult& b, int i, int j) {
  RatioEstimate r;
  r.i = i;
  r.j = j;
  if (!(a.mean > 0 && b.mean > 0)) throw DomainError("ratio of nonpositive means");
  const double q = a.mean / b.mean;
  r.deviation = std::abs(q - 1.0);
  const double ra = a.standard_error / a.mean, rb = b.standard_error / b.mean;
  r.se = q * std::sqrt(ra * ra + rb * rb);
  return r;
}

FlatnessReport flatness_from(std::vector<EnsembleResult> ensembles) {
  if (ensembles.size() < 2) throw ContractViolation("flatness test needs at least two starts");
  FlatnessReport rep;
  rep.ensembles = std::move(ensembles);
  const auto& e = rep.ensembles;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i].truncation_rate() > 0.01) rep.inconclusive = true;
    for (std::size_t j = 0; j < e.size(); ++j) {
      if (i == j) continue;
      auto r = ratio_deviation(e[i], e[j], static_cast<int>(i), static_cast<int>(j));
      if (r.deviation >= rep.max_deviation) {
        rep.max_deviation = r.deviation;
        rep.max_deviation_se = r.se;
        rep.argmax_i = r.i;
        rep.argmax_j = r.j;
      }
      const double diff = std::abs(e[i].mean - e[j].mean);
      const double se = std::hypot(e[i].standard_error, e[j].standard_error);
      if (diff > 3.0 * se) rep.within_bands = false;
    }
  }
  return rep;
}

FlatnessReport flatness_test(const std::vector<SpinConfig>& starts, const StoppingSpec& B, const HeatBathRule& rule,
                             const FlatnessOptions& opt) {
  if (starts.size() < 2) throw ContractViolation("flatness test needs at least two starts");
  std::vector<EnsembleResult> ens;
  StoppingSpec spec = B;
  spec.cap = opt.cap;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    EnsembleSpec es;
    es.seed = opt.seed;
    es.first_trajectory = static_cast<std::uint32_t>(i * opt.trajectories);
    es.count = opt.trajectories;
    es.threads = opt.threads;
    const SpinConfig s0 = starts[i];
    auto recs = run_ensemble([&s0](std::uint32_t, RngStream&) { return s0; }, spec, rule, es);
    ens.push_back(summarize(recs, "start " + std::to_string(i)));
  }
  return flatness_from(std::move(ens));
}

double laplace_estimate(const std::vector<double>& samples, double lambda, double T, double* se) {
  if (lambda < 0) throw ContractViolation("laplace transform needs lambda >= 0");
  const double n = samples.size();
  if (n == 0) throw ContractViolation("laplace transform of an empty sample");
  if (lambda == 0) {
    if (se) *se = 0;
    return 1.0;
  }
  double s = 0, s2 = 0;
  for (double t : samples) {
    double v = std::exp(-lambda * t / T);
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  if (se) *se = n > 1 ? std::sqrt(std::max(0.0, (s2 - n * m * m) / (n - 1)) / n) : 0.0;
  return m;
}

LaplaceReport laplace_flatness(const std::vector<EnsembleResult>& ensembles, const std::vector<double>& lambdas) {
  if (ensembles.size() < 2) throw ContractViolation("laplace flatness needs at least two starts");
  LaplaceReport rep;
  double tot = 0;
  std::size_t cnt = 0;
  for (const auto& e : ensembles) {
    for (double t : e.samples) tot += t;
    cnt += e.samples.size();
    if (e.truncation_rate() > 0.01) rep.inconclusive = true;
  }
  rep.T = tot / cnt;
  for (double lam : lambdas) {
    LaplacePoint p;
    p.lambda = lam;
    for (const auto& e : ensembles) {
      double se = 0;
      p.R.push_back(laplace_estimate(e.samples, lam, rep.T, &se));
      p.se.push_back(se);
    }
    for (std::size_t i = 0; i < p.R.size(); ++i)
      for (std::size_t j = 0; j < p.R.size(); ++j)
        if (i != j) p.max_deviation = std::max(p.max_deviation, std::abs(p.R[i] / p.R[j] - 1.0));
    rep.max_deviation = std::max(rep.max_deviation, p.max_deviation);
    rep.grid.push_back(std::move(p));
  }
  return rep;
}

std::vector<SurvivalRow> survival_curve(const std::vector<double>& samples) {
  std::vector<SurvivalRow> rows;
  if (samples.empty()) return rows;
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
  std::vector<double> z(samples);
  std::sort(z.begin(), z.end());
  const double n = z.size();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i + 1 < z.size() && z[i + 1] == z[i]) continue;
    double t = z[i] / mean;
    rows.push_back({t, 1.0 - (i + 1) / n, std::exp(-t)});
  }
  return rows;
}

std::vector<double> bootstrap_means(const std::vector<double>& samples, int resamples, std::uint64_t seed) {
  std::vector<double> out;
  if (samples.empty()) return out;
  const auto n = static_cast<std::uint32_t>(samples.size());
  for (int b = 0; b < resamples; ++b) {
    RngStream rng(seed, static_cast<std::uint32_t>(b), 0);
    double s = 0;
    for (std::uint32_t i = 0; i < n; ++i) s += samples[rng.index(n)];
    out.push_back(s / n);
  }
  return out;
}

Interval01 wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) return {};
  const double n = trials, p = successes / n, z2 = z * z;
  const double c = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double h = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, c - h), std::min(1.0, c + h)};
}

}  // namespace rfcw
