#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfcw/dynamics.hpp"
#include "rfcw/model.hpp"

namespace rfcw {

struct EnsembleResult {
  std::vector<double> samples;  // untruncated hitting times
  std::string start_spec;
  double mean = 0, variance = 0, standard_error = 0;
  double ks_statistic = 0;  // samples/mean against Exp(1)
  std::uint64_t truncation_count = 0;

  std::uint64_t count() const { return samples.size(); }
  double truncation_rate() const;
};

EnsembleResult summarize(std::vector<double> samples, std::uint64_t truncations, std::string start_spec);
EnsembleResult summarize(const std::vector<HittingRecord>& records, std::string start_spec);

// limiting Kolmogorov distribution P(K <= x)
double kolmogorov_cdf(double x);
// asymptotic one-sample critical value sqrt(-log(level/2)/2); 1.6276 at 0.01
double ks_critical(double level);
// sup |F_n - (1 - e^{-t})| of the sample (no normalization applied)
double ks_distance_exp1(std::vector<double> x);

enum class Verdict { Pass, Inconclusive, Fail };
const char* to_string(Verdict v);

struct ExpLawReport {
  std::uint64_t n = 0;
  std::uint64_t truncations = 0;
  double mean = 0;
  double ks = 0;
  double critical = 0;   // c(level)/sqrt(n)
  double threshold = 0;  // slack * critical
  double level = 0.01;
  double slack = 2.0;
  Verdict verdict = Verdict::Fail;
  std::string note;
};

// normalizes by the sample mean; pass below the critical value, inconclusive
// between it and slack times it, and inconclusive when > 1% were truncated
ExpLawReport exponential_law_test(const std::vector<double>& samples, std::uint64_t truncations = 0,
                                  double level = 0.01, double slack = 2.0);

struct TwoSampleKs {
  double D = 0;
  double p_value = 1;
};
TwoSampleKs two_sample_ks(std::vector<double> a, std::vector<double> b);

struct ChiSquare {
  double statistic = 0;
  int dof = 0;
  double p_value = 1;
};
// cells with expected count below min_expected are pooled into one
ChiSquare chi_square_gof(const std::vector<double>& observed, const std::vector<double>& probs,
                         double min_expected = 5.0);

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
  double slope_se = 0;
};
LinearFit ols(const std::vector<double>& x, const std::vector<double>& y);

struct KramersFit {
  LinearFit fit;
  double exponent = 0;        // landscape prediction
  double relative_error = 0;  // |slope/exponent - 1|
};
// regresses log(mean) - log(N) on N
KramersFit kramers_regression(const std::vector<int>& Ns, const std::vector<double>& means, double exponent);

struct RatioEstimate {
  int i = 0, j = 0;
  double deviation = 0;  // |mean_i/mean_j - 1|
  double se = 0;
};
RatioEstimate ratio_deviation(const EnsembleResult& a, const EnsembleResult& b, int i, int j);

struct FlatnessReport {
  std::vector<EnsembleResult> ensembles;
  double max_deviation = 0;
  double max_deviation_se = 0;
  int argmax_i = 0, argmax_j = 0;
  bool within_bands = true;  // all pairwise mean differences within 3 SE
  bool inconclusive = false;
};

struct FlatnessOptions {
  std::uint64_t trajectories = 1000;
  std::uint64_t seed = 0;
  std::uint64_t cap = kDefaultCap;
  int threads = 1;
};

// matched ensembles; start i uses streams [i*T, (i+1)*T)
FlatnessReport flatness_test(const std::vector<SpinConfig>& starts, const StoppingSpec& B, const HeatBathRule& rule,
                             const FlatnessOptions& opt);
FlatnessReport flatness_from(std::vector<EnsembleResult> ensembles);

struct LaplacePoint {
  double lambda = 0;
  std::vector<double> R, se;  // per start
  double max_deviation = 0;
};
struct LaplaceReport {
  double T = 0;  // pooled mean
  std::vector<LaplacePoint> grid;
  double max_deviation = 0;
  bool inconclusive = false;
};
// empirical E exp(-lambda tau / T)
double laplace_estimate(const std::vector<double>& samples, double lambda, double T, double* se = nullptr);
LaplaceReport laplace_flatness(const std::vector<EnsembleResult>& ensembles, const std::vector<double>& lambdas);

struct SurvivalRow {
  double t, empirical, exponential;
};
// rows at each normalized order statistic
std::vector<SurvivalRow> survival_curve(const std::vector<double>& samples);

// mean of each bootstrap resample
std::vector<double> bootstrap_means(const std::vector<double>& samples, int resamples, std::uint64_t seed);

struct Interval01 {
  double lo = 0, hi = 1;
};
// Wilson score interval, z standard deviations
Interval01 wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 3.0);

}  // namespace rfcw
