#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rfcw {

struct UniformLaw {
  double lo, hi;
};
struct GaussianLaw {
  double mean, sd;
};
struct DiscreteLaw {
  std::vector<double> values, weights;
};
// fields given directly rather than drawn
struct ExplicitLaw {};

using FieldLaw = std::variant<UniformLaw, GaussianLaw, DiscreteLaw, ExplicitLaw>;

// "uniform(a,b)", "gaussian(mu,s)", "discrete(v1:w1,v2:w2,...)"
FieldLaw parse_field_law(std::string_view text);
std::string to_string(const FieldLaw& law);

struct Interval {
  double lo = 0, hi = 0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
};

struct FieldEnvironment {
  int N = 0;
  std::vector<double> h;
  FieldLaw law = ExplicitLaw{};
  std::uint64_t seed = 0;
  Interval support;

  double max_abs_field() const;
};

FieldEnvironment sample_fields(const FieldLaw& law, int N, std::uint64_t seed);
FieldEnvironment explicit_fields(std::vector<double> h);

nlohmann::json to_json(const FieldEnvironment& env);
FieldEnvironment environment_from_json(const nlohmann::json& j);

struct ModelParams {
  double beta = 1.0;
  double alpha_cap = 0.999;
  void validate() const;
};

// site -> block assignment shared by configurations
struct BlockLayout {
  int N = 0;
  int n = 0;
  std::vector<int> block_of;
  std::vector<int> sizes;

  static std::shared_ptr<const BlockLayout> make(std::vector<int> block_of, int n);
  static std::shared_ptr<const BlockLayout> single(int N);
};

class SpinConfig {
 public:
  SpinConfig() = default;
  SpinConfig(std::vector<std::int8_t> spins, std::shared_ptr<const BlockLayout> layout);
  static SpinConfig constant(int value, std::shared_ptr<const BlockLayout> layout);
  // bit x set means spin +1
  static SpinConfig from_bits(std::uint64_t bits, std::shared_ptr<const BlockLayout> layout);

  int N() const { return static_cast<int>(spins_.size()); }
  int blocks() const { return static_cast<int>(block_sums_.size()); }
  std::int8_t operator[](int x) const { return spins_[x]; }
  const std::vector<std::int8_t>& spins() const { return spins_; }
  const std::vector<int>& block_sums() const { return block_sums_; }
  int total_sum() const { return total_; }
  int block_of(int x) const { return layout_->block_of[x]; }
  const BlockLayout& layout() const { return *layout_; }
  const std::shared_ptr<const BlockLayout>& layout_ptr() const { return layout_; }

  void set(int x, std::int8_t v) {
    if (spins_[x] == v) return;
    int d = v - spins_[x];
    spins_[x] = v;
    block_sums_[layout_->block_of[x]] += d;
    total_ += d;
  }
  void flip(int x) { set(x, static_cast<std::int8_t>(-spins_[x])); }

  std::uint64_t bits() const;
  int hamming(const SpinConfig& other) const;
  bool caches_consistent() const;
  bool operator==(const SpinConfig& o) const { return spins_ == o.spins_; }

 private:
  std::vector<std::int8_t> spins_;
  std::vector<int> block_sums_;
  int total_ = 0;
  std::shared_ptr<const BlockLayout> layout_;
};

struct FlipProbs {
  double p_plus, p_minus;
};

// Heat-bath rule with self-excluded local field
//   g_x = (1/N) sum_{j != x} s_j + h_x,  p+ = (1 + tanh(beta g_x)) / 2.
// Probabilities are tabulated per (site, sum of the others) for N <= 2048.
class HeatBathRule {
 public:
  HeatBathRule(const FieldEnvironment& env, const ModelParams& params);

  int N() const { return N_; }
  double beta() const { return beta_; }
  double field(int x) const { return h_[x]; }
  const std::vector<double>& fields() const { return h_; }

  // others = sum_{j != x} s_j
  double p_plus(int x, int others) const {
    if (!table_.empty()) return table_[static_cast<std::size_t>(x) * stride_ + (others + N_ - 1)];
    return direct(x, others);
  }
  FlipProbs probs(const SpinConfig& s, int x) const {
    double p = p_plus(x, s.total_sum() - s[x]);
    return {p, 1.0 - p};
  }
  // probability that an update at x sets the spin to v
  double prob_to(const SpinConfig& s, int x, int v) const {
    double p = p_plus(x, s.total_sum() - s[x]);
    return v > 0 ? p : 1.0 - p;
  }
  double alpha_bound() const { return alpha_bound_; }

 private:
  double direct(int x, int others) const;

  int N_;
  double beta_;
  std::vector<double> h_;
  std::vector<double> table_;
  std::size_t stride_ = 0;
  double alpha_bound_;
};

FlipProbs flip_prob(const SpinConfig& s, int x, const FieldEnvironment& env, const ModelParams& params);
double hamiltonian(const SpinConfig& s, const FieldEnvironment& env);
double log_gibbs_weight(const SpinConfig& s, const FieldEnvironment& env, const ModelParams& params);

}  // namespace rfcw
