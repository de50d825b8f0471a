#include "rfcw/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "rfcw/error.hpp"
#include "rfcw/rng.hpp"

namespace rfcw {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(std::string_view s, std::string_view ctx) {
  std::string t = trim(s);
  double v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw ConfigError("field law '" + std::string(ctx) + "': bad number '" + t + "'");
  return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string fmt17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

FieldLaw parse_field_law(std::string_view text) {
  std::string t = trim(text);
  if (t == "explicit") return ExplicitLaw{};
  auto open = t.find('(');
  if (open == std::string::npos || t.back() != ')') throw ConfigError("field law '" + t + "': expected name(args)");
  std::string name = trim(std::string_view(t).substr(0, open));
  std::string_view body = std::string_view(t).substr(open + 1, t.size() - open - 2);
  auto args = split(body, ',');
  if (name == "uniform") {
    if (args.size() != 2) throw ConfigError("uniform law takes two arguments");
    UniformLaw u{parse_number(args[0], t), parse_number(args[1], t)};
    if (!(u.lo <= u.hi)) throw ConfigError("uniform law needs lo <= hi");
    return u;
  }
  if (name == "gaussian") {
    if (args.size() != 2) throw ConfigError("gaussian law takes two arguments");
    GaussianLaw g{parse_number(args[0], t), parse_number(args[1], t)};
    if (!(g.sd >= 0) || !std::isfinite(g.mean)) throw ConfigError("gaussian law needs sd >= 0");
    return g;
  }
  if (name == "discrete") {
    DiscreteLaw d;
    if (trim(body).empty()) throw ConfigError("discrete law with empty support");
    for (auto& a : args) {
      auto kv = split(a, ':');
      if (kv.size() != 2) throw ConfigError("discrete law entries are value:weight");
      d.values.push_back(parse_number(kv[0], t));
      double w = parse_number(kv[1], t);
      if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("discrete law weights must be >= 0");
      d.weights.push_back(w);
    }
    if (std::accumulate(d.weights.begin(), d.weights.end(), 0.0) <= 0)
      throw ConfigError("discrete law with zero total weight");
    return d;
  }
  throw ConfigError("unknown field law '" + name + "'");
}

std::string to_string(const FieldLaw& law) {
  struct V {
    std::string operator()(const UniformLaw& u) const { return "uniform(" + fmt17(u.lo) + "," + fmt17(u.hi) + ")"; }
    std::string operator()(const GaussianLaw& g) const {
      return "gaussian(" + fmt17(g.mean) + "," + fmt17(g.sd) + ")";
    }
    std::string operator()(const DiscreteLaw& d) const {
      std::string s = "discrete(";
      for (std::size_t i = 0; i < d.values.size(); ++i) {
        if (i) s += ",";
        s += fmt17(d.values[i]) + ":" + fmt17(d.weights[i]);
      }
      return s + ")";
    }
    std::string operator()(const ExplicitLaw&) const { return "explicit"; }
  };
  return std::visit(V{}, law);
}

double FieldEnvironment::max_abs_field() const {
  double m = 0;
  for (double v : h) m = std::max(m, std::abs(v));
  return m;
}

namespace {
Interval realized_range(const std::vector<double>& h) {
  if (h.empty()) return {};
  auto [lo, hi] = std::minmax_element(h.begin(), h.end());
  return {*lo, *hi};
}
}  // namespace

FieldEnvironment sample_fields(const FieldLaw& law, int N, std::uint64_t seed) {
  if (N < 1) throw ConfigError("sample_fields: N must be >= 1");
  if (std::holds_alternative<ExplicitLaw>(law)) throw ConfigError("sample_fields: explicit law has nothing to sample");
  FieldEnvironment env;
  env.N = N;
  env.law = law;
  env.seed = seed;
  env.h.resize(N);
  RngStream rng(seed, kFieldStream, 0);
  if (auto* u = std::get_if<UniformLaw>(&law)) {
    for (auto& v : env.h) v = u->lo + (u->hi - u->lo) * rng.uniform();
    env.support = {u->lo, u->hi};
  } else if (auto* g = std::get_if<GaussianLaw>(&law)) {
    boost::math::normal_distribution<double> nd(0.0, 1.0);
    for (auto& v : env.h) {
      double u = (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
      v = g->mean + g->sd * boost::math::quantile(nd, u);
    }
    env.support = realized_range(env.h);
  } else {
    auto& d = std::get<DiscreteLaw>(law);
    std::vector<double> cum(d.weights.size());
    std::partial_sum(d.weights.begin(), d.weights.end(), cum.begin());
    double total = cum.back();
    for (auto& v : env.h) {
      double u = rng.uniform() * total;
      auto it = std::upper_bound(cum.begin(), cum.end(), u);
      std::size_t k = std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
      while (d.weights[k] == 0 && k > 0) --k;
      v = d.values[k];
    }
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t k = 0; k < d.values.size(); ++k)
      if (d.weights[k] > 0) lo = std::min(lo, d.values[k]), hi = std::max(hi, d.values[k]);
    env.support = {lo, hi};
  }
  return env;
}

FieldEnvironment explicit_fields(std::vector<double> h) {
  if (h.empty()) throw ConfigError("explicit_fields: empty field vector");
  FieldEnvironment env;
  env.N = static_cast<int>(h.size());
  env.support = realized_range(h);
  env.h = std::move(h);
  return env;
}

nlohmann::json to_json(const FieldEnvironment& env) {
  return {{"N", env.N},
          {"seed", env.seed},
          {"dist_spec", to_string(env.law)},
          {"support", {env.support.lo, env.support.hi}},
          {"h", env.h}};
}

FieldEnvironment environment_from_json(const nlohmann::json& j) {
  FieldEnvironment env;
  env.N = j.at("N").get<int>();
  env.seed = j.at("seed").get<std::uint64_t>();
  env.law = parse_field_law(j.at("dist_spec").get<std::string>());
  env.h = j.at("h").get<std::vector<double>>();
  if (static_cast<int>(env.h.size()) != env.N) throw ConfigError("environment json: length(h) != N");
  if (j.contains("support")) {
    env.support = {j["support"][0].get<double>(), j["support"][1].get<double>()};
  } else {
    env.support = realized_range(env.h);
  }
  for (double v : env.h)
    if (!env.support.contains(v)) throw ConfigError("environment json: field outside support");
  return env;
}

void ModelParams::validate() const {
  if (!(beta >= 0) || !std::isfinite(beta)) throw ConfigError("beta must be a nonnegative finite number");
  if (!(alpha_cap >= 0.5 && alpha_cap < 1.0)) throw ConfigError("alpha_cap must lie in [1/2, 1)");
}

std::shared_ptr<const BlockLayout> BlockLayout::make(std::vector<int> block_of, int n) {
  auto L = std::make_shared<BlockLayout>();
  L->N = static_cast<int>(block_of.size());
  L->n = n;
  L->sizes.assign(n, 0);
  for (int b : block_of) {
    if (b < 0 || b >= n) throw ContractViolation("block index out of range");
    ++L->sizes[b];
  }
  L->block_of = std::move(block_of);
  return L;
}

std::shared_ptr<const BlockLayout> BlockLayout::single(int N) { return make(std::vector<int>(N, 0), 1); }

SpinConfig::SpinConfig(std::vector<std::int8_t> spins, std::shared_ptr<const BlockLayout> layout)
    : spins_(std::move(spins)), layout_(std::move(layout)) {
  if (!layout_ || layout_->N != static_cast<int>(spins_.size()))
    throw ContractViolation("SpinConfig: layout size mismatch");
  block_sums_.assign(layout_->n, 0);
  for (int x = 0; x < N(); ++x) {
    if (spins_[x] != 1 && spins_[x] != -1) throw ContractViolation("SpinConfig: spins must be +-1");
    block_sums_[layout_->block_of[x]] += spins_[x];
    total_ += spins_[x];
  }
}

SpinConfig SpinConfig::constant(int value, std::shared_ptr<const BlockLayout> layout) {
  int N = layout->N;
  return SpinConfig(std::vector<std::int8_t>(N, static_cast<std::int8_t>(value > 0 ? 1 : -1)), std::move(layout));
}

SpinConfig SpinConfig::from_bits(std::uint64_t bits, std::shared_ptr<const BlockLayout> layout) {
  std::vector<std::int8_t> s(layout->N);
  for (int x = 0; x < layout->N; ++x) s[x] = (bits >> x) & 1 ? 1 : -1;
  return SpinConfig(std::move(s), std::move(layout));
}

std::uint64_t SpinConfig::bits() const {
  if (N() > 64) throw CapacityError("SpinConfig::bits needs N <= 64");
  std::uint64_t b = 0;
  for (int x = 0; x < N(); ++x)
    if (spins_[x] > 0) b |= std::uint64_t{1} << x;
  return b;
}

int SpinConfig::hamming(const SpinConfig& o) const {
  if (o.N() != N()) throw ContractViolation("hamming: size mismatch");
  int d = 0;
  for (int x = 0; x < N(); ++x) d += spins_[x] != o.spins_[x];
  return d;
}

bool SpinConfig::caches_consistent() const {
  std::vector<int> b(layout_->n, 0);
  int t = 0;
  for (int x = 0; x < N(); ++x) {
    b[layout_->block_of[x]] += spins_[x];
    t += spins_[x];
  }
  return b == block_sums_ && t == total_;
}

HeatBathRule::HeatBathRule(const FieldEnvironment& env, const ModelParams& params)
    : N_(env.N), beta_(params.beta), h_(env.h) {
  params.validate();
  if (static_cast<int>(h_.size()) != N_) throw ContractViolation("HeatBathRule: length(h) != N");
  alpha_bound_ = 0.5 * (1.0 + std::tanh(beta_ * (1.0 + env.max_abs_field())));
  if (alpha_bound_ > params.alpha_cap) {
    std::ostringstream os;
    os.precision(17);
    os << "alpha bound violated: (1+tanh(beta(1+max|h|)))/2 = " << alpha_bound_ << " > alpha_cap = "
       << params.alpha_cap;
    throw AlphaBoundError(os.str());
  }
  if (N_ <= 2048) {
    stride_ = 2 * static_cast<std::size_t>(N_) - 1;
    table_.resize(stride_ * N_);
    for (int x = 0; x < N_; ++x)
      for (int s = -(N_ - 1); s <= N_ - 1; ++s) table_[x * stride_ + (s + N_ - 1)] = direct(x, s);
  }
}

double HeatBathRule::direct(int x, int others) const {
  double g = static_cast<double>(others) / N_ + h_[x];
  return 0.5 * (1.0 + std::tanh(beta_ * g));
}

FlipProbs flip_prob(const SpinConfig& s, int x, const FieldEnvironment& env, const ModelParams& params) {
  if (s.N() != env.N) throw ContractViolation("flip_prob: size mismatch");
  if (x < 0 || x >= s.N()) throw ContractViolation("flip_prob: site out of range");
  HeatBathRule rule(env, params);
  return rule.probs(s, x);
}

double hamiltonian(const SpinConfig& s, const FieldEnvironment& env) {
  if (s.N() != env.N) throw ContractViolation("hamiltonian: size mismatch");
  double N = env.N;
  double m = s.total_sum() / N;
  double e = -(N / 2.0) * m * m;
  for (int i = 0; i < env.N; ++i) e -= env.h[i] * s[i];
  return e;
}

double log_gibbs_weight(const SpinConfig& s, const FieldEnvironment& env, const ModelParams& params) {
  return -params.beta * hamiltonian(s, env);
}

}  // namespace rfcw
