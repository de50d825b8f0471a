#include "rfcw/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "rfcw/coupling.hpp"
#include "rfcw/error.hpp"
#include "rfcw/exact_oracle.hpp"
#include "rfcw/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rfcw {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sha1_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr))
    throw NumericalError("sha1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string git_blob_sha1(const std::string& bytes) {
  std::string hdr = "blob " + std::to_string(bytes.size());
  hdr.push_back('\0');
  return sha1_hex(hdr + bytes);
}

MesoState nearest_grid_point(const std::vector<double>& x, const BlockLayout& layout) {
  MesoState m;
  m.N = layout.N;
  for (int l = 0; l < layout.n; ++l) {
    const int size = layout.sizes[l];
    double target = x[l] * layout.N;
    // candidates with the parity of the block size
    int k = static_cast<int>(std::floor(target));
    if (((k - size) % 2 + 2) % 2) --k;
    int best = std::abs(k - target) <= std::abs(k + 2 - target) ? k : k + 2;
    m.sums.push_back(std::clamp(best, -size, size));
  }
  return m;
}

Setup build_setup(const ExperimentConfig& c) {
  Setup s;
  if (c.model.fields.empty()) s.env = sample_fields(parse_field_law(c.model.field), c.model.N, c.model.seed);
  else s.env = explicit_fields(c.model.fields);
  s.params.beta = c.model.beta;
  s.params.alpha_cap = c.model.alpha_cap;
  s.params.validate();
  s.partition = build_partition(s.env, c.coarse.n);
  double width = s.partition.edges.back() - s.partition.edges.front();
  double C = c.coarse.C.value_or(width);
  if (width / c.coarse.n > C / c.coarse.n * (1 + 1e-12))
    throw ConfigError("coarse.C is smaller than the realized field range; equal-width intervals cannot meet C/n");
  s.interval_bound = C / c.coarse.n;
  s.rule = std::make_unique<HeatBathRule>(s.env, s.params);
  s.surface = std::make_unique<FreeEnergySurface>(s.env, s.partition, s.params.beta);
  s.critical_points = find_critical_points(*s.surface);
  return s;
}

void resolve_targets(Setup& s, const ExperimentConfig& c) {
  const auto& cps = s.critical_points;
  std::vector<int> minima;
  for (int i = 0; i < static_cast<int>(cps.size()); ++i)
    if (cps[i].kind == CriticalPoint::Kind::Minimum) minima.push_back(i);
  if (minima.size() < 2) throw DomainError("single-well landscape: no metastable target B can be defined");
  const auto& layout = *s.partition.layout;

  double m0 = 0;
  if (!c.targets.A_sums.empty()) {
    MesoState a{c.targets.A_sums, s.env.N};
    if (!on_grid(a, layout)) throw ConfigError("targets.A_sums is not a grid point");
    m0 = a.total();
  } else {
    int pick = minima.front();
    for (int i : minima) {
      const auto& p = cps[i];
      const auto& q = cps[pick];
      if ((c.targets.mstar == "high" && p.total_mag > q.total_mag) ||
          (c.targets.mstar == "deepest" && p.free_energy < q.free_energy) ||
          (c.targets.mstar == "shallowest" && p.free_energy > q.free_energy))
        pick = i;
    }
    m0 = cps[pick].total_mag;
  }
  auto [mn, sad] = well_and_barrier(cps, m0);
  s.mstar = mn;
  s.saddle = sad;
  // the minimum on the far side of the saddle
  const double dir = sad.total_mag > mn.total_mag ? 1.0 : -1.0;
  std::optional<CriticalPoint> other;
  for (int i : minima) {
    if ((cps[i].total_mag - sad.total_mag) * dir <= 0) continue;
    if (!other || std::abs(cps[i].total_mag - sad.total_mag) < std::abs(other->total_mag - sad.total_mag))
      other = cps[i];
  }
  s.other = other;
  s.anchor = c.targets.A_sums.empty() ? nearest_grid_point(mn.x, layout) : MesoState{c.targets.A_sums, s.env.N};

  s.B = StoppingSpec{};
  s.B.cap = c.dynamics.cap;
  if (c.targets.B == "saddle") {
    HalfSpaceTarget h;
    h.weights.assign(s.partition.n, 1.0);
    h.threshold = sad.total_mag;
    h.below = dir < 0;
    s.B.targets.push_back(h);
  } else {
    s.B.targets.push_back(BallTarget{other->x, 2 * c.targets.delta, false});
  }
  if (s.B.any(s.anchor)) throw ConfigError("target B contains the anchor slice; reduce delta or change B");
  s.A_delta = BallTarget{mn.x, 2 * c.targets.delta, false};

  if (c.coupling.nu_override) {
    s.nu = *c.coupling.nu_override;
    s.nu_source = "override";
  }
}

namespace {

void resolve_nu(Setup& s, const ExperimentConfig& c) {
  if (s.env.N <= 14) {
    ExactChain chain(s.env, s.params, s.partition.layout);
    s.eps = a1_certificate(chain, s.partition);
    s.eps_source = "a1_certificate";
  } else {
    s.eps = s.partition.eps_surrogate(s.params.beta);
    s.eps_source = "eps_surrogate";
  }
  if (!c.coupling.nu_override) {
    s.nu = std::min(1.0, 3.0 * s.eps);
    s.nu_source = "3eps";
  }
}

std::string sums_str(const std::vector<int>& v) {
  std::string o;
  for (std::size_t i = 0; i < v.size(); ++i) o += (i ? ";" : "") + std::to_string(v[i]);
  return o;
}

json vec(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

json cp_json(const CriticalPoint& p) {
  return json{{"x", vec(p.x)},
              {"total_mag", p.total_mag},
              {"kind", to_string(p.kind)},
              {"free_energy", p.free_energy},
              {"hessian_signature", p.hessian_signature},
              {"gradient_norm", p.gradient_norm}};
}

// collects output files and their hashes for the manifest
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  void write(const std::string& name, const std::string& bytes) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir_ / name).string());
    f << bytes;
    files_[name] = git_blob_sha1(bytes);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  const std::map<std::string, std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> files_;
};

json header(const ExperimentConfig& c, const std::string& sub) {
  return json{{"subcommand", sub}, {"config_hash", sha1_hex(emit_config(c))}, {"seed", c.model.seed}};
}

json setup_json(const Setup& s) {
  json j{{"N", s.env.N},
         {"beta", s.params.beta},
         {"n", s.partition.n},
         {"interval_bound", s.interval_bound},
         {"eps_surrogate", s.partition.eps_surrogate(s.params.beta)},
         {"alpha_bound", s.rule->alpha_bound()}};
  if (s.mstar) j["mstar"] = cp_json(*s.mstar);
  if (s.saddle) j["saddle"] = cp_json(*s.saddle);
  if (s.other) j["other_minimum"] = cp_json(*s.other);
  if (!s.anchor.sums.empty()) j["anchor_sums"] = s.anchor.sums;
  if (!s.B.targets.empty()) j["B"] = describe(s.B.targets.front());
  if (!s.eps_source.empty()) {
    j["eps"] = s.eps;
    j["eps_source"] = s.eps_source;
  }
  if (!s.nu_source.empty()) {
    j["nu"] = s.nu;
    j["nu_source"] = s.nu_source;
  }
  return j;
}

int cmd_landscape(const ExperimentConfig& c, Setup& s, Outputs& out) {
  std::ostringstream csv;
  csv << "m,F,Fprime,kind\n";
  struct Row {
    double m;
    std::string kind;
  };
  std::vector<Row> rows;
  const int G = 400;
  for (int i = 1; i < G; ++i) rows.push_back({-1.0 + 2.0 * i / G, "regular"});
  for (const auto& p : s.critical_points) rows.push_back({p.total_mag, to_string(p.kind)});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.m < b.m; });
  for (const auto& r : rows) {
    auto red = s.surface->reduce(r.m);
    csv << format_double(r.m) << "," << format_double(red.F) << "," << format_double(red.dF) << "," << r.kind << "\n";
  }
  out.write("landscape.csv", csv.str());
  json j = header(c, "landscape");
  j["critical_points"] = json::array();
  for (const auto& p : s.critical_points) j["critical_points"].push_back(cp_json(p));
  try {
    resolve_targets(s, c);
    j["kramers_exponent"] = kramers_exponent(*s.mstar, *s.saddle, *s.surface);
  } catch (const DomainError& e) {
    j["kramers_exponent"] = nullptr;
    j["note"] = e.what();
  }
  j["setup"] = setup_json(s);
  out.write_json("critical_points.json", j);
  out.write_json("partition.json", to_json(s.partition));
  out.write_json("fields.json", to_json(s.env));
  return 0;
}

std::vector<HittingRecord> simulate_from_anchor(const ExperimentConfig& c, const Setup& s, std::uint64_t count,
                                                std::uint32_t first = 0) {
  EnsembleSpec es;
  es.seed = c.model.seed;
  es.first_trajectory = first;
  es.count = count;
  es.threads = c.dynamics.threads;
  auto layout = s.partition.layout;
  MesoState anchor = s.anchor;
  return run_ensemble([&](std::uint32_t, RngStream& rng) { return sample_uniform_on_slice(anchor, layout, rng); },
                      s.B, *s.rule, es);
}

int cmd_simulate(const ExperimentConfig& c, Setup& s, Outputs& out) {
  resolve_targets(s, c);
  const std::uint64_t T = c.dynamics.trajectories;
  auto recs = simulate_from_anchor(c, s, T);
  std::ostringstream csv;
  csv << "trajectory_id,seed,time,hit_index,truncated,start_meso_state\n";
  auto layout = s.partition.layout;
  for (std::uint64_t i = 0; i < recs.size(); ++i) {
    RngStream start_rng(c.model.seed, static_cast<std::uint32_t>(i), substreams::kStart);
    auto s0 = sample_uniform_on_slice(s.anchor, layout, start_rng);
    csv << i << "," << c.model.seed << "," << recs[i].time << "," << recs[i].hit_index << ","
        << (recs[i].truncated ? 1 : 0) << "," << sums_str(s0.block_sums()) << "\n";
  }
  out.write("simulate.csv", csv.str());
  auto res = summarize(recs, "uniform on anchor slice " + sums_str(s.anchor.sums));
  json j = header(c, "simulate");
  j["setup"] = setup_json(s);
  j["count"] = res.count();
  j["mean"] = res.mean;
  j["standard_error"] = res.standard_error;
  j["truncations"] = res.truncation_count;
  out.write_json("simulate.json", j);
  return res.truncation_rate() > 0.01 ? 4 : 0;
}

int cmd_couple(const ExperimentConfig& c, Setup& s, Outputs& out) {
  resolve_targets(s, c);
  resolve_nu(s, c);
  CouplingParams cp{c.coupling.kappa, c.coupling.c2, s.nu};
  const std::uint64_t T = c.dynamics.trajectories;
  auto layout = s.partition.layout;
  std::function<CycleResult(std::uint64_t)> f = [&](std::uint64_t i) {
    RngStream start_rng(c.model.seed, static_cast<std::uint32_t>(i), substreams::kStart);
    auto s0 = sample_uniform_on_slice(s.anchor, layout, start_rng);
    return cycle_run(s0, s.anchor, s.B, *s.rule, cp, c.model.seed, static_cast<std::uint32_t>(i),
                     c.coupling.cap_cycles);
  };
  auto results = parallel_map<CycleResult>(T, resolve_threads(c.dynamics.threads), f);
  std::ostringstream csv;
  csv << "trajectory_id,tau_B,cycles_used,success_cycle,coins_consumed_total,termination\n";
  std::uint64_t cycles = 0, nA = 0, nB = 0, nD = 0, failed = 0, trunc = 0, violations = 0;
  for (std::uint64_t i = 0; i < results.size(); ++i) {
    const auto& tr = results[i].trace;
    csv << i << "," << tr.tau_B << "," << tr.cycles.size() << "," << tr.success_cycle << ","
        << tr.coins_consumed_total << "," << to_string(tr.termination) << "\n";
    for (const auto& r : tr.cycles) {
      ++cycles;
      nA += r.eventA;
      nB += r.eventB;
      if (!r.success) {
        ++failed;
        nD += r.eventD;
      }
    }
    trunc += tr.termination == Termination::Truncated;
    violations += tr.lemma_violations;
  }
  out.write("couple.csv", csv.str());
  json j = header(c, "couple");
  j["setup"] = setup_json(s);
  j["kappa"] = cp.kappa;
  j["c2"] = cp.c2;
  j["horizon"] = horizon(s.env.N, cp.kappa);
  j["coins"] = coin_count(s.env.N, cp.c2);
  j["attempts"] = cycles;
  j["P_A"] = cycles ? double(nA) / cycles : 0.0;
  j["P_B"] = cycles ? double(nB) / cycles : 0.0;
  j["P_D_given_failure"] = failed ? double(nD) / failed : 0.0;
  j["truncated"] = trunc;
  j["lemma_violations"] = violations;
  j["restart_law"] = "uniform on the anchor slice";
  out.write_json("couple.json", j);
  if (violations) return 3;
  return T && double(trunc) / T > 0.01 ? 4 : 0;
}

struct Check {
  std::string name;
  double value;
  double tolerance;  // negative: reported only
  bool passed;
};

int cmd_exact(const ExperimentConfig& c, Setup& s, Outputs& out, const std::string& which) {
  if (s.env.N > 16) throw ConfigError("exact checks need N <= 16");
  resolve_targets(s, c);
  ExactChain chain(s.env, s.params, s.partition.layout);
  int aid = chain.slice_id(s.anchor);
  if (aid < 0) throw DomainError("anchor slice is empty");
  StateSet A = chain.slice_set(aid);
  const auto& Bspec = s.B;
  StateSet B = chain.states_where([&](const MesoState& m) { return Bspec.any(m); });
  if (B.empty()) throw DomainError("B is empty at this N");
  std::vector<Check> checks;
  auto add = [&](std::string name, double v, double tol) {
    checks.push_back({std::move(name), v, tol, tol < 0 || v <= tol});
  };
  auto want = [&](const char* k) { return which == "all" || which == k; };
  json detail;
  add("reversibility", chain.reversibility_error(), 1e-12);
  add("row_sums", chain.row_sum_error(), 1e-12);

  if (want("green")) {
    std::uint32_t x = A.list.front();
    for (auto t : A.list)
      if (chain.mu(t) > chain.mu(x)) x = t;
    auto g = green_function_identity_check(chain, x, B);
    add("green_ratio", g.ratio_residual, 1e-9);
    add("green_reversibility", g.reversibility_residual, 1e-12);
    auto mh = mean_hitting_formula(chain, A, B);
    add("mean_hitting_formula", mh.residual, 1e-10);
    detail["mean_hitting"] = {{"lhs", mh.lhs}, {"rhs", mh.rhs}};
  }
  const double T = mean_hitting_formula(chain, A, B).lhs;
  if (want("renewal")) {
    for (double lam : c.exact.lambdas) {
      auto r = renewal_identity(chain, A, B, lam, T);
      add("renewal_lambda_" + format_double(lam), r.residual, 1e-10);
    }
  }
  if (want("uphill")) {
    auto u = uphill_identities(chain, A, B, 1.0, T);
    add("rev7", u.rev7.residual, 1e-9);
    add("rev8", u.rev8.residual, 1e-9);
    add("rev9", u.rev9.residual, 1e-9);
    add("t_lambda_exact", u.t_lambda_exact_residual, 1e-9);
    add("t_lambda_approximation", u.t_lambda_residual, -1);
    detail["uphill_ratio"] = u.uphill_ratio;
  }
  const auto& ball = s.A_delta;
  StateSet Ad = chain.states_where([&](const MesoState& m) { return contains(ball, m); });
  StateSet Bd = complement(Ad);
  if (want("downhill")) {
    auto d = h_transform_downhill(chain, A, B, Ad, Bd);
    add("downhill_h_rows", d.row_sum_error, 1e-12);
    add("downhill_h_reversibility", d.reversibility_error, 1e-12);
    add("downhill_path_reversal", d.flip_identity_residual, 1e-9);
    // lhs <= rhs + (mass of B_delta under mu^h): the bound that holds exactly at finite N
    checks.push_back({"downhill_inequality", d.lhs - d.rhs_with_ball, 0.0, d.holds_with_ball});
    detail["downhill"] = {{"lhs", d.lhs},
                          {"rhs", d.rhs},
                          {"holds_without_ball_term", d.holds},
                          {"rhs_with_ball", d.rhs_with_ball}};
  }
  if (want("recurrence")) {
    std::vector<int> ids;
    for (int k = 0; k < chain.num_slices(); ++k)
      if (contains(ball, chain.slice_meso(k)) && !B.contains(chain.slice(k).front())) ids.push_back(k);
    add("local_recurrence", local_recurrence_probe(chain, ids, B), -1);
  }

  json j = header(c, "exact");
  j["setup"] = setup_json(s);
  j["check"] = which;
  j["checks"] = json::array();
  bool ok = true;
  for (const auto& ch : checks) {
    json e{{"name", ch.name}, {"value", ch.value}, {"passed", ch.passed}};
    if (ch.tolerance >= 0) e["tolerance"] = ch.tolerance;
    j["checks"].push_back(e);
    ok = ok && ch.passed;
  }
  j["detail"] = detail;
  j["all_passed"] = ok;
  out.write_json("exact_report.json", j);
  return ok ? 0 : 3;
}

int cmd_expfit(const ExperimentConfig& c, Setup& s, Outputs& out) {
  resolve_targets(s, c);
  // one fixed start in A, independent trajectories
  RngStream pick(c.model.seed, kFieldStream - 1, substreams::kStart);
  auto s0 = sample_uniform_on_slice(s.anchor, s.partition.layout, pick);
  EnsembleSpec es;
  es.seed = c.model.seed;
  es.count = c.dynamics.trajectories;
  es.threads = c.dynamics.threads;
  auto recs = run_ensemble([&](std::uint32_t, RngStream&) { return s0; }, s.B, *s.rule, es);
  auto res = summarize(recs, "fixed start on anchor slice " + sums_str(s.anchor.sums));
  std::ostringstream csv;
  csv << "t,empirical_survival,exp_minus_t\n";
  for (const auto& r : survival_curve(res.samples))
    csv << format_double(r.t) << "," << format_double(r.empirical) << "," << format_double(r.exponential) << "\n";
  out.write("survival.csv", csv.str());
  json j = header(c, "expfit");
  j["setup"] = setup_json(s);
  j["mean"] = res.mean;
  j["standard_error"] = res.standard_error;
  j["count"] = res.count();
  j["truncations"] = res.truncation_count;
  if (res.count() < 100) {
    j["verdict"] = "inconclusive";
    j["note"] = "fewer than 100 untruncated samples";
    out.write_json("expfit.json", j);
    return 4;
  }
  auto rep = exponential_law_test(res.samples, res.truncation_count, c.stats.level, c.stats.slack);
  j["ks"] = rep.ks;
  j["critical"] = rep.critical;
  j["threshold"] = rep.threshold;
  j["level"] = rep.level;
  j["verdict"] = to_string(rep.verdict);
  j["note"] = rep.note;
  out.write_json("expfit.json", j);
  switch (rep.verdict) {
    case Verdict::Pass: return 0;
    case Verdict::Inconclusive: return 4;
    default: return 1;
  }
}

int cmd_flatness(const ExperimentConfig& c, Setup& s, Outputs& out) {
  resolve_targets(s, c);
  std::vector<SpinConfig> starts;
  for (int i = 0; i < c.stats.starts; ++i) {
    RngStream pick(c.model.seed, kFieldStream - 1 - static_cast<std::uint32_t>(i), substreams::kStart);
    starts.push_back(sample_uniform_on_slice(s.anchor, s.partition.layout, pick));
  }
  FlatnessOptions fo;
  fo.trajectories = c.dynamics.trajectories;
  fo.seed = c.model.seed;
  fo.cap = c.dynamics.cap;
  fo.threads = c.dynamics.threads;
  auto rep = flatness_test(starts, s.B, *s.rule, fo);
  std::ostringstream csv;
  csv << "start,start_spins,mean,standard_error,count,truncations\n";
  for (std::size_t i = 0; i < rep.ensembles.size(); ++i) {
    const auto& e = rep.ensembles[i];
    std::string spins;
    for (auto v : starts[i].spins()) spins += v > 0 ? '+' : '-';
    csv << i << "," << spins << "," << format_double(e.mean) << "," << format_double(e.standard_error) << ","
        << e.count() << "," << e.truncation_count << "\n";
  }
  out.write("flatness.csv", csv.str());
  json j = header(c, "flatness");
  j["setup"] = setup_json(s);
  j["max_deviation"] = rep.max_deviation;
  j["max_deviation_se"] = rep.max_deviation_se;
  j["argmax"] = {rep.argmax_i, rep.argmax_j};
  j["within_3se_bands"] = rep.within_bands;
  j["inconclusive"] = rep.inconclusive;
  bool any_samples = true;
  for (const auto& e : rep.ensembles) any_samples = any_samples && e.count() > 0;
  if (any_samples && !c.stats.lambdas.empty()) {
    auto lf = laplace_flatness(rep.ensembles, c.stats.lambdas);
    j["laplace"] = {{"T", lf.T}, {"max_deviation", lf.max_deviation}, {"grid", json::array()}};
    for (const auto& p : lf.grid)
      j["laplace"]["grid"].push_back({{"lambda", p.lambda}, {"R", vec(p.R)}, {"se", vec(p.se)},
                                       {"max_deviation", p.max_deviation}});
  }
  out.write_json("flatness.json", j);
  return rep.inconclusive ? 4 : 0;
}

const char* kPlotScript = R"PY(#!/usr/bin/env python3
# Renders survival.csv and landscape.csv when present.
import csv, os, sys
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

def rows(name):
    path = os.path.join(here, name)
    if not os.path.exists(path):
        return None
    with open(path) as f:
        return list(csv.DictReader(f))

surv = rows("survival.csv")
if surv:
    t = [float(r["t"]) for r in surv]
    plt.figure()
    plt.semilogy(t, [max(float(r["empirical_survival"]), 1e-300) for r in surv], label="empirical")
    plt.semilogy(t, [float(r["exp_minus_t"]) for r in surv], "--", label="exp(-t)")
    plt.xlabel("tau / mean")
    plt.ylabel("survival")
    plt.legend()
    plt.savefig(os.path.join(here, "survival.png"), dpi=120)

land = rows("landscape.csv")
if land:
    reg = [r for r in land if r["kind"] == "regular"]
    crit = [r for r in land if r["kind"] != "regular"]
    plt.figure()
    plt.plot([float(r["m"]) for r in reg], [float(r["F"]) for r in reg])
    for r in crit:
        plt.plot(float(r["m"]), float(r["F"]), "o" if r["kind"] == "minimum" else "s", label=r["kind"])
    plt.xlabel("m")
    plt.ylabel("F")
    plt.savefig(os.path.join(here, "landscape.png"), dpi=120)
)PY";

}  // namespace

int run_experiment(const ExperimentConfig& c, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  Outputs out(c.output.directory);
  out.write("config.toml", emit_config(c));
  Setup s = build_setup(c);
  int status = 0;
  const auto& sub = opt.subcommand;
  if (sub == "landscape") status = cmd_landscape(c, s, out);
  else if (sub == "simulate") status = cmd_simulate(c, s, out);
  else if (sub == "couple") status = cmd_couple(c, s, out);
  else if (sub == "exact") status = cmd_exact(c, s, out, opt.exact_check.empty() ? c.exact.check : opt.exact_check);
  else if (sub == "expfit") status = cmd_expfit(c, s, out);
  else if (sub == "flatness") status = cmd_flatness(c, s, out);
  else throw ConfigError("unknown subcommand " + sub);
  out.write("plot.py", kPlotScript);
  fs::permissions(out.dir() / "plot.py", fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                  fs::perm_options::add);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json m{{"subcommand", sub},
         {"config_hash", sha1_hex(emit_config(c))},
         {"wall_time_seconds", wall},
         {"exit_status", status},
         {"files", json::object()},
         {"inputs", json::object()}};
  if (!opt.config_path.empty()) m["inputs"][opt.config_path] = git_blob_sha1(opt.config_bytes);
  for (const auto& [name, h] : out.files()) m["files"][name] = h;
  std::ofstream mf(out.dir() / "manifest.json");
  mf << m.dump(2) << "\n";
  return status;
}

}  // namespace rfcw
