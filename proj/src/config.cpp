#include "rfcw/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "rfcw/error.hpp"
#include "rfcw/model.hpp"

namespace rfcw {
namespace {

std::string where(const toml::source_region& r, const std::string& src) {
  std::ostringstream os;
  os << src << ":" << r.begin.line;
  return os.str();
}

// reads one table, remembering which keys were consumed
class Section {
 public:
  Section(const toml::table* t, std::string name, const std::string& src) : t_(t), name_(std::move(name)), src_(src) {}

  bool has(const char* key) const { return t_ && t_->contains(key); }

  template <class T>
  void get(const char* key, T& out, bool required = false) {
    seen_.insert(key);
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (!n) {
      if (required) throw ConfigError(loc() + ": missing required key " + name_ + "." + key);
      return;
    }
    read(*n, key, out);
  }
  template <class T>
  void get_opt(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (!n) return;
    T v{};
    read(*n, key, v);
    out = v;
  }

  void finish() const {
    if (!t_) return;
    for (auto&& [k, v] : *t_) {
      if (!seen_.count(std::string(k.str())))
        throw ConfigError(where(k.source(), src_) + ": unknown key " + name_ + "." + std::string(k.str()));
    }
  }

 private:
  std::string loc() const { return t_ ? where(t_->source(), src_) : src_; }
  [[noreturn]] void mismatch(const toml::node& n, const char* key, const char* want) const {
    throw ConfigError(where(n.source(), src_) + ": " + name_ + "." + key + " must be " + want);
  }

  void read(const toml::node& n, const char* key, double& out) const {
    if (auto v = n.as_floating_point()) out = v->get();
    else if (auto i = n.as_integer()) out = static_cast<double>(i->get());
    else mismatch(n, key, "a number");
  }
  void read(const toml::node& n, const char* key, std::int64_t& out) const {
    if (auto i = n.as_integer()) out = i->get();
    else mismatch(n, key, "an integer");
  }
  void read(const toml::node& n, const char* key, int& out) const {
    std::int64_t v = 0;
    read(n, key, v);
    if (v < INT32_MIN || v > INT32_MAX) mismatch(n, key, "a 32-bit integer");
    out = static_cast<int>(v);
  }
  void read(const toml::node& n, const char* key, std::uint32_t& out) const {
    std::int64_t v = 0;
    read(n, key, v);
    if (v < 0 || v > UINT32_MAX) mismatch(n, key, "a nonnegative 32-bit integer");
    out = static_cast<std::uint32_t>(v);
  }
  void read(const toml::node& n, const char* key, std::uint64_t& out) const {
    // seeds above 2^63 can be written as strings
    if (auto s = n.as_string()) {
      char* end = nullptr;
      out = std::strtoull(s->get().c_str(), &end, 0);
      if (!end || *end) mismatch(n, key, "a nonnegative integer");
      return;
    }
    std::int64_t v = 0;
    if (auto f = n.as_floating_point()) {
      // caps like 1e10
      double d = f->get();
      if (d < 0 || d != std::floor(d) || d > 1.8e19) mismatch(n, key, "a nonnegative integer");
      out = static_cast<std::uint64_t>(d);
      return;
    }
    read(n, key, v);
    if (v < 0) mismatch(n, key, "a nonnegative integer");
    out = static_cast<std::uint64_t>(v);
  }
  void read(const toml::node& n, const char* key, std::string& out) const {
    if (auto s = n.as_string()) out = s->get();
    else mismatch(n, key, "a string");
  }
  template <class T>
  void read(const toml::node& n, const char* key, std::vector<T>& out) const {
    auto a = n.as_array();
    if (!a) mismatch(n, key, "an array");
    out.clear();
    for (const auto& e : *a) {
      T v{};
      read(e, key, v);
      out.push_back(v);
    }
  }

  const toml::table* t_;
  std::string name_;
  const std::string& src_;
  std::set<std::string> seen_;
};

const toml::table* section(const toml::table& root, const char* name, const std::string& src) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(where(n->source(), src) + ": [" + name + "] must be a table");
  return n->as_table();
}

std::string num(double v) {
  // shortest text that reads back to the same double
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string o = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') o += '\\';
    o += c;
  }
  return o + "\"";
}

template <class T, class F>
std::string list(const std::vector<T>& v, F f) {
  std::string o = "[";
  for (std::size_t i = 0; i < v.size(); ++i) o += (i ? ", " : "") + f(v[i]);
  return o + "]";
}

}  // namespace

ExperimentConfig parse_config_string(const std::string& text, const std::string& src) {
  toml::table root;
  try {
    root = toml::parse(text, src);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << src << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
  static const std::set<std::string> known{"model", "coarse", "dynamics", "coupling", "targets", "stats", "exact",
                                           "output"};
  for (auto&& [k, v] : root)
    if (!known.count(std::string(k.str())))
      throw ConfigError(where(k.source(), src) + ": unknown section " + std::string(k.str()));

  ExperimentConfig c;
  {
    Section s(section(root, "model", src), "model", src);
    s.get("N", c.model.N, true);
    s.get("beta", c.model.beta, true);
    s.get("field", c.model.field);
    s.get("fields", c.model.fields);
    s.get("seed", c.model.seed);
    s.get("alpha_cap", c.model.alpha_cap);
    s.finish();
  }
  {
    Section s(section(root, "coarse", src), "coarse", src);
    s.get("n", c.coarse.n);
    s.get_opt("C", c.coarse.C);
    s.finish();
  }
  {
    Section s(section(root, "dynamics", src), "dynamics", src);
    s.get("cap", c.dynamics.cap);
    s.get("trajectories", c.dynamics.trajectories);
    s.get("threads", c.dynamics.threads);
    s.finish();
  }
  {
    Section s(section(root, "coupling", src), "coupling", src);
    s.get("kappa", c.coupling.kappa);
    s.get("c2", c.coupling.c2);
    s.get_opt("nu_override", c.coupling.nu_override);
    s.get("cap_cycles", c.coupling.cap_cycles);
    s.finish();
  }
  {
    Section s(section(root, "targets", src), "targets", src);
    s.get("mstar", c.targets.mstar);
    s.get("B", c.targets.B);
    s.get("delta", c.targets.delta);
    s.get("A_sums", c.targets.A_sums);
    s.finish();
  }
  {
    Section s(section(root, "stats", src), "stats", src);
    s.get("level", c.stats.level);
    s.get("slack", c.stats.slack);
    s.get("starts", c.stats.starts);
    s.get("lambdas", c.stats.lambdas);
    s.finish();
  }
  {
    Section s(section(root, "exact", src), "exact", src);
    s.get("check", c.exact.check);
    s.get("lambdas", c.exact.lambdas);
    s.finish();
  }
  {
    Section s(section(root, "output", src), "output", src);
    s.get("directory", c.output.directory);
    s.get("formats", c.output.formats);
    s.finish();
  }
  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), path);
}

void validate(const ExperimentConfig& c) {
  if (c.model.N < 1) throw ConfigError("model.N must be positive");
  if (!(c.model.beta > 0) || !std::isfinite(c.model.beta)) throw ConfigError("model.beta must be positive");
  if (!(c.model.alpha_cap >= 0.5 && c.model.alpha_cap < 1)) throw ConfigError("model.alpha_cap must lie in [1/2,1)");
  if (c.model.fields.empty()) parse_field_law(c.model.field);
  else if (static_cast<int>(c.model.fields.size()) != c.model.N)
    throw ConfigError("model.fields must have N entries");
  if (c.coarse.n < 1) throw ConfigError("coarse.n must be at least 1");
  if (c.coarse.C && !(*c.coarse.C > 0)) throw ConfigError("coarse.C must be positive");
  if (c.dynamics.cap < 1) throw ConfigError("dynamics.cap must be at least 1");
  if (c.dynamics.threads < 0) throw ConfigError("dynamics.threads must be nonnegative");
  if (!(c.coupling.kappa > 0)) throw ConfigError("coupling.kappa must be positive");
  if (!(c.coupling.c2 > 0)) throw ConfigError("coupling.c2 must be positive");
  if (c.coupling.nu_override && !(*c.coupling.nu_override > 0 && *c.coupling.nu_override < 1))
    throw ConfigError("coupling.nu_override must lie in (0,1)");
  static const std::set<std::string> mstars{"low", "high", "deepest", "shallowest"};
  if (!mstars.count(c.targets.mstar)) throw ConfigError("targets.mstar must be low, high, deepest or shallowest");
  if (c.targets.B != "saddle" && c.targets.B != "well") throw ConfigError("targets.B must be saddle or well");
  if (!(c.targets.delta > 0)) throw ConfigError("targets.delta must be positive");
  if (!c.targets.A_sums.empty() && static_cast<int>(c.targets.A_sums.size()) != c.coarse.n)
    throw ConfigError("targets.A_sums must have n entries");
  if (!(c.stats.level > 0 && c.stats.level < 1)) throw ConfigError("stats.level must lie in (0,1)");
  if (!(c.stats.slack >= 1)) throw ConfigError("stats.slack must be at least 1");
  if (c.stats.starts < 2) throw ConfigError("stats.starts must be at least 2");
  for (double l : c.stats.lambdas)
    if (!(l >= 0)) throw ConfigError("stats.lambdas must be nonnegative");
  static const std::set<std::string> checks{"green", "renewal", "uphill", "downhill", "recurrence", "all"};
  if (!checks.count(c.exact.check)) throw ConfigError("exact.check: unknown check " + c.exact.check);
  for (double l : c.exact.lambdas)
    if (!(l >= 0)) throw ConfigError("exact.lambdas must be nonnegative");
  for (const auto& f : c.output.formats)
    if (f != "csv" && f != "json") throw ConfigError("output.formats: unknown format " + f);
}

std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream o;
  auto str = [](const std::string& s) { return quote(s); };
  auto integer = [](int v) { return std::to_string(v); };
  o << "[model]\n";
  o << "N = " << c.model.N << "\n";
  o << "beta = " << num(c.model.beta) << "\n";
  o << "field = " << quote(c.model.field) << "\n";
  if (!c.model.fields.empty()) o << "fields = " << list(c.model.fields, num) << "\n";
  if (c.model.seed > static_cast<std::uint64_t>(INT64_MAX)) o << "seed = \"" << c.model.seed << "\"\n";
  else o << "seed = " << c.model.seed << "\n";
  o << "alpha_cap = " << num(c.model.alpha_cap) << "\n";
  o << "\n[coarse]\nn = " << c.coarse.n << "\n";
  if (c.coarse.C) o << "C = " << num(*c.coarse.C) << "\n";
  o << "\n[dynamics]\n";
  if (c.dynamics.cap > static_cast<std::uint64_t>(INT64_MAX)) o << "cap = \"" << c.dynamics.cap << "\"\n";
  else o << "cap = " << c.dynamics.cap << "\n";
  o << "trajectories = " << c.dynamics.trajectories << "\nthreads = " << c.dynamics.threads << "\n";
  o << "\n[coupling]\nkappa = " << num(c.coupling.kappa) << "\nc2 = " << num(c.coupling.c2) << "\n";
  if (c.coupling.nu_override) o << "nu_override = " << num(*c.coupling.nu_override) << "\n";
  o << "cap_cycles = " << c.coupling.cap_cycles << "\n";
  o << "\n[targets]\nmstar = " << quote(c.targets.mstar) << "\nB = " << quote(c.targets.B)
    << "\ndelta = " << num(c.targets.delta) << "\n";
  if (!c.targets.A_sums.empty()) o << "A_sums = " << list(c.targets.A_sums, integer) << "\n";
  o << "\n[stats]\nlevel = " << num(c.stats.level) << "\nslack = " << num(c.stats.slack)
    << "\nstarts = " << c.stats.starts << "\nlambdas = " << list(c.stats.lambdas, num) << "\n";
  o << "\n[exact]\ncheck = " << quote(c.exact.check) << "\nlambdas = " << list(c.exact.lambdas, num) << "\n";
  o << "\n[output]\ndirectory = " << quote(c.output.directory) << "\nformats = " << list(c.output.formats, str)
    << "\n";
  return o.str();
}

void apply_env_overrides(ExperimentConfig& c) {
  if (const char* s = std::getenv("SEED"); s && *s) {
    char* end = nullptr;
    c.model.seed = std::strtoull(s, &end, 0);
    if (*end) throw ConfigError(std::string("SEED is not an integer: ") + s);
  }
  if (const char* s = std::getenv("THREADS"); s && *s) {
    char* end = nullptr;
    long v = std::strtol(s, &end, 10);
    if (*end || v < 0) throw ConfigError(std::string("THREADS is not a nonnegative integer: ") + s);
    c.dynamics.threads = static_cast<int>(v);
  }
}

}  // namespace rfcw
