#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rfcw/config.hpp"
#include "rfcw/error.hpp"
#include "rfcw/experiment.hpp"

namespace {

int exit_code(const rfcw::Error& e) {
  if (dynamic_cast<const rfcw::ConfigError*>(&e)) return 2;
  return 3;
}

void report(const std::string& kind, const std::string& msg, int code, const std::string& dir) {
  nlohmann::json j{{"error", {{"kind", kind}, {"message", msg}}}, {"exit_status", code}};
  std::cerr << j.dump() << "\n";
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream f(std::filesystem::path(dir) / "error.json");
  if (f) f << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Glauber dynamics of the random-field Curie-Weiss model"};
  app.require_subcommand(1);
  std::string config_path, out_dir, check;
  bool print_config = false;

  const char* names[][2] = {{"landscape", "free energy, critical points and Kramers exponent"},
                            {"simulate", "hitting times of B from the anchor slice"},
                            {"couple", "hitting times through the coupling cycle construction"},
                            {"exact", "exact identities by enumeration"},
                            {"expfit", "KS test of the normalized hitting time against Exp(1)"},
                            {"flatness", "mean hitting times from several starts in A"}};
  for (auto& [name, desc] : names) {
    auto* sc = app.add_subcommand(name, desc);
    sc->add_option("-c,--config", config_path, "config file")->required();
    sc->add_option("-o,--out", out_dir, "output directory (overrides output.directory)");
    sc->add_flag("--print-config", print_config, "print the validated config with defaults and exit");
    if (std::string(name) == "exact")
      sc->add_option("--check", check, "green | renewal | uphill | downhill | recurrence | all")
          ->check(CLI::IsMember({"green", "renewal", "uphill", "downhill", "recurrence", "all"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }

  std::string dir_for_errors = out_dir;
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw rfcw::ConfigError("cannot read config file " + config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto cfg = rfcw::parse_config_string(ss.str(), config_path);
    rfcw::apply_env_overrides(cfg);
    if (!out_dir.empty()) cfg.output.directory = out_dir;
    dir_for_errors = cfg.output.directory;
    rfcw::validate(cfg);
    if (print_config) {
      std::cout << rfcw::emit_config(cfg);
      return 0;
    }
    rfcw::RunOptions opt;
    opt.subcommand = app.get_subcommands().front()->get_name();
    opt.config_path = config_path;
    opt.config_bytes = ss.str();
    opt.exact_check = check;
    return rfcw::run_experiment(cfg, opt);
  } catch (const rfcw::Error& e) {
    int code = exit_code(e);
    report(e.kind(), e.what(), code, dir_for_errors);
    return code;
  } catch (const std::exception& e) {
    report("internal", e.what(), 3, dir_for_errors);
    return 3;
  }
}
