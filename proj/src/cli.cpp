#include "whirlpool/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "whirlpool/diagnostics.hpp"
#include "whirlpool/errors.hpp"
#include "whirlpool/io.hpp"
#include "whirlpool/parallel.hpp"

namespace whirlpool {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(const RunReport& r) {
  switch (r.termination) {
    case Termination::Completed:
      return kExitCompleted;
    case Termination::BlowUpDetected:
      return kExitBlowUp;
    case Termination::NonFinite:
      return kExitNumericalFailure;
  }
  return kExitNumericalFailure;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::IoError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnboundedRegime:
    case ErrorCode::PositiveDefinitenessViolated:
      return kExitConfigError;
    default:
      return kExitNumericalFailure;
  }
}

void print_summary(std::ostream& os, const RunReport& r) {
  os << "termination: " << to_string(r.termination) << '\n'
     << "steps: " << r.n_steps << "  final_time: " << format_double(r.final_time)
     << "  final_energy: " << format_double(r.final_energy) << "  wall_time: " << r.wall_time << " s\n";
  for (const auto& c : r.certificates) {
    os << "certificate: " << to_string(c.kind) << " at t = " << format_double(c.t_detect)
       << " evidence = " << format_double(c.evidence) << (c.lmc_norm_flag ? " (L^m_c norm)" : "") << '\n';
  }
  for (const auto& w : r.warnings) os << "warning: " << w << '\n';
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "config file not found: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_value(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    const double d = parse_double(v);
    if (v.find_first_of(".eE") == std::string::npos && d == static_cast<double>(static_cast<long long>(d))) {
      return static_cast<long long>(d);
    }
    return d;
  } catch (const Error&) {
    return v;
  }
}

void set_dotted(json& doc, const std::string& path, const json& value) {
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty() || !node->is_object()) throw Error(ErrorCode::ValidationError, "bad parameter path '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) throw Error(ErrorCode::ValidationError, "parameter '" + path + "' is not in the config");
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_run(const fs::path& config, std::optional<fs::path> out, std::optional<fs::path> gn_cache) {
  LoadOptions opts;
  opts.gn_cache = gn_cache;
  const ScenarioConfig cfg = load_config(config, opts);
  const fs::path dir = out.value_or(cfg.outputs);
  const RunReport r = execute_scenario(cfg, dir);
  print_summary(std::cout, r);
  std::cout << "outputs: " << dir.string() << '\n';
  return exit_code_for(r);
}

int cmd_sweep(const fs::path& config, const std::string& param, const std::string& values,
              std::optional<fs::path> out, std::optional<fs::path> gn_cache) {
  json base;
  try {
    base = json::parse(read_text(config));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  const auto vals = split_list(values);
  if (vals.empty()) throw Error(ErrorCode::ValidationError, "--values is empty");
  LoadOptions opts;
  opts.gn_cache = gn_cache;

  // Configs are resolved up front, so the GN cache is only ever written once.
  std::vector<ScenarioConfig> cfgs;
  for (const auto& v : vals) {
    json doc = base;
    set_dotted(doc, param, parse_value(v));
    cfgs.push_back(parse_config(doc.dump(), config.parent_path(), opts));
    if (cfgs.back().name.empty()) cfgs.back().name = config.stem().string();
  }
  const fs::path root = out.value_or(cfgs.front().outputs);
  std::vector<int> codes(vals.size(), kExitNumericalFailure);
  std::vector<std::string> lines(vals.size());
  parallel_for(vals.size(), default_thread_count(), [&](std::size_t i) {
    const fs::path dir = root / (param + "=" + vals[i]);
    std::ostringstream os;
    os << param << '=' << vals[i] << ',';
    try {
      const RunReport r = execute_scenario(cfgs[i], dir);
      codes[i] = exit_code_for(r);
      os << to_string(r.termination) << ',' << format_double(r.final_time) << ',' << format_double(r.final_energy);
    } catch (const Error& e) {
      codes[i] = exit_code_for(e);
      os << "Error," << e.what();
    }
    os << ',' << dir.string();
    lines[i] = os.str();
  });
  std::cout << "run,termination,final_time,final_energy,outputs\n";
  for (const auto& l : lines) std::cout << l << '\n';
  return *std::max_element(codes.begin(), codes.end());
}

int cmd_classify(double m, double chi, int d, std::optional<double> chi_c, const fs::path& gn_cache) {
  const ModelParams p{m, chi, d};
  p.validate();
  double cc = chi_c.value_or(0.0);
  if (!chi_c) {
    const double mc = critical_exponent(d);
    if (std::abs(m - mc) <= 1e-12 * mc) {
      if (d != 1) throw Error(ErrorCode::ValidationError, "critical mass estimates need d = 1 or --chi-c");
      cc = load_or_create_gn_cache(gn_cache).chi_c;
    } else {
      cc = 1.0;  // unused away from m_c
    }
  }
  std::cout << to_string(classify_regime(p, cc)) << '\n';
  return kExitCompleted;
}

int cmd_gn_estimate(int d, std::size_t cells, std::size_t restarts, std::optional<fs::path> cache) {
  if (d != 1) throw Error(ErrorCode::ValidationError, "gn-estimate supports d = 1");
  const GnCache c = compute_gn_cache(d, cells, restarts);
  std::cout << "c_gn_estimate: " << format_double(c.c_gn_estimate) << '\n'
            << "chi_c: " << format_double(c.chi_c) << '\n';
  if (cache) {
    write_gn_cache(*cache, c);
    std::cout << "cache: " << cache->string() << '\n';
  }
  return kExitCompleted;
}

int cmd_rescale(const fs::path& dir, int d) {
  const auto snaps = read_snapshot_dir(dir);
  std::optional<Grid1D> reference;
  std::optional<DensityField> prev;
  std::cout << "t,l1_to_previous\n";
  for (const auto& s : snaps) {
    if (s.t <= kSelfSimilarTimeFloor) continue;
    if (!reference) reference = s.rho.grid();
    DensityField u = rescale_self_similar(s.rho, s.t, d, *reference);
    std::cout << format_double(s.t) << ',' << (prev ? format_double(l1_distance(u, *prev)) : std::string("")) << '\n';
    prev = std::move(u);
  }
  return kExitCompleted;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Thin-film aggregation solver"};
  app.require_subcommand(1);

  std::string config, out, gn_cache, param, values, snapshots, cache;
  double m = 0.0, chi = 0.0, chi_c = 0.0;
  int d = 1;
  std::size_t cells = 400, restarts = 4;

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("--config", config, "Scenario JSON")->required();
  run->add_option("--out", out, "Output directory (default: the config's outputs)");
  run->add_option("--gn-cache", gn_cache, "GN cache file");

  auto* sweep = app.add_subcommand("sweep", "Run a scenario for several values of one parameter");
  sweep->add_option("--config", config, "Scenario JSON")->required();
  sweep->add_option("--param", param, "Dotted JSON path, e.g. model.chi")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", out, "Root output directory");
  sweep->add_option("--gn-cache", gn_cache, "GN cache file");

  auto* classify = app.add_subcommand("classify", "Print the regime of (m, chi, d)");
  classify->add_option("--m", m)->required();
  classify->add_option("--chi", chi)->required();
  classify->add_option("--d", d)->required();
  auto* chi_c_opt = classify->add_option("--chi-c", chi_c, "Critical mass (default: GN cache)");
  classify->add_option("--gn-cache", gn_cache, "GN cache file")->default_val("gn_cache.json");

  auto* gn = app.add_subcommand("gn-estimate", "Estimate the Gagliardo-Nirenberg constant");
  gn->add_option("--d", d)->required();
  gn->add_option("--cells", cells)->default_val(400);
  gn->add_option("--restarts", restarts)->default_val(4);
  gn->add_option("--cache", cache, "Write the estimate to this JSON file");

  auto* rescale = app.add_subcommand("rescale", "Self-similar rescaling of a snapshot directory");
  rescale->add_option("--snapshots", snapshots)->required();
  rescale->add_option("--d", d)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitCompleted : kExitConfigError;
  }

  auto opt_path = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<fs::path>(s); };
  try {
    if (*run) return cmd_run(config, opt_path(out), opt_path(gn_cache));
    if (*sweep) return cmd_sweep(config, param, values, opt_path(out), opt_path(gn_cache));
    if (*classify) {
      return cmd_classify(m, chi, d, chi_c_opt->count() ? std::optional<double>(chi_c) : std::nullopt, gn_cache);
    }
    if (*gn) return cmd_gn_estimate(d, cells, restarts, opt_path(cache));
    if (*rescale) return cmd_rescale(snapshots, d);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumericalFailure;
  }
  return kExitConfigError;
}

}  // namespace whirlpool
