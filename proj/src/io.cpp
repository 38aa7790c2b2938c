#include "whirlpool/io.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "whirlpool/diagnostics.hpp"
#include "whirlpool/errors.hpp"

namespace whirlpool {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool is_numeric(std::string_view s) {
  try {
    parse_double(s);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- strict JSON helpers ----

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::ParseError, where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorCode::ParseError, "unknown key '" + key + "' in " + where);
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::ParseError, "missing key '" + key + "' in " + where);
  return *it;
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw Error(ErrorCode::ParseError, what + " must be a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, where + "." + key);
}

std::size_t count(const json& v, const std::string& what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorCode::ParseError, what + " must be a nonnegative integer");
  }
  return static_cast<std::size_t>(v.get<long long>());
}

std::size_t count_or(const json& obj, const std::string& key, std::size_t fallback, const std::string& where) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : count(*it, where + "." + key);
}

std::string text(const json& v, const std::string& what) {
  if (!v.is_string()) throw Error(ErrorCode::ParseError, what + " must be a string");
  return v.get<std::string>();
}

InitialSpec parse_initial(const json& obj, const fs::path& base_dir, const std::string& where) {
  check_keys(obj, {"type", "center", "width", "separation", "left_share", "path", "noise"}, where);
  InitialSpec s;
  const std::string type = text(require(obj, "type", where), where + ".type");
  if (type == "gaussian") {
    s.kind = InitialSpec::Kind::Gaussian;
  } else if (type == "cosine") {
    s.kind = InitialSpec::Kind::Cosine;
  } else if (type == "double_bump") {
    s.kind = InitialSpec::Kind::DoubleBump;
  } else if (type == "file") {
    s.kind = InitialSpec::Kind::File;
  } else {
    throw Error(ErrorCode::ParseError, "unknown initial type '" + type + "' in " + where);
  }
  s.center = number_or(obj, "center", 0.0, where);
  s.width = number_or(obj, "width", 1.0, where);
  s.separation = number_or(obj, "separation", 1.0, where);
  s.left_share = number_or(obj, "left_share", 0.5, where);
  s.noise = number_or(obj, "noise", 0.0, where);
  if (s.kind == InitialSpec::Kind::File) {
    s.path = base_dir / text(require(obj, "path", where), where + ".path");
  }
  if (!(s.width > 0.0)) throw Error(ErrorCode::ValidationError, where + ".width must be positive");
  if (!(s.noise >= 0.0 && s.noise < 1.0)) throw Error(ErrorCode::ValidationError, where + ".noise must lie in [0, 1)");
  if (!(s.left_share > 0.0 && s.left_share < 1.0)) {
    throw Error(ErrorCode::ValidationError, where + ".left_share must lie in (0, 1)");
  }
  return s;
}

double bump(InitialSpec::Kind kind, double x, double center, double width) {
  const double y = x - center;
  if (kind == InitialSpec::Kind::Gaussian) return std::exp(-y * y / (2.0 * width * width));
  if (std::abs(y) >= 0.5 * width) return 0.0;
  const double c = std::cos(M_PI * y / width);
  return c * c;
}

// Rethrows library errors raised while validating as ValidationError.
template <typename Fn>
void validating(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError || e.code() == ErrorCode::ValidationError ||
        e.code() == ErrorCode::IoError) {
      throw;
    }
    throw Error(ErrorCode::ValidationError, e.what());
  }
}

}  // namespace

DensityField make_initial(const InitialSpec& spec, const Grid1D& grid, std::uint64_t seed) {
  std::vector<double> v(grid.n_cells(), 0.0);
  switch (spec.kind) {
    case InitialSpec::Kind::Gaussian:
    case InitialSpec::Kind::Cosine:
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = bump(spec.kind, grid.center(j), spec.center, spec.width);
      break;
    case InitialSpec::Kind::DoubleBump: {
      const double cl = spec.center - 0.5 * spec.separation;
      const double cr = spec.center + 0.5 * spec.separation;
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double x = grid.center(j);
        v[j] = spec.left_share * bump(InitialSpec::Kind::Cosine, x, cl, spec.width) +
               (1.0 - spec.left_share) * bump(InitialSpec::Kind::Cosine, x, cr, spec.width);
      }
      break;
    }
    case InitialSpec::Kind::File: {
      const std::string body = read_file(spec.path);
      std::istringstream in(body);
      std::string line;
      std::vector<double> vals;
      while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cols = split(line, ',');
        if (!is_numeric(cols.back())) {
          if (vals.empty()) continue;  // header
          throw Error(ErrorCode::ParseError, "bad row in " + spec.path.string() + ": " + line);
        }
        vals.push_back(parse_double(cols.back()));
      }
      if (vals.size() != v.size()) {
        throw Error(ErrorCode::ValidationError, spec.path.string() + " has " + std::to_string(vals.size()) +
                                                    " values for " + std::to_string(v.size()) + " cells");
      }
      v = std::move(vals);
      break;
    }
  }
  if (spec.noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& x : v) {
      const double r = u(rng);
      if (x > 0.0) x *= 1.0 + spec.noise * r;
    }
  }
  return DensityField::normalized(grid, std::move(v));
}

// ---- GN cache ----

GnCache read_gn_cache(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "GN cache " + path.string() + ": " + e.what());
  }
  check_keys(j, {"d", "n_cells", "n_restarts", "c_gn_estimate", "chi_c"}, "GN cache");
  GnCache c;
  c.d = static_cast<int>(count(require(j, "d", "GN cache"), "d"));
  c.n_cells = count(require(j, "n_cells", "GN cache"), "n_cells");
  c.n_restarts = count(require(j, "n_restarts", "GN cache"), "n_restarts");
  c.c_gn_estimate = number(require(j, "c_gn_estimate", "GN cache"), "c_gn_estimate");
  c.chi_c = number(require(j, "chi_c", "GN cache"), "chi_c");
  if (!(c.c_gn_estimate > 0.0) || !(c.chi_c > 0.0)) {
    throw Error(ErrorCode::ValidationError, "GN cache holds non-positive estimates");
  }
  return c;
}

void write_gn_cache(const fs::path& path, const GnCache& c) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  json j = {{"d", c.d}, {"n_cells", c.n_cells}, {"n_restarts", c.n_restarts},
            {"c_gn_estimate", c.c_gn_estimate}, {"chi_c", c.chi_c}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

GnCache compute_gn_cache(int d, std::size_t n_cells, std::size_t n_restarts) {
  const Grid1D grid(-1.0, 1.0, n_cells);
  GnCache c;
  c.d = d;
  c.n_cells = n_cells;
  c.n_restarts = n_restarts;
  c.c_gn_estimate = estimate_gn_constant(d, grid, n_restarts);
  c.chi_c = critical_mass(d, c.c_gn_estimate);
  return c;
}

GnCache load_or_create_gn_cache(const fs::path& path) {
  if (fs::exists(path)) return read_gn_cache(path);
  GnCache c = compute_gn_cache(1, 400, 4);
  write_gn_cache(path, c);
  return c;
}

// ---- scenario config ----

ScenarioConfig parse_config(const std::string& body, const fs::path& base_dir, const LoadOptions& opts) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  try {
    check_keys(j, {"name", "model", "grid", "initial", "stepper", "outputs", "seed", "gn_cache"}, "config");
    ScenarioConfig cfg;
    if (auto it = j.find("name"); it != j.end()) cfg.name = text(*it, "name");
    if (auto it = j.find("outputs"); it != j.end()) cfg.outputs = text(*it, "outputs");
    if (auto it = j.find("seed"); it != j.end()) cfg.seed = count(*it, "seed");
    if (opts.gn_cache) {
      cfg.gn_cache = *opts.gn_cache;
    } else if (auto it = j.find("gn_cache"); it != j.end()) {
      cfg.gn_cache = base_dir / text(*it, "gn_cache");
    } else {
      cfg.gn_cache = base_dir / "gn_cache.json";
    }

    // grid
    const json& g = require(j, "grid", "config");
    check_keys(g, {"x_min", "x_max", "n_cells", "boundary"}, "grid");
    Boundary boundary = Boundary::NoFlux;
    if (auto it = g.find("boundary"); it != g.end()) {
      const std::string b = text(*it, "grid.boundary");
      if (b == "periodic") {
        boundary = Boundary::Periodic;
      } else if (b != "no_flux") {
        throw Error(ErrorCode::ParseError, "grid.boundary must be 'no_flux' or 'periodic'");
      }
    }
    const double x_min = number(require(g, "x_min", "grid"), "grid.x_min");
    const double x_max = number(require(g, "x_max", "grid"), "grid.x_max");
    const std::size_t n_cells = count(require(g, "n_cells", "grid"), "grid.n_cells");
    validating([&] { cfg.grid = Grid1D(x_min, x_max, n_cells, boundary); });

    // model
    const json& m = require(j, "model", "config");
    const std::string mtype = text(require(m, "type", "model"), "model.type");
    if (mtype == "one_species") {
      check_keys(m, {"type", "m", "chi", "d"}, "model");
      ModelParams p;
      p.m = number(require(m, "m", "model"), "model.m");
      p.d = static_cast<int>(count_or(m, "d", 1, "model"));
      const json& chi = require(m, "chi", "model");
      if (chi.is_string()) {
        const std::string s = chi.get<std::string>();
        const std::string prefix = "auto_critical:";
        if (s.rfind(prefix, 0) != 0) throw Error(ErrorCode::ParseError, "model.chi string must be auto_critical:<factor>");
        const double factor = parse_double(std::string_view(s).substr(prefix.size()));
        if (!(factor > 0.0)) throw Error(ErrorCode::ValidationError, "auto_critical factor must be positive");
        cfg.chi_factor = factor;
        if (p.d != 1) throw Error(ErrorCode::ValidationError, "auto_critical needs d = 1");
        const GnCache cache = load_or_create_gn_cache(cfg.gn_cache);
        cfg.chi_c = cache.chi_c;
        p.chi = factor * cache.chi_c;
      } else {
        p.chi = number(chi, "model.chi");
      }
      validating([&] { p.validate(); });
      if (p.d != 1) throw Error(ErrorCode::ValidationError, "PDE solves need d = 1");
      if (!cfg.chi_c && std::abs(p.m - critical_exponent(p.d)) <= 1e-12 * critical_exponent(p.d)) {
        cfg.chi_c = load_or_create_gn_cache(cfg.gn_cache).chi_c;
      }
      cfg.model = p;
    } else if (mtype == "two_species") {
      check_keys(m, {"type", "kappa", "alpha", "beta", "omega", "m1", "m2"}, "model");
      TwoSpeciesParams p;
      p.kappa = number_or(m, "kappa", p.kappa, "model");
      p.alpha = number_or(m, "alpha", p.alpha, "model");
      p.beta = number_or(m, "beta", p.beta, "model");
      p.omega = number_or(m, "omega", p.omega, "model");
      p.m1 = number_or(m, "m1", p.m1, "model");
      p.m2 = number_or(m, "m2", p.m2, "model");
      validating([&] { p.validate(); });
      cfg.model = p;
    } else {
      throw Error(ErrorCode::ParseError, "model.type must be 'one_species' or 'two_species'");
    }

    // initial data
    const json& ini = require(j, "initial", "config");
    if (cfg.two_species()) {
      check_keys(ini, {"rho", "eta"}, "initial");
      cfg.initial = parse_initial(require(ini, "rho", "initial"), base_dir, "initial.rho");
      cfg.initial_eta = parse_initial(require(ini, "eta", "initial"), base_dir, "initial.eta");
    } else {
      cfg.initial = parse_initial(ini, base_dir, "initial");
    }

    // stepper
    const json& st = require(j, "stepper", "config");
    const std::string stype = text(require(st, "type", "stepper"), "stepper.type");
    if (stype == "fv") {
      check_keys(st, {"type", "cfl_safety", "dt_max", "dt_min", "t_end", "positivity_floor", "output_stride",
                      "overflow_threshold", "concentration_threshold", "snapshot_times"},
                 "stepper");
      cfg.stepper = StepperKind::Fv;
      FvConfig& f = cfg.fv;
      f.cfl_safety = number_or(st, "cfl_safety", f.cfl_safety, "stepper");
      f.dt_max = number_or(st, "dt_max", f.dt_max, "stepper");
      f.dt_min = number_or(st, "dt_min", f.dt_min, "stepper");
      f.t_end = number(require(st, "t_end", "stepper"), "stepper.t_end");
      f.positivity_floor = number_or(st, "positivity_floor", f.positivity_floor, "stepper");
      f.output_stride = count_or(st, "output_stride", f.output_stride, "stepper");
      f.overflow_threshold = number_or(st, "overflow_threshold", f.overflow_threshold, "stepper");
      f.concentration_threshold = number_or(st, "concentration_threshold", f.concentration_threshold, "stepper");
      if (auto it = st.find("snapshot_times"); it != st.end()) {
        if (!it->is_array()) throw Error(ErrorCode::ParseError, "stepper.snapshot_times must be an array");
        for (const auto& v : *it) f.snapshot_times.push_back(number(v, "stepper.snapshot_times[]"));
      }
      f.chi_c = cfg.chi_c;
      validating([&] { f.validate(); });
    } else if (stype == "jko") {
      check_keys(st, {"type", "tau", "n_particles", "opt_tol", "max_iters", "ls_shrink", "ls_c1", "direction",
                      "allow_unbounded", "n_steps"},
                 "stepper");
      if (cfg.two_species()) throw Error(ErrorCode::ValidationError, "the JKO stepper supports one species only");
      cfg.stepper = StepperKind::Jko;
      JkoConfig& k = cfg.jko;
      k.tau = number(require(st, "tau", "stepper"), "stepper.tau");
      k.n_particles = count_or(st, "n_particles", k.n_particles, "stepper");
      if (auto it = st.find("opt_tol"); it != st.end()) k.opt_tol = number(*it, "stepper.opt_tol");
      k.max_iters = count_or(st, "max_iters", k.max_iters, "stepper");
      k.ls_shrink = number_or(st, "ls_shrink", k.ls_shrink, "stepper");
      k.ls_c1 = number_or(st, "ls_c1", k.ls_c1, "stepper");
      if (auto it = st.find("direction"); it != st.end()) {
        const std::string d = text(*it, "stepper.direction");
        if (d == "gradient") {
          k.direction = JkoDirection::Gradient;
        } else if (d != "newton") {
          throw Error(ErrorCode::ParseError, "stepper.direction must be 'newton' or 'gradient'");
        }
      }
      if (auto it = st.find("allow_unbounded"); it != st.end()) {
        if (!it->is_boolean()) throw Error(ErrorCode::ParseError, "stepper.allow_unbounded must be a boolean");
        k.allow_unbounded = it->get<bool>();
      }
      cfg.jko_steps = count(require(st, "n_steps", "stepper"), "stepper.n_steps");
      k.chi_c = cfg.chi_c;
      validating([&] {
        k.validate();
        check_jko_regime(std::get<ModelParams>(cfg.model), k);
      });
    } else {
      throw Error(ErrorCode::ParseError, "stepper.type must be 'fv' or 'jko'");
    }

    // The initial data must be realisable on the grid.
    validating([&] {
      make_initial(cfg.initial, cfg.grid, cfg.seed);
      if (cfg.initial_eta) make_initial(*cfg.initial_eta, cfg.grid, cfg.seed + 1);
    });
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

ScenarioConfig load_config(const fs::path& path, const LoadOptions& opts) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, "config file not found: " + path.string());
  ScenarioConfig cfg = parse_config(read_file(path), path.parent_path(), opts);
  if (cfg.name.empty()) cfg.name = path.stem().string();
  return cfg;
}

// ---- CSV ----

CsvSink::CsvSink(const fs::path& csv_path, bool two_species, std::size_t flush_every,
                 std::optional<fs::path> snapshot_dir)
    : out_(csv_path), two_species_(two_species), flush_every_(std::max<std::size_t>(flush_every, 1)),
      snapshot_dir_(std::move(snapshot_dir)) {
  if (!out_) throw Error(ErrorCode::IoError, "cannot write " + csv_path.string());
  out_ << kTimeseriesHeader;
  if (two_species_) out_ << kTwoSpeciesHeaderSuffix;
  out_ << '\n';
  if (snapshot_dir_) {
    fs::create_directories(*snapshot_dir_);
    index_.open(*snapshot_dir_ / "index.csv");
    if (!index_) throw Error(ErrorCode::IoError, "cannot write " + (*snapshot_dir_ / "index.csv").string());
    index_ << "file,t\n";
  }
}

CsvSink::~CsvSink() {
  try {
    flush();
  } catch (...) {
  }
}

void CsvSink::emit(const Sample& s) {
  const double cols[] = {s.t, s.dt, s.energy_total, s.energy_dirichlet, s.energy_entropy,
                         s.m2, s.lm_norm, s.linf_norm, s.min_rho, s.mass};
  std::string row;
  for (std::size_t i = 0; i < std::size(cols); ++i) {
    if (i) row += ',';
    row += format_double(cols[i]);
  }
  if (two_species_) {
    const Sample::Eta e = s.eta.value_or(Sample::Eta{});
    for (double v : {e.mass_eta, e.m2_eta, e.segregation_index, e.energy_cross}) {
      row += ',';
      row += format_double(v);
    }
  }
  row += '\n';
  out_ << row;
  if (!out_) throw Error(ErrorCode::IoError, "failed to write time series row");
  if (++rows_ % flush_every_ == 0) out_.flush();
}

void CsvSink::snapshot(double t, const DensityField& rho, const DensityField* eta) {
  if (!snapshot_dir_) return;
  char name[32];
  std::snprintf(name, sizeof name, "snap_%04zu.csv", n_snapshots_++);
  write_snapshot_csv(*snapshot_dir_ / name, rho, eta);
  index_ << name << ',' << format_double(t) << '\n';
  index_.flush();
}

void CsvSink::flush() {
  out_.flush();
  if (index_.is_open()) index_.flush();
}

std::vector<Sample> read_timeseries_csv(const fs::path& path) {
  const std::string body = read_file(path);
  std::istringstream in(body);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty time series " + path.string());
  const std::string one = kTimeseriesHeader;
  const bool two = line == one + kTwoSpeciesHeaderSuffix;
  if (!two && line != one) throw Error(ErrorCode::ParseError, "unexpected header in " + path.string());
  std::vector<Sample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != (two ? 14u : 10u)) throw Error(ErrorCode::ParseError, "bad row in " + path.string());
    Sample s;
    s.t = parse_double(c[0]);
    s.dt = parse_double(c[1]);
    s.energy_total = parse_double(c[2]);
    s.energy_dirichlet = parse_double(c[3]);
    s.energy_entropy = parse_double(c[4]);
    s.m2 = parse_double(c[5]);
    s.lm_norm = parse_double(c[6]);
    s.linf_norm = parse_double(c[7]);
    s.min_rho = parse_double(c[8]);
    s.mass = parse_double(c[9]);
    if (two) {
      s.eta = Sample::Eta{parse_double(c[10]), parse_double(c[11]), parse_double(c[12]), parse_double(c[13])};
    }
    out.push_back(s);
  }
  return out;
}

void write_snapshot_csv(const fs::path& path, const DensityField& rho, const DensityField* eta) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << (eta ? "x,rho,eta\n" : "x,rho\n");
  const Grid1D& g = rho.grid();
  for (std::size_t j = 0; j < rho.size(); ++j) {
    out << format_double(g.center(j)) << ',' << format_double(rho[j]);
    if (eta) out << ',' << format_double((*eta)[j]);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed to write " + path.string());
}

std::vector<SnapshotEntry> read_snapshot_dir(const fs::path& dir) {
  const std::string body = read_file(dir / "index.csv");
  std::istringstream in(body);
  std::string line;
  std::getline(in, line);
  if (line != "file,t") throw Error(ErrorCode::ParseError, "unexpected header in " + (dir / "index.csv").string());
  std::vector<SnapshotEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != 2) throw Error(ErrorCode::ParseError, "bad index row: " + line);
    const double t = parse_double(c[1]);
    const std::string snap = read_file(dir / std::string(c[0]));
    std::istringstream sin(snap);
    std::string row;
    std::getline(sin, row);
    std::vector<double> xs, vals;
    while (std::getline(sin, row)) {
      if (row.empty()) continue;
      const auto cols = split(row, ',');
      if (cols.size() < 2) throw Error(ErrorCode::ParseError, "bad snapshot row: " + row);
      xs.push_back(parse_double(cols[0]));
      vals.push_back(parse_double(cols[1]));
    }
    if (xs.size() < 2) throw Error(ErrorCode::ParseError, "snapshot with fewer than 2 cells");
    const double h = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    const Grid1D grid(xs.front() - 0.5 * h, xs.back() + 0.5 * h, xs.size());
    out.push_back({t, DensityField(grid, std::move(vals))});
  }
  return out;
}

void write_report_json(const fs::path& path, const RunReport& r, const ScenarioConfig& cfg) {
  json certs = json::array();
  for (const auto& c : r.certificates) {
    json e = {{"kind", std::string(to_string(c.kind))}, {"t_detect", c.t_detect}, {"lmc_norm_flag", c.lmc_norm_flag}};
    e["evidence"] = std::isfinite(c.evidence) ? json(c.evidence) : json("inf");
    certs.push_back(e);
  }
  json j = {{"name", cfg.name},
            {"termination", std::string(to_string(r.termination))},
            {"wall_time", r.wall_time},
            {"n_steps", r.n_steps},
            {"final_time", r.final_time},
            {"final_energy", std::isfinite(r.final_energy) ? json(r.final_energy) : json(nullptr)},
            {"certificates", certs},
            {"warnings", r.warnings}};
  if (!r.failure_message.empty()) j["failure_message"] = r.failure_message;
  if (cfg.chi_c) j["chi_c"] = *cfg.chi_c;
  if (const auto* p = std::get_if<ModelParams>(&cfg.model)) {
    j["model"] = {{"m", p->m}, {"chi", p->chi}, {"d", p->d}};
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RunReport execute_scenario(const ScenarioConfig& cfg, const fs::path& out_dir, TimeSeriesSink* extra_sink,
                           std::vector<JkoRecord>* jko_records) {
  fs::create_directories(out_dir);
  const std::size_t flush_every = cfg.stepper == StepperKind::Fv ? 64 : 16;
  CsvSink csv(out_dir / "timeseries.csv", cfg.two_species(), flush_every, out_dir / "snapshots");
  std::vector<TimeSeriesSink*> sinks{&csv};
  if (extra_sink) sinks.push_back(extra_sink);
  TeeSink sink(sinks);

  const DensityField rho0 = make_initial(cfg.initial, cfg.grid, cfg.seed);
  RunReport report;
  if (const auto* tp = std::get_if<TwoSpeciesParams>(&cfg.model)) {
    const DensityField eta0 = make_initial(*cfg.initial_eta, cfg.grid, cfg.seed + 1);
    report = two_species_run(SpeciesPair(rho0, eta0), *tp, cfg.fv, sink);
  } else {
    const ModelParams& p = std::get<ModelParams>(cfg.model);
    if (cfg.stepper == StepperKind::Fv) {
      report = run(rho0, p, cfg.fv, sink);
    } else {
      std::vector<JkoRecord> local;
      std::vector<JkoRecord>& recs = jko_records ? *jko_records : local;
      report = jko_run(rho0, p, cfg.jko, cfg.jko_steps, sink, &recs);
      std::ofstream jout(out_dir / "jko.csv");
      if (!jout) throw Error(ErrorCode::IoError, "cannot write jko.csv");
      jout << "step,t,energy,w2_to_prev,cumulative_w2_over_2tau,m2,inner_iters\n";
      for (const auto& r : recs) {
        jout << r.step << ',' << format_double(r.t) << ',' << format_double(r.energy) << ','
             << format_double(r.w2_to_prev) << ',' << format_double(r.cumulative_w2_over_2tau) << ','
             << format_double(r.m2) << ',' << r.inner_iters << '\n';
      }
    }
  }
  sink.flush();
  write_report_json(out_dir / "report.json", report, cfg);
  return report;
}

}  // namespace whirlpool
