#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "support.hpp"
#include "whirlpool/errors.hpp"
#include "whirlpool/io.hpp"

using namespace whirlpool;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

ErrorCode load_error(const std::string& text, std::string* message = nullptr) {
  try {
    LoadOptions opts;
    opts.gn_cache = testing::gn_cache_path();
    parse_config(text, fs::path(WHIRLPOOL_TEST_TMP), opts);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("config was accepted");
  return ErrorCode::InvalidArgument;
}

const char* kBase = R"({
  "model": {"type": "one_species", "m": 2, "chi": 1},
  "grid": {"x_min": -2, "x_max": 2, "n_cells": 64},
  "initial": {"type": "cosine", "width": 1.5},
  "stepper": {"type": "fv", "t_end": 0.001, "output_stride": 10}
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_SUITE("io") {

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) * std::pow(10.0, double(int(rng() % 600) - 300));
    CHECK(same_bits(parse_double(format_double(v)), v));
  }
  for (double v : {0.0, -0.0, 1e-320, std::numeric_limits<double>::max(), std::numeric_limits<double>::infinity()}) {
    CHECK(same_bits(parse_double(format_double(v)), v));
  }
  CHECK(std::isnan(parse_double(format_double(std::nan("")))));
  CHECK_THROWS_AS(parse_double("1.0x"), Error);
}

TEST_CASE("bundled presets load") {
  LoadOptions opts;
  opts.gn_cache = testing::gn_cache_path();
  const ScenarioConfig a = load_config(testing::preset_dir() / "fig1a.json", opts);
  REQUIRE(std::holds_alternative<ModelParams>(a.model));
  CHECK(std::get<ModelParams>(a.model).m == 2.0);
  CHECK(a.stepper == StepperKind::Fv);
  for (const auto& entry : fs::directory_iterator(testing::preset_dir())) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path(), opts));
  }
}

TEST_CASE("auto_critical resolves through the GN cache") {
  const fs::path dir = testing::scratch_dir("auto_critical");
  GnCache fake;
  fake.c_gn_estimate = 0.25;
  fake.chi_c = 6.0;
  write_gn_cache(dir / "gn_cache.json", fake);
  const std::string text = replace(replace(kBase, "\"m\": 2, \"chi\": 1", "\"m\": 4.0, \"chi\": \"auto_critical:0.5\""),
                                   "\"n_cells\": 64", "\"n_cells\": 64");
  const ScenarioConfig cfg = parse_config(text, dir);
  CHECK(std::get<ModelParams>(cfg.model).chi == 3.0);
  CHECK(cfg.chi_factor == 0.5);
  CHECK(cfg.chi_c == 6.0);
  CHECK(cfg.fv.chi_c == 6.0);

  const fs::path fresh = testing::scratch_dir("auto_critical_fresh");
  const ScenarioConfig made = parse_config(text, fresh);
  CHECK(fs::exists(fresh / "gn_cache.json"));
  const GnCache c = read_gn_cache(fresh / "gn_cache.json");
  CHECK(std::get<ModelParams>(made.model).chi == 0.5 * c.chi_c);
  CHECK(c.chi_c == doctest::Approx(critical_mass(1, c.c_gn_estimate)));
}

TEST_CASE("strict parsing and validation") {
  std::string msg;
  CHECK(load_error("{not json") == ErrorCode::ParseError);
  CHECK(load_error(replace(kBase, "\"initial\"", "\"colour\": 1, \"initial\"")) == ErrorCode::ParseError);
  CHECK(load_error(replace(kBase, "\"width\": 1.5", "\"width\": 1.5, \"sigma\": 2")) == ErrorCode::ParseError);
  CHECK(load_error(replace(kBase, "\"chi\": 1", "\"chi\": \"lots\"")) == ErrorCode::ParseError);
  CHECK(load_error(replace(kBase, "\"m\": 2", "\"m\": \"2\"")) == ErrorCode::ParseError);
  CHECK(load_error(replace(kBase, "\"x_max\": 2", "\"x_max\": -3")) == ErrorCode::ValidationError);
  CHECK(load_error(replace(kBase, "\"chi\": 1", "\"chi\": -1")) == ErrorCode::ValidationError);
  CHECK(load_error(replace(kBase, "\"width\": 1.5", "\"width\": 1.5, \"noise\": 1.5")) == ErrorCode::ValidationError);
  CHECK(load_error(replace(kBase, "\"t_end\": 0.001", "\"t_end\": 0.001, \"cfl_safety\": 2")) ==
        ErrorCode::ValidationError);

  const std::string two = R"({
    "model": {"type": "two_species", "kappa": 1, "alpha": 1.5},
    "grid": {"x_min": -2, "x_max": 2, "n_cells": 64},
    "initial": {"rho": {"type": "cosine"}, "eta": {"type": "cosine"}},
    "stepper": {"type": "fv", "t_end": 0.001}
  })";
  CHECK(load_error(two, &msg) == ErrorCode::ValidationError);
  CHECK(msg.find("PositiveDefinitenessViolated") != std::string::npos);
  CHECK(msg.find("kappa - alpha^2 <= 0") != std::string::npos);

  const std::string two_jko = replace(replace(two, "\"alpha\": 1.5", "\"alpha\": 0.5"),
                                      "{\"type\": \"fv\", \"t_end\": 0.001}",
                                      "{\"type\": \"jko\", \"tau\": 1e-4, \"n_steps\": 3}");
  CHECK(load_error(two_jko) == ErrorCode::ValidationError);

  const std::string supercritical_jko = replace(replace(kBase, "\"m\": 2", "\"m\": 5"),
                                                "{\"type\": \"fv\", \"t_end\": 0.001, \"output_stride\": 10}",
                                                "{\"type\": \"jko\", \"tau\": 1e-4, \"n_steps\": 3}");
  CHECK(load_error(supercritical_jko) == ErrorCode::ValidationError);
}

TEST_CASE("initial data from a file and seeded noise") {
  const fs::path dir = testing::scratch_dir("file_initial");
  std::ostringstream csv;
  csv.precision(17);
  csv << "x,rho\n";
  const Grid1D g(-2.0, 2.0, 64);
  for (std::size_t j = 0; j < 64; ++j) csv << g.center(j) << ',' << testing::cos2_bump(g.center(j), 0.3, 1.0) << '\n';
  write(dir / "rho0.csv", csv.str());
  const std::string text = replace(kBase, "{\"type\": \"cosine\", \"width\": 1.5}", "{\"type\": \"file\", \"path\": \"rho0.csv\"}");
  const ScenarioConfig cfg = parse_config(text, dir);
  const DensityField f = make_initial(cfg.initial, cfg.grid, cfg.seed);
  CHECK(l1_distance(f, testing::bump_field(g, 0.3, 1.0)) < 1e-12);

  write(dir / "short.csv", "0.1\n0.2\n");
  CHECK_THROWS_AS(parse_config(replace(text, "rho0.csv", "short.csv"), dir), Error);

  InitialSpec noisy;
  noisy.kind = InitialSpec::Kind::Cosine;
  noisy.width = 2.0;
  noisy.noise = 0.1;
  const DensityField a = make_initial(noisy, g, 5), b = make_initial(noisy, g, 5), c = make_initial(noisy, g, 6);
  CHECK(a.data() == b.data());
  CHECK(a.data() != c.data());
  CHECK(std::abs(a.mass() - 1.0) < 1e-12);
}

TEST_CASE("time series CSV: header, row count, round trip") {
  const fs::path dir = testing::scratch_dir("csv");
  const ScenarioConfig cfg = parse_config(kBase, dir);
  MemorySink mem;
  const RunReport r = execute_scenario(cfg, dir / "out", &mem);
  std::ifstream in(dir / "out" / "timeseries.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,dt,energy_total,energy_dirichlet,energy_entropy,m2,lm_norm,linf_norm,min_rho,mass");
  const auto rows = read_timeseries_csv(dir / "out" / "timeseries.csv");
  CHECK(rows.size() == r.n_steps / cfg.fv.output_stride + 1);
  REQUIRE(rows.size() == mem.samples.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Sample& a = rows[k];
    const Sample& b = mem.samples[k];
    for (auto [x, y] : {std::pair{a.t, b.t}, {a.dt, b.dt}, {a.energy_total, b.energy_total},
                        {a.energy_dirichlet, b.energy_dirichlet}, {a.energy_entropy, b.energy_entropy},
                        {a.m2, b.m2}, {a.lm_norm, b.lm_norm}, {a.linf_norm, b.linf_norm},
                        {a.min_rho, b.min_rho}, {a.mass, b.mass}}) {
      CHECK(same_bits(x, y));
    }
  }
  const auto snaps = read_snapshot_dir(dir / "out" / "snapshots");
  REQUIRE(!snaps.empty());
  CHECK(snaps.back().t == r.final_time);
  CHECK(l1_distance(snaps.back().rho, DensityField(cfg.grid, r.final_rho->data())) == 0.0);
  CHECK(fs::exists(dir / "out" / "report.json"));
}

TEST_CASE("two-species CSV appends the eta columns") {
  const fs::path dir = testing::scratch_dir("csv2");
  const std::string two = R"({
    "model": {"type": "two_species", "kappa": 1, "alpha": 0.3, "omega": 0.2},
    "grid": {"x_min": -2, "x_max": 2, "n_cells": 48},
    "initial": {"rho": {"type": "cosine", "center": -0.3, "width": 1.5}, "eta": {"type": "cosine", "center": 0.3, "width": 1.5}},
    "stepper": {"type": "fv", "t_end": 0.001, "output_stride": 25}
  })";
  const ScenarioConfig cfg = parse_config(two, dir);
  execute_scenario(cfg, dir / "out");
  std::ifstream in(dir / "out" / "timeseries.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == std::string(kTimeseriesHeader) + ",mass_eta,m2_eta,segregation_index,energy_cross");
  const auto rows = read_timeseries_csv(dir / "out" / "timeseries.csv");
  REQUIRE(rows.front().eta.has_value());
  CHECK(std::abs(rows.back().eta->mass_eta - 1.0) < 1e-12);
  std::ifstream snap(dir / "out" / "snapshots" / "snap_0000.csv");
  std::getline(snap, header);
  CHECK(header == "x,rho,eta");
}

TEST_CASE("identical configs give identical bytes") {
  const fs::path dir = testing::scratch_dir("determinism");
  const std::string text = replace(kBase, "\"width\": 1.5}", "\"width\": 1.5, \"noise\": 0.05}");
  const ScenarioConfig cfg = parse_config(text, dir);
  execute_scenario(cfg, dir / "a");
  execute_scenario(cfg, dir / "b");
  CHECK(slurp(dir / "a" / "timeseries.csv") == slurp(dir / "b" / "timeseries.csv"));
  CHECK(slurp(dir / "a" / "snapshots" / "snap_0000.csv") == slurp(dir / "b" / "snapshots" / "snap_0000.csv"));
}

TEST_CASE("blow-up termination carries certificates") {
  const fs::path dir = testing::scratch_dir("certificates");
  LoadOptions opts;
  opts.gn_cache = testing::gn_cache_path();
  for (const char* name : {"fig1c", "fig1d", "jko_demo"}) {
    const ScenarioConfig cfg = load_config(testing::preset_dir() / (std::string(name) + ".json"), opts);
    const RunReport r = execute_scenario(cfg, dir / name);
    CHECK((r.termination == Termination::BlowUpDetected) == !r.certificates.empty());
  }
  CHECK(fs::exists(dir / "jko_demo" / "jko.csv"));
}

}
