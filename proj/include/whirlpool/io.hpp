#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "whirlpool/energy.hpp"
#include "whirlpool/fv_solver.hpp"
#include "whirlpool/grid.hpp"
#include "whirlpool/jko.hpp"
#include "whirlpool/report.hpp"
#include "whirlpool/two_species.hpp"

namespace whirlpool {

struct InitialSpec {
  enum class Kind { Gaussian, Cosine, DoubleBump, File };
  Kind kind = Kind::Gaussian;
  double center = 0.0;
  /// Gaussian: standard deviation. Cosine and double bump: support length of each bump.
  double width = 1.0;
  double separation = 1.0;     // double bump: distance between centres
  double left_share = 0.5;     // double bump: mass share of the left bump
  std::filesystem::path path;  // file: one value per cell, or "x,rho" rows
  double noise = 0.0;          // multiplicative uniform noise amplitude on the support
};

/// Samples the initial profile on `grid`, applies seeded noise and normalises.
DensityField make_initial(const InitialSpec& spec, const Grid1D& grid, std::uint64_t seed);

enum class StepperKind { Fv, Jko };

struct GnCache {
  int d = 1;
  std::size_t n_cells = 400;
  std::size_t n_restarts = 4;
  double c_gn_estimate = 0.0;
  double chi_c = 0.0;
};

GnCache read_gn_cache(const std::filesystem::path& path);
void write_gn_cache(const std::filesystem::path& path, const GnCache& cache);
/// Estimates C_GN on [-1, 1] with n_cells cells.
GnCache compute_gn_cache(int d, std::size_t n_cells, std::size_t n_restarts);
/// Reads the cache, or computes it with default settings and writes it when absent.
GnCache load_or_create_gn_cache(const std::filesystem::path& path);

struct ScenarioConfig {
  std::string name;
  std::variant<ModelParams, TwoSpeciesParams> model;
  std::optional<double> chi_factor;  // set when chi was given as auto_critical:<factor>
  std::optional<double> chi_c;       // critical mass estimate, when one was needed
  Grid1D grid{-1.0, 1.0, 2};
  InitialSpec initial;
  std::optional<InitialSpec> initial_eta;
  StepperKind stepper = StepperKind::Fv;
  FvConfig fv;
  JkoConfig jko;
  std::size_t jko_steps = 0;
  std::filesystem::path outputs = "out";
  std::uint64_t seed = 0;
  std::filesystem::path gn_cache;

  bool two_species() const { return std::holds_alternative<TwoSpeciesParams>(model); }
};

struct LoadOptions {
  /// Replaces the config's gn_cache entry.
  std::optional<std::filesystem::path> gn_cache;
};

/// Strict load: unknown keys are rejected (ParseError), invariants are checked
/// (ValidationError naming the violated rule).
ScenarioConfig load_config(const std::filesystem::path& path, const LoadOptions& opts = {});
ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                            const LoadOptions& opts = {});

inline constexpr const char* kTimeseriesHeader =
    "t,dt,energy_total,energy_dirichlet,energy_entropy,m2,lm_norm,linf_norm,min_rho,mass";
inline constexpr const char* kTwoSpeciesHeaderSuffix = ",mass_eta,m2_eta,segregation_index,energy_cross";

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

/// Writes samples as CSV rows (and optionally snapshots into a directory).
class CsvSink final : public TimeSeriesSink {
 public:
  CsvSink(const std::filesystem::path& csv_path, bool two_species, std::size_t flush_every,
          std::optional<std::filesystem::path> snapshot_dir = std::nullopt);
  ~CsvSink() override;

  void emit(const Sample& s) override;
  void snapshot(double t, const DensityField& rho, const DensityField* eta) override;
  void flush() override;

  std::size_t rows() const noexcept { return rows_; }

 private:
  std::ofstream out_;
  bool two_species_;
  std::size_t flush_every_;
  std::size_t rows_ = 0;
  std::optional<std::filesystem::path> snapshot_dir_;
  std::ofstream index_;
  std::size_t n_snapshots_ = 0;
};

/// Forwards to several sinks.
class TeeSink final : public TimeSeriesSink {
 public:
  explicit TeeSink(std::vector<TimeSeriesSink*> sinks) : sinks_(std::move(sinks)) {}
  void emit(const Sample& s) override {
    for (auto* k : sinks_) k->emit(s);
  }
  void snapshot(double t, const DensityField& rho, const DensityField* eta) override {
    for (auto* k : sinks_) k->snapshot(t, rho, eta);
  }
  void flush() override {
    for (auto* k : sinks_) k->flush();
  }

 private:
  std::vector<TimeSeriesSink*> sinks_;
};

std::vector<Sample> read_timeseries_csv(const std::filesystem::path& path);

void write_snapshot_csv(const std::filesystem::path& path, const DensityField& rho, const DensityField* eta);

struct SnapshotEntry {
  double t;
  DensityField rho;
};
/// Reads <dir>/index.csv and the files it lists. Grid bounds are inferred from the cell centres.
std::vector<SnapshotEntry> read_snapshot_dir(const std::filesystem::path& dir);

void write_report_json(const std::filesystem::path& path, const RunReport& report, const ScenarioConfig& cfg);

/// Runs the scenario, writing timeseries.csv, snapshots/, report.json (and jko.csv
/// for the JKO stepper) under out_dir. Extra sinks also receive every sample.
RunReport execute_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                           TimeSeriesSink* extra_sink = nullptr, std::vector<JkoRecord>* jko_records = nullptr);

}  // namespace whirlpool
