#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "whirlpool/grid.hpp"

namespace whirlpool {

enum class Termination { Completed, BlowUpDetected, NonFinite };
std::string_view to_string(Termination t);

enum class CertificateKind { DtCollapse, NormOverflow, SecondMomentForecast };
std::string_view to_string(CertificateKind k);

struct BlowUpCertificate {
  CertificateKind kind;
  double t_detect = 0.0;
  double evidence = 0.0;       // the triggering value (dt, norm, or t* bound)
  bool lmc_norm_flag = false;  // set when blow-up is expected in L^{m_c} rather than in m2
};

/// One emitted row of the time series. The eta fields are filled for two-species runs.
struct Sample {
  double t = 0.0;
  double dt = 0.0;
  double energy_total = 0.0;
  double energy_dirichlet = 0.0;
  double energy_entropy = 0.0;
  double m2 = 0.0;
  double lm_norm = 0.0;
  double linf_norm = 0.0;
  double min_rho = 0.0;
  double mass = 0.0;
  struct Eta {
    double mass_eta = 0.0;
    double m2_eta = 0.0;
    double segregation_index = 0.0;
    double energy_cross = 0.0;
  };
  std::optional<Eta> eta;
};

class TimeSeriesSink {
 public:
  virtual ~TimeSeriesSink() = default;
  virtual void emit(const Sample& s) = 0;
  /// Called at requested snapshot times and at the end of a run.
  virtual void snapshot(double /*t*/, const DensityField& /*rho*/, const DensityField* /*eta*/) {}
  virtual void flush() {}
};

class NullSink final : public TimeSeriesSink {
 public:
  void emit(const Sample&) override {}
};

class MemorySink final : public TimeSeriesSink {
 public:
  void emit(const Sample& s) override { samples.push_back(s); }
  void snapshot(double t, const DensityField& rho, const DensityField* eta) override {
    snapshots.push_back({t, rho, eta ? std::optional<DensityField>(*eta) : std::nullopt});
  }

  struct Snapshot {
    double t;
    DensityField rho;
    std::optional<DensityField> eta;
  };
  std::vector<Sample> samples;
  std::vector<Snapshot> snapshots;
};

struct RunReport {
  Termination termination = Termination::Completed;
  double wall_time = 0.0;
  std::size_t n_steps = 0;
  double final_time = 0.0;
  double final_energy = 0.0;
  std::vector<BlowUpCertificate> certificates;
  std::vector<std::string> warnings;
  std::string failure_message;  // set when termination is NonFinite
  std::optional<DensityField> final_rho;
  std::optional<DensityField> final_eta;
};

}  // namespace whirlpool
