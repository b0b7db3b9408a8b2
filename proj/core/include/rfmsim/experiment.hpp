#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfmsim/covert_channel.hpp"
#include "rfmsim/dos_analytics.hpp"

namespace rfmsim {

using Json = nlohmann::ordered_json;

enum class ExperimentKind { Covert, CovertRfmsb, Dos, ValidateModel, Sweep };

std::string_view to_string(ExperimentKind kind) noexcept;

struct SweepSpec {
  Json base;  ///< config of every grid point before overrides
  /// Dotted paths into the base config ("rfm.raaimt", "covert.noise.0.rate")
  /// with their values; points are the cartesian product in key order.
  std::vector<std::pair<std::string, std::vector<Json>>> grid;
};

/// Fully resolved experiment description.
///
/// Seeds: the message uses derive_seed(seed, 0) and noise sources
/// derive_seed(derive_seed(seed, 1), i) for source i.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Covert;
  std::uint64_t seed = 1;
  TimingParams timing;
  RfmParams rfm;
  LimiterParams limiter;

  ChannelConfig channel;
  std::size_t message_bits = 1000;
  std::string message = "random";  ///< "random", "alternating", or a 0/1 string
  std::vector<NoiseSource> noise;

  DosConfig dos;

  std::vector<int> raaimts{16, 32};
  std::int64_t validate_trefis = 1000;

  SweepSpec sweep;
};

/// Throws ConfigError with the dotted path of the offending field.
ExperimentConfig parse_config(const Json& j);
/// Resolved config; parse_config(config_to_json(c)) reproduces c.
Json config_to_json(const ExperimentConfig& c);

std::vector<int> make_message(const ExperimentConfig& c);

struct ExperimentOutput {
  Json report;
  std::vector<CommandRecord> trace;
};

/// Runs a single (non-sweep) experiment. The report holds the resolved
/// config, seed, version and kind-specific results; no wall-clock data, so
/// reruns are byte-identical.
ExperimentOutput run_experiment(const ExperimentConfig& c, bool want_trace = false);

Json to_json(const ChannelReport& r);
Json to_json(const DosReport& r);
Json to_json(std::span<const ModelValidation> rows);

/// Trace CSV: header "time,kind,subchannel,bank,agent". bank holds the
/// bank-set for RFMSB and -1 where it does not apply.
void write_trace_csv(std::ostream& out, std::span<const CommandRecord> trace);
/// Completion times are rebuilt from `timing`. Throws ConfigError on
/// malformed input.
std::vector<CommandRecord> read_trace_csv(std::istream& in, const TimingParams& timing);

struct SweepResult {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> summary_columns;
  std::vector<std::vector<std::string>> summary_rows;
};

/// Expands the grid, runs every point (up to `jobs` in parallel) and
/// tabulates the metrics. The summary averages over seeds for each
/// combination of the other grid keys.
SweepResult run_sweep(const SweepSpec& spec, unsigned jobs = 1);
void write_csv(std::ostream& out, const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace rfmsim
