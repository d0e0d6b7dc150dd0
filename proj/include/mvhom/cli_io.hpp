#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>

#include "mvhom/cell_solver.hpp"
#include "mvhom/grid.hpp"

namespace mvhom {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode { kExitOk = 0, kExitError = 1, kExitNonConvergence = 2 };

struct RunRequest {
  /// tfhom | theta | fhom-eval | gamma-sweep | certify | probes
  std::string command;
  std::filesystem::path config;
  /// Empty: output.dir from the config (relative to the working directory), else ".".
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

/// Runs one command and writes results.csv, results.json, requested plot
/// files and manifest.json. Errors are reported on `err`.
int run(const RunRequest& request, std::ostream& err);

/// MVHOM_THREADS (when set to a positive integer) overrides the flag value.
int resolve_threads(int flag_value, const char* env_value);

enum class PlotKind { Trace, Field1D, Interface2D };

PlotKind parse_plot_kind(const std::string& name);
std::string plot_kind_name(PlotKind kind);

using PlotSource = std::variant<DensityEstimate, GridField>;

/// Columnar text: trace -> (t, value); field-1d -> (x, u_1, ..., u_d);
/// interface-2d -> (x_1, x_2, angle). Throws KindMismatch when the source
/// does not carry the requested kind.
std::string export_plotdata(const PlotSource& source, PlotKind kind);

std::string sha256_hex(const std::string& bytes);

}  // namespace mvhom
