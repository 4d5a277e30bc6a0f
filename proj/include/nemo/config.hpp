#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nemo/pipeline.hpp"

namespace nemo {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-dataset-family defaults. Explicit settings always win over these.
struct Profile {
  std::string_view name;
  MiningMode mode;
  double tau;
  std::size_t k;
};

std::span<const Profile> profiles();
const Profile& find_profile(std::string_view name);

inline constexpr std::string_view kDefaultProfile = "gref";
// Text-to-image defaults, used when the mode is t2i and tau/K are not given.
inline constexpr double kT2IDefaultTau = 0.25;
inline constexpr std::size_t kT2IDefaultK = 300;

// Settings that may come from a config file or flags; unset fields defer to
// the next layer down.
struct ConfigOverrides {
  std::optional<std::string> profile;
  std::optional<double> gamma;
  std::optional<std::string> mode;
  // Outer optional: was it set. Inner nullopt: no upper bound ("none").
  std::optional<std::optional<double>> tau;
  std::optional<double> tau_t2i;
  std::optional<double> tau_i2i;
  std::optional<std::size_t> k;
  std::optional<std::string> grid;
  std::optional<std::string> cross_point;
  std::optional<std::string> constraints;  // "on" / "off"
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;

  // Fields set in `top` replace fields here.
  void merge(const ConfigOverrides& top);
};

ConfigOverrides overrides_from_json(const nlohmann::json& j);

// profile defaults <- overrides, then conflict and range checks. Throws
// UsageError with an explanation.
PipelineConfig resolve_config(const ConfigOverrides& overrides);

// Re-parses through overrides_from_json + resolve_config to an equal config.
nlohmann::json config_to_json(const PipelineConfig& config);

struct CliInvocation {
  std::string subcommand;
  PipelineConfig config;
  std::filesystem::path dataset;
  std::filesystem::path embeddings;
  std::filesystem::path out;
  std::filesystem::path report;
  std::filesystem::path detections;
  std::filesystem::path config_file;
  std::size_t dump_previews = 0;
  double iou_floor = 0.5;
  bool verbose = false;
};

// Returned when --help was requested; carries the text to print.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CliInvocation parse_args(const std::vector<std::string>& args);
std::string help_text(std::string_view subcommand = {});

}  // namespace nemo
