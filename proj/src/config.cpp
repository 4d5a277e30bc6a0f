#include "nemo/config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>

#include <CLI11.hpp>

namespace nemo {

using nlohmann::json;

namespace {

constexpr std::array<Profile, 3> kProfiles{{
    {"gref", MiningMode::kI2IUpperT2ILower, 0.75, 200},
    {"refcoco", MiningMode::kI2IUpperT2ILower, 0.85, 800},
    {"refcoco+", MiningMode::kI2IUpperT2ILower, 0.85, 800},
}};

std::optional<double> parse_tau(std::string_view text) {
  if (text == "none") return std::nullopt;
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("--tau expects a number in [-1, 1] or 'none', got '" + std::string(text) + "'");
  }
  return value;
}

bool parse_switch(std::string_view text, const char* flag) {
  if (text == "on") return true;
  if (text == "off") return false;
  throw UsageError(std::string(flag) + " expects on|off, got '" + std::string(text) + "'");
}

template <typename T>
void take(std::optional<T>& dst, const std::optional<T>& src) {
  if (src) dst = src;
}

}  // namespace

std::span<const Profile> profiles() { return kProfiles; }

const Profile& find_profile(std::string_view name) {
  for (const auto& p : kProfiles)
    if (p.name == name) return p;
  throw UsageError("unknown profile '" + std::string(name) + "' (expected gref, refcoco or refcoco+)");
}

void ConfigOverrides::merge(const ConfigOverrides& top) {
  take(profile, top.profile);
  take(gamma, top.gamma);
  take(mode, top.mode);
  take(tau, top.tau);
  take(tau_t2i, top.tau_t2i);
  take(tau_i2i, top.tau_i2i);
  take(k, top.k);
  take(grid, top.grid);
  take(cross_point, top.cross_point);
  take(constraints, top.constraints);
  take(seed, top.seed);
  take(workers, top.workers);
}

ConfigOverrides overrides_from_json(const json& j) {
  static const std::array<std::string_view, 12> kKnown{
      "profile", "gamma", "mode", "tau", "tau_t2i", "tau_i2i", "k", "grid", "cross_point", "constraints",
      "seed", "workers"};
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  ConfigOverrides o;
  try {
    if (j.contains("profile")) o.profile = j["profile"].get<std::string>();
    if (j.contains("gamma")) o.gamma = j["gamma"].get<double>();
    if (j.contains("mode")) o.mode = j["mode"].get<std::string>();
    if (j.contains("tau")) {
      const auto& t = j["tau"];
      if (t.is_null() || (t.is_string() && t.get<std::string>() == "none")) {
        o.tau = std::optional<double>{};
      } else {
        o.tau = std::optional<double>{t.get<double>()};
      }
    }
    if (j.contains("tau_t2i")) o.tau_t2i = j["tau_t2i"].get<double>();
    if (j.contains("tau_i2i")) o.tau_i2i = j["tau_i2i"].get<double>();
    if (j.contains("k")) o.k = j["k"].get<std::size_t>();
    if (j.contains("grid")) o.grid = j["grid"].get<std::string>();
    if (j.contains("cross_point")) o.cross_point = j["cross_point"].get<std::string>();
    if (j.contains("constraints")) {
      const auto& c = j["constraints"];
      o.constraints = c.is_boolean() ? (c.get<bool>() ? "on" : "off") : c.get<std::string>();
    }
    if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) o.workers = j["workers"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  return o;
}

PipelineConfig resolve_config(const ConfigOverrides& o) {
  const Profile& profile = find_profile(o.profile.value_or(std::string(kDefaultProfile)));
  PipelineConfig c;
  c.mining.mode = profile.mode;
  c.mining.tau = profile.tau;
  c.mining.k = profile.k;

  try {
    if (o.mode) c.mining.mode = parse_mining_mode(*o.mode);
    if (o.grid) c.compositor.grid = parse_grid(*o.grid);
    if (o.cross_point) c.compositor.cross_point = parse_cross_point(*o.cross_point);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (o.constraints) c.compositor.constraints = parse_switch(*o.constraints, "--constraints");

  const MiningMode mode = c.mining.mode;
  if (mode == MiningMode::kT2IOnly) {
    c.mining.tau = kT2IDefaultTau;
    c.mining.k = kT2IDefaultK;
  }
  if (o.tau) {
    if (mode == MiningMode::kDual) {
      throw UsageError("--tau has no effect in dual mode; give --tau-t2i and --tau-i2i instead");
    }
    if (mode == MiningMode::kUniform) throw UsageError("--tau has no effect in uniform mode");
    c.mining.tau = *o.tau;
  }
  if (o.k) c.mining.k = *o.k;
  if ((o.tau_t2i || o.tau_i2i) && mode != MiningMode::kDual) {
    throw UsageError("--tau-t2i/--tau-i2i only apply to --mode dual");
  }
  if (mode == MiningMode::kDual) {
    if (!o.tau_t2i || !o.tau_i2i) throw UsageError("--mode dual needs both --tau-t2i and --tau-i2i");
    c.mining.tau.reset();
    c.mining.tau_t2i = o.tau_t2i;
    c.mining.tau_i2i = o.tau_i2i;
  }
  if (mode == MiningMode::kUniform) c.mining.tau.reset();

  if (o.gamma) c.gamma = *o.gamma;
  if (o.seed) c.master_seed = *o.seed;
  if (o.workers) c.worker_count = *o.workers;

  if (c.compositor.grid == GridKind::k3x3 && c.compositor.constraints) {
    throw UsageError("--grid 3x3 cannot be combined with --constraints on: the positional table "
                     "maps keywords to 2x2 quadrants");
  }
  if (c.compositor.grid == GridKind::k3x3 && c.compositor.cross_point != CrossPointPolicy::kFixed) {
    throw UsageError("--grid 3x3 only supports --cross-point fixed");
  }
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) {
    throw UsageError("--gamma must lie in [0, 1], got " + std::to_string(c.gamma));
  }
  if (c.worker_count == 0) throw UsageError("--workers must be positive");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["gamma"] = c.gamma;
  j["mode"] = to_string(c.mining.mode);
  if (c.mining.mode == MiningMode::kDual) {
    j["tau_t2i"] = *c.mining.tau_t2i;
    j["tau_i2i"] = *c.mining.tau_i2i;
  } else if (c.mining.mode != MiningMode::kUniform) {
    j["tau"] = c.mining.tau ? json(*c.mining.tau) : json("none");
  }
  j["k"] = c.mining.k;
  j["grid"] = to_string(c.compositor.grid);
  j["cross_point"] = to_string(c.compositor.cross_point);
  j["constraints"] = c.compositor.constraints ? "on" : "off";
  j["seed"] = c.master_seed;
  j["workers"] = c.worker_count;
  return j;
}

namespace {

struct Flags {
  std::string profile, mode, tau, grid, cross_point, constraints;
  double gamma = 0, tau_t2i = 0, tau_i2i = 0;
  std::size_t k = 0, workers = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, CLI::Option*>> options;
};

struct AppSpec {
  std::unique_ptr<CLI::App> app;
  std::vector<std::pair<CLI::App*, std::unique_ptr<Flags>>> subs;
  CliInvocation inv;
};

void add_mining_flags(CLI::App* sub, Flags& f) {
  auto add = [&](const char* name, auto& target, const char* help) {
    f.options.emplace_back(name, sub->add_option(name, target, help));
  };
  add("--profile", f.profile, "Dataset profile with per-family (tau, K) defaults: gref | refcoco | refcoco+ (default gref)");
  add("--tau", f.tau, "Upper-bound threshold in [-1, 1], or 'none'");
  add("--tau-t2i", f.tau_t2i, "Text-to-image threshold for --mode dual");
  add("--tau-i2i", f.tau_i2i, "Image-to-image threshold for --mode dual");
  add("--k", f.k, "Candidate pool size K (>= 3)");
  add("--mode", f.mode, "Relevance mode: t2i | i2i-upper | dual | uniform");
}

void add_compositor_flags(CLI::App* sub, Flags& f) {
  auto add = [&](const char* name, auto& target, const char* help) {
    f.options.emplace_back(name, sub->add_option(name, target, help));
  };
  add("--gamma", f.gamma, "Augmentation probability in [0, 1] (default 0.6)");
  add("--grid", f.grid, "Mosaic grid: 2x2 | 3x3");
  add("--cross-point", f.cross_point, "Cross-point policy: fixed | anywhere | central-quarter");
  add("--constraints", f.constraints, "Positional-keyword placement constraints: on | off");
  add("--seed", f.seed, "Master seed");
  add("--workers", f.workers, "Worker threads");
}

ConfigOverrides overrides_from_flags(const Flags& f) {
  ConfigOverrides o;
  auto set = [&](const std::string& name) {
    for (const auto& [n, opt] : f.options)
      if (n == name) return opt->count() > 0;
    return false;
  };
  if (set("--profile")) o.profile = f.profile;
  if (set("--mode")) o.mode = f.mode;
  if (set("--tau")) o.tau = parse_tau(f.tau);
  if (set("--tau-t2i")) o.tau_t2i = f.tau_t2i;
  if (set("--tau-i2i")) o.tau_i2i = f.tau_i2i;
  if (set("--k")) o.k = f.k;
  if (set("--gamma")) o.gamma = f.gamma;
  if (set("--grid")) o.grid = f.grid;
  if (set("--cross-point")) o.cross_point = f.cross_point;
  if (set("--constraints")) o.constraints = f.constraints;
  if (set("--seed")) o.seed = f.seed;
  if (set("--workers")) o.workers = f.workers;
  return o;
}

std::unique_ptr<AppSpec> build_app() {
  auto holder = std::make_unique<AppSpec>();
  AppSpec& cli = *holder;
  cli.app = std::make_unique<CLI::App>("Negative-mined mosaic augmentation for referring segmentation datasets",
                                        "nemo-forge");
  cli.app->require_subcommand(1);
  CliInvocation& inv = cli.inv;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config_file, "JSON config file; flags override its values");
    sub->add_flag("--verbose,-v", inv.verbose, "Print the resolved configuration as JSON");
  };

  auto make = [&](const char* name, const char* help) {
    auto* sub = cli.app->add_subcommand(name, help);
    cli.subs.emplace_back(sub, std::make_unique<Flags>());
    return std::pair{sub, cli.subs.back().second.get()};
  };

  {
    auto [sub, f] = make("augment", "Mine negatives, compose mosaics and write the augmented dataset");
    sub->add_option("--dataset", inv.dataset, "COCO-style annotation file with expressions")->required();
    sub->add_option("--embeddings", inv.embeddings, "NEMOEMB1 embedding file")->required();
    sub->add_option("--out", inv.out, "Output directory")->required();
    sub->add_option("--report", inv.report, "Write the run report JSON here instead of stdout");
    sub->add_option("--dump-previews", inv.dump_previews, "Also write N composed previews with mask overlay");
    add_mining_flags(sub, *f);
    add_compositor_flags(sub, *f);
    common(sub);
  }
  {
    auto [sub, f] = make("mine", "Write the negative pool of every sample as JSON lines");
    sub->add_option("--dataset", inv.dataset, "COCO-style annotation file with expressions")->required();
    sub->add_option("--embeddings", inv.embeddings, "NEMOEMB1 embedding file")->required();
    sub->add_option("--out", inv.out, "Output file (default stdout)");
    add_mining_flags(sub, *f);
    common(sub);
  }
  {
    auto [sub, f] = make("analyze", "Difficulty profiles, length bins and corpus statistics");
    sub->add_option("--dataset", inv.dataset, "COCO-style annotation file with expressions")->required();
    sub->add_option("--detections", inv.detections, "COCO results JSON with detector boxes");
    sub->add_option("--out", inv.out, "Output directory for profiles.csv, summary.json, lengths.md")->required();
    sub->add_option("--iou-floor", inv.iou_floor, "IoU at which a detection is taken as the target (default 0.5)");
    common(sub);
    (void)f;
  }
  {
    auto [sub, f] = make("validate-embeddings", "Check an embedding file and optionally its dataset coverage");
    sub->add_option("--embeddings", inv.embeddings, "NEMOEMB1 embedding file")->required();
    sub->add_option("--dataset", inv.dataset, "Dataset whose ids must all be covered");
    common(sub);
    (void)f;
  }
  {
    auto [sub, f] = make("preview", "Write N composed mosaics with mask overlay");
    sub->add_option("--dataset", inv.dataset, "COCO-style annotation file with expressions")->required();
    sub->add_option("--embeddings", inv.embeddings, "NEMOEMB1 embedding file")->required();
    sub->add_option("--out", inv.out, "Output directory")->required();
    inv.dump_previews = 8;
    sub->add_option("--dump-previews", inv.dump_previews, "Number of previews (default 8)");
    add_mining_flags(sub, *f);
    add_compositor_flags(sub, *f);
    common(sub);
  }
  return holder;
}

}  // namespace

CliInvocation parse_args(const std::vector<std::string>& args) {
  auto holder = build_app();
  AppSpec& cli = *holder;
  std::vector<const char*> argv{"nemo-forge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    cli.app->parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    std::string text = cli.app->help();
    for (const auto& [sub, _] : cli.subs)
      if (sub->parsed()) text = sub->help();
    throw HelpRequested(text);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  CliInvocation inv = std::move(cli.inv);
  for (const auto& [sub, flags] : cli.subs) {
    if (!sub->parsed()) continue;
    inv.subcommand = sub->get_name();
    ConfigOverrides layered;
    if (!inv.config_file.empty()) {
      std::ifstream in(inv.config_file);
      if (!in) throw UsageError("cannot read config file " + inv.config_file.string());
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw UsageError("config file " + inv.config_file.string() + ": " + e.what());
      }
      layered = overrides_from_json(j);
    }
    layered.merge(overrides_from_flags(*flags));
    inv.config = resolve_config(layered);
  }
  if (!(inv.iou_floor >= 0.0 && inv.iou_floor <= 1.0)) throw UsageError("--iou-floor must lie in [0, 1]");
  return inv;
}

std::string help_text(std::string_view subcommand) {
  auto cli = build_app();
  if (subcommand.empty()) return cli->app->help();
  return cli->app->get_subcommand(std::string(subcommand))->help();
}

}  // namespace nemo
