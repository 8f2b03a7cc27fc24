// Command-line front end for the sine-Gordon laboratory: forward simulation,
// inverse reconstruction, energy diagnostics, and colormap rendering driven by
// strict-schema JSON configs.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sglab/diagnostics.hpp"
#include "sglab/grid.hpp"
#include "sglab/inverse.hpp"
#include "sglab/io.hpp"
#include "sglab/mlp.hpp"
#include "sglab/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitBlowup = 2;
constexpr int kExitDiverged = 3;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Strict-schema JSON view: every key must be consumed; leftovers are errors.
class StrictObj {
 public:
  StrictObj(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  T take(const char* key) {
    if (!j_.contains(key)) throw ConfigError(at(key) + ": missing required key");
    return extract<T>(key);
  }

  template <typename T>
  T take_or(const char* key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return extract<T>(key);
  }

  StrictObj child(const char* key) {
    if (!j_.contains(key)) throw ConfigError(at(key) + ": missing required section");
    json sub = j_.at(key);
    j_.erase(key);
    return StrictObj(std::move(sub), at(key));
  }

  std::optional<StrictObj> child_opt(const char* key) {
    if (!j_.contains(key)) return std::nullopt;
    return child(key);
  }

  std::vector<double> take_number_array(const char* key) {
    if (!j_.contains(key)) throw ConfigError(at(key) + ": missing required key");
    const json& arr = j_.at(key);
    if (!arr.is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : arr) {
      if (!v.is_number()) throw ConfigError(at(key) + ": expected an array of numbers");
      out.push_back(v.get<double>());
    }
    j_.erase(key);
    return out;
  }

  // All keys must have been consumed by now.
  void done() const {
    if (j_.empty()) return;
    std::string keys;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!keys.empty()) keys += ", ";
      keys += it.key();
    }
    throw ConfigError(path_ + ": unknown key(s): " + keys);
  }

 private:
  std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  T extract(const char* key) {
    const json& v = j_.at(key);
    T out;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(at(key) + ": expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
      out = v.get<T>();
    } else {
      if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
      out = v.get<T>();
    }
    j_.erase(key);
    return out;
  }

  json j_;
  std::string path_;
};

json load_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void require_version(StrictObj& root) {
  const auto v = root.take<int>("version");
  if (v != 1) throw ConfigError("version: unsupported config version " + std::to_string(v));
}

// ---------------------------------------------------------------------------
// Problem-block parsing shared by simulate and diagnose.
// ---------------------------------------------------------------------------

struct InitialSpec {
  std::string kind = "zero";  // kink | zero | cosine
  std::optional<double> omega;
  std::optional<int> mode;
};

struct ProblemParse {
  sglab::ProblemConfig cfg;
  InitialSpec initial;
};

sglab::ProblemKind parse_kind(const std::string& s) {
  if (s == "full") return sglab::ProblemKind::Full;
  if (s == "perturbation") return sglab::ProblemKind::Perturbation;
  if (s == "linearized") return sglab::ProblemKind::Linearized;
  throw ConfigError("kind: unknown value '" + s + "' (full | perturbation | linearized)");
}

std::string kind_name(sglab::ProblemKind k) {
  switch (k) {
    case sglab::ProblemKind::Full: return "full";
    case sglab::ProblemKind::Perturbation: return "perturbation";
    case sglab::ProblemKind::Linearized: return "linearized";
  }
  return "?";
}

sglab::BoundaryKind parse_boundary(const std::string& s) {
  if (s == "neumann") return sglab::BoundaryKind::Neumann;
  if (s == "dirichlet") return sglab::BoundaryKind::Dirichlet;
  throw ConfigError("boundary: unknown value '" + s + "' (neumann | dirichlet)");
}

sglab::GridSpec parse_grid(StrictObj grid) {
  const double half_length = grid.take<double>("half_length");
  const int points = grid.take<int>("points");
  const double horizon = grid.take<double>("horizon");
  const double cfl = grid.take<double>("cfl");
  grid.done();
  if (points < 3) throw ConfigError("grid.points: must be >= 3");
  return sglab::make_grid(half_length, static_cast<std::size_t>(points), horizon, cfl);
}

ProblemParse parse_problem(StrictObj problem) {
  ProblemParse out;
  sglab::ProblemConfig& cfg = out.cfg;
  cfg.kind = parse_kind(problem.take<std::string>("kind"));
  cfg.grid = parse_grid(problem.child("grid"));
  cfg.epsilon = problem.take_or<double>("epsilon", 1.0);
  if (auto sol = problem.child_opt("soliton")) {
    cfg.soliton.velocity = sol->take_or<double>("velocity", 0.0);
    cfg.soliton.center = sol->take_or<double>("center", 0.0);
    sol->done();
  }
  if (auto forcing = problem.child_opt("forcing")) {
    cfg.forcing.amp_x = forcing->take_or<double>("amp_x", 0.0);
    cfg.forcing.amp_t = forcing->take_or<double>("amp_t", 0.0);
    cfg.forcing.mode = forcing->take_or<int>("mode", 0);
    forcing->done();
  }
  cfg.forcing.half_length = cfg.grid.half_length;
  cfg.forcing.horizon = cfg.grid.horizon;
  cfg.boundary = parse_boundary(problem.take_or<std::string>("boundary", "neumann"));
  cfg.damping = problem.take_or<double>("damping", 0.0);

  if (auto init = problem.child_opt("initial")) {
    out.initial.kind = init->take<std::string>("kind");
    if (init->has("omega")) out.initial.omega = init->take<double>("omega");
    if (init->has("mode")) out.initial.mode = init->take<int>("mode");
    init->done();
  }
  problem.done();

  const sglab::GridSpec& g = cfg.grid;
  if (out.initial.kind == "kink") {
    cfg.initial_value = sglab::kink_field(g, 0.0, cfg.soliton);
    cfg.initial_velocity = sglab::kink_dt_field(g, 0.0, cfg.soliton);
  } else if (out.initial.kind == "zero") {
    cfg.initial_value = sglab::Field(g);
    cfg.initial_velocity = sglab::Field(g);
  } else if (out.initial.kind == "cosine") {
    double omega = 0.0;
    if (out.initial.omega && out.initial.mode)
      throw ConfigError("initial: give either omega or mode, not both");
    if (out.initial.omega)
      omega = *out.initial.omega;
    else if (out.initial.mode)
      omega = static_cast<double>(*out.initial.mode) * std::numbers::pi / g.half_length;
    else
      throw ConfigError("initial: cosine requires omega or mode");
    auto [u0, v0] = sglab::family_initials(omega, g);
    cfg.initial_value = std::move(u0);
    cfg.initial_velocity = std::move(v0);
  } else {
    throw ConfigError("initial.kind: unknown value '" + out.initial.kind +
                      "' (kink | zero | cosine)");
  }
  return out;
}

ordered_json effective_problem(const ProblemParse& p) {
  const sglab::ProblemConfig& c = p.cfg;
  ordered_json j;
  j["kind"] = kind_name(c.kind);
  j["grid"] = {{"half_length", c.grid.half_length},
               {"points", c.grid.nx},
               {"horizon", c.grid.horizon},
               {"cfl", c.grid.cfl}};
  j["epsilon"] = c.epsilon;
  j["soliton"] = {{"velocity", c.soliton.velocity}, {"center", c.soliton.center}};
  j["forcing"] = {{"amp_x", c.forcing.amp_x}, {"amp_t", c.forcing.amp_t}, {"mode", c.forcing.mode}};
  j["boundary"] = c.boundary == sglab::BoundaryKind::Neumann ? "neumann" : "dirichlet";
  j["damping"] = c.damping;
  ordered_json init;
  init["kind"] = p.initial.kind;
  if (p.initial.omega) init["omega"] = *p.initial.omega;
  if (p.initial.mode) init["mode"] = *p.initial.mode;
  j["initial"] = init;
  return j;
}

void write_effective_config(const fs::path& out_dir, const ordered_json& j) {
  std::ofstream f(out_dir / "effective_config.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write effective config");
  f << j.dump(2) << '\n';
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// The equation's actual right-hand side: eps*g for the full equation, g for
// the perturbation/linearized forms. This is the forcing the energy
// diagnostics integrate.
auto effective_forcing(const sglab::ProblemConfig& cfg) {
  const double scale = cfg.kind == sglab::ProblemKind::Full ? cfg.epsilon : 1.0;
  return [scale, f = cfg.forcing](double x, double t) {
    return scale * sglab::forcing_eval(f, x, t);
  };
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const fs::path& config_path, const std::string& out) {
  StrictObj root(load_json(config_path), "");
  require_version(root);
  ProblemParse problem = parse_problem(root.child("problem"));

  std::vector<double> snapshots;
  if (root.has("snapshots")) snapshots = root.take_number_array("snapshots");
  bool out_csv = true, out_binary = true, out_colormap = true, out_reconstruct = false;
  if (auto outputs = root.child_opt("outputs")) {
    out_csv = outputs->take_or<bool>("history_csv", true);
    out_binary = outputs->take_or<bool>("history_binary", true);
    out_colormap = outputs->take_or<bool>("colormap", true);
    out_reconstruct = outputs->take_or<bool>("reconstruct", false);
    outputs->done();
  }
  root.done();

  if (out_reconstruct && problem.cfg.kind == sglab::ProblemKind::Full)
    throw ConfigError("outputs.reconstruct: only valid for perturbation or linearized runs");
  for (double t : snapshots)
    if (!(t >= 0.0 && t <= problem.cfg.grid.horizon))
      throw ConfigError("snapshots: time " + sglab::format_double(t) + " outside [0, horizon]");

  const fs::path dir = prepare_out_dir(out);
  sglab::StateHistory h = sglab::solve(problem.cfg);

  if (out_csv) sglab::write_history_csv(dir / "history.csv", h);
  if (out_binary) sglab::write_history_binary(dir / "history.sgh", h);
  if (out_colormap) {
    auto res = sglab::render_colormap(dir / "colormap.ppm", h);
    if (res.degenerate)
      std::cerr << "warning: constant history; colormap.ppm is uniform mid-palette\n";
  }
  for (double t : snapshots) {
    const auto row = static_cast<std::size_t>(std::llround(t / h.grid.dt));
    sglab::write_snapshot_csv(
        dir / ("snapshot_t" + sglab::format_double(t) + ".csv"), h,
        std::min(row, h.rows() - 1));
  }
  if (out_reconstruct) {
    sglab::StateHistory u = sglab::reconstruct(h, problem.cfg.soliton, problem.cfg.epsilon);
    if (out_csv) sglab::write_history_csv(dir / "reconstructed.csv", u);
    if (out_binary) sglab::write_history_binary(dir / "reconstructed.sgh", u);
    if (out_colormap) {
      auto res = sglab::render_colormap(dir / "reconstructed.ppm", u);
      if (res.degenerate)
        std::cerr << "warning: constant reconstruction; reconstructed.ppm is uniform\n";
    }
  }

  ordered_json eff;
  eff["version"] = 1;
  eff["problem"] = effective_problem(problem);
  eff["snapshots"] = snapshots;
  eff["outputs"] = {{"history_csv", out_csv},
                    {"history_binary", out_binary},
                    {"colormap", out_colormap},
                    {"reconstruct", out_reconstruct}};
  write_effective_config(dir, eff);

  std::cout << "simulate: " << h.rows() << " steps x " << h.grid.nx << " points ("
            << kind_name(h.kind) << ") written to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

int cmd_diagnose(const fs::path& config_path, const std::string& out) {
  StrictObj root(load_json(config_path), "");
  require_version(root);
  ProblemParse problem = parse_problem(root.child("problem"));
  const bool damped_check = root.take_or<bool>("damped_check", problem.cfg.damping > 0.0);
  root.done();

  if (damped_check && !(problem.cfg.damping > 0.0))
    throw ConfigError("damped_check: requires damping > 0");

  const fs::path dir = prepare_out_dir(out);
  sglab::StateHistory h = sglab::solve(problem.cfg);
  auto g = effective_forcing(problem.cfg);

  sglab::EnergyReport energy = sglab::energy_series(h, g);
  sglab::write_energy_csv(dir / "energy.csv", energy);
  std::cout << "diagnose: energy bound " << (energy.all_satisfied ? "satisfied" : "VIOLATED")
            << " over " << energy.times.size() << " samples\n";

  if (damped_check) {
    sglab::DampedEnergyReport damped =
        sglab::damped_energy_check(h, problem.cfg.damping, g);
    sglab::write_damped_csv(dir / "damped.csv", damped);
    sglab::write_damped_summary_csv(dir / "damped_summary.csv", damped);
    std::cout << "diagnose: damped bound " << (damped.satisfied ? "satisfied" : "VIOLATED")
              << " (margin " << sglab::format_double(damped.margin) << ")\n";
  }

  ordered_json eff;
  eff["version"] = 1;
  eff["problem"] = effective_problem(problem);
  eff["damped_check"] = damped_check;
  write_effective_config(dir, eff);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// invert
// ---------------------------------------------------------------------------

int cmd_invert(const fs::path& config_path, const std::string& out,
               std::optional<std::uint64_t> seed_override) {
  StrictObj root(load_json(config_path), "");
  require_version(root);

  sglab::InverseRunConfig run;

  {
    StrictObj fam = root.child("family");
    run.family.mode = fam.take_or<int>("mode", 4);
    run.family.omega_count = fam.take_or<int>("count", 50);
    run.family.half_width = fam.take_or<double>("half_width", 0.5);
    fam.done();
  }
  run.problem.kind = sglab::ProblemKind::Perturbation;
  run.problem.grid = parse_grid(root.child("grid"));
  run.family.half_length = run.problem.grid.half_length;

  {
    StrictObj prob = root.child("problem");
    run.problem.epsilon = prob.take_or<double>("epsilon", 0.05);
    if (auto sol = prob.child_opt("soliton")) {
      run.problem.soliton.velocity = sol->take_or<double>("velocity", 0.0);
      run.problem.soliton.center = sol->take_or<double>("center", 0.0);
      sol->done();
    }
    if (auto forcing = prob.child_opt("forcing")) {
      run.problem.forcing.amp_x = forcing->take_or<double>("amp_x", 1.0);
      run.problem.forcing.amp_t = forcing->take_or<double>("amp_t", 2.0);
      forcing->done();
    } else {
      run.problem.forcing.amp_x = 1.0;
      run.problem.forcing.amp_t = 2.0;
    }
    run.problem.boundary = parse_boundary(prob.take_or<std::string>("boundary", "neumann"));
    run.problem.damping = prob.take_or<double>("damping", 0.0);
    prob.done();
  }
  run.problem.forcing.mode = run.family.mode;
  run.problem.forcing.half_length = run.problem.grid.half_length;
  run.problem.forcing.horizon = run.problem.grid.horizon;
  run.problem.initial_value = sglab::Field(run.problem.grid);
  run.problem.initial_velocity = sglab::Field(run.problem.grid);

  {
    StrictObj ds = root.child("dataset");
    run.time_samples = ds.take<int>("time_samples");
    run.space_samples = ds.take<int>("space_samples");
    run.noise_sigma = ds.take_or<double>("noise_sigma", 0.0);
    run.data_seed = ds.take_or<std::uint64_t>("seed", 0);
    ds.done();
  }
  {
    StrictObj tr = root.child("training");
    run.training.max_epochs = tr.take_or<long>("max_epochs", 100000);
    run.training.loss_threshold = tr.take_or<double>("loss_threshold", 1e-3);
    run.training.plateau_window = tr.take_or<long>("plateau_window", 2000);
    run.training.plateau_rel_improvement = tr.take_or<double>("plateau_improvement", 1e-6);
    run.training.lr = tr.take_or<double>("learning_rate", 1e-3);
    run.training.normalize_inputs = tr.take_or<bool>("normalize_inputs", true);
    run.training.seed = tr.take_or<std::uint64_t>("seed", 0);
    tr.done();
  }
  root.done();

  if (seed_override) {
    run.data_seed = *seed_override;
    run.training.seed = *seed_override;
  }

  const fs::path dir = prepare_out_dir(out);
  sglab::InverseOutcome<float> outcome = sglab::run_inverse<float>(run);

  sglab::write_dataset_csv(dir / "dataset.csv", outcome.dataset);
  sglab::write_inverse_report_csv(dir / "report.csv", outcome.report);
  sglab::write_loss_history_csv(dir / "loss_history.csv", outcome.training.loss_history);
  sglab::write_checkpoint(dir / "checkpoint.sgnn", outcome.training.params,
                          static_cast<std::uint64_t>(outcome.training.epochs),
                          outcome.training.loss_history.back());
  sglab::write_overlay_csv(dir / "overlay.csv", outcome.u0_true, outcome.u0_nn, outcome.v0_true,
                           outcome.v0_nn);

  ordered_json eff;
  eff["version"] = 1;
  eff["family"] = {{"mode", run.family.mode},
                   {"count", run.family.omega_count},
                   {"half_width", run.family.half_width}};
  eff["grid"] = {{"half_length", run.problem.grid.half_length},
                 {"points", run.problem.grid.nx},
                 {"horizon", run.problem.grid.horizon},
                 {"cfl", run.problem.grid.cfl}};
  eff["problem"] = {{"epsilon", run.problem.epsilon},
                    {"soliton",
                     {{"velocity", run.problem.soliton.velocity},
                      {"center", run.problem.soliton.center}}},
                    {"forcing",
                     {{"amp_x", run.problem.forcing.amp_x}, {"amp_t", run.problem.forcing.amp_t}}},
                    {"boundary",
                     run.problem.boundary == sglab::BoundaryKind::Neumann ? "neumann"
                                                                          : "dirichlet"},
                    {"damping", run.problem.damping}};
  eff["dataset"] = {{"time_samples", run.time_samples},
                    {"space_samples", run.space_samples},
                    {"noise_sigma", run.noise_sigma},
                    {"seed", run.data_seed}};
  eff["training"] = {{"max_epochs", run.training.max_epochs},
                     {"loss_threshold", run.training.loss_threshold},
                     {"plateau_window", run.training.plateau_window},
                     {"plateau_improvement", run.training.plateau_rel_improvement},
                     {"learning_rate", run.training.lr},
                     {"normalize_inputs", run.training.normalize_inputs},
                     {"seed", run.training.seed}};
  write_effective_config(dir, eff);

  const char* stop = outcome.training.stop == sglab::StopReason::Threshold  ? "threshold"
                     : outcome.training.stop == sglab::StopReason::Plateau ? "plateau"
                                                                           : "max_epochs";
  std::cout << "invert: stopped at epoch " << outcome.report.epochs << " (" << stop
            << "), loss " << sglab::format_double(outcome.training.loss_history.back())
            << ", mse_u0 " << sglab::format_double(outcome.report.mse_u0) << ", mse_v0 "
            << sglab::format_double(outcome.report.mse_v0) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

int cmd_render(const fs::path& config_path, const std::string& out) {
  StrictObj root(load_json(config_path), "");
  require_version(root);
  const auto input = root.take<std::string>("input");
  const auto output = root.take_or<std::string>("output", "colormap.ppm");
  root.done();

  const fs::path dir = prepare_out_dir(out);
  sglab::RawHistory h = sglab::read_history_binary(input);
  auto res = sglab::render_colormap(dir / output, h);
  if (res.degenerate) std::cerr << "warning: constant history; image is uniform mid-palette\n";

  ordered_json eff;
  eff["version"] = 1;
  eff["input"] = input;
  eff["output"] = output;
  write_effective_config(dir, eff);
  std::cout << "render: " << h.nt << "x" << h.nx << " -> " << (dir / output).string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sine-Gordon soliton laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory (created if absent)");
    sub->add_option("--seed", seed, "override dataset and training seeds");
  };
  CLI::App* sim = app.add_subcommand("simulate", "run a forward solve and write its outputs");
  CLI::App* inv = app.add_subcommand("invert", "reconstruct initial conditions from samples");
  CLI::App* dia = app.add_subcommand("diagnose", "energy diagnostics for a forward solve");
  CLI::App* ren = app.add_subcommand("render", "render a stored history to a colormap");
  for (CLI::App* sub : {sim, inv, dia, ren}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_dir);
    if (dia->parsed()) return cmd_diagnose(config_path, out_dir);
    if (inv->parsed()) return cmd_invert(config_path, out_dir, seed);
    if (ren->parsed()) return cmd_render(config_path, out_dir);
  } catch (const sglab::BlowupError& e) {
    std::cerr << "error: " << e.what() << '\n';
    try {
      sglab::write_history_binary(fs::path(out_dir) / "partial_history.sgh",
                                  e.partial_history());
      std::cerr << "partial history written to " << out_dir << "/partial_history.sgh\n";
    } catch (...) {
    }
    return kExitBlowup;
  } catch (const sglab::TrainingDivergedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
