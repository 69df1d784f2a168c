#include "cli_app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "hadlrr/admm.hpp"
#include "hadlrr/dictionary.hpp"
#include "hadlrr/error.hpp"
#include "hadlrr/evaluation.hpp"
#include "hadlrr/hsi_io.hpp"
#include "hadlrr/rx.hpp"
#include "hadlrr/unfolded.hpp"

namespace hadlrr::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kProgram = "hadlrr";
constexpr const char* kVersion = "0.1.0";
constexpr const char* kEnvPrefix = "HADLRR_";

std::string env_name(const std::string& flag) {
  std::string out = kEnvPrefix;
  for (char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

double parse_double(const std::string& flag, const std::string& text) {
  double value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw CLI::ValidationError("--" + flag, "'" + text + "' is not a number");
  return value;
}

/// Registers options on a subcommand and remembers how to echo their resolved values.
class OptionTable {
 public:
  explicit OptionTable(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& desc) {
    CLI::Option* o = app_->add_option("--" + name, var, desc);
    o->default_str(to_text(json(var)));
    common(o, name);
    entries_.push_back({name, o, [&var] { return json(var); }});
    return o;
  }

  CLI::Option* add(const std::string& name, double& var, const std::string& desc) {
    CLI::Option* o = app_->add_option_function<std::string>(
        "--" + name, [&var, name](const std::string& s) { var = parse_double(name, s); }, desc);
    o->type_name("FLOAT")->default_str(to_text(json(var)));
    common(o, name);
    entries_.push_back({name, o, [&var] { return json(var); }});
    return o;
  }

  /// A double that is recorded only when supplied.
  CLI::Option* add_optional(const std::string& name, std::optional<double>& var,
                            const std::string& desc) {
    CLI::Option* o = app_->add_option_function<std::string>(
        "--" + name, [&var, name](const std::string& s) { var = parse_double(name, s); }, desc);
    o->type_name("FLOAT");
    common(o, name);
    entries_.push_back({name, o, [&var] { return var ? json(*var) : json(nullptr); }});
    return o;
  }

  /// A filesystem path, echoed in absolute form; empty means not given.
  CLI::Option* add_path(const std::string& name, std::string& var, const std::string& desc) {
    CLI::Option* o = app_->add_option("--" + name, var, desc);
    common(o, name);
    entries_.push_back({name, o, [&var] {
                          return var.empty() ? json(nullptr) : json(fs::absolute(var).lexically_normal().string());
                        }});
    return o;
  }

  json resolved() const {
    json out = json::object();
    for (const auto& e : entries_) {
      json v = e.dump();
      if (!v.is_null()) out[e.name] = std::move(v);
    }
    return out;
  }

  /// Environment overrides as leading flags, so explicit flags given later still win.
  std::vector<std::string> env_arguments() const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
      if (const char* v = std::getenv(env_name(e.name).c_str())) {
        out.push_back("--" + e.name);
        out.push_back(v);
      }
    return out;
  }

  static std::string to_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

 private:
  static void common(CLI::Option* o, const std::string& name) {
    o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    // Shown in --help only; the values are injected by env_arguments().
    o->description(o->get_description() + " [env: " + env_name(name) + "]");
  }

  struct Entry {
    std::string name;
    CLI::Option* option;
    std::function<json()> dump;
  };
  CLI::App* app_;
  std::vector<Entry> entries_;
};

void prepare_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw DataError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

void write_manifest(const fs::path& dir, const std::string& command, const OptionTable& table,
                    std::uint64_t seed) {
  json m;
  m["program"] = kProgram;
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = seed;
  m["options"] = table.resolved();
  std::ofstream f(dir / "manifest.json");
  if (!f) throw DataError("cannot write '" + (dir / "manifest.json").string() + "'");
  f << m.dump(2) << '\n';
}

void require_readable(const std::string& what, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(what + " '" + path + "' is not readable");
}

/// Raw companion of an ENVI header: explicit path, else <stem>.raw, <stem>.img, <stem>.
std::string resolve_raw(const std::string& header, const std::string& raw) {
  if (!raw.empty()) return raw;
  const fs::path h(header);
  for (const char* ext : {".raw", ".img", ""}) {
    fs::path candidate = h;
    candidate.replace_extension(ext);
    if (candidate != h && fs::is_regular_file(candidate)) return candidate.string();
  }
  throw DataError("no raw file found next to header '" + header + "'; pass --raw");
}

void print_auc(const std::string& label, double auc) {
  std::cout << label << " AUC " << std::setprecision(6) << std::fixed << auc << '\n'
            << std::defaultfloat;
}

void report_roc(const AnomalyScoreMap& map, const std::string& mask_path, const fs::path& out) {
  if (mask_path.empty()) {
    std::cerr << "note: no --mask given, skipping ROC\n";
    return;
  }
  const auto mask = load_mask(mask_path, map.shape.rows, map.shape.cols);
  const auto curve = roc(map, mask);
  save_roc_csv(curve, out / "roc.csv");
  print_auc("detection", curve.auc);
}

struct SynthArgs {
  SyntheticSceneSpec spec;
  std::string out;
};

void run_synth(const SynthArgs& a, const OptionTable& table) {
  a.spec.validate();
  const fs::path out(a.out);
  prepare_output_dir(out);
  write_manifest(out, "synth", table, a.spec.seed);
  const auto scene = generate_synthetic_scene(a.spec);
  save_envi(scene.cube, out / "cube.hdr", out / "cube.raw");
  save_mask_pgm(scene.mask, out / "mask.pgm");
  std::cout << "wrote " << a.spec.bands << "-band " << a.spec.rows << "x" << a.spec.cols
            << " scene with " << scene.mask.anomaly_count() << " anomalous pixels to "
            << out.string() << '\n';
}

struct DetectArgs {
  std::string method;
  std::string input, raw, mask, out, checkpoint;
  std::uint64_t seed = 7;
  Index atoms = kDefaultAtoms;
  int kmeans_iters = kDefaultKmeansIters;
  AdmmConfig admm;
  Index stages = 10;
  bool normalize_each_stage = false;
  LocalRxConfig lrx;
  double ridge = kDefaultCovarianceRidge;
  // train only
  int budget = 400;
  TrainOptions train;
};

struct Seeds {
  std::uint64_t dictionary;
  std::uint64_t trainer;
};

Seeds derive_seeds(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const std::uint64_t d = gen();
  return {d, gen()};
}

HsiCube load_input(DetectArgs& a) {
  require_readable("input header", a.input);
  a.raw = resolve_raw(a.input, a.raw);
  require_readable("raw file", a.raw);
  if (!a.mask.empty()) require_readable("mask", a.mask);
  if (!a.checkpoint.empty()) require_readable("checkpoint", a.checkpoint);
  return load_envi(a.input, a.raw);
}

void run_detect(DetectArgs& a, const OptionTable& table) {
  a.admm.validate();
  HsiCube cube = load_input(a);
  const fs::path out(a.out);
  prepare_output_dir(out);
  write_manifest(out, "detect", table, a.seed);

  const DataMatrix x = cube_to_matrix(cube);
  AnomalyScoreMap map;
  if (a.method == "grx") {
    map = global_rx(x, a.ridge);
  } else if (a.method == "lrx") {
    a.lrx.ridge = a.ridge;
    map = local_rx(cube, a.lrx);
  } else if (a.method == "lrr-admm") {
    const auto init = init_dictionary(x.values, a.atoms, derive_seeds(a.seed).dictionary, a.kmeans_iters);
    const auto res = admm_run(x.values, a.admm, init.atoms, init.coefficients);
    save_trace_csv(res.trace, out / "trace.csv");
    std::cout << "admm stopped after " << res.trace.size() << " iterations ("
              << to_string(res.reason) << ")\n";
    map = anomaly_scores(res.state, x.shape);
  } else {
    UnfoldedModel model;
    if (!a.checkpoint.empty()) {
      model = load_checkpoint(a.checkpoint);
    } else {
      if (a.stages < 1) throw std::invalid_argument("--stages must be at least 1");
      model = init_from_admm(a.stages, a.atoms, a.admm);
      model.normalize_each_stage = a.normalize_each_stage;
    }
    const auto init =
        init_dictionary(x.values, model.k_atoms, derive_seeds(a.seed).dictionary, a.kmeans_iters);
    const auto res = forward(model, x.values, init.atoms, init.coefficients);
    save_stage_trace_csv(res.trace, out / "trace.csv");
    std::cout << "network with " << model.depth() << " stages, loss "
              << std::setprecision(10) << loss(x.values, res.x_hat) << std::defaultfloat << '\n';
    map = anomaly_scores(res.state, x.shape);
  }
  save_score_map(map, out / "scores.csv", out / "scores.pgm");
  report_roc(map, a.mask, out);
}

void run_train(DetectArgs& a, const OptionTable& table) {
  if (a.stages < 1) throw std::invalid_argument("--stages must be at least 1");
  if (a.budget < 4 * a.stages)
    throw std::invalid_argument("--budget must be at least 4 x --stages (" +
                                std::to_string(4 * a.stages) + ")");
  a.admm.validate();
  HsiCube cube = load_input(a);
  const fs::path out(a.out);
  prepare_output_dir(out);
  write_manifest(out, "train", table, a.seed);

  const DataMatrix x = cube_to_matrix(cube);
  const Seeds seeds = derive_seeds(a.seed);
  auto model = init_from_admm(a.stages, a.atoms, a.admm);
  model.normalize_each_stage = a.normalize_each_stage;
  const auto init = init_dictionary(x.values, a.atoms, seeds.dictionary, a.kmeans_iters);
  const auto res = train(model, x.values, init.atoms, init.coefficients, a.budget, seeds.trainer, a.train);

  save_checkpoint(res.model, out / "checkpoint.json");
  save_loss_history_csv(res.loss_history, out / "loss_history.csv");
  std::cout << std::setprecision(10) << "initial loss " << res.loss_history.front()
            << "\nfinal loss " << res.loss_history.back() << "\n"
            << std::defaultfloat << res.loss_history.size() - 1 << " accepted steps, "
            << res.evaluations << " evaluations\n";

  const auto fwd = forward(res.model, x.values, init.atoms, init.coefficients);
  save_stage_trace_csv(fwd.trace, out / "trace.csv");
  const auto map = anomaly_scores(fwd.state, x.shape);
  save_score_map(map, out / "scores.csv", out / "scores.pgm");
  report_roc(map, a.mask, out);
}

struct EvalArgs {
  std::string scores, mask, out;
};

void run_eval(const EvalArgs& a, const OptionTable& table) {
  require_readable("score map", a.scores);
  require_readable("mask", a.mask);
  const fs::path out(a.out);
  prepare_output_dir(out);
  write_manifest(out, "eval", table, 0);
  auto [values, shape] = load_grid_csv(a.scores);
  const auto mask = load_mask(a.mask, shape.rows, shape.cols);
  const auto curve = roc(values, mask);
  save_roc_csv(curve, out / "roc.csv");
  print_auc("evaluation", curve.auc);
}

std::vector<std::string> replay_arguments(const std::string& manifest_path,
                                          const std::string& out_override) {
  std::ifstream f(manifest_path);
  if (!f) throw DataError("manifest '" + manifest_path + "' is not readable");
  json m;
  try {
    m = json::parse(f);
  } catch (const json::exception& e) {
    throw DataError("manifest '" + manifest_path + "': " + e.what());
  }
  if (!m.contains("command") || !m["command"].is_string() || !m.contains("options") ||
      !m["options"].is_object())
    throw DataError("manifest '" + manifest_path + "' lacks 'command' or 'options'");
  const std::string command = m["command"].get<std::string>();
  if (command == "replay") throw DataError("manifest '" + manifest_path + "' records a replay");

  std::vector<std::string> args{command};
  for (const auto& [name, value] : m["options"].items()) {
    if (name == "out" && !out_override.empty()) continue;
    args.push_back("--" + name);
    args.push_back(OptionTable::to_text(value));
  }
  if (!out_override.empty()) {
    args.push_back("--out");
    args.push_back(out_override);
  }
  return args;
}

void add_admm_options(OptionTable& t, AdmmConfig& c) {
  t.add("lambda1", c.lambda1, "dictionary ridge weight");
  t.add("lambda2", c.lambda2, "nuclear-norm weight on the coefficients");
  t.add("lambda3", c.lambda3, "column-sparsity weight on the anomaly part");
  t.add("mu", c.mu, "initial penalty weight");
  t.add("rho", c.rho, "penalty growth factor");
  t.add("mu-max", c.mu_max, "penalty cap");
}

void add_input_options(OptionTable& t, DetectArgs& a) {
  t.add_path("input", a.input, "ENVI header of the input cube")->required();
  t.add_path("raw", a.raw, "raw data file (default: next to the header)");
  t.add_path("mask", a.mask, "ground-truth mask (.pgm or .csv); enables ROC output");
  t.add_path("out", a.out, "output directory")->required();
  t.add("seed", a.seed, "seed of the run's random generator");
  t.add("atoms", a.atoms, "dictionary size")->check(CLI::PositiveNumber);
  t.add("kmeans-iters", a.kmeans_iters, "k-means iteration cap")->check(CLI::PositiveNumber);
}

int dispatch(int argc, const char* const* argv, int depth);

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

int dispatch(int argc, const char* const* argv, int depth) {
  CLI::App app{"Hyperspectral anomaly detection with low-rank representation"};
  app.set_version_flag("--version", std::string(kProgram) + " " + kVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene with planted anomalies");
  OptionTable synth_opts(synth_cmd);
  synth_opts.add("bands", synth.spec.bands, "spectral bands");
  synth_opts.add("rows", synth.spec.rows, "image rows");
  synth_opts.add("cols", synth.spec.cols, "image columns");
  synth_opts.add("rank", synth.spec.background_rank, "background rank");
  synth_opts.add("anomalies", synth.spec.n_anomalies, "number of anomaly clusters");
  synth_opts.add("anomaly-fraction", synth.spec.anomaly_fraction, "fraction of anomalous pixels");
  synth_opts.add("noise-sigma", synth.spec.noise_sigma, "Gaussian noise level");
  synth_opts.add("anomaly-strength", synth.spec.anomaly_strength,
                 "anomaly amplitude relative to the mean background pixel norm");
  synth_opts.add("seed", synth.spec.seed, "scene seed");
  synth_opts.add_path("out", synth.out, "output directory")->required();

  DetectArgs detect;
  auto* detect_cmd = app.add_subcommand("detect", "score every pixel of a cube");
  OptionTable detect_opts(detect_cmd);
  detect_opts.add("method", detect.method, "detector")
      ->required()
      ->check(CLI::IsMember({"grx", "lrx", "lrr-admm", "lrr-net+"}));
  add_input_options(detect_opts, detect);
  add_admm_options(detect_opts, detect.admm);
  detect_opts.add("max-iters", detect.admm.max_iters, "ADMM iteration cap");
  detect_opts.add_optional("eps-primal", detect.admm.eps_primal,
                           "absolute primal tolerance (default 1e-6 |X|)");
  detect_opts.add_optional("eps-recon", detect.admm.eps_recon,
                           "absolute change tolerance (default 1e-8 |X|^2)");
  detect_opts.add("normalize-atoms", detect.admm.normalize_atoms, "renormalize atoms each ADMM iteration");
  detect_opts.add("stages", detect.stages, "network depth when no checkpoint is given");
  detect_opts.add_path("checkpoint", detect.checkpoint, "trained network parameters");
  detect_opts.add("normalize-each-stage", detect.normalize_each_stage, "renormalize atoms in every stage");
  detect_opts.add("w-in", detect.lrx.w_in, "local RX guard window (odd)");
  detect_opts.add("w-out", detect.lrx.w_out, "local RX outer window (odd)");
  detect_opts.add("ridge", detect.ridge, "relative covariance ridge for RX");

  DetectArgs tr;
  auto* train_cmd = app.add_subcommand("train", "fit the unfolded network's per-stage parameters");
  OptionTable train_opts(train_cmd);
  add_input_options(train_opts, tr);
  add_admm_options(train_opts, tr.admm);
  train_opts.add("stages", tr.stages, "network depth");
  train_opts.add("budget", tr.budget, "forward evaluations allowed (at least 4 x stages)");
  train_opts.add("normalize-each-stage", tr.normalize_each_stage, "renormalize atoms in every stage");
  train_opts.add("probe-step", tr.train.probe_step, "finite-difference step in log-parameter space");
  train_opts.add("max-step", tr.train.max_step, "largest log-space move per step");
  train_opts.add("backtracks", tr.train.backtracks, "step halvings before giving up on a coordinate");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "ROC and AUC of a saved score map");
  OptionTable eval_opts(eval_cmd);
  eval_opts.add_path("scores", eval.scores, "score map CSV")->required();
  eval_opts.add_path("mask", eval.mask, "ground-truth mask (.pgm or .csv)")->required();
  eval_opts.add_path("out", eval.out, "output directory")->required();

  std::string manifest, replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  replay_cmd->add_option("--out", replay_out, "write outputs here instead of the recorded directory");

  app.set_config("--config", "", "TOML file; values go under a [synth], [detect], [train] or [eval] table")
      ->envname(env_name("config"));
  app.allow_config_extras(false);
  for (auto* cmd : {synth_cmd, detect_cmd, train_cmd, eval_cmd}) {
    cmd->fallthrough();
    cmd->allow_config_extras(false);
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  const std::vector<std::pair<CLI::App*, const OptionTable*>> tables = {
      {synth_cmd, &synth_opts}, {detect_cmd, &detect_opts}, {train_cmd, &train_opts}, {eval_cmd, &eval_opts}};
  for (auto it = args.begin(); it != args.end(); ++it) {
    const auto hit = std::find_if(tables.begin(), tables.end(),
                                  [&](const auto& t) { return t.first->get_name() == *it; });
    if (hit == tables.end()) continue;
    const auto extra = hit->second->env_arguments();
    args.insert(it + 1, extra.begin(), extra.end());
    break;
  }
  std::vector<const char*> full_argv{argv[0]};
  for (const auto& a : args) full_argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(full_argv.size()), full_argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*synth_cmd) return guarded([&] { run_synth(synth, synth_opts); });
  if (*detect_cmd) return guarded([&] { run_detect(detect, detect_opts); });
  if (*train_cmd) return guarded([&] { run_train(tr, train_opts); });
  if (*eval_cmd) return guarded([&] { run_eval(eval, eval_opts); });

  std::vector<std::string> recorded;
  if (const int code = guarded([&] {
        if (depth > 0) throw DataError("a replayed manifest cannot itself be a replay");
        recorded = replay_arguments(manifest, replay_out);
      });
      code != kExitOk)
    return code;
  std::vector<const char*> replay_argv{kProgram};
  for (const auto& s : recorded) replay_argv.push_back(s.c_str());
  return dispatch(static_cast<int>(replay_argv.size()), replay_argv.data(), depth + 1);
}

}  // namespace

int run(int argc, const char* const* argv) { return dispatch(argc, argv, 0); }

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{kProgram};
  for (const auto& s : args) argv.push_back(s.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace hadlrr::cli
