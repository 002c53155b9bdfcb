#include "sihg/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "sihg/analysis.hpp"

namespace sihg {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Vector parse_vector(const std::string& section, const std::string& key, const std::string& raw) {
  std::istringstream in(raw);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0')
      throw ConfigError("key " + section + "." + key + ": not a number list: " + raw);
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError("key " + section + "." + key + ": empty vector");
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

TermSpec term_from_config(const ConfigFile& config, const std::string& key) {
  const std::string kind = config.get_string("problem", key, "zero");
  TermSpec spec;
  if (kind == "zero") {
    spec.kind = TermSpec::Kind::Zero;
  } else if (kind == "quadratic") {
    spec.kind = TermSpec::Kind::Quadratic;
    spec.param = config.get_double("problem", key + "_param");
  } else if (kind == "box") {
    spec.kind = TermSpec::Kind::Box;
    spec.param = config.get_double("problem", key + "_param");
  } else {
    throw ConfigError("problem." + key + ": expected zero, quadratic or box, got " + kind);
  }
  return spec;
}

MlpShape shape_from_config(const ConfigFile& config) {
  MlpShape shape;
  if (config.has("net", "dims")) {
    const Vector dims = parse_vector("net", "dims", config.get_string("net", "dims"));
    shape.dims.clear();
    for (Index j = 0; j < dims.size(); ++j) {
      if (dims[j] != std::floor(dims[j]) || dims[j] <= 0)
        throw ConfigError("net.dims: entries must be positive integers");
      shape.dims.push_back(static_cast<Index>(dims[j]));
    }
  }
  return shape;
}

ToyDataset dataset_from_config(const ConfigFile& config) {
  return make_blobs(static_cast<int>(config.get_long("dataset", "per_class", 100)),
                    config.get_double("dataset", "stddev", 0.3),
                    config.get_u64("dataset", "seed", 1));
}

AttackConfig attack_from_config(const ConfigFile& config, double default_eps) {
  AttackConfig attack;
  attack.eps = config.get_double("attack", "eps", default_eps);
  attack.steps = static_cast<int>(config.get_long("attack", "steps", 20));
  attack.restarts = static_cast<int>(config.get_long("attack", "restarts", 0));
  attack.step_size = config.get_double("attack", "step_size", 0.0);
  attack.seed = config.get_u64("attack", "seed", 0);
  return attack;
}

AtConfig at_config_from(const ConfigFile& config) {
  AtConfig at;
  at.epochs = static_cast<int>(config.get_long("at", "epochs", 150));
  at.batches = static_cast<int>(config.get_long("at", "batches", 10));
  at.sigma = config.get_double("at", "sigma", 2.0);
  at.tau = config.get_double("at", "tau", 0.0);
  at.inner_steps = static_cast<int>(config.get_long("at", "inner_steps", 5));
  at.inner_eta = config.get_double("at", "inner_eta", 0.0);
  at.pgd_at_steps = static_cast<int>(config.get_long("at", "pgd_at_steps", 10));
  at.momentum = config.get_double("at", "momentum", 0.9);
  at.init_scale = config.get_double("at", "init_scale", 1.0);
  at.seed = config.get_u64("at", "seed", 0);
  at.curve_attack = attack_from_config(config, 0.0);  // eps 0 inherits the training eps
  return at;
}

std::vector<std::string> split_words(const std::string& raw) {
  std::istringstream in(raw);
  std::vector<std::string> out;
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

// Uniform [-1, 1] entries; one stream for all blocks keeps the instance a
// pure function of the seed.
std::vector<Matrix> random_blocks(int n, Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Matrix> blocks;
  for (int i = 0; i < n; ++i) {
    Matrix a(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) a(r, c) = rng.next_in(-1.0, 1.0);
    blocks.push_back(std::move(a));
  }
  return blocks;
}

struct StartPair {
  Vector w;
  BlockVector delta;
};

StartPair start_points(const ConfigFile& config, const MinimaxProblem& problem) {
  StartPair start{problem.zero_w(), problem.zero_delta()};
  if (config.has("solver", "start_w")) {
    start.w = parse_vector("solver", "start_w", config.get_string("solver", "start_w"));
    if (start.w.size() != problem.dim_w)
      throw ConfigError("solver.start_w: expected " + std::to_string(problem.dim_w) + " entries");
  }
  if (config.has("solver", "start_delta")) {
    const Vector flat =
        parse_vector("solver", "start_delta", config.get_string("solver", "start_delta"));
    if (flat.size() != start.delta.flat().size())
      throw ConfigError("solver.start_delta: expected " +
                        std::to_string(start.delta.flat().size()) + " entries");
    start.delta = BlockVector(problem.block_dims, flat);
  }
  return start;
}

Trace dispatch_solver(const std::string& solver, const MinimaxProblem& problem,
                      const BilinearSpec* bilinear, const ConfigFile& config,
                      const SolverConfig& sc, const StartPair& start) {
  if (solver == "ssihg") return ssihg_run(problem, sc, start.w, start.delta);
  if (solver == "dsihg") return dsihg_run(problem, sc, start.w, start.delta);
  if (solver == "msihg") return msihg_run(problem, sc, start.w, start.delta);
  if (solver == "msihg_gd")
    return msihg_gd_run(problem, sc, config.get_double("solver", "momentum", 0.9), start.w,
                        start.delta);
  if (solver == "spdhg") {
    if (bilinear == nullptr)
      throw ConfigError("solver.solver: spdhg needs a bilinear problem family");
    return spdhg_bilinear_run(*bilinear, sc, start.w, start.delta);
  }
  if (solver == "mgda")
    return mgda_baseline_run(problem, sc, static_cast<int>(config.get_long("solver",
                                                                           "inner_steps", 5)),
                             config.get_double("solver", "eta", 0.0), start.w, start.delta);
  throw ConfigError("solver.solver: unknown solver " + solver);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::string csv_cell(const std::optional<double>& v) { return v ? fmt17(*v) : std::string(); }

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve,
                     std::uint64_t seed, const std::string& hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "#seed=" << seed << "\n#config_hash=" << hash << "\n";
  out << "epoch,natural_acc,robust_acc,train_loss\n";
  for (const CurvePoint& p : curve)
    out << p.epoch << "," << fmt17(p.natural_acc) << "," << fmt17(p.robust_acc) << ","
        << fmt17(p.train_loss) << "\n";
}

// Largest elementwise trajectory gap between two recorded runs.
double trajectory_gap(const Trace& a, const Trace& b) {
  if (a.w_history.size() != b.w_history.size())
    throw std::runtime_error("trajectory_gap: runs recorded different lengths");
  double gap = 0.0;
  for (std::size_t j = 0; j < a.w_history.size(); ++j) {
    gap = std::max(gap, (a.w_history[j] - b.w_history[j]).cwiseAbs().maxCoeff());
    gap = std::max(gap, (a.delta_history[j].flat() - b.delta_history[j].flat())
                            .cwiseAbs()
                            .maxCoeff());
  }
  return gap;
}

int run_solve(const LoadedConfig& loaded, const std::string& output_dir);
int run_equivalence(const LoadedConfig& loaded, const std::string& output_dir);
int run_budget(const LoadedConfig& loaded, const std::string& output_dir);
int run_rate(const LoadedConfig& loaded, const std::string& output_dir);
int run_at(const LoadedConfig& loaded, const std::string& output_dir);

}  // namespace

const std::vector<PresetInfo>& preset_registry() {
  static const std::vector<PresetInfo> registry = {
      {"bilinear-equivalence",
       "stochastic implicit path vs the explicit primal-dual reference on a random "
       "block-bilinear problem"},
      {"strong-mvi-linear",
       "linear-rate run on the strongly monotone quadratic game; fitted tail ratio vs the "
       "predicted contraction factor"},
      {"weak-mvi-budget",
       "step-energy budget check on the weakly certified nonconvex quadratic game"},
      {"toy-at",
       "adversarial-training comparison on the two-blob toy task: natural, pgd_at, msihg, "
       "msihg_gd"},
      {"mnist-ratios",
       "adversarial training with the (eps, tau, steps) = (0.4, 0.2, 5) band preset on the toy "
       "task"},
  };
  return registry;
}

std::string preset_text(const std::string& name) {
  if (name == "bilinear-equivalence")
    return "[experiment]\n"
           "kind = \"equivalence\"\n"
           "name = \"bilinear-equivalence\"\n"
           "\n"
           "[problem]\n"
           "family = \"block_bilinear\"\n"
           "n = 2\n"
           "rows = 3\n"
           "dim_w = 4\n"
           "matrix_seed = 11\n"
           "f = \"quadratic\"\n"
           "f_param = 0.5\n"
           "g = \"quadratic\"\n"
           "g_param = 0.5\n"
           "\n"
           "[solver]\n"
           "sigma = 0.15\n"
           "tau = 0.15\n"
           "iterations = 500\n"
           "seed = 42\n"
           "metric_stride = 10\n";
  if (name == "strong-mvi-linear")
    return "[experiment]\n"
           "kind = \"rate\"\n"
           "name = \"strong-mvi-linear\"\n"
           "\n"
           "[problem]\n"
           "family = \"quadratic_game\"\n"
           "a = 1\n"
           "b = 1\n"
           "c = 1\n"
           "dim = 2\n"
           "\n"
           "[solver]\n"
           "solver = \"dsihg\"\n"
           "sigma = 0.1\n"
           "tau = 0.1\n"
           "iterations = 1000\n"
           "seed = 3\n"
           "metric_stride = 1\n"
           "start_w = \"1 -0.5\"\n"
           "start_delta = \"0.3 1\"\n"
           "\n"
           "[rate]\n"
           "mu = 2\n"
           "k_lo = 100\n"
           "k_hi = 1000\n";
  if (name == "weak-mvi-budget")
    return "[experiment]\n"
           "kind = \"budget\"\n"
           "name = \"weak-mvi-budget\"\n"
           "\n"
           "[problem]\n"
           "family = \"quadratic_game\"\n"
           "a = -0.01\n"
           "b = 1\n"
           "c = 0.5\n"
           "dim = 2\n"
           "\n"
           "[solver]\n"
           "solver = \"dsihg\"\n"
           "sigma = 0.16666666666666666\n"
           "tau = 0.16666666666666666\n"
           "iterations = 10000\n"
           "seed = 4\n"
           "metric_stride = 10\n"
           "start_w = \"1 -1\"\n"
           "start_delta = \"0.5 1\"\n"
           "\n"
           "[budget]\n"
           "rho = 0.024\n";
  if (name == "toy-at")
    return "[experiment]\n"
           "kind = \"at\"\n"
           "name = \"toy-at\"\n"
           "\n"
           "[at]\n"
           "methods = \"natural pgd_at msihg msihg_gd\"\n"
           "eps = 0.3\n"
           "epochs = 150\n"
           "batches = 10\n"
           "sigma = 2.0\n"
           "inner_steps = 5\n"
           "momentum = 0.9\n"
           "init_scale = 1.0\n"
           "seed = 5\n"
           "\n"
           "[dataset]\n"
           "per_class = 100\n"
           "stddev = 0.3\n"
           "seed = 1\n"
           "\n"
           "[net]\n"
           "dims = \"2 16 16 2\"\n"
           "\n"
           "[attack]\n"
           "steps = 20\n"
           "restarts = 0\n"
           "seed = 9\n";
  if (name == "mnist-ratios")
    return "[experiment]\n"
           "kind = \"at\"\n"
           "name = \"mnist-ratios\"\n"
           "\n"
           "[at]\n"
           "methods = \"msihg\"\n"
           "eps = 0.4\n"
           "tau = 0.2\n"
           "inner_steps = 5\n"
           "epochs = 60\n"
           "batches = 10\n"
           "sigma = 2.0\n"
           "seed = 6\n"
           "\n"
           "[dataset]\n"
           "per_class = 100\n"
           "stddev = 0.3\n"
           "seed = 1\n"
           "\n"
           "[net]\n"
           "dims = \"2 16 16 2\"\n"
           "\n"
           "[attack]\n"
           "steps = 20\n"
           "restarts = 0\n"
           "seed = 9\n";
  throw ConfigError("unknown preset: " + name);
}

LoadedConfig load_config_or_preset(const std::string& arg) {
  LoadedConfig loaded;
  if (fs::exists(arg)) {
    loaded.file = ConfigFile::load(arg);
    loaded.name = fs::path(arg).stem().string();
  } else {
    loaded.file = ConfigFile::parse(preset_text(arg));
    loaded.name = arg;
  }
  loaded.name = loaded.file.get_string("experiment", "name", loaded.name);
  return loaded;
}

MinimaxProblem build_problem(const ConfigFile& config, BilinearSpec* bilinear) {
  const std::string family = config.get_string("problem", "family");
  if (family == "bilinear" || family == "block_bilinear") {
    const int n = family == "bilinear" ? 1 : static_cast<int>(config.get_long("problem", "n", 2));
    const Index rows = config.get_long("problem", "rows", 3);
    const Index dim_w = config.get_long("problem", "dim_w", 4);
    const std::vector<Matrix> blocks =
        random_blocks(n, rows, dim_w, config.get_u64("problem", "matrix_seed", 1));
    const TermSpec f = term_from_config(config, "f");
    const TermSpec g = term_from_config(config, "g");
    MinimaxProblem problem = make_block_bilinear(blocks, f, g);
    if (bilinear != nullptr) {
      bilinear->blocks = blocks;
      bilinear->f = f.build();
      bilinear->g.assign(static_cast<std::size_t>(n), g.build());
    }
    return problem;
  }
  if (family == "quadratic_game")
    return make_quadratic_game(config.get_double("problem", "a"), config.get_double("problem", "b"),
                               config.get_double("problem", "c"),
                               config.get_long("problem", "dim", 1));
  if (family == "block_quadratic_game")
    return make_block_quadratic_game(
        config.get_double("problem", "a"), config.get_double("problem", "b"),
        config.get_double("problem", "c"), static_cast<int>(config.get_long("problem", "n", 2)),
        config.get_long("problem", "block_dim", 1));
  if (family == "toy_at")
    return make_toy_at(dataset_from_config(config), shape_from_config(config),
                       config.get_double("problem", "eps", 0.3),
                       static_cast<int>(config.get_long("problem", "n", 10)));
  throw ConfigError("problem.family: unknown family " + family);
}

SolverConfig build_solver_config(const ConfigFile& config) {
  SolverConfig sc;
  sc.sigma = config.get_double("solver", "sigma", sc.sigma);
  sc.tau = config.get_double("solver", "tau", sc.tau);
  sc.theta = config.get_double("solver", "theta", sc.theta);
  sc.iterations = static_cast<int>(config.get_long("solver", "iterations", sc.iterations));
  sc.seed = config.get_u64("solver", "seed", sc.seed);
  sc.metric_stride = static_cast<int>(config.get_long("solver", "metric_stride",
                                                      sc.metric_stride));
  const std::string inner = config.get_string("solver", "inner_method", "fixed_point");
  if (inner == "accelerated")
    sc.inner.method = InnerSolverConfig::Method::AcceleratedProximal;
  else if (inner != "fixed_point")
    throw ConfigError("solver.inner_method: expected fixed_point or accelerated");
  sc.inner.tol = config.get_double("solver", "inner_tol", sc.inner.tol);
  sc.inner.max_iter = static_cast<int>(config.get_long("solver", "inner_max_iter",
                                                       sc.inner.max_iter));
  if (config.has("solver", "surrogate_steps"))
    sc.surrogate = PgdSurrogateConfig{
        static_cast<int>(config.get_long("solver", "surrogate_steps", 5)),
        config.get_double("solver", "surrogate_eta", 0.0)};
  sc.record_iterates = config.get_bool("solver", "record_iterates", sc.record_iterates);
  return sc;
}

void write_trace_csv(const std::string& path, const Trace& trace, const std::string& hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "#seed=" << trace.seed << "\n#config_hash=" << hash << "\n";
  out << "k,residual_sq,dist_w_sq,dist_delta_sq,elapsed_ns\n";
  for (const TraceRow& r : trace.rows)
    out << r.k << "," << csv_cell(r.residual_sq) << "," << csv_cell(r.dist_w_sq) << ","
        << csv_cell(r.dist_delta_sq) << "," << r.elapsed_ns << "\n";
}

void write_truncated_csv(const std::string& path, std::uint64_t seed, const std::string& hash) {
  std::ofstream out(path);
  if (!out) return;  // already failing; keep the original error
  out << "#seed=" << seed << "\n#config_hash=" << hash << "\n";
  out << "k,residual_sq,dist_w_sq,dist_delta_sq,elapsed_ns\n";
  out << "#truncated\n";
}

std::string render_residual_svg(const Trace& trace) {
  std::vector<std::pair<double, double>> pts;
  for (const TraceRow& r : trace.rows)
    if (r.k >= 1 && r.residual_sq && *r.residual_sq > 0.0)
      pts.emplace_back(std::log10(static_cast<double>(r.k)), std::log10(*r.residual_sq));

  const int width = 640, height = 400, margin = 56;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (pts.size() < 2) {
    svg << "<text x=\"50%\" y=\"50%\" text-anchor=\"middle\">no residual data</text>\n</svg>\n";
    return svg.str();
  }
  double xmin = pts.front().first, xmax = xmin, ymin = pts.front().second, ymax = ymin;
  for (const auto& [x, y] : pts) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  auto px = [&](double x) {
    return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
  };
  auto py = [&](double y) {
    return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
  };
  char num[40];
  svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : pts) {
    std::snprintf(num, sizeof(num), "%.2f,%.2f ", px(x), py(y));
    svg << num;
  }
  svg << "\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  auto label = [&](double vx, double vy, const char* anchor, double value) {
    std::snprintf(num, sizeof(num), "%.3g", value);
    svg << "<text x=\"" << vx << "\" y=\"" << vy << "\" text-anchor=\"" << anchor
        << "\" font-size=\"12\">" << num << "</text>\n";
  };
  label(margin, height - margin + 16, "middle", xmin);
  label(width - margin, height - margin + 16, "middle", xmax);
  label(margin - 6, height - margin, "end", ymin);
  label(margin - 6, margin + 4, "end", ymax);
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">log10 k</text>\n";
  svg << "<text x=\"16\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " << height / 2
      << ")\">log10 residual_sq</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

namespace {

std::string out_path(const std::string& output_dir, const std::string& file) {
  fs::create_directories(output_dir);
  return (fs::path(output_dir) / file).string();
}

// Runs one configured solver; on failure a header-only CSV with the truncated
// marker is left behind.
Trace run_with_marker(const LoadedConfig& loaded, const std::string& csv_path,
                      const std::string& hash, const std::string& solver,
                      const MinimaxProblem& problem, const BilinearSpec* bilinear,
                      const SolverConfig& sc, const StartPair& start) {
  try {
    Trace trace = dispatch_solver(solver, problem, bilinear, loaded.file, sc, start);
    write_trace_csv(csv_path, trace, hash);
    return trace;
  } catch (const std::exception&) {
    write_truncated_csv(csv_path, sc.seed, hash);
    throw;
  }
}

void maybe_write_svg(const LoadedConfig& loaded, const std::string& output_dir,
                     const std::string& stem, const Trace& trace) {
  if (!loaded.file.get_bool("output", "svg", false)) return;
  std::ofstream out(out_path(output_dir, stem + ".svg"));
  if (!out) throw std::runtime_error("cannot write " + stem + ".svg");
  out << render_residual_svg(trace);
}

int run_solve(const LoadedConfig& loaded, const std::string& output_dir) {
  const std::string hash = config_hash(loaded.file);
  BilinearSpec bilinear;
  const MinimaxProblem problem = build_problem(loaded.file, &bilinear);
  const SolverConfig sc = build_solver_config(loaded.file);
  const std::string solver = loaded.file.get_string("solver", "solver", "ssihg");
  const StartPair start = start_points(loaded.file, problem);

  const std::string csv = out_path(output_dir, loaded.name + ".csv");
  const Trace trace = run_with_marker(loaded, csv, hash, solver, problem,
                                      bilinear.blocks.empty() ? nullptr : &bilinear, sc, start);
  maybe_write_svg(loaded, output_dir, loaded.name, trace);

  json j;
  j["name"] = loaded.name;
  j["kind"] = "solve";
  j["solver"] = trace.solver_name;
  j["seed"] = trace.seed;
  j["config_hash"] = hash;
  j["iterations"] = sc.iterations;
  const TraceRow& last = trace.rows.back();
  j["final_k"] = last.k;
  if (last.residual_sq) j["final_residual_sq"] = *last.residual_sq;
  if (last.dist_w_sq) j["final_dist_w_sq"] = *last.dist_w_sq;
  if (last.dist_delta_sq) j["final_dist_delta_sq"] = *last.dist_delta_sq;
  write_json(out_path(output_dir, loaded.name + ".json"), j);
  std::cout << loaded.name << ": wrote " << csv << "\n";
  return kExitOk;
}

int run_equivalence(const LoadedConfig& loaded, const std::string& output_dir) {
  const std::string hash = config_hash(loaded.file);
  BilinearSpec bilinear;
  const MinimaxProblem problem = build_problem(loaded.file, &bilinear);
  if (bilinear.blocks.empty())
    throw ConfigError("equivalence runs need a bilinear problem family");
  SolverConfig sc = build_solver_config(loaded.file);
  sc.record_iterates = true;
  const StartPair start = start_points(loaded.file, problem);

  const std::string csv_a = out_path(output_dir, loaded.name + "-ssihg.csv");
  const std::string csv_b = out_path(output_dir, loaded.name + "-spdhg.csv");
  const Trace a = run_with_marker(loaded, csv_a, hash, "ssihg", problem, &bilinear, sc, start);
  const Trace b = run_with_marker(loaded, csv_b, hash, "spdhg", problem, &bilinear, sc, start);
  const double gap = trajectory_gap(a, b);

  json j;
  j["name"] = loaded.name;
  j["kind"] = "equivalence";
  j["config_hash"] = hash;
  j["iterations"] = sc.iterations;
  j["max_gap"] = gap;
  write_json(out_path(output_dir, loaded.name + ".json"), j);
  std::cout << loaded.name << ": max trajectory gap " << fmt17(gap) << " over " << sc.iterations
            << " iterations\n";
  return kExitOk;
}

int run_budget(const LoadedConfig& loaded, const std::string& output_dir) {
  const std::string hash = config_hash(loaded.file);
  const MinimaxProblem problem = build_problem(loaded.file, nullptr);
  const SolverConfig sc = build_solver_config(loaded.file);
  const std::string solver = loaded.file.get_string("solver", "solver", "dsihg");
  const double rho = loaded.file.get_double("budget", "rho", 0.0);
  const StartPair start = start_points(loaded.file, problem);
  if (!problem.known_solution)
    throw ConfigError("budget runs need a problem family with a known solution");

  const std::string csv = out_path(output_dir, loaded.name + ".csv");
  const Trace trace =
      run_with_marker(loaded, csv, hash, solver, problem, nullptr, sc, start);
  maybe_write_svg(loaded, output_dir, loaded.name, trace);
  const BudgetCheck check = verify_step_budget(trace, *problem.known_solution, problem.lipschitz,
                                               problem.n, sc.sigma, sc.tau, rho);

  json j;
  j["name"] = loaded.name;
  j["kind"] = "budget";
  j["config_hash"] = hash;
  j["rho"] = rho;
  j["step_energy"] = check.lhs;
  j["budget"] = check.budget;
  j["coeff_w"] = check.coeff_w;
  j["coeff_delta"] = check.coeff_delta;
  j["holds"] = check.holds();
  write_json(out_path(output_dir, loaded.name + ".json"), j);
  std::cout << loaded.name << ": step energy " << fmt17(check.lhs) << " vs budget "
            << fmt17(check.budget) << (check.holds() ? " (holds)\n" : " (VIOLATED)\n");
  return kExitOk;
}

int run_rate(const LoadedConfig& loaded, const std::string& output_dir) {
  const std::string hash = config_hash(loaded.file);
  const MinimaxProblem problem = build_problem(loaded.file, nullptr);
  const SolverConfig sc = build_solver_config(loaded.file);
  const std::string solver = loaded.file.get_string("solver", "solver", "dsihg");
  const double mu = loaded.file.get_double("rate", "mu");
  RateWindow window;
  window.k_lo = static_cast<int>(loaded.file.get_long("rate", "k_lo", 100));
  window.k_hi = static_cast<int>(loaded.file.get_long("rate", "k_hi", sc.iterations));
  const StartPair start = start_points(loaded.file, problem);

  const std::string csv = out_path(output_dir, loaded.name + ".csv");
  const Trace trace =
      run_with_marker(loaded, csv, hash, solver, problem, nullptr, sc, start);
  maybe_write_svg(loaded, output_dir, loaded.name, trace);

  const double theta = validate_config(problem, sc, 0.0, mu).linear_theta;
  const RateFit fit = fit_rate(trace, RateMode::Linear, window);

  json j;
  j["name"] = loaded.name;
  j["kind"] = "rate";
  j["config_hash"] = hash;
  j["mu"] = mu;
  j["theta"] = theta;
  j["window"] = {window.k_lo, window.k_hi};
  j["ratio_overall"] = fit.ratio_overall;
  j["ratio_max"] = fit.ratio_max;
  j["points"] = fit.points;
  j["within_theta_band"] = fit.ratio_overall <= theta + 0.05;
  write_json(out_path(output_dir, loaded.name + ".json"), j);
  std::cout << loaded.name << ": fitted ratio " << fmt17(fit.ratio_overall) << " vs theta "
            << fmt17(theta) << "\n";
  return kExitOk;
}

int run_at(const LoadedConfig& loaded, const std::string& output_dir) {
  const std::string hash = config_hash(loaded.file);
  const double eps = loaded.file.get_double("at", "eps", 0.3);
  const AtConfig at = at_config_from(loaded.file);
  const ToyDataset data = dataset_from_config(loaded.file);
  const MlpShape net = shape_from_config(loaded.file);
  const std::vector<std::string> methods =
      split_words(loaded.file.get_string("at", "methods", "natural msihg"));
  if (methods.empty()) throw ConfigError("at.methods: empty method list");

  json j;
  j["name"] = loaded.name;
  j["kind"] = "at";
  j["config_hash"] = hash;
  j["eps"] = eps;
  json per_method = json::object();
  for (const std::string& m : methods) {
    const AtResult result = at_train(at_method_from_string(m), data, net, eps, at);
    const std::string curve_csv = out_path(output_dir, loaded.name + "-" + m + ".csv");
    write_curve_csv(curve_csv, result.curve, at.seed, hash);
    const std::string model = out_path(output_dir, loaded.name + "-" + m + ".bin");
    save_params(model, result.shape, result.params);
    const CurvePoint& last = result.curve.back();
    json row;
    row["natural_acc"] = last.natural_acc;
    row["robust_acc"] = last.robust_acc;
    row["train_loss"] = last.train_loss;
    row["curve_csv"] = curve_csv;
    row["model"] = model;
    per_method[m] = row;
    std::cout << loaded.name << " " << m << ": natural " << last.natural_acc << ", robust "
              << last.robust_acc << "\n";
  }
  j["methods"] = per_method;
  write_json(out_path(output_dir, loaded.name + ".json"), j);
  return kExitOk;
}

}  // namespace

int run_experiment(const std::string& config_arg, const std::string& output_dir) {
  try {
    const LoadedConfig loaded = load_config_or_preset(config_arg);
    const std::string kind = loaded.file.get_string("experiment", "kind", "solve");
    if (kind == "solve") return run_solve(loaded, output_dir);
    if (kind == "equivalence") return run_equivalence(loaded, output_dir);
    if (kind == "budget") return run_budget(loaded, output_dir);
    if (kind == "rate") return run_rate(loaded, output_dir);
    if (kind == "at") return run_at(loaded, output_dir);
    throw ConfigError("experiment.kind: unknown kind " + kind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int check_command(const std::string& kind, const std::string& config_arg) {
  try {
    const LoadedConfig loaded = load_config_or_preset(config_arg);
    const ConfigFile& cfg = loaded.file;
    if (kind == "admissibility") {
      const MinimaxProblem problem = build_problem(cfg, nullptr);
      const SolverConfig sc = build_solver_config(cfg);
      const double rho = cfg.get_double("check", "rho", 0.0);
      const double mu = cfg.get_double("check", "mu", 0.0);
      const AdmissibilityReport report = validate_config(problem, sc, rho, mu);
      const bool pass = report.sublinear_ok && (mu <= 0.0 || report.linear_ok);
      std::cout << "kappa = " << fmt17(report.kappa) << "\n";
      std::cout << "sublinear: " << (report.sublinear_ok ? "ok" : "violated")
                << " (w bound " << fmt17(report.sublinear_bound_w) << ", delta bound "
                << fmt17(report.sublinear_bound_delta) << ", rho_max "
                << fmt17(report.rho_max) << ")\n";
      if (mu > 0.0)
        std::cout << "linear: " << (report.linear_ok ? "ok" : "violated") << " (theta "
                  << fmt17(report.linear_theta) << ")\n";
      json j;
      j["check"] = "admissibility";
      j["kappa"] = report.kappa;
      j["sublinear_ok"] = report.sublinear_ok;
      j["rho_max"] = report.rho_max;
      if (mu > 0.0) {
        j["linear_ok"] = report.linear_ok;
        j["theta"] = report.linear_theta;
      }
      j["pass"] = pass;
      std::cout << j.dump() << "\n";
      return pass ? kExitOk : kExitCheckFailed;
    }
    if (kind == "mvi") {
      const MinimaxProblem problem = build_problem(cfg, nullptr);
      if (!problem.known_solution)
        throw ConfigError("mvi check needs a problem family with a known solution");
      const std::string which = cfg.get_string("check", "mvi", "weak");
      const MviKind mvi_kind = which == "strong" ? MviKind::Strong : MviKind::Weak;
      if (which != "strong" && which != "weak")
        throw ConfigError("check.mvi: expected weak or strong");
      const double parameter = mvi_kind == MviKind::Strong ? cfg.get_double("check", "mu")
                                                           : cfg.get_double("check", "rho");
      const double radius = cfg.get_double("check", "radius", 1.0);
      const std::string sampler_name = cfg.get_string("check", "sampler", "grid");
      if (sampler_name != "grid" && sampler_name != "uniform")
        throw ConfigError("check.sampler: expected grid or uniform");
      const MviSampler sampler =
          sampler_name == "grid" ? MviSampler::Grid : MviSampler::Uniform;
      const long samples = cfg.get_long("check", "samples", 4096);

      Vector center(problem.dim_w + problem.zero_delta().flat().size());
      center << problem.known_solution->w, problem.known_solution->delta.flat();
      MviDomain domain{Vector(center.array() - radius), Vector(center.array() + radius)};
      const MviReport report = check_mvi(problem, mvi_kind, parameter, domain, sampler, samples,
                                         Rng(cfg.get_u64("check", "seed", 0)));
      std::cout << "mvi " << which << " parameter " << fmt17(parameter) << ": "
                << (report.certified ? "certified" : "violated") << ", min margin "
                << fmt17(report.min_margin) << " over " << report.samples << " "
                << report.sampler << " samples\n";
      json j;
      j["check"] = "mvi";
      j["kind"] = which;
      j["parameter"] = parameter;
      j["certified"] = report.certified;
      j["min_margin"] = report.min_margin;
      j["samples"] = report.samples;
      j["sampler"] = report.sampler;
      j["pass"] = report.certified;
      std::cout << j.dump() << "\n";
      return report.certified ? kExitOk : kExitCheckFailed;
    }
    if (kind == "identities") {
      const int n = static_cast<int>(cfg.get_long("check", "n", 3));
      const Index block_dim = cfg.get_long("check", "block_dim", 2);
      const double tau = cfg.get_double("check", "tau", 0.7);
      const long trials = cfg.get_long("check", "trials", 10);
      Rng rng(cfg.get_u64("check", "seed", 0));
      bool all_ok = true;
      for (long t = 0; t < trials && all_ok; ++t) {
        const std::vector<Index> dims(static_cast<std::size_t>(n), block_dim);
        BlockVector delta_k(dims), delta_hat(dims), reference(dims);
        std::vector<Vector> centers;
        for (int i = 0; i < n; ++i) {
          for (Index d = 0; d < block_dim; ++d) {
            delta_k.block(i)[d] = rng.next_in(-1.0, 1.0);
            delta_hat.block(i)[d] = rng.next_in(-1.0, 1.0);
            reference.block(i)[d] = rng.next_in(-1.0, 1.0);
          }
          Vector c(block_dim);
          for (Index d = 0; d < block_dim; ++d) c[d] = rng.next_in(-1.0, 1.0);
          centers.push_back(std::move(c));
        }
        const SeparableBlockFn r = [&centers](int i, const Vector& v) {
          return (v - centers[static_cast<std::size_t>(i)]).squaredNorm();
        };
        all_ok = verify_expectation_identities(delta_k, delta_hat, r, reference, tau);
      }
      std::cout << "identities over " << trials << " random instances (n = " << n
                << "): " << (all_ok ? "pass" : "FAIL") << "\n";
      json j;
      j["check"] = "identities";
      j["n"] = n;
      j["trials"] = trials;
      j["pass"] = all_ok;
      std::cout << j.dump() << "\n";
      return all_ok ? kExitOk : kExitCheckFailed;
    }
    throw ConfigError("check: unknown subcommand " + kind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int at_train_command(const std::string& config_arg, const std::string& output_dir) {
  try {
    const LoadedConfig loaded = load_config_or_preset(config_arg);
    const std::string hash = config_hash(loaded.file);
    const double eps = loaded.file.get_double("at", "eps", 0.3);
    const AtConfig at = at_config_from(loaded.file);
    const AtMethod method =
        at_method_from_string(loaded.file.get_string("at", "method", "msihg"));
    const ToyDataset data = dataset_from_config(loaded.file);
    const MlpShape net = shape_from_config(loaded.file);

    const AtResult result = at_train(method, data, net, eps, at);
    const std::string stem = loaded.name + "-" + result.method;
    const std::string model = out_path(output_dir, stem + ".bin");
    save_params(model, result.shape, result.params);
    write_curve_csv(out_path(output_dir, stem + ".csv"), result.curve, at.seed, hash);

    const CurvePoint& last = result.curve.back();
    json j;
    j["method"] = result.method;
    j["natural_acc"] = last.natural_acc;
    j["robust_acc"] = last.robust_acc;
    j["train_loss"] = last.train_loss;
    j["model"] = model;
    std::cout << j.dump() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int at_eval_command(const std::string& model_path, const std::string& config_arg) {
  try {
    const LoadedConfig loaded = load_config_or_preset(config_arg);
    const auto [shape, params] = load_params(model_path);
    const ToyDataset data = dataset_from_config(loaded.file);
    const AttackConfig attack =
        attack_from_config(loaded.file, loaded.file.get_double("at", "eps", 0.3));
    const EvalResult ev = evaluate(shape, params, data, attack);
    std::cout << attack.name() << ": natural " << fmt17(ev.natural_acc) << ", robust "
              << fmt17(ev.robust_acc) << "\n";
    json j;
    j["attack"] = attack.name();
    j["natural_acc"] = ev.natural_acc;
    j["robust_acc"] = ev.robust_acc;
    std::cout << j.dump() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace sihg
