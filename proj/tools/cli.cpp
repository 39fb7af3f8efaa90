#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "cpkl/driver.hpp"
#include "cpkl/eval.hpp"
#include "cpkl/io.hpp"
#include "cpkl/rng.hpp"
#include "cpkl/synth.hpp"

namespace cpkl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config schema helpers

void check_keys(const json& j, const std::set<std::string>& allowed, const std::set<std::string>& required,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  for (const auto& key : required)
    if (!j.contains(key)) throw ConfigError(where + ": missing required field '" + key + "'");
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> get_opt(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_as<T>(j, key, where);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

const std::set<std::string> kGenKeys = {"dims",        "R",    "S", "boost_fraction", "boost_scale", "small_value",
                                        "collinearity_alpha", "seed"};
const std::set<std::string> kSolverKeys = {"tau", "mu0", "sigma", "beta", "epsilon", "k_max", "lbfgs_memory",
                                           "max_backtracks", "persist_lbfgs"};
const std::set<std::string> kFitKeys = {"method", "R", "tau", "outer_max", "time_limit", "seed", "workers",
                                        "mode1_only", "solver", "mu"};
const std::set<std::string> kBenchKeys = {"dims", "S", "ranks", "seeds", "methods", "tau", "outer_max", "time_limit",
                                          "workers", "boost_fraction", "boost_scale", "small_value",
                                          "collinearity_alpha", "solver", "mu"};

GenConfig gen_config_from_json(const json& j, const std::string& where) {
  GenConfig g;
  auto dims = get_as<std::vector<Index>>(j, "dims", where);
  try {
    g.dims = Shape(std::move(dims));
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (j.contains("R")) g.rank = get_as<Index>(j, "R", where);
  g.samples = get_as<std::int64_t>(j, "S", where);
  if (auto v = get_opt<double>(j, "boost_fraction", where)) g.boost_fraction = *v;
  if (auto v = get_opt<double>(j, "boost_scale", where)) g.boost_scale = *v;
  if (auto v = get_opt<double>(j, "small_value", where)) g.small_value = *v;
  g.collinearity_alpha = get_opt<double>(j, "collinearity_alpha", where);
  if (auto v = get_opt<std::uint64_t>(j, "seed", where)) g.seed = *v;
  try {
    g.validate();
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return g;
}

/// Solver defaults follow the method; explicit fields override them.
SolverParams solver_from_json(const json& j, Method method, const std::string& where) {
  SolverParams s = method == Method::PQNR ? SolverParams::pqnr() : SolverParams::pdnr();
  if (j.is_null()) return s;
  check_keys(j, kSolverKeys, {}, where);
  if (auto v = get_opt<double>(j, "tau", where)) s.tau = *v;
  if (auto v = get_opt<double>(j, "mu0", where)) s.mu0 = *v;
  if (auto v = get_opt<double>(j, "sigma", where)) s.sigma = *v;
  if (auto v = get_opt<double>(j, "beta", where)) s.beta = *v;
  if (auto v = get_opt<double>(j, "epsilon", where)) s.epsilon = *v;
  if (auto v = get_opt<int>(j, "k_max", where)) s.k_max = *v;
  if (auto v = get_opt<int>(j, "lbfgs_memory", where)) s.lbfgs_memory = *v;
  if (auto v = get_opt<int>(j, "max_backtracks", where)) s.max_backtracks = *v;
  if (auto v = get_opt<bool>(j, "persist_lbfgs", where)) s.persist_lbfgs = *v;
  return s;
}

MuParams mu_from_json(const json& j, const std::string& where) {
  MuParams m;
  if (j.is_null()) return m;
  check_keys(j, {"inner_iterations"}, {}, where);
  if (auto v = get_opt<int>(j, "inner_iterations", where)) m.inner_iterations = *v;
  return m;
}

// ---------------------------------------------------------------------------
// Output helpers

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, std::uint64_t seed) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["rng"] = CounterRng::kName;
  m["seed"] = seed;
  m["config_hash"] = config_hash(config);
  m["config"] = config;
  write_json(dir / "manifest.json", m);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Commands

struct GenerateArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  json cfg = read_json_file(a.config);
  check_keys(cfg, kGenKeys, {"dims", "R", "S"}, a.config);
  if (a.seed) cfg["seed"] = *a.seed;
  const GenConfig g = gen_config_from_json(cfg, a.config);

  const SampledTensor data = generate(g);
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  write_coo(dir / "tensor.coo", data.tensor);
  save_model(dir / "truth.json", data.model);
  write_manifest(dir, "generate", cfg, g.seed);
  out << "nnz=" << data.tensor.nnz() << " total=" << total_count(data.tensor) << " density=" << density(data.tensor)
      << '\n';
  return kOk;
}

struct FactorizeArgs {
  std::string tensor;
  std::string config;
  std::string out_dir;
  std::optional<std::string> method;
  std::optional<Index> rank;
  std::optional<double> tau;
  std::optional<int> outer_max;
  std::optional<double> time_limit;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string init;
  bool mode1_only = false;
  bool strict = false;
};

int cmd_factorize(const FactorizeArgs& a, std::ostream& out) {
  json cfg = a.config.empty() ? json::object() : read_json_file(a.config);
  const std::string where = a.config.empty() ? "factorize" : a.config;
  check_keys(cfg, kFitKeys, {}, where);
  if (a.method) cfg["method"] = *a.method;
  if (a.rank) cfg["R"] = *a.rank;
  if (a.tau) cfg["tau"] = *a.tau;
  if (a.outer_max) cfg["outer_max"] = *a.outer_max;
  if (a.time_limit) cfg["time_limit"] = *a.time_limit;
  if (a.seed) cfg["seed"] = *a.seed;
  if (a.workers) cfg["workers"] = *a.workers;
  if (a.mode1_only) cfg["mode1_only"] = true;
  if (!cfg.contains("R")) throw ConfigError(where + ": rank missing (set 'R' or pass --rank)");

  FitConfig fc;
  try {
    fc.method = parse_method(cfg.value("method", std::string("pdnr")));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  fc.rank = get_as<Index>(cfg, "R", where);
  if (auto v = get_opt<double>(cfg, "tau", where)) fc.tau = *v;
  if (auto v = get_opt<int>(cfg, "outer_max", where)) fc.outer_max = *v;
  fc.time_limit = get_opt<double>(cfg, "time_limit", where);
  if (auto v = get_opt<std::uint64_t>(cfg, "seed", where)) fc.seed = *v;
  if (auto v = get_opt<int>(cfg, "workers", where)) fc.workers = *v;
  if (get_opt<bool>(cfg, "mode1_only", where).value_or(false)) fc.modes = {0};
  fc.solver = solver_from_json(cfg.value("solver", json()), fc.method, where + ".solver");
  fc.mu = mu_from_json(cfg.value("mu", json()), where + ".mu");
  try {
    fc.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  const SparseCountTensor tensor = read_coo(fs::path(a.tensor));
  KruskalModel initial = init_model(tensor.shape(), fc.rank, fc.seed);
  if (!a.init.empty()) {
    // Start from the given model; swept modes restricted by --mode1-only get a
    // fresh random factor and unit weights, the other factors are held.
    KruskalModel given = load_model(fs::path(a.init));
    if (!(given.shape() == tensor.shape()) || given.rank() != fc.rank)
      throw ConfigError("--init model does not match tensor shape and rank");
    if (!fc.modes.empty()) {
      for (Index n : fc.modes) given.factors[static_cast<std::size_t>(n)] = initial.factors[static_cast<std::size_t>(n)];
      given.lambda.setOnes();
    }
    initial = std::move(given);
  }

  const FitResult res = fit(tensor, fc, std::move(initial));
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  save_model(dir / "model.json", res.model);
  write_trace_csv(dir / "trace.csv", res.trace);
  write_manifest(dir, "factorize", cfg, fc.seed);
  const auto& last = res.trace.rows.back();
  out << "method=" << to_string(fc.method) << " converged=" << (res.converged ? "true" : "false")
      << " outer=" << last.outer << " kkt=" << res.final_kkt << " objective=" << fmt_double(last.objective)
      << " exact_zeros=" << last.exact_zeros << " seconds=" << last.seconds << '\n';
  return (a.strict && !res.converged) ? kNotConverged : kOk;
}

struct EvaluateArgs {
  std::string model;
  std::string truth;
  std::string tensor;
  std::string out;
};

json evaluate_report(const KruskalModel& model, const KruskalModel* truth, const SparseCountTensor* tensor) {
  json r;
  if (truth) {
    const ScoreReport s = score_greedy(model, *truth);
    r["score"] = s.score;
    r["permutation"] = s.permutation;
    r["per_component"] = s.per_component;
  }
  const ZeroCounts z = exact_zero_count(model);
  r["zeros"]["exact_total"] = z.total;
  r["zeros"]["exact_per_factor"] = z.per_factor;
  auto th = json::array();
  for (const auto& [t, c] : z.below_threshold) th.push_back({{"threshold", t}, {"count", c}});
  r["zeros"]["thresholded"] = th;
  if (tensor) {
    const KktReport k = full_kkt_violation(*tensor, model);
    r["kkt"]["per_mode"] = k.per_mode;
    r["kkt"]["global"] = k.global;
    r["objective"] = kl_objective(model, *tensor);
  }
  return r;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const KruskalModel model = load_model(fs::path(a.model));
  std::optional<KruskalModel> truth;
  std::optional<SparseCountTensor> tensor;
  if (!a.truth.empty()) truth = load_model(fs::path(a.truth));
  if (!a.tensor.empty()) tensor = read_coo(fs::path(a.tensor));
  const json report = evaluate_report(model, truth ? &*truth : nullptr, tensor ? &*tensor : nullptr);
  if (a.out.empty())
    out << report.dump(2) << '\n';
  else
    write_json(fs::path(a.out), report);
  return kOk;
}

struct BenchArgs {
  std::string config;
  std::string out_dir;
  std::optional<int> workers;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  json cfg = read_json_file(a.config);
  check_keys(cfg, kBenchKeys, {"dims", "S", "ranks", "seeds"}, a.config);
  if (a.workers) cfg["workers"] = *a.workers;
  const auto ranks = get_as<std::vector<Index>>(cfg, "ranks", a.config);
  const auto seeds = get_as<std::vector<std::uint64_t>>(cfg, "seeds", a.config);
  std::vector<Method> methods;
  try {
    for (const auto& m : cfg.value("methods", std::vector<std::string>{"pdnr", "pqnr", "mu"})) methods.push_back(parse_method(m));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  } catch (const json::exception&) {
    throw ConfigError(a.config + ": field 'methods' has the wrong type");
  }
  if (ranks.empty() || seeds.empty() || methods.empty()) throw ConfigError(a.config + ": ranks, seeds and methods must be nonempty");

  json gen_json = json::object();
  for (const auto& key : kGenKeys)
    if (cfg.contains(key)) gen_json[key] = cfg[key];

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  std::ofstream csv(dir / "bench.csv");
  if (!csv) throw ConfigError("cannot write bench.csv");
  csv << "method,R,seed,time_to_tau,final_objective,zeros,converged,outer\n";
  Index rows = 0;
  for (Index R : ranks) {
    for (std::uint64_t seed : seeds) {
      gen_json["R"] = R;
      gen_json["seed"] = seed;
      const GenConfig g = gen_config_from_json(gen_json, a.config);
      const SampledTensor data = generate(g);
      for (Method m : methods) {
        FitConfig fc;
        fc.method = m;
        fc.rank = R;
        fc.seed = seed;
        if (auto v = get_opt<double>(cfg, "tau", a.config)) fc.tau = *v;
        if (auto v = get_opt<int>(cfg, "outer_max", a.config)) fc.outer_max = *v;
        fc.time_limit = get_opt<double>(cfg, "time_limit", a.config);
        if (auto v = get_opt<int>(cfg, "workers", a.config)) fc.workers = *v;
        fc.solver = solver_from_json(cfg.value("solver", json()), m, a.config + ".solver");
        fc.mu = mu_from_json(cfg.value("mu", json()), a.config + ".mu");
        try {
          fc.validate();
        } catch (const Error& e) {
          throw ConfigError(e.what());
        }
        const FitResult res = fit(data.tensor, fc);
        double time_to_tau = std::nan("");
        for (const auto& row : res.trace.rows)
          if (row.kkt_max <= fc.tau) {
            time_to_tau = row.seconds;
            break;
          }
        const auto& last = res.trace.rows.back();
        csv << to_string(m) << ',' << R << ',' << seed << ',' << fmt_double(time_to_tau) << ','
            << fmt_double(last.objective) << ',' << last.exact_zeros << ',' << (res.converged ? 1 : 0) << ','
            << last.outer << '\n';
        ++rows;
      }
    }
  }
  write_manifest(dir, "bench", cfg, 0);
  out << "rows=" << rows << '\n';
  return kOk;
}

}  // namespace

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse Poisson CP factorization with row-subproblem Newton solvers", "cpkl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic Poisson count tensor and its true model");
  g->add_option("--config", gen.config, "Generator config JSON")->required();
  g->add_option("--out", gen.out_dir, "Output directory")->required();
  g->add_option("--seed", gen.seed, "Override the config seed");

  FactorizeArgs fa;
  auto* f = app.add_subcommand("factorize", "Fit a CP model to a COO tensor");
  f->add_option("--tensor", fa.tensor, "COO tensor file")->required();
  f->add_option("--config", fa.config, "Fit config JSON");
  f->add_option("--out", fa.out_dir, "Output directory")->required();
  f->add_option("--method", fa.method, "pdnr, pqnr or mu")->check(CLI::IsMember({"pdnr", "pqnr", "mu"}));
  f->add_option("--rank", fa.rank, "Number of components R");
  f->add_option("--tau", fa.tau, "Global KKT tolerance");
  f->add_option("--outer-max", fa.outer_max, "Maximum outer iterations");
  f->add_option("--time-limit", fa.time_limit, "Wall-clock limit in seconds");
  f->add_option("--seed", fa.seed, "Initialization seed");
  f->add_option("--workers", fa.workers, "Row-solve threads");
  f->add_option("--init", fa.init, "Initial model JSON");
  f->add_flag("--mode1-only", fa.mode1_only, "Sweep only mode 1");
  f->add_flag("--strict", fa.strict, "Exit with status 1 when not converged");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a model against a true model and/or a tensor");
  e->add_option("--model", ev.model, "Model JSON")->required();
  e->add_option("--truth", ev.truth, "True model JSON");
  e->add_option("--tensor", ev.tensor, "COO tensor file");
  e->add_option("--out", ev.out, "Report path (stdout when omitted)");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Sweep methods, ranks and seeds on synthetic data");
  b->add_option("--config", be.config, "Bench config JSON")->required();
  b->add_option("--out", be.out_dir, "Output directory")->required();
  b->add_option("--workers", be.workers, "Row-solve threads");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << "usage error: " << pe.what() << '\n' << app.help();
    return kUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out);
    if (f->parsed()) return cmd_factorize(fa, out);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (b->parsed()) return cmd_bench(be, out);
  } catch (const ConfigError& ce) {
    err << "config error: " << ce.what() << '\n';
    return kUsage;
  } catch (const Error& ce) {
    err << "error: " << ce.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace cpkl::cli
