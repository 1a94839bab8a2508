// mirfs: simulate, evaluate, fit, check and diagnose finite-state
// Markov-switching models from a JSON model file.
//
// Exit codes: 0 success, 1 check failure, 2 usage/config, 3 model/domain,
// 4 numeric.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <mirfs/mirfs.hpp>

namespace {

using namespace mirfs;

enum Exit { ok = 0, check_failed = 1, config_error = 2, domain_error = 3, numeric_error = 4 };

struct RunConfig {
  std::string model_file;
  std::string data_file;
  std::string theta;
  std::string inits;
  std::string out;
  std::string increments;
  std::string trace;
  std::string grid;
  std::string format = "json";
  unsigned order = 2;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  double tol = 1e-8;
  std::size_t max_iter = 100;
  std::size_t replications = 20;
  unsigned threads = 0;
  int profile = -1;
  double inject_fault = 1.0;
};

std::vector<double> parse_list(const std::string& text, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, sep)) {
    if (cell.find_first_not_of(" \t") == std::string::npos) continue;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    while (end && (*end == ' ' || *end == '\t')) ++end;
    if (end == cell.c_str() || *end != '\0') throw ConfigError("cannot parse number '" + cell + "'");
    out.push_back(v);
  }
  return out;
}

/// "a,b,c" or "start:stop:step".
std::vector<double> parse_grid(const std::string& text) {
  if (text.find(':') == std::string::npos) return parse_list(text);
  const auto parts = parse_list(text, ':');
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
    throw ConfigError("grid range must be start:stop:step with step > 0");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (std::size_t i = 0; i <= count; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  return out;
}

Vector theta_from_json(const Json& j, const Model& model) {
  const std::size_t q = model.num_params();
  Vector v(static_cast<Eigen::Index>(q));
  if (j.is_array()) {
    if (j.size() != q) throw ConfigError("theta has " + std::to_string(j.size()) + " values, model has q = " + std::to_string(q));
    for (std::size_t i = 0; i < q; ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
  }
  if (j.is_object()) {
    for (std::size_t i = 0; i < q; ++i) {
      const std::string& name = model.param_names()[i];
      if (!j.contains(name)) throw ConfigError("theta file lacks parameter '" + name + "'");
      v(static_cast<Eigen::Index>(i)) = j.at(name).get<double>();
    }
    if (j.size() != q) throw ConfigError("theta file has unknown parameter names");
    return v;
  }
  throw ConfigError("theta JSON must be an array or an object of name: value");
}

/// Inline comma-separated values, or a JSON file holding an array or an
/// object keyed by parameter name. Empty means the values in the model file.
ParameterVector resolve_theta(const std::string& text, const BuiltinModel& model) {
  if (text.empty()) return model.default_parameters();
  if (std::filesystem::is_regular_file(text)) {
    std::ifstream in(text);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ConfigError("invalid theta file '" + text + "': " + e.what());
    }
    return model.parameters(theta_from_json(j, model));
  }
  const auto values = parse_list(text);
  if (values.size() != model.num_params())
    throw ConfigError("theta has " + std::to_string(values.size()) + " values, model has q = " +
                      std::to_string(model.num_params()));
  return model.parameters(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

std::vector<ParameterVector> resolve_inits(const RunConfig& cfg, const BuiltinModel& model) {
  std::vector<ParameterVector> out;
  if (cfg.inits.empty()) {
    out.push_back(resolve_theta(cfg.theta, model));
    return out;
  }
  if (std::filesystem::is_regular_file(cfg.inits)) {
    std::ifstream in(cfg.inits);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ConfigError("invalid inits file '" + cfg.inits + "': " + e.what());
    }
    if (!j.is_array()) throw ConfigError("inits file must hold an array of starting points");
    for (const auto& e : j) out.push_back(model.parameters(theta_from_json(e, model)));
    return out;
  }
  std::stringstream ss(cfg.inits);
  std::string block;
  while (std::getline(ss, block, ';')) out.push_back(resolve_theta(block, model));
  if (out.empty()) throw ConfigError("no starting points in --inits");
  return out;
}

void flatten(const Json& j, const std::string& prefix, std::ostream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
  } else {
    out << prefix << "," << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
  }
}

void emit(const Json& j, const RunConfig& cfg) {
  std::ostringstream os;
  if (cfg.format == "csv") {
    os << "key,value\n";
    flatten(j, "", os);
  } else {
    os << j.dump(2) << "\n";
  }
  if (cfg.out.empty() || cfg.out == "-") {
    std::cout << os.str();
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + cfg.out + "'");
  f << os.str();
}

template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  writer(f);
}

std::ostream& summary(const RunConfig& cfg) {
  return (cfg.out.empty() || cfg.out == "-") ? std::cerr : std::cout;
}

void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

int cmd_simulate(const RunConfig& cfg) {
  require(!cfg.model_file.empty(), "simulate needs --model");
  require(cfg.n >= 1, "simulate needs --n >= 1");
  const auto model = load_model(cfg.model_file);
  const ParameterVector theta = resolve_theta(cfg.theta, *model);
  const SimulatedPath path = simulate(*model, theta, cfg.n, cfg.seed);
  if (cfg.out.empty() || cfg.out == "-") {
    write_path(std::cout, path);
  } else {
    write_file(cfg.out, [&](std::ostream& f) { write_path(f, path); });
  }
  summary(cfg) << "simulated n=" << cfg.n << " D=" << model->num_states() << " seed=" << cfg.seed
               << "\n";
  return ok;
}

int cmd_eval(const RunConfig& cfg) {
  require(!cfg.model_file.empty(), "eval needs --model");
  require(!cfg.data_file.empty(), "eval needs --data");
  require(cfg.order <= 2, "--order must be 0, 1 or 2");
  const auto model = load_model(cfg.model_file);
  const ParameterVector theta = resolve_theta(cfg.theta, *model);
  const ObservationSequence data = read_observations(cfg.data_file);
  EvalOptions options;
  options.record_increments = !cfg.increments.empty();
  const EvalReport report = evaluate(*model, theta, data, cfg.order, options);
  Json j = to_json(report);
  j["parameter_names"] = model->param_names();
  j["theta"] = detail::to_json(theta.values);
  emit(j, cfg);
  if (report.increments)
    write_file(cfg.increments, [&](std::ostream& f) {
      write_increments(f, *report.increments, report.order, model->num_params());
    });
  return ok;
}

int cmd_fit(const RunConfig& cfg) {
  require(!cfg.model_file.empty(), "fit needs --model");
  require(!cfg.data_file.empty(), "fit needs --data");
  const auto model = load_model(cfg.model_file);
  const ObservationSequence data = read_observations(cfg.data_file);
  const std::vector<ParameterVector> inits = resolve_inits(cfg, *model);
  for (const auto& init : inits) {
    try {
      check_admissible(*model, init);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("initial value rejected: ") + e.what());
    }
  }
  FitOptions options;
  options.tol = cfg.tol;
  options.max_iter = cfg.max_iter;

  std::optional<FitResult> best;
  std::size_t best_index = 0;
  Json starts = Json::array();
  for (std::size_t i = 0; i < inits.size(); ++i) {
    FitResult r = fit(*model, data, inits[i], options);
    starts.push_back({{"init", detail::to_json(inits[i].values)},
                      {"loglik", r.loglik},
                      {"converged", r.converged}});
    const bool better = !best || (r.converged && !best->converged) ||
                        (r.converged == best->converged && r.loglik > best->loglik);
    if (better) {
      best = std::move(r);
      best_index = i;
    }
  }
  Json j = to_json(*best);
  j["n_obs"] = data.size();
  j["best_start"] = best_index;
  j["starts"] = starts;
  if (cfg.profile >= 0) {
    require(static_cast<std::size_t>(cfg.profile) < model->num_params(), "--profile coordinate out of range");
    require(!cfg.grid.empty(), "--profile needs --grid");
    const auto grid = parse_grid(cfg.grid);
    const auto prof = profile_loglik(*model, data, static_cast<std::size_t>(cfg.profile), grid,
                                     best->theta_hat, options);
    Json p = Json::array();
    for (const auto& [v, ll] : prof) p.push_back({{"value", v}, {"loglik", ll}});
    j["profile"] = {{"coordinate", model->param_names()[static_cast<std::size_t>(cfg.profile)]},
                    {"points", p}};
  }
  emit(j, cfg);
  if (!cfg.trace.empty()) write_file(cfg.trace, [&](std::ostream& f) { write_trace(f, *best); });
  summary(cfg) << "fit " << (best->converged ? "converged" : "did not converge") << " ("
               << best->reason << ") after " << best->iterations << " iterations\n";
  return ok;
}

int cmd_check(const RunConfig& cfg) {
  require(!cfg.model_file.empty(), "check needs --model");
  require(cfg.order <= 2, "--order must be 0, 1 or 2");
  const auto base = load_model(cfg.model_file);
  const ParameterVector theta = resolve_theta(cfg.theta, *base);
  ModelPtr model = base;
  if (cfg.inject_fault != 1.0) model = std::make_shared<CorruptedDerivativeModel>(base, cfg.inject_fault);
  std::optional<ObservationSequence> data;
  if (!cfg.data_file.empty()) data = read_observations(cfg.data_file);
  CheckOptions options;
  options.seed = cfg.seed;
  const CheckReport report = run_checks(*model, theta, cfg.order, data, options);

  std::ostream& table = summary(cfg);
  table << std::left << std::setw(24) << "check" << std::setw(14) << "|core-oracle|"
        << std::setw(12) << "tolerance" << "status\n";
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    std::ostringstream d, t;
    d << std::setprecision(3) << std::scientific << r.discrepancy;
    t << std::setprecision(1) << std::scientific << r.tolerance;
    const char* status = r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL");
    table << std::setw(24) << r.name << std::setw(14) << d.str() << std::setw(12) << t.str()
          << status << (r.note.empty() ? "" : "  (" + r.note + ")") << "\n";
    rows.push_back({{"name", r.name},
                    {"discrepancy", r.discrepancy},
                    {"tolerance", r.tolerance},
                    {"passed", r.passed},
                    {"skipped", r.skipped},
                    {"note", r.note}});
  }
  if (!cfg.out.empty() && cfg.out != "-") {
    Json j = {{"order", report.order}, {"passed", report.passed()}, {"checks", rows}};
    emit(j, cfg);
  }
  if (!report.passed()) {
    std::cerr << "check failed:";
    for (const auto& name : report.failures()) std::cerr << " " << name;
    std::cerr << "\n";
    return check_failed;
  }
  return ok;
}

int cmd_diagnose(const RunConfig& cfg) {
  require(!cfg.model_file.empty(), "diagnose needs --model");
  require(!cfg.grid.empty(), "diagnose needs --grid with the path lengths");
  const auto model = load_model(cfg.model_file);
  const ParameterVector theta = resolve_theta(cfg.theta, *model);
  std::vector<std::size_t> n_grid;
  for (double v : parse_grid(cfg.grid)) {
    require(v >= 1.0 && v == std::floor(v), "grid lengths must be positive integers");
    n_grid.push_back(static_cast<std::size_t>(v));
  }
  const ErgodicReport report =
      ergodic_diagnostics(*model, theta, n_grid, cfg.replications, cfg.seed, cfg.threads);
  emit(to_json(report), cfg);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact likelihood, score and observed information for Markov-switching models"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model_file, "Model file (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--theta", cfg.theta, "Parameter values: comma list or JSON file (default: values in the model file)");
    sub->add_option("--out", cfg.out, "Output file (default: stdout)");
  };
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", cfg.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  };

  auto* sim = app.add_subcommand("simulate", "Simulate a hidden path and observations to CSV");
  add_model(sim);
  sim->add_option("--n", cfg.n, "Number of observations")->required();
  sim->add_option("--seed", cfg.seed, "Random seed");

  auto* eval = app.add_subcommand("eval", "Log-likelihood, score and observed information");
  add_model(eval);
  add_format(eval);
  eval->add_option("--data", cfg.data_file, "Observations (CSV)")->check(CLI::ExistingFile);
  eval->add_option("--order", cfg.order, "Derivative order 0, 1 or 2");
  eval->add_option("--increments", cfg.increments, "Write per-step increments to this CSV");

  auto* fitc = app.add_subcommand("fit", "Maximum-likelihood fit by Newton-Raphson");
  add_model(fitc);
  add_format(fitc);
  fitc->add_option("--data", cfg.data_file, "Observations (CSV)")->check(CLI::ExistingFile);
  fitc->add_option("--inits", cfg.inits, "Starting points: 'a,b;c,d' or JSON file");
  fitc->add_option("--tol", cfg.tol, "Tolerance on |score|/n");
  fitc->add_option("--max-iter", cfg.max_iter, "Maximum Newton iterations");
  fitc->add_option("--trace", cfg.trace, "Write the iteration trace to this CSV");
  fitc->add_option("--profile", cfg.profile, "Profile the log-likelihood over this coordinate (0-based)");
  fitc->add_option("--grid", cfg.grid, "Profile grid: 'a,b,c' or 'start:stop:step'");

  auto* chk = app.add_subcommand("check", "Compare the core against brute-force oracles");
  add_model(chk);
  chk->add_option("--data", cfg.data_file, "Observations (CSV); simulated when absent")->check(CLI::ExistingFile);
  chk->add_option("--order", cfg.order, "Highest derivative order to check");
  chk->add_option("--seed", cfg.seed, "Seed for simulated cases");
  chk->add_option("--inject-fault", cfg.inject_fault, "Scale first-order emission derivatives by this factor");

  auto* diag = app.add_subcommand("diagnose", "Monte-Carlo probes of score and information growth");
  add_model(diag);
  add_format(diag);
  diag->add_option("--grid", cfg.grid, "Path lengths: 'n1,n2,...'");
  diag->add_option("--replications", cfg.replications, "Replications per length");
  diag->add_option("--seed", cfg.seed, "Master seed");
  diag->add_option("--threads", cfg.threads, "Worker threads (0: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (sim->parsed()) return cmd_simulate(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (fitc->parsed()) return cmd_fit(cfg);
    if (chk->parsed()) return cmd_check(cfg);
    if (diag->parsed()) return cmd_diagnose(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const DomainError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return domain_error;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return numeric_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return numeric_error;
  }
  return config_error;
}
