// Command-line front end: gen-data, train, evaluate, predict, export-field,
// verify-theory.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "jacest/jacest.hpp"

namespace {

using namespace jacest;
using ojson = nlohmann::ordered_json;

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (auto field : split_commas(s)) {
    if (field.empty()) continue;
    if (field == "inf") {
      out.push_back(kInfinity);
    } else {
      out.push_back(parse_double(field));
    }
  }
  return out;
}

double parse_radius(const std::string& s) {
  if (s == "inf" || s == "infinity") return kInfinity;
  const double r = parse_double(s);
  if (!(r > 0)) throw InvalidArgument("r_max must be positive or 'inf'");
  return r;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

/// Writes `text` to `path`, or to stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << text;
}

std::string json_text(const ojson& j) { return j.dump(2) + "\n"; }

// ---- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string function;
  long long n = 10000;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  std::string out;
};

void cmd_gen_data(const GenDataArgs& a) {
  if (a.n < 1) throw InvalidArgument("n must be at least 1");
  const auto& f = find_function(a.function);
  SampleSet s;
  s.inputs = sample_domain(f.name, a.n, a.seed);
  s.outputs = f.evaluate_all(s.inputs);
  // Noise uses its own stream so the inputs do not depend on sigma.
  s.outputs = add_noise(s.outputs, NoiseSpec{a.noise_sigma, a.seed ^ 0x9e3779b97f4a7c15ULL});
  std::ostringstream os;
  write_dataset(os, s);
  emit(a.out, os.str());
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config_file;
  std::string layers;
  int k_max = 0;
  std::string r_max;
  int batch_size = 0;
  int epochs = 0;
  double lr = 0;
  double max_w = 0;
  std::uint64_t seed = 0;
  std::string out;
  bool quiet = false;
};

EstimatorConfig load_config_file(const std::string& path) {
  const auto j = ojson::parse(read_file(path));
  // A saved model carries its config echo under "config".
  const ojson& cfg = j.contains("format") && j.contains("config") ? j.at("config") : j;
  EstimatorConfig c;
  if (cfg.contains("layers")) c.layers = cfg.at("layers").get<std::vector<int>>();
  if (cfg.contains("k_max")) c.k_max = cfg.at("k_max").get<int>();
  if (cfg.contains("r_max")) c.r_max = radius_from_json(cfg.at("r_max"));
  if (cfg.contains("batch_size")) c.batch_size = cfg.at("batch_size").get<int>();
  if (cfg.contains("epochs")) c.epochs = cfg.at("epochs").get<int>();
  if (cfg.contains("lr")) c.lr = cfg.at("lr").get<double>();
  if (cfg.contains("max_w")) c.max_w = cfg.at("max_w").get<double>();
  if (cfg.contains("seed")) c.seed = cfg.at("seed").get<std::uint64_t>();
  return c;
}

void cmd_train(const TrainArgs& a, const CLI::App& app) {
  EstimatorConfig cfg = a.config_file.empty() ? EstimatorConfig{} : load_config_file(a.config_file);
  auto given = [&](const char* name) { return app.get_option(name)->count() > 0; };
  if (given("--layers")) {
    cfg.layers.clear();
    for (double v : parse_list(a.layers)) cfg.layers.push_back(int(v));
  }
  if (given("--k_max")) cfg.k_max = a.k_max;
  if (given("--r_max")) cfg.r_max = parse_radius(a.r_max);
  if (given("--batch_size")) cfg.batch_size = a.batch_size;
  if (given("--epochs")) cfg.epochs = a.epochs;
  if (given("--lr")) cfg.lr = a.lr;
  if (given("--max_w")) cfg.max_w = a.max_w;
  if (given("--seed")) cfg.seed = a.seed;

  const SampleSet s = load_dataset(a.data);
  cfg.d = int(s.inputs.rows());
  cfg.c = int(s.outputs.rows());
  const TrainedEstimator est = fit(s.inputs, s.outputs, cfg, a.quiet ? nullptr : &std::cerr);
  save_model(a.out, est);
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string mode = "oracle";
  std::string function;
  std::string validation;
  std::string deltas;
  long long samples = 1000000;
  std::uint64_t seed = 1;
  int k_max = 0;
  std::string r_max;
  std::string out;
};

void cmd_evaluate(const EvaluateArgs& a, const CLI::App& app) {
  const TrainedEstimator est = load_model(a.model);
  ojson reports = ojson::array();
  if (a.mode == "oracle") {
    if (a.function.empty()) throw InvalidArgument("oracle mode requires --function");
    const auto& f = find_function(a.function);
    if (f.d != est.domain_dim() || f.c != est.codomain_dim()) throw ShapeError("model and function dimensions differ");
    const auto deltas = parse_list(a.deltas.empty() ? "0,0.001,0.01,0.1" : a.deltas);
    const Eigen::MatrixXd S = sample_domain(f.name, a.samples, a.seed);
    const auto oracle = [&f](const Eigen::VectorXd& x) { return f.analytic_jacobian(x); };
    for (const auto& r : e_delta_sweep(est, oracle, S, deltas)) reports.push_back(report_to_json(r));
  } else if (a.mode == "star") {
    if (a.validation.empty()) throw InvalidArgument("star mode requires --validation");
    const SampleSet v = load_dataset(a.validation);
    if (v.inputs.rows() != est.domain_dim() || v.outputs.rows() != est.codomain_dim()) {
      throw ShapeError("model and validation dataset dimensions differ");
    }
    const int k = app.get_option("--k_max")->count() ? a.k_max : est.config.k_max;
    const double r = app.get_option("--r_max")->count() ? parse_radius(a.r_max) : est.config.r_max;
    const Eigen::MatrixXd jac = predict_jacobians_flat(est, v.inputs);
    for (double delta : parse_list(a.deltas.empty() ? "0.01" : a.deltas)) {
      reports.push_back(report_to_json(e_star_delta_from_jacobians(jac, v.inputs, v.outputs, delta, k, r)));
    }
  } else {
    throw InvalidArgument("mode must be 'oracle' or 'star'");
  }
  emit(a.out, json_text(reports));
}

// ---- predict ----------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string x;
  std::string data;
};

void cmd_predict(const PredictArgs& a) {
  const TrainedEstimator est = load_model(a.model);
  const Eigen::VectorXd x = to_vector(parse_list(a.x));
  const Eigen::MatrixXd J = predict_jacobian(est, x);
  ojson j;
  j["x"] = parse_list(a.x);
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < J.rows(); ++r) {
    std::vector<double> row(std::size_t(J.cols()));
    for (Eigen::Index k = 0; k < J.cols(); ++k) row[std::size_t(k)] = J(r, k);
    rows.push_back(row);
  }
  j["jacobian"] = rows;
  if (!a.data.empty()) {
    const SampleSet s = load_dataset(a.data);
    const Eigen::VectorXd y = predict_function(est, s, x);
    j["value"] = std::vector<double>(y.data(), y.data() + y.size());
  }
  std::cout << json_text(j);
}

// ---- export-field -----------------------------------------------------------

struct ExportArgs {
  std::string model;
  std::string function;
  std::string mode = "oracle";
  std::string grid = "20x20";
  std::string box;
  std::string out;
};

void cmd_export_field(const ExportArgs& a) {
  const auto& f = find_function(a.function);
  FieldGrid grid;
  grid.box = f.domain;
  if (!a.box.empty()) {
    const auto b = parse_list(a.box);
    if (b.size() != 2) throw InvalidArgument("--box expects 'lo,hi'");
    grid.box = Box::cube(f.d, b[0], b[1]);
  }
  std::string res = a.grid;
  for (char& ch : res)
    if (ch == 'x') ch = ',';
  for (double v : parse_list(res)) grid.resolution.push_back(int(v));
  if (grid.resolution.size() == 1) grid.resolution.assign(std::size_t(f.d), grid.resolution.front());
  // The exported box must sit inside the function's domain.
  for (int k = 0; k < f.d; ++k) {
    if (grid.box.lo[k] < f.domain.lo[k] || grid.box.hi[k] > f.domain.hi[k]) {
      throw DomainError("grid box lies outside the domain of " + f.name);
    }
  }
  const JacobianFn oracle = [&f](const Eigen::VectorXd& x) { return f.analytic_jacobian(x); };
  JacobianFn field;
  std::optional<TrainedEstimator> est;
  if (a.mode != "oracle") {
    if (a.model.empty()) throw InvalidArgument(a.mode + " mode requires --model");
    est = load_model(a.model);
    if (est->domain_dim() != f.d || est->codomain_dim() != f.c) throw ShapeError("model and function dimensions differ");
  }
  if (a.mode == "oracle") {
    field = oracle;
  } else if (a.mode == "estimate") {
    field = [&est](const Eigen::VectorXd& x) { return predict_jacobian(*est, x); };
  } else if (a.mode == "difference") {
    field = [&est, &oracle](const Eigen::VectorXd& x) -> Eigen::MatrixXd { return predict_jacobian(*est, x) - oracle(x); };
  } else {
    throw InvalidArgument("mode must be 'estimate', 'oracle' or 'difference'");
  }
  std::ostringstream os;
  write_field(os, export_vector_field(field, grid, f.c, &f.domain));
  emit(a.out, os.str());
}

// ---- verify-theory ----------------------------------------------------------

struct TheoryArgs {
  std::string model;
  std::string function;
  std::string data;
  double alpha = 0.5;
  long long probes = 10000;
  long long samples = 10000;
  std::uint64_t seed = 2;
  std::string out;
};

void cmd_verify_theory(const TheoryArgs& a) {
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw InvalidArgument("--alpha must lie in (0, 1)");
  if (a.probes < 1 || a.samples < 1) throw InvalidArgument("--probes and --samples must be positive");
  const TrainedEstimator est = load_model(a.model);
  const auto& f = find_function(a.function);
  const SampleSet s = load_dataset(a.data);
  if (f.d != est.domain_dim() || f.c != est.codomain_dim() || s.inputs.rows() != f.d || s.outputs.rows() != f.c) {
    throw ShapeError("model, function and dataset dimensions differ");
  }
  const auto& cfg = est.config;
  std::mt19937_64 rng(a.seed);

  const TrainingPairs D = build_pairs(s.inputs, s.outputs, cfg.k_max, cfg.r_max);
  const double residual_max = training_residual_max(est, D);
  const double density = epsilon_density(s.inputs, sample_box(f.domain, a.probes, rng));
  const double epsilon = std::max(residual_max, density);
  double radius = cfg.r_max;
  if (std::isinf(radius)) {
    radius = 0.0;
    for (Eigen::Index t = 0; t < Eigen::Index(D.size()); ++t) {
      radius = std::max(radius, (s.inputs.col(D.pairs[std::size_t(t)].j) - D.base.col(t)).norm());
    }
  }
  const double success = near_orthogonal_success_rate(s.inputs, cfg.k_max, radius, a.alpha);

  BoundInputs b;
  b.d = f.d;
  b.alpha = a.alpha;
  b.L_prime = lipschitz_upper_bound(est.net);
  b.epsilon = epsilon;
  if (epsilon > 0) b.R = radius / epsilon;
  std::string L_source = "unavailable";
  if (f.hessian_bound) {
    b.L = *f.hessian_bound;
    L_source = "closed_form";
  } else if (f.twice_differentiable) {
    b.L = sampled_hessian_bound(f, 100000, a.seed + 1);
    L_source = "sampled";
  }
  const auto oracle = [&f](const Eigen::VectorXd& x) { return f.analytic_jacobian(x); };
  const BoundCheckReport check = empirical_bound_check(est, oracle, b, sample_box(f.domain, a.samples, rng));

  ojson j;
  j["function"] = f.name;
  ojson constants;
  constants["L"] = *b.L;
  constants["L_source"] = L_source;
  constants["L_prime"] = *b.L_prime;
  constants["alpha"] = *b.alpha;
  constants["R"] = *b.R;
  constants["d"] = b.d;
  constants["C"] = check.constant;
  j["constants"] = constants;
  ojson measured;
  measured["pairs"] = D.size();
  measured["training_residual_max"] = residual_max;
  measured["epsilon_density"] = density;
  measured["epsilon"] = epsilon;
  measured["neighbor_radius"] = radius;
  measured["near_orthogonal_success_rate"] = success;
  measured["max_operator_error"] = check.max_operator_error;
  measured["C_epsilon"] = check.bound;
  j["measured"] = measured;
  ojson flags;
  flags["near_orthogonal_neighbors_all_found"] = success == 1.0;
  flags["bound_holds"] = check.holds;
  j["flags"] = flags;
  emit(a.out, json_text(j));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jacobian estimation from scattered samples"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Sample a bank function into a dataset file");
  g->add_option("--function", gen.function, "Function name (F0..F12, linear, quadratic, ...)")->required();
  g->add_option("--n", gen.n, "Number of samples");
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--noise_sigma", gen.noise_sigma, "Std. dev. of Gaussian output noise");
  g->add_option("--out", gen.out, "Output path (default stdout)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a Jacobian estimator on a dataset");
  t->add_option("--data", tr.data, "Dataset file")->required();
  t->add_option("--config", tr.config_file, "JSON config (or a saved model); flags override it");
  t->add_option("--layers", tr.layers, "Hidden widths, e.g. 100,100,50,20");
  t->add_option("--k_max", tr.k_max, "Neighbors per point");
  t->add_option("--r_max", tr.r_max, "Neighbor radius or 'inf'");
  t->add_option("--batch_size", tr.batch_size);
  t->add_option("--epochs", tr.epochs);
  t->add_option("--lr", tr.lr, "Adam learning rate");
  t->add_option("--max_w", tr.max_w, "Max norm of incoming weights (0 = off)");
  t->add_option("--seed", tr.seed);
  t->add_option("--out", tr.out, "Model output path")->required();
  t->add_flag("--quiet", tr.quiet, "Suppress progress output");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Error reports for a trained model");
  e->add_option("--model", ev.model)->required();
  e->add_option("--mode", ev.mode, "oracle or star")->capture_default_str();
  e->add_option("--function", ev.function, "Bank function (oracle mode)");
  e->add_option("--validation", ev.validation, "Held-out dataset (star mode)");
  e->add_option("--deltas", ev.deltas, "Comma-separated thresholds");
  e->add_option("--samples", ev.samples, "Size of the random evaluation set S (oracle mode)")->capture_default_str();
  e->add_option("--seed", ev.seed)->capture_default_str();
  e->add_option("--k_max", ev.k_max, "Override the model's k_max (star mode)");
  e->add_option("--r_max", ev.r_max, "Override the model's r_max (star mode)");
  e->add_option("--out", ev.out, "Report path (default stdout)");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Estimated Jacobian (and optionally F) at a point");
  p->add_option("--model", pr.model)->required();
  p->add_option("--x", pr.x, "Comma-separated coordinates")->required();
  p->add_option("--data", pr.data, "Sample set for function-value prediction");

  ExportArgs ex;
  auto* x = app.add_subcommand("export-field", "Write a Jacobian field on a regular grid");
  x->add_option("--function", ex.function)->required();
  x->add_option("--model", ex.model);
  x->add_option("--mode", ex.mode, "estimate, oracle or difference")->capture_default_str();
  x->add_option("--grid", ex.grid, "Nodes per axis, e.g. 20x20")->capture_default_str();
  x->add_option("--box", ex.box, "lo,hi applied to every axis (default: function domain)");
  x->add_option("--out", ex.out);

  TheoryArgs th;
  auto* v = app.add_subcommand("verify-theory", "Check the error-bound assumptions and constants");
  v->add_option("--model", th.model)->required();
  v->add_option("--function", th.function)->required();
  v->add_option("--data", th.data, "Training dataset")->required();
  v->add_option("--alpha", th.alpha)->capture_default_str();
  v->add_option("--probes", th.probes, "Probe points for the density estimate")->capture_default_str();
  v->add_option("--samples", th.samples, "Points for the empirical bound check")->capture_default_str();
  v->add_option("--seed", th.seed)->capture_default_str();
  v->add_option("--out", th.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: usage: " << err.what() << "\n";
    return 2;
  }

  try {
    if (*g) cmd_gen_data(gen);
    if (*t) cmd_train(tr, *t);
    if (*e) cmd_evaluate(ev, *e);
    if (*p) cmd_predict(pr);
    if (*x) cmd_export_field(ex);
    if (*v) cmd_verify_theory(th);
  } catch (const jacest::Error& err) {
    std::cerr << "error: " << err.kind() << ": " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: internal: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
