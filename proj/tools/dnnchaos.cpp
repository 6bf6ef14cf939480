// dnnchaos: command-line front end. Every subcommand writes plot-ready CSV plus
// a manifest.json (resolved parameters, a configuration hash, artifact hashes)
// into --out. Exit status: 0 success, 1 usage or invalid input, 2 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dnnchaos/dnnchaos.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dnnchaos;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Params {
 public:
  std::map<std::string, std::string> values;

  const std::string& str(const std::string& k) const {
    auto it = values.find(k);
    if (it == values.end()) throw ValidationError("missing parameter '" + k + "'");
    return it->second;
  }
  bool has(const std::string& k) const { return !str(k).empty(); }

  double real(const std::string& k) const { return parse_real(str(k), k); }

  std::size_t count(const std::string& k) const {
    const auto& s = str(k);
    try {
      std::size_t used = 0;
      if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
      const auto v = std::stoull(s, &used, 10);
      if (used != s.size()) throw std::invalid_argument(s);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ValidationError("--" + k + ": expected a nonnegative integer, got '" + s + "'");
    }
  }

  bool flag(const std::string& k) const {
    const auto& s = str(k);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ValidationError("--" + k + ": expected true or false, got '" + s + "'");
  }

  std::vector<double> reals(const std::string& k) const {
    std::vector<double> out;
    for (const auto& part : split(str(k), ',')) out.push_back(parse_real(part, k));
    return out;
  }

  std::vector<std::size_t> counts(const std::string& k) const {
    std::vector<std::size_t> out;
    for (const auto& part : split(str(k), ',')) {
      Params tmp;
      tmp.values[k] = part;
      out.push_back(tmp.count(k));
    }
    return out;
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, sep)) {
      const auto b = cur.find_first_not_of(" \t");
      const auto e = cur.find_last_not_of(" \t");
      parts.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
    }
    return parts;
  }

 private:
  static double parse_real(const std::string& s, const std::string& k) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("--" + k + ": expected a number, got '" + s + "'");
    }
  }
};

class Output {
 public:
  Output(fs::path dir, std::string config_hash)
      : dir_(std::move(dir)), config_hash_(std::move(config_hash)) {
    fs::create_directories(dir_);
  }

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::string body;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) body += ',';
        body += cells[i];
      }
      body += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    body += "# manifest " + config_hash_ + "\n";
    text(name, body);
  }

  void text(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << content;
    out.close();
    artifacts_[name] = hex64(fnv1a64(content));
  }

  const std::map<std::string, std::string>& artifacts() const { return artifacts_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::string config_hash_;
  std::map<std::string, std::string> artifacts_;
};

struct Context {
  const Params& p;
  Output& out;
  std::uint64_t seed;
  std::size_t threads;
};

using Handler = std::function<void(Context&)>;

struct OptionSpec {
  std::string name;
  std::string default_value;
  std::string help;
};

struct Subcommand {
  std::string name;
  std::string help;
  std::vector<OptionSpec> options;
  Handler run;
};

Vector parse_vector(const std::string& s, const std::string& what) {
  Params tmp;
  tmp.values[what] = s;
  const auto v = tmp.reals(what);
  Vector x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<Eigen::Index>(i)] = v[i];
  return x;
}

std::vector<Vector> parse_points(const std::string& s) {
  std::vector<Vector> pts;
  for (const auto& part : Params::split(s, ';')) {
    if (!part.empty()) pts.push_back(parse_vector(part, "points"));
  }
  return pts;
}

std::vector<double> index_grid(double lo, double hi, double step, const std::string& what) {
  if (!(step > 0.0) || !(hi >= lo)) throw ValidationError(what + ": need step > 0 and max >= min");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

// --- subcommands -----------------------------------------------------------

void run_scalar_sweep(Context& c) {
  const auto as = index_grid(c.p.real("a-min"), c.p.real("a-max"), c.p.real("a-step"), "a grid");
  const auto bs = index_grid(c.p.real("b-min"), c.p.real("b-max"), c.p.real("b-step"), "b grid");
  const double x0v = c.p.real("x0");
  const std::size_t steps = c.p.count("steps");
  std::vector<std::vector<std::string>> rows(as.size() * bs.size());
  double worst = -std::numeric_limits<double>::infinity();
  std::vector<double> lam(rows.size());
  parallel_for(rows.size(), c.threads, [&](std::size_t i) {
    const double a = as[i / bs.size()];
    const double b = bs[i % bs.size()];
    Matrix W(1, 1);
    W << a;
    Vector bb(1);
    bb << b;
    const LayeredNetwork net({AffineLayer(W, bb, ActivationKind::Tanh)});
    Vector x0(1);
    x0 << x0v;
    lyapunov::LyapunovOptions opt;
    opt.record_stretches = false;
    opt.frame_seed.reset();
    const auto rep = lyapunov::benettin_spectrum(net, x0, steps, opt);
    lam[i] = rep.spectrum[0];
    rows[i] = {num(a), num(b), num(rep.spectrum[0]), std::to_string(rep.steps_used)};
  });
  for (double l : lam) worst = std::max(worst, l);
  c.out.csv("scalar_sweep.csv", {"a", "b", "lambda1", "steps"}, rows);
  std::cout << "scalar-sweep: " << rows.size() << " cells, max lambda1 = " << num(worst) << "\n";
}

void run_ensemble_sweep(Context& c) {
  meanfield::SweepOptions opt;
  opt.seed = c.seed;
  opt.bias_variance = c.p.real("bias-variance");
  opt.scaling = scaling_from_string(c.p.str("scaling"));
  opt.threads = c.threads;
  const auto tab = meanfield::ensemble_lyapunov_sweep(c.p.counts("d"), c.p.reals("sigma2"),
                                                      c.p.count("seeds"), c.p.count("steps"), opt);
  std::vector<std::vector<std::string>> cells, rows;
  for (const auto& x : tab.cells) {
    cells.push_back({std::to_string(x.d), num(x.sigma2), std::to_string(x.seed), num(x.lambda1),
                     num(x.entropy), std::to_string(x.steps)});
  }
  for (const auto& r : tab.rows) {
    rows.push_back({std::to_string(r.d), num(r.sigma2), num(r.lambda1_mean), num(r.lambda1_std),
                    r.predicate_literal ? "1" : "0", r.predicate_consistent ? "1" : "0"});
  }
  c.out.csv("ensemble_cells.csv", {"d", "sigma2", "seed", "lambda1", "entropy", "steps"}, cells);
  c.out.csv("ensemble_sweep.csv",
            {"d", "sigma2", "lambda1_mean", "lambda1_std", "eq19_literal", "eq19_consistent"}, rows);
  std::cout << "ensemble-sweep: " << tab.rows.size() << " cells x " << c.p.count("seeds")
            << " seeds\n";
}

void run_meanfield(Context& c) {
  const double lo = c.p.real("sigma-min");
  const double hi = c.p.real("sigma-max");
  const std::size_t n = c.p.count("sigma-count");
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw ValidationError("bad sigma grid");
  std::vector<double> sig;
  for (std::size_t i = 0; i < n; ++i) {
    sig.push_back(n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1)));
  }
  const auto ds = c.p.counts("d");
  std::vector<std::vector<std::string>> rows(sig.size() * ds.size());
  parallel_for(rows.size(), c.threads, [&](std::size_t i) {
    const auto r = meanfield::chaos_condition(sig[i % sig.size()], ds[i / sig.size()]);
    rows[i] = {num(r.sigma), std::to_string(r.d), num(r.h_value), num(r.R_bound), num(r.R_fixed),
               num(r.beta), r.chaotic_predicted ? "1" : "0", num(r.beta_fixed),
               r.chaotic_fixed ? "1" : "0", num(r.h_consistent), num(r.R_bound_consistent),
               num(r.beta_consistent), r.chaotic_consistent ? "1" : "0"};
  });
  c.out.csv("meanfield.csv",
            {"sigma", "d", "h", "R_bound", "R_fixed", "beta", "predicate", "beta_fixed",
             "predicate_fixed", "h_consistent", "R_bound_consistent", "beta_consistent",
             "predicate_consistent"},
            rows);
  std::vector<std::vector<std::string>> srows;
  const std::size_t terms = c.p.count("series-terms");
  for (double a : c.p.reals("alpha")) {
    const auto s = meanfield::h_lagrange_series(a, terms);
    srows.push_back({num(a), num(meanfield::solve_h(a)), num(s.value), s.converged ? "1" : "0",
                     num(s.last_term)});
  }
  c.out.csv("h_series.csv", {"alpha", "h_bisection", "h_series", "converged", "last_term"}, srows);
  std::cout << "meanfield: " << rows.size() << " rows\n";
}

void run_norm_concentration(Context& c) {
  std::vector<std::vector<std::string>> series, stats;
  for (auto d : c.p.counts("d")) {
    EnsembleSpec spec;
    spec.d = d;
    spec.depth = 1;
    spec.entry_variance = c.p.real("gain");
    spec.scaling = scaling_from_string(c.p.str("scaling"));
    spec.seed = derive_seed(c.seed, {static_cast<std::uint64_t>(d)});
    const auto st = meanfield::norm_concentration(spec, c.p.count("steps"), c.p.count("seeds"), c.threads);
    for (std::size_t t = 0; t < st.time_series.size(); ++t) {
      series.push_back({std::to_string(d), std::to_string(t + 1), num(st.time_series[t])});
    }
    stats.push_back({std::to_string(d), num(st.stationary_mean), num(st.stationary_variance),
                     num(st.stationary_mean * st.stationary_mean * static_cast<double>(d))});
  }
  c.out.csv("norm_concentration.csv", {"d", "t", "mean_norm"}, series);
  c.out.csv("norm_stats.csv", {"d", "stationary_mean", "stationary_variance", "C"}, stats);
  std::cout << "norm-concentration: " << stats.size() << " dimensions\n";
}

void run_chaos_construct(Context& c) {
  auto cfg = constructions::TanhChaosConfig::make(c.p.real("A"), c.p.real("r"), c.p.count("steps"));
  const auto run = constructions::tanh_chaos_run(cfg);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t t = 0; t < run.growth_log.size(); ++t) {
    rows.push_back({std::to_string(t + 1), num(run.growth_log[t])});
  }
  c.out.csv("tanh_growth.csv", {"t", "log2_growth_rate"}, rows);
  c.out.text("tanh_chaos_network.json", network_to_string(run.network));
  const double bound = std::log2(cfg.A * (1.0 - cfg.r * cfg.r));
  std::cout << "chaos-construct: final rate " << num(run.growth_log.back()) << " (bound "
            << num(bound) << ")\n";
}

void run_relu_angle(Context& c) {
  constructions::ReluAngleConfig cfg;
  cfg.a = c.p.real("a");
  cfg.x0 = c.p.real("x0");
  cfg.t0 = c.p.count("t0");
  cfg.T = c.p.count("T");
  cfg.c_bound = c.p.real("c-bound");
  cfg.w22 = c.p.real("w22");
  const auto net = constructions::relu_angle_network(cfg);
  Vector x0(2);
  x0 << cfg.x0, c.p.real("x2-init");
  const auto traj = forward_trajectory(net, x0);
  std::vector<std::vector<std::string>> rows;
  double prev = 0.0;
  for (std::size_t T = 1; T <= cfg.T; ++T) {
    const double g = constructions::angle_gradient(net, x0, T);
    rows.push_back({std::to_string(T), num(g), prev != 0.0 ? num(g / prev) : "nan",
                    num(traj.states[T][0]), num(traj.states[T][1])});
    prev = g;
  }
  c.out.csv("relu_angle.csv", {"T", "gradient", "ratio", "x1", "x2"}, rows);
  c.out.text("relu_angle_network.json", network_to_string(net));
  std::cout << "relu-angle: " << rows.size() << " horizons\n";
}

LayeredNetwork network_or_generated(Context& c, std::size_t default_depth_key_value = 0) {
  if (c.p.has("network")) return load_network(c.p.str("network"));
  EnsembleSpec spec;
  spec.d = c.p.count("d");
  spec.depth = default_depth_key_value ? default_depth_key_value : c.p.count("depth");
  spec.entry_variance = c.p.real("sigma2");
  spec.scaling = scaling_from_string(c.p.str("scaling"));
  spec.activation = activation_from_string(c.p.str("activation"));
  spec.seed = c.seed;
  return generate_gaussian_network(spec);
}

void run_procedure1(Context& c) {
  const auto net = network_or_generated(c);
  Vector x0 = c.p.has("x0") ? parse_vector(c.p.str("x0"), "x0")
                            : random_point(static_cast<std::size_t>(net.dim()), -1.0, 1.0,
                                           derive_seed(c.seed, {0x78300ULL, 0}));
  const auto est = lyapunov::procedure1_estimate(net, x0, c.p.count("trials"), c.p.real("scale"),
                                                 derive_seed(c.seed, {0x9001ULL}));
  lyapunov::LyapunovOptions opt;
  opt.burn_in = 0;
  const double top = lyapunov::top_exponent(net, x0, 1, opt);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t t = 0; t < est.d_values.size(); ++t) rows.push_back({std::to_string(t), num(est.d_values[t])});
  c.out.csv("procedure1.csv", {"trial", "d_t"}, rows);
  c.out.csv("procedure1_summary.csv", {"max_abs", "log_normalized", "top_exponent", "perturbation_scale"},
            {{num(est.max_abs), num(est.log_normalized), num(top), num(est.perturbation_scale)}});
  std::cout << "procedure1: max |d_t| = " << num(est.max_abs) << ", (1/D) log2 = "
            << num(est.log_normalized) << "\n";
}

Box parse_box(const std::string& s, Eigen::Index d) {
  const auto v = parse_vector(s, "box");
  Box b{Vector(d), Vector(d)};
  if (v.size() == 2) {
    b.lo.setConstant(v[0]);
    b.hi.setConstant(v[1]);
  } else if (v.size() == 2 * d) {
    for (Eigen::Index i = 0; i < d; ++i) {
      b.lo[i] = v[2 * i];
      b.hi[i] = v[2 * i + 1];
    }
  } else {
    throw ValidationError("--box needs 'lo,hi' or 2d values");
  }
  b.validate();
  return b;
}

void run_entropy_table(Context& c) {
  const std::string sys = c.p.str("system");
  std::optional<LayeredNetwork> net;
  Box box;
  if (sys == "tanh-scalar") {
    Matrix W(1, 1);
    W << c.p.real("gain");
    net.emplace(std::vector<AffineLayer>{AffineLayer(W, Vector::Zero(1), ActivationKind::Tanh)});
    box = Box{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  } else if (sys == "diag-linear") {
    Matrix W = Matrix::Zero(2, 2);
    W(0, 0) = 2.0;
    W(1, 1) = 0.5;
    net.emplace(std::vector<AffineLayer>{AffineLayer(W, Vector::Zero(2), ActivationKind::Linear)});
    box = Box{Vector::Zero(2), Vector::Ones(2)};
  } else if (sys == "network") {
    if (!c.p.has("network")) throw ValidationError("--system network needs --network");
    net.emplace(load_network(c.p.str("network")));
    box = Box{Vector::Constant(net->dim(), -1.0), Vector::Constant(net->dim(), 1.0)};
  } else {
    throw ValidationError("unknown --system '" + sys + "'");
  }
  if (c.p.has("box")) box = parse_box(c.p.str("box"), net->dim());
  const bool clip = c.p.flag("clip");
  const auto map = entropy::network_map(*net, clip ? std::optional<Box>(box) : std::nullopt);
  const auto rows = entropy::entropy_table(map, box, c.p.real("grid-step"), c.p.counts("n"),
                                           c.p.reals("epsilon"), c.threads);
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    out.push_back({std::to_string(r.n), num(r.epsilon), std::to_string(r.spanning),
                   std::to_string(r.separated), num(r.hs_spanning), num(r.hs_separated)});
  }
  c.out.csv("entropy_table.csv",
            {"n", "epsilon", "spanning", "separated", "H_s_spanning", "H_s_separated"}, out);
  std::cout << "entropy-table: " << out.size() << " rows" << (clip ? " (orbits clipped to box)" : "")
            << "\n";
}

void run_ensemble_entropy(Context& c) {
  const std::size_t d = c.p.count("d"), L = c.p.count("L"), n = c.p.count("n"), M = c.p.count("M");
  std::vector<LayeredNetwork> seqs;
  for (std::size_t m = 0; m < M; ++m) {
    EnsembleSpec spec;
    spec.d = d;
    spec.depth = n;
    spec.entry_variance = c.p.real("sigma2");
    spec.seed = derive_seed(c.seed, {static_cast<std::uint64_t>(m)});
    seqs.push_back(generate_gaussian_network(spec));
  }
  const Vector z0 = random_point(d * L, -1.0, 1.0, derive_seed(c.seed, {0x78300ULL, 0}));
  const auto cnt = entropy::ensemble_path_count(seqs, z0, c.p.real("epsilon"), c.threads);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t m = 0; m < M; ++m) rows.push_back({std::to_string(m), std::to_string(cnt.cluster_id[m])});
  rows.push_back({"r_e", std::to_string(cnt.r_e)});
  rows.push_back({"H_e", num(cnt.H_e)});
  c.out.csv("ensemble_entropy.csv", {"m", "cluster_id"}, rows);
  std::cout << "ensemble-entropy: r_e = " << cnt.r_e << ", H_e = " << num(cnt.H_e) << "\n";
}

classification::ComplexityOptions complexity_options(Context& c) {
  classification::ComplexityOptions o;
  o.offsets = c.p.count("offsets");
  if (c.p.has("resolution")) o.resolution = c.p.real("resolution");
  o.seed = c.seed;
  return o;
}

void run_complexity(Context& c) {
  const auto data = classification::load_dataset_csv(c.p.str("data"));
  const auto opt = complexity_options(c);
  std::vector<std::vector<std::string>> rows;
  for (double e : c.p.reals("epsilon")) {
    const auto r = classification::classification_complexity(data, e, opt);
    rows.push_back({num(e), std::to_string(r.hybrid_count),
                    r.complexity ? num(*r.complexity) : "separated", std::to_string(r.offsets_tried),
                    num(r.best_side)});
  }
  c.out.csv("complexity.csv", {"epsilon", "hybrid_count", "complexity", "offsets_tried", "best_side"}, rows);
  std::cout << "complexity: " << rows.size() << " epsilons, " << data.size() << " points\n";
}

void run_layer_bound(Context& c) {
  std::optional<double> C;
  std::string depth = "";
  bool separated = false;
  if (c.p.has("complexity")) {
    C = c.p.real("complexity");
  } else if (c.p.has("data")) {
    const auto data = classification::load_dataset_csv(c.p.str("data"));
    const auto r = classification::classification_complexity(data, c.p.real("epsilon"), complexity_options(c));
    C = r.complexity;
    separated = !r.complexity;
  } else {
    throw ValidationError("layer-bound needs --complexity or --data");
  }
  double Hs;
  if (c.p.has("hs")) {
    Hs = c.p.real("hs");
  } else if (c.p.has("network")) {
    const auto net = load_network(c.p.str("network"));
    depth = std::to_string(net.depth());
    const Vector x0 = c.p.has("x0") ? parse_vector(c.p.str("x0"), "x0") : Vector(Vector::Zero(net.dim()));
    Hs = lyapunov::benettin_spectrum(net, x0, c.p.count("repeat")).entropy;
  } else {
    throw ValidationError("layer-bound needs --hs or --network");
  }
  std::string bound;
  if (separated) {
    bound = "not_applicable";
  } else {
    bound = num(classification::layer_lower_bound(*C, Hs));
  }
  c.out.csv("layer_bound.csv", {"complexity", "Hs", "bound", "depth"},
            {{C ? num(*C) : "separated", num(Hs), bound, depth}});
  std::cout << "layer-bound: " << bound << "\n";
}

void run_hausdorff(Context& c) {
  const auto data = classification::load_dataset_csv(c.p.str("data"));
  const double delta = c.p.real("delta");
  const auto opt = complexity_options(c);
  std::vector<std::vector<std::string>> rows;
  for (double e : c.p.reals("epsilon")) {
    const auto r = classification::classification_complexity(data, e, opt);
    const double H = classification::hausdorff_eps_delta(r.hybrid_count, e, delta);
    const std::string conj = r.complexity ? num((std::log2(delta) - *r.complexity) / std::log2(e)) : "nan";
    rows.push_back({num(e), num(delta), std::to_string(r.hybrid_count),
                    r.complexity ? num(*r.complexity) : "separated", num(H), conj});
  }
  c.out.csv("hausdorff.csv", {"epsilon", "delta", "hybrid_count", "complexity", "H", "conjecture"}, rows);
  std::cout << "hausdorff: " << rows.size() << " rows\n";
}

json shatter_json(const shatter::ShatterNetwork& n, std::size_t bits) {
  json j = network_to_json(LayeredNetwork(n.layers));
  json w = json::array();
  for (Eigen::Index i = 0; i < n.classifier.w().size(); ++i) w.push_back(n.classifier.w()[i]);
  j["classifier"] = {{"w", w}, {"b", n.classifier.b()}};
  j["labeling_bits"] = bits;
  j["margin"] = n.margin;
  return j;
}

void run_shatter(Context& c) {
  const auto pts = parse_points(c.p.str("points"));
  const std::size_t D = c.p.count("depth");
  if (D == 0) throw ValidationError("--depth must be >= 1");
  if (pts.size() < D + 3) {
    throw ValidationError("need at least " + std::to_string(D + 3) + " points for depth " + std::to_string(D));
  }
  shatter::ShatterOptions opt;
  opt.stretch = c.p.real("stretch");
  opt.squeeze = c.p.real("squeeze");
  opt.threads = c.threads;
  auto fam = shatter::shatter_four({pts.begin(), pts.begin() + 4}, opt);
  for (std::size_t k = 4; k < D + 3; ++k) fam = shatter::shatter_extend(fam, pts[k], opt);
  std::vector<std::vector<std::string>> rows;
  std::size_t verified = 0;
  for (std::size_t bits = 0; bits < fam.networks.size(); ++bits) {
    const auto& n = fam.networks[bits];
    const double m = shatter::verify_margin(n, fam.points);
    verified += m > 1e-6 ? 1 : 0;
    std::string b;
    for (std::size_t i = fam.points.size(); i-- > 0;) b += ((bits >> i) & 1U) ? '1' : '0';
    rows.push_back({b, std::to_string(n.depth()), num(m)});
    char name[64];
    std::snprintf(name, sizeof name, "shatter/labeling_%04zu.json", bits);
    c.out.text(name, shatter_json(n, bits).dump(1) + "\n");
  }
  c.out.csv("shatter_verification.csv", {"labeling_bits", "depth", "margin"}, rows);
  std::cout << "shatter: " << verified << "/" << fam.networks.size() << " labelings verified, depth "
            << fam.depth() << "\n";
  if (verified != fam.networks.size()) throw DegenerateError("some labelings failed verification");
}

const std::vector<Subcommand>& subcommands() {
  static const std::vector<Subcommand> subs = {
      {"scalar-sweep", "Largest exponent of x -> tanh(a x + b) over an (a, b) grid",
       {{"a-min", "-5", "smallest a"}, {"a-max", "5", "largest a"}, {"a-step", "0.1", "a spacing"},
        {"b-min", "-1", "smallest b"}, {"b-max", "1", "largest b"}, {"b-step", "0.1", "b spacing"},
        {"x0", "0.2", "initial state"}, {"steps", "1000", "iterations per cell"}},
       run_scalar_sweep},
      {"ensemble-sweep", "Largest exponent of random Gaussian tanh dynamics over (d, sigma^2)",
       {{"d", "1,2,10,50", "dimensions"},
        {"sigma2", "0.001,0.00316227766,0.01,0.0316227766,0.1,0.316227766,1,3.16227766,10,31.6227766,100,316.227766,1000",
         "per-entry weight variances"},
        {"seeds", "8", "seeds per cell"}, {"steps", "1000", "layers per run"},
        {"scaling", "raw", "raw or one_over_d"}, {"bias-variance", "0", "bias variance"}},
       run_ensemble_sweep},
      {"meanfield", "Mean-field chaos predicate over a sigma grid",
       {{"sigma-min", "0.01", "smallest sigma"}, {"sigma-max", "100", "largest sigma"},
        {"sigma-count", "201", "log-spaced sigma values"}, {"d", "1,2,8,10,50,100", "dimensions"},
        {"alpha", "1.05,1.1,1.2,1.5,2,5", "alphas for the inversion series"},
        {"series-terms", "20", "series terms"}},
       run_meanfield},
      {"norm-concentration", "Normalized state norm of random tanh dynamics",
       {{"d", "5,20,100", "dimensions"}, {"gain", "4", "entry variance before scaling"},
        {"scaling", "one_over_d", "raw or one_over_d"}, {"steps", "200", "layers"},
        {"seeds", "32", "independent runs"}},
       run_norm_concentration},
      {"chaos-construct", "Tanh network with designed tangent growth",
       {{"A", "4", "designed eigenvalue"}, {"r", "0.5", "pinned state norm"}, {"steps", "100", "layers"}},
       run_chaos_construct},
      {"relu-angle", "ReLU network with exploding angle gradient",
       {{"a", "2", "slope of the unstable coordinate"}, {"x0", "1", "fixed point"},
        {"t0", "32", "reset period"}, {"T", "30", "layers"}, {"c-bound", "2", "bound on |W22|"},
        {"w22", "1", "W22 on ordinary layers"}, {"x2-init", "0.5", "initial second coordinate"}},
       run_relu_angle},
      {"procedure1", "Perturbation-ratio estimate on a supplied or generated network",
       {{"network", "", "network JSON (empty: generate)"}, {"d", "8", "dimension"},
        {"depth", "20", "layers"}, {"sigma2", "2", "entry variance"}, {"scaling", "one_over_d", "raw or one_over_d"},
        {"activation", "tanh", "tanh, relu or linear"}, {"x0", "", "comma list (empty: random)"},
        {"trials", "100", "perturbations"}, {"scale", "0.0001", "relative perturbation size"}},
       run_procedure1},
      {"entropy-table", "Spanning and separated orbit counts on a grid",
       {{"system", "tanh-scalar", "tanh-scalar, diag-linear or network"}, {"gain", "3", "gain of tanh-scalar"},
        {"network", "", "network JSON for --system network"}, {"box", "", "lo,hi or per-dimension bounds"},
        {"grid-step", "0.01", "grid spacing"}, {"n", "1,2,4,8", "horizons"},
        {"epsilon", "0.1,0.05", "resolutions"}, {"clip", "false", "clip orbits to the box"}},
       run_entropy_table},
      {"ensemble-entropy", "Distinct-path count of random tanh sequences",
       {{"d", "2", "state dimension"}, {"L", "2", "stacked copies"}, {"n", "6", "sequence length"},
        {"M", "16", "sequences"}, {"sigma2", "1", "entry variance"}, {"epsilon", "0.001", "merge threshold"}},
       run_ensemble_entropy},
      {"complexity", "Hybrid-cell classification complexity of a labeled dataset",
       {{"data", "", "CSV rows x1,...,xd,label"}, {"epsilon", "0.5,0.25,0.125", "partition radii"},
        {"offsets", "16", "offsets per cell side"}, {"resolution", "", "smallest cell side"}},
       run_complexity},
      {"layer-bound", "Depth lower bound (C + 1) / H_s",
       {{"complexity", "", "complexity value"}, {"hs", "", "per-layer entropy"},
        {"data", "", "dataset CSV"}, {"epsilon", "0.5", "partition radius"},
        {"offsets", "16", "offsets per cell side"}, {"resolution", "", "smallest cell side"},
        {"network", "", "network JSON for H_s"}, {"x0", "", "start state for H_s"},
        {"repeat", "200", "cyclic repeats for H_s"}},
       run_layer_bound},
      {"hausdorff", "(eps, delta) dimension estimate",
       {{"data", "", "dataset CSV"}, {"epsilon", "0.5,0.25", "partition radii in (0,1)"},
        {"delta", "1", "content threshold"}, {"offsets", "16", "offsets per cell side"},
        {"resolution", "", "smallest cell side"}},
       run_hausdorff},
      {"shatter", "Constructive shattering of D + 3 planar points",
       {{"points", "1,1;-1,1;-1,-1;1,-1;2.5,0.3;-0.4,2.6", "semicolon-separated points"},
        {"depth", "3", "depth D"}, {"stretch", "20", "diagonal stretch s"},
        {"squeeze", "0.001", "squeeze bound"}},
       run_shatter},
  };
  return subs;
}

const Subcommand* find_sub(const std::string& name) {
  for (const auto& s : subcommands()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string config_hash(const std::string& sub, const Params& p) {
  std::string canon = sub + "\n";
  for (const auto& [k, v] : p.values) {
    if (k == "threads" || k == "out") continue;
    canon += k + "=" + v + "\n";
  }
  return hex64(fnv1a64(canon));
}

int run_with(const Subcommand& sub, const Params& p, json* manifest_out = nullptr) {
  const std::string hash = config_hash(sub.name, p);
  Output out(p.str("out"), hash);
  Params pc = p;
  Context ctx{pc, out, 0, 1};
  try {
    ctx.seed = std::stoull(p.str("seed"));
  } catch (const std::exception&) {
    throw ValidationError("--seed: expected an unsigned integer");
  }
  ctx.threads = std::max<std::size_t>(1, pc.count("threads"));
  sub.run(ctx);
  json m;
  m["subcommand"] = sub.name;
  m["config"] = json::object();
  for (const auto& [k, v] : p.values) m["config"][k] = v;
  m["config_hash"] = hash;
  m["artifacts"] = out.artifacts();
  {
    std::ofstream f(out.dir() / "manifest.json", std::ios::binary);
    f << m.dump(1) << "\n";
  }
  if (manifest_out) *manifest_out = m;
  return 0;
}

int replay(const std::string& manifest_path, const std::string& out_dir, const std::string& threads) {
  const json m = json::parse(read_file(manifest_path));
  const auto* sub = find_sub(m.at("subcommand").get<std::string>());
  if (!sub) throw ValidationError("manifest names an unknown subcommand");
  Params p;
  for (const auto& [k, v] : m.at("config").items()) p.values[k] = v.get<std::string>();
  p.values["out"] = out_dir;
  if (!threads.empty()) p.values["threads"] = threads;
  json fresh;
  run_with(*sub, p, &fresh);
  std::size_t bad = 0;
  for (const auto& [name, h] : m.at("artifacts").items()) {
    const auto it = fresh["artifacts"].find(name);
    if (it == fresh["artifacts"].end() || *it != h) {
      std::cerr << "replay mismatch: " << name << "\n";
      ++bad;
    }
  }
  if (fresh["artifacts"].size() != m.at("artifacts").size()) ++bad;
  if (bad) {
    std::cerr << "replay: " << bad << " artifact(s) differ\n";
    return kExitNumeric;
  }
  std::cout << "replay: " << m.at("artifacts").size() << " artifacts identical\n";
  return 0;
}

/// Loads --config and appends "--key value" for keys the command line lacks.
std::vector<std::string> merged_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string cfg_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) cfg_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) cfg_path = args[i].substr(9);
  }
  if (cfg_path.empty()) return args;
  json cfg;
  try {
    cfg = json::parse(read_file(cfg_path));
  } catch (const json::parse_error& e) {
    throw ParseError(cfg_path + ": malformed JSON at byte " + std::to_string(e.byte));
  }
  if (!cfg.is_object()) throw ParseError(cfg_path + ": expected a JSON object");
  std::string sub;
  for (const auto& a : args) {
    if (find_sub(a) || a == "replay") {
      sub = a;
      break;
    }
  }
  if (sub.empty() && cfg.contains("subcommand")) {
    sub = cfg["subcommand"].get<std::string>();
    args.push_back(sub);
  }
  const json& values = cfg.contains("config") && cfg["config"].is_object() ? cfg["config"] : cfg;
  auto on_command_line = [&](const std::string& key) {
    for (const auto& a : args) {
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    }
    return false;
  };
  for (const auto& [k, v] : values.items()) {
    if (k == "subcommand" || k == "config" || k == "config_hash" || k == "artifacts") continue;
    if (on_command_line(k)) continue;
    std::string s;
    if (v.is_string()) {
      s = v.get<std::string>();
    } else if (v.is_boolean()) {
      s = v.get<bool>() ? "true" : "false";
    } else if (v.is_number_integer() || v.is_number_unsigned()) {
      s = v.dump();
    } else if (v.is_number()) {
      s = num(v.get<double>());
    } else if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += v[i].is_string() ? v[i].get<std::string>() : (v[i].is_number_float() ? num(v[i].get<double>()) : v[i].dump());
      }
    } else {
      throw ParseError(cfg_path + ": unsupported value for '" + k + "'");
    }
    args.push_back("--" + k + "=" + s);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layered networks as random dynamical systems: Lyapunov spectra, entropy, "
               "mean-field chaos, constructions and shattering"};
  app.require_subcommand(1);
  app.fallthrough();
  Params globals;
  globals.values = {{"seed", "0"}, {"threads", "1"}, {"out", "out"}};
  std::string config_path;
  app.add_option("--seed", globals.values["seed"], "base seed")->capture_default_str();
  app.add_option("--threads", globals.values["threads"], "worker threads")->capture_default_str();
  app.add_option("--out", globals.values["out"], "output directory")->capture_default_str();
  app.add_option("--config", config_path, "JSON file with parameter values (command line wins)");

  std::map<std::string, Params> sub_params;
  std::map<std::string, CLI::App*> sub_apps;
  for (const auto& s : subcommands()) {
    auto* sa = app.add_subcommand(s.name, s.help);
    auto& p = sub_params[s.name];
    for (const auto& o : s.options) {
      p.values[o.name] = o.default_value;
      sa->add_option("--" + o.name, p.values[o.name], o.help)->capture_default_str();
    }
    sub_apps[s.name] = sa;
  }
  std::string manifest_path;
  auto* rs = app.add_subcommand("replay", "Re-run a manifest and compare artifact hashes");
  rs->add_option("--manifest", manifest_path, "manifest.json to replay")->required();

  try {
    auto args = merged_args(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (rs->parsed()) {
      const bool threads_given = app.count("--threads") > 0;
      return replay(manifest_path, globals.values["out"], threads_given ? globals.values["threads"] : "");
    }
    for (const auto& s : subcommands()) {
      if (!sub_apps[s.name]->parsed()) continue;
      Params p = sub_params[s.name];
      for (const auto& [k, v] : globals.values) p.values[k] = v;
      return run_with(s, p);
    }
    std::cerr << app.help() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}
