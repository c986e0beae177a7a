// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Every subcommand writes <out-dir>/<command>.csv
// and a JSON sidecar <out-dir>/<command>.json. Exit codes: 0 success,
// 1 failed verification, 2 invalid configuration, 3 inconclusive.

#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hierperc/hierperc.hpp"

namespace hierperc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitInconclusive = 3;
inline constexpr std::uint64_t kDefaultSeed = 20240601;

using json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; identical bytes across runs.
inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw std::logic_error("Csv: column count mismatch");
    rows_.push_back(cells);
  }

  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
      os << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return os.str();
  }

  [[nodiscard]] const std::vector<std::string>& header() const { return header_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Thrown for configurations that cannot run (exit 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  int d = 1;
  int L = 2;
  double alpha = 0.5;
  std::string beta;  ///< number or "auto"
  std::uint64_t seed = kDefaultSeed;
  unsigned workers = 1;
  std::string out_dir = "hierperc_out";
  std::string config_file;

  // betac
  double tol = 0.05;
  double budget = 6e9;
  int n_start = 10;
  int n_max = 20;
  std::uint64_t reps_max = 512;

  // sampling commands
  std::vector<int> n_list{10};
  std::vector<double> p_list{1, 2, 3};
  std::vector<double> fractions{1.0};
  std::uint64_t reps = 200;
  bool periodic = false;
  int grid_per_decade = 12;

  // coalescent
  std::vector<double> masses{1, 1, 1, 1};
  double t = 0.5;
  std::string method = "gillespie";

  // renorm
  int steps = 4;
  std::size_t draws = 2000;
  int compare = 0;
  std::string mode = "disjoint";

  [[nodiscard]] ModelParams params(double b = 0.0) const { return ModelParams{d, L, alpha, b}; }

  [[nodiscard]] json to_json() const {
    return json{{"d", d},
                {"L", L},
                {"alpha", alpha},
                {"beta", beta},
                {"seed", seed},
                {"workers", workers},
                {"out_dir", out_dir},
                {"config", config_file},
                {"tol", tol},
                {"budget", budget},
                {"n_start", n_start},
                {"n_max", n_max},
                {"reps_max", reps_max},
                {"n", n_list},
                {"p", p_list},
                {"fractions", fractions},
                {"reps", reps},
                {"periodic", periodic},
                {"grid_per_decade", grid_per_decade},
                {"masses", masses},
                {"t", t},
                {"method", method},
                {"steps", steps},
                {"draws", draws},
                {"compare", compare},
                {"mode", mode}};
  }
};

/// Reads key=value lines ('#' comments) into "--key=value" arguments.
inline std::vector<std::string> config_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string{};
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (key == "config") throw ConfigError("config files cannot include other config files");
    out.push_back("--" + key + "=" + val);
  }
  return out;
}

// ---------------------------------------------------------------------------
// beta resolution with an on-disk bracket cache

inline std::string cache_key(const RunConfig& c) {
  return "d=" + std::to_string(c.d) + ",L=" + std::to_string(c.L) + ",alpha=" + num(c.alpha) + ",tol=" + num(c.tol);
}

inline std::filesystem::path cache_path(const RunConfig& c) {
  return std::filesystem::path(c.out_dir) / "betac_cache.json";
}

inline json load_cache(const RunConfig& c) {
  std::ifstream in(cache_path(c));
  if (!in) return json::object();
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return json::object();
  }
}

inline void store_cache(const RunConfig& c, const BetacBracket& br) {
  json cache = load_cache(c);
  cache[cache_key(c)] = json{{"lower", br.lower}, {"upper", br.upper}, {"estimate", br.estimate()}};
  std::filesystem::create_directories(c.out_dir);
  std::ofstream(cache_path(c)) << cache.dump(2) << '\n';
}

inline BetacOptions betac_options(const RunConfig& c) {
  BetacOptions o;
  o.tolerance = c.tol;
  o.work_budget = c.budget;
  o.n_start = c.n_start;
  o.n_max = c.n_max;
  o.reps_max = c.reps_max;
  return o;
}

struct BetaResolution {
  double beta = 0.0;
  json info;
  bool inconclusive = false;
};

inline BetaResolution resolve_beta(const RunConfig& c) {
  BetaResolution r;
  if (c.beta.empty()) throw ConfigError("--beta is required (a number or 'auto')");
  if (c.beta != "auto") {
    try {
      std::size_t pos = 0;
      r.beta = std::stod(c.beta, &pos);
      if (pos != c.beta.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("--beta must be a number or 'auto'");
    }
    c.params(r.beta).validate();
    r.info = json{{"source", "given"}, {"beta", r.beta}};
    return r;
  }
  c.params().require_critical_point();
  const json cache = load_cache(c);
  const std::string key = cache_key(c);
  if (cache.contains(key)) {
    r.beta = cache[key]["estimate"].get<double>();
    r.info = json{{"source", "cache"}, {"key", key}, {"bracket", cache[key]}};
    return r;
  }
  const auto br = bisect_betac(c.params(), betac_options(c), c.seed);
  r.beta = br.estimate();
  r.inconclusive = !br.converged;
  r.info = json{{"source", "bisection"}, {"key", key}, {"lower", br.lower}, {"upper", br.upper},
                {"converged", br.converged}, {"note", br.note}};
  if (br.converged) store_cache(c, br);
  return r;
}

// ---------------------------------------------------------------------------
// Helpers

inline int check_scale(const ModelParams& p, int n) {
  if (n < 0) throw ConfigError("scale n must be >= 0");
  std::uint64_t vol = 0;
  try {
    vol = block_volume(p, n);
  } catch (const std::out_of_range&) {
    throw ConfigError("scale n exceeds the 64-bit volume cap");
  }
  if (vol > kDefaultForestCap) throw ConfigError("L^{dn} exceeds the in-memory cap of 2^27 vertices");
  return n;
}

inline std::vector<double> log_grid(double top, int per_decade) {
  std::vector<double> g;
  for (int i = 0;; ++i) {
    const double k = std::round(std::pow(10.0, static_cast<double>(i) / per_decade));
    if (k > top) break;
    if (g.empty() || k > g.back()) g.push_back(k);
  }
  return g;
}

struct Outcome {
  Csv csv;
  json extra = json::object();
  int exit_code = kExitOk;
};

// ---------------------------------------------------------------------------
// Subcommands

inline Outcome cmd_betac(const RunConfig& c) {
  c.params().require_critical_point();
  const auto br = bisect_betac(c.params(), betac_options(c), c.seed);
  Outcome o{Csv({"d", "L", "alpha", "tolerance", "lower", "upper", "estimate", "rel_width", "converged", "inconclusive",
                 "work_used", "probes"})};
  o.csv.row({std::to_string(c.d), std::to_string(c.L), num(c.alpha), num(c.tol), num(br.lower), num(br.upper),
             num(br.estimate()), num(br.rel_width()), br.converged ? "1" : "0", br.inconclusive ? "1" : "0",
             num(br.work_used), std::to_string(br.probes.size())});
  json probes = json::array();
  for (const auto& p : br.probes) {
    json att = json::array();
    for (const auto& a : p.attempts)
      att.push_back({{"n_top", a.n_top}, {"reps", a.replicas}, {"slope", a.slope}, {"se", a.se}});
    probes.push_back({{"beta", p.beta}, {"verdict", p.verdict}, {"attempts", att}});
  }
  o.extra = {{"note", br.note}, {"monotone", br.monotone()}, {"probes", probes}};
  if (br.converged) store_cache(c, br);
  if (!br.converged) o.exit_code = kExitInconclusive;
  return o;
}

inline Outcome cmd_sample(const RunConfig& c, double beta) {
  const auto p = c.params(beta);
  const int n = check_scale(p, c.n_list.front());
  struct Row {
    std::size_t clusters;
    double max, n2, n3;
  };
  auto rows = parallel_map<Row>(c.reps, c.workers, [&](std::uint64_t r) {
    const auto s = c.periodic ? sample_eta_periodic(p, n, c.seed, r) : sample_sizes(p, n, c.seed, r);
    return Row{s.count(), s.max(), s.power_sum(2), s.power_sum(3)};
  });
  Outcome o{Csv({"replica", "n", "clusters", "max", "norm2", "norm3", "exact"})};
  for (std::size_t r = 0; r < rows.size(); ++r)
    o.csv.row({std::to_string(r), std::to_string(n), std::to_string(rows[r].clusters), num(rows[r].max),
               num(rows[r].n2), num(rows[r].n3), "1"});
  return o;
}

inline Outcome cmd_moments(const RunConfig& c, double beta) {
  const auto p = c.params(beta);
  std::vector<int> ns = c.n_list;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  const int top = check_scale(p, ns.back());
  for (double q : c.p_list)
    if (!(q >= 1.0)) throw ConfigError("moments: p must be >= 1");
  SamplerOptions so;
  for (double q : c.p_list) so.exponents.push_back(q + 1.0);
  so.exponents.erase(so.exponents.begin());
  so.fractions = c.fractions;
  so.min_observed_level = ns.front();
  ForestSampler sampler(p, top, so);
  std::vector<double> fr = c.fractions;
  std::sort(fr.begin(), fr.end());
  fr.erase(std::unique(fr.begin(), fr.end()), fr.end());
  if (fr.empty() || fr.back() != 1.0) fr.push_back(1.0);
  const std::size_t np = c.p_list.size(), nf = fr.size();
  // Per replica: [n][fraction][p] block-averaged E|K_n|^p contributions.
  auto vals = parallel_map<std::vector<double>>(c.reps, c.workers, [&](std::uint64_t r) {
    std::vector<double> v(ns.size() * nf * np, 0.0);
    ClusterForest forest;
    ForestSampler local = sampler;
    local.run(c.seed, r, forest, [&](const LevelSnapshot& s) {
      const auto in = std::find(ns.begin(), ns.end(), s.level);
      const auto jf = std::find(fr.begin(), fr.end(), s.fraction);
      if (in == ns.end() || jf == fr.end()) return;
      for (std::size_t k = 0; k < np; ++k) {
        long double sum = 0.0L;
        for (std::uint64_t b = 0; b < s.blocks; ++b) sum += s.power_sum(k, b);
        v[(static_cast<std::size_t>(in - ns.begin()) * nf + static_cast<std::size_t>(jf - fr.begin())) * np + k] =
            static_cast<double>(sum / static_cast<long double>(s.blocks) / static_cast<long double>(s.block_volume));
      }
    });
    return v;
  });
  Outcome o{Csv({"n", "t", "p", "estimate", "stderr", "replicas"})};
  for (std::size_t i = 0; i < ns.size(); ++i)
    for (std::size_t j = 0; j < nf; ++j)
      for (std::size_t k = 0; k < np; ++k) {
        Accumulator a;
        for (const auto& v : vals) a.add(v[(i * nf + j) * np + k]);
        const auto e = a.estimate();
        o.csv.row({std::to_string(ns[i]), num(fr[j] * scale_time(p, ns[i])), num(c.p_list[k]), num(e.mean),
                   num(e.se), std::to_string(e.replicas)});
      }
  return o;
}

inline std::vector<SizeMultiset> sample_many(const ModelParams& p, int n, const RunConfig& c) {
  return parallel_map<SizeMultiset>(c.reps, c.workers, [&](std::uint64_t r) { return sample_sizes(p, n, c.seed, r); });
}

inline Outcome cmd_tail(const RunConfig& c, double beta) {
  const auto p = c.params(beta);
  const int n = check_scale(p, c.n_list.front());
  if (c.reps < 2) throw ConfigError("tail: need >= 2 replicas");
  const auto draws = sample_many(p, n, c);
  std::vector<std::vector<double>> parts;
  for (const auto& d : draws) parts.push_back(d.masses());
  const double vol = static_cast<double>(block_volume(p, n));
  const auto grid = log_grid(vol, c.grid_per_decade);
  Outcome o{Csv({"k", "survival", "stderr", "lo", "hi", "replicas"})};
  TailCurve tc;
  json fit;
  try {
    tc = tail_curve_from_partitions(parts, vol, grid);
    fit = {{"slope", tc.fit.slope}, {"slope_se", tc.fit.slope_se}, {"window_lo", tc.window_lo},
           {"window_hi", tc.window_hi}, {"points", tc.fit.points}};
  } catch (const std::invalid_argument& e) {
    fit = {{"error", e.what()}};
    tc.grid = grid;
    std::vector<Accumulator> acc(grid.size());
    for (const auto& part : parts)
      for (std::size_t g = 0; g < grid.size(); ++g) {
        double m = 0;
        for (double x : part)
          if (x >= grid[g]) m += x;
        acc[g].add(m / vol);
      }
    for (auto& a : acc) {
      const auto e2 = a.estimate();
      tc.survival.push_back(e2.mean);
      tc.se.push_back(e2.se);
      tc.lo.push_back(std::max(0.0, e2.mean - 1.96 * e2.se));
      tc.hi.push_back(std::min(1.0, e2.mean + 1.96 * e2.se));
    }
  }
  for (std::size_t g = 0; g < grid.size(); ++g)
    o.csv.row({num(grid[g]), num(tc.survival[g]), num(tc.se[g]), num(tc.lo[g]), num(tc.hi[g]), std::to_string(c.reps)});
  o.extra = {{"fit", fit}, {"target_slope", tail_exponent(p)}, {"regime", to_string(regime_of(p))}};
  return o;
}

inline Outcome cmd_sizebias(const RunConfig& c, double beta) {
  const auto p = c.params(beta);
  const int n = check_scale(p, c.n_list.front());
  if (c.reps < 2) throw ConfigError("sizebias: need >= 2 replicas");
  std::vector<int> ps;
  for (double q : c.p_list) {
    if (q < 1 || q != std::floor(q)) throw ConfigError("sizebias: p must be a positive integer");
    ps.push_back(static_cast<int>(q));
  }
  const auto draws = sample_many(p, n, c);
  Outcome o{Csv({"n", "p", "estimate", "stderr", "replicas", "target"})};
  for (int q : ps) {
    std::vector<double> m2, m3, mq;
    for (const auto& d : draws) {
      m2.push_back(d.power_sum(2));
      m3.push_back(d.power_sum(3));
      mq.push_back(d.power_sum(q + 2));
    }
    auto mean_of = [](const std::vector<double>& v, const std::vector<std::size_t>& idx) {
      long double s = 0;
      for (auto i : idx) s += v[i];
      return static_cast<double>(s / static_cast<long double>(idx.size()));
    };
    const auto ci = bootstrap(draws.size(), [&](const std::vector<std::size_t>& idx) {
      return size_biased_moments_from_norms(mean_of(mq, idx), mean_of(m2, idx), mean_of(m3, idx), q);
    });
    o.csv.row({std::to_string(n), std::to_string(q), num(ci.estimate), num(ci.se), std::to_string(c.reps),
               num(double_factorial_d(2 * q - 1))});
  }
  return o;
}

inline Outcome cmd_lpnorm(const RunConfig& c, double beta) {
  const auto p = c.params(beta);
  Outcome o{Csv({"n", "p", "estimate", "stderr", "replicas"})};
  for (double q : c.p_list)
    if (!(q >= 1.0)) throw ConfigError("lpnorm: p must be >= 1");
  for (int n : c.n_list) {
    check_scale(p, n);
    const auto draws = sample_many(p, n, c);
    for (double q : c.p_list) {
      std::vector<double> ps;
      for (const auto& d : draws) ps.push_back(d.power_sum(q));
      const auto e = lp_normalized(ps, q, n, p);
      o.csv.row({std::to_string(n), num(q), num(e.mean), num(e.se), std::to_string(e.replicas)});
    }
  }
  o.extra = {{"critical_p", 2.0 * c.d / (c.d + c.alpha)}};
  return o;
}

inline Outcome cmd_twopoint(const RunConfig& c, double beta) {
  const auto p = c.params(beta);
  const int n = check_scale(p, c.n_list.front());
  auto prof = parallel_map<std::vector<double>>(c.reps, c.workers, [&](std::uint64_t r) {
    auto f = sample_eta_forest(p, n, c.seed, {}, r);
    return connection_profile(f, p, n);
  });
  Outcome o{Csv({"h", "distance", "probability", "stderr", "replicas"})};
  std::vector<double> lx, ly, w;
  for (int h = 1; h <= n; ++h) {
    Accumulator a;
    for (const auto& v : prof) a.add(v[static_cast<std::size_t>(h)]);
    const auto e = a.estimate();
    const double dist = std::pow(static_cast<double>(c.L), h);
    o.csv.row({std::to_string(h), num(dist), num(e.mean), num(e.se), std::to_string(e.replicas)});
    if (e.mean > 0 && e.se > 0) {
      lx.push_back(std::log(dist));
      ly.push_back(std::log(e.mean));
      w.push_back(e.mean * e.mean / (e.se * e.se));
    }
  }
  if (lx.size() >= 2) {
    const auto f = weighted_fit(lx, ly, w);
    o.extra = {{"slope", f.slope}, {"slope_se", f.slope_se}, {"target_slope", -c.d + c.alpha}};
  }
  return o;
}

inline Outcome cmd_coalescent(const RunConfig& c) {
  if (c.masses.empty()) throw ConfigError("coalescent: --masses must be non-empty");
  if (c.method != "gillespie" && c.method != "final") throw ConfigError("coalescent: --method is gillespie or final");
  if (!(c.t >= 0.0)) throw ConfigError("coalescent: --t must be >= 0");
  SizeMultiset init;
  try {
    init = SizeMultiset(c.masses);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (double q : c.p_list)
    if (!(q >= 1.0)) throw ConfigError("coalescent: p must be >= 1");
  const auto sums = parallel_map<std::vector<double>>(c.reps, c.workers, [&](std::uint64_t r) {
    Philox rng(sub_seed(c.seed, 0xc0a1ULL), r);
    const CoalescentState s{init, 0.0};
    const auto out = c.method == "gillespie" ? run_gillespie(s, c.t, rng) : run_final(s, c.t, rng);
    std::vector<double> v;
    for (double q : c.p_list) v.push_back(out.masses.power_sum(q));
    return v;
  });
  // Exact comparison when the masses form a partition of at most 6 points.
  std::optional<std::vector<double>> law;
  std::optional<PartitionLattice> lat;
  const double total = init.total();
  if (init.integral() && total <= kOracleMaxGround) {
    std::vector<int> sizes;
    for (double m : c.masses) sizes.push_back(static_cast<int>(m));
    lat.emplace(static_cast<int>(total));
    law = exact_coalescent_law(*lat, PartitionLattice::from_block_sizes(sizes), c.t);
  }
  Outcome o{Csv({"t", "p", "estimate", "stderr", "replicas", "oracle"})};
  for (std::size_t k = 0; k < c.p_list.size(); ++k) {
    Accumulator a;
    for (const auto& v : sums) a.add(v[k]);
    const auto e = a.estimate();
    o.csv.row({num(c.t), num(c.p_list[k]), num(e.mean), num(e.se), std::to_string(e.replicas),
               law ? num(exact_moments(*lat, *law, c.p_list[k])) : "NA"});
  }
  return o;
}

inline Outcome cmd_renorm(const RunConfig& c, double beta) {
  const auto p = c.params(beta);
  if (c.mode != "resample" && c.mode != "disjoint") throw ConfigError("renorm: --mode is resample or disjoint");
  if (c.steps < 1 || c.draws == 0) throw ConfigError("renorm: steps and draws must be positive");
  RenormOptions ro;
  ro.mode = c.mode == "disjoint" ? RenormOptions::Mode::disjoint : RenormOptions::Mode::resample;
  if (ro.mode == RenormOptions::Mode::disjoint) {
    double need = static_cast<double>(c.draws);
    for (int s = 0; s < c.steps; ++s) need *= static_cast<double>(p.branching());
    if (need > 1e8) throw ConfigError("renorm: disjoint mode needs draws * L^{d steps} <= 1e8 initial copies");
  }
  if (c.compare > 0) check_scale(p, c.compare);
  const auto sm = iterate_renorm(p, c.steps, c.draws, c.seed, c.compare, nullptr, ro);
  Outcome o{Csv({"step", "mean_norm2", "stderr", "max_q10", "max_q50", "max_q90", "deficit", "ks_norm2_stat",
                 "ks_norm2_p", "ks_max_stat", "ks_max_p"})};
  for (const auto& s : sm) {
    const auto na = std::string("NA");
    o.csv.row({std::to_string(s.step), num(s.mean_norm2.mean), num(s.mean_norm2.se), num(s.max_q10), num(s.max_q50),
               num(s.max_q90), num(s.deficit), s.compared ? num(s.ks_norm2.statistic) : na,
               s.compared ? num(s.ks_norm2.p_value) : na, s.compared ? num(s.ks_max.statistic) : na,
               s.compared ? num(s.ks_max.p_value) : na});
  }
  return o;
}

/// Oracle and identity checks at reduced Monte Carlo sizes.
inline Outcome cmd_verify(const RunConfig& c) {
  Outcome o{Csv({"check", "value", "tolerance", "pass"})};
  bool all = true;
  auto rec = [&](const std::string& name, double value, double tol, bool pass) {
    o.csv.row({name, num(value), num(tol), pass ? "1" : "0"});
    all = all && pass;
  };
  {
    const auto out = detail::philox4x32_10({0, 0, 0, 0}, {0, 0});
    rec("philox_known_answer", out[0], 0, out == std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu,
                                                                              0x9b00dbd8u});
  }
  {
    bool ok = true;
    for (int n = 2; n <= 30; ++n) ok = ok && lemma413_lhs(n) == lemma413_rhs(n);
    rec("double_factorial_identity_n2_30", ok ? 0 : 1, 0, ok);
  }
  {
    double worst = 0;
    for (double a : {0.2, 0.5, 0.6})
      for (double f : {0.1, 0.5, 0.9, 1.0}) {
        const ModelParams p{1, 2, a, 1.0};
        const double t = f * scale_time(p, 6);
        worst = std::max(worst, std::abs(integral_identity(p, 6, t) - integral_identity_quadrature(p, 6, t)));
      }
    rec("integral_identity_vs_quadrature", worst, 1e-10, worst <= 1e-10);
  }
  {
    const double v = thm14_A_selfcheck(ModelParams{1, 2, 1.0 / 3.0, 1.0}, 0.5);
    rec("critical_constant_selfcheck", v, 1e-12, v <= 1e-12);
  }
  {
    double worst = 0;
    for (double a : {0.2, 0.5, 0.6}) {
      const ModelParams p{1, 2, a, 1.0};
      worst = std::max(worst, std::abs(periodic_constant(p) - periodic_constant_partial(p, 1000)));
    }
    rec("periodic_constant_partial_sum", worst, 1e-12, worst <= 1e-12);
  }
  {
    double worst = 0;
    for (double a : {0.2, 0.5, 0.6}) {
      const ModelParams p{1, 2, a, 1.7};
      PartitionLattice lat(4);
      const auto x = exact_eta_law(p, 2, lat), y = exact_recursive_law(p, 2, lat);
      for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
    }
    rec("percolation_equals_recursive_law", worst, 1e-8, worst <= 1e-8);
  }
  {
    PartitionLattice lat(4);
    const Rgs init{0, 1, 2, 3};
    double worst = 0;
    for (double t : {0.1, 0.5, 1.0})
      for (int p = 2; p <= 3; ++p) {
        const double h = 1e-5;
        const auto law = exact_coalescent_law(lat, init, t);
        MomentVector mv;
        mv.marginal[p + 2] = exact_moments(lat, law, p + 2);
        for (int k = 1; k <= p - 1; ++k)
          mv.set_cross(k + 1, p - k + 1, exact_cross_moment(lat, law, k + 1, p - k + 1));
        const double fd = (exact_moments(lat, exact_coalescent_law(lat, init, t + h), p) -
                           exact_moments(lat, exact_coalescent_law(lat, init, t - h), p)) /
                          (2 * h);
        worst = std::max(worst, std::abs(fd - lemma21_rhs(mv, p)));
      }
    rec("moment_derivative_finite_difference", worst, 1e-6, worst <= 1e-6);
  }
  {
    PartitionLattice lat(5);
    const Rgs init = PartitionLattice::from_block_sizes({2, 1, 1, 1});
    const double t = 0.5;
    const auto law = exact_coalescent_law(lat, init, t);
    double worst_z = 0;
    const std::uint64_t reps = 20000;
    for (int p = 2; p <= 4; ++p) {
      Accumulator a;
      Philox rng(sub_seed(c.seed, 0x7e51ULL), static_cast<std::uint64_t>(p));
      for (std::uint64_t r = 0; r < reps; ++r)
        a.add(run_gillespie(CoalescentState{SizeMultiset({2, 1, 1, 1}), 0.0}, t, rng).masses.power_sum(p));
      const auto e = a.estimate();
      worst_z = std::max(worst_z, std::abs(e.mean - exact_moments(lat, law, p)) / e.se);
    }
    rec("gillespie_vs_exact_law_z", worst_z, 4, worst_z <= 4);
  }
  o.extra = {{"all_pass", all}};
  if (!all) o.exit_code = kExitFailed;
  return o;
}

// ---------------------------------------------------------------------------
// Dispatch

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> v{"betac", "sample",     "moments", "tail",   "sizebias",
                                          "lpnorm", "twopoint", "coalescent", "renorm", "verify"};
  return v;
}

inline void write_outputs(const RunConfig& c, const std::string& cmd, const Outcome& o, double wall,
                          const json& beta_info) {
  std::filesystem::create_directories(c.out_dir);
  const auto base = std::filesystem::path(c.out_dir) / cmd;
  std::ofstream(base.string() + ".csv", std::ios::binary) << o.csv.str();
  json side{{"schema_version", kOutputSchemaVersion},
            {"artifact_version", std::string("hierperc ") + kVersion},
            {"command", cmd},
            {"columns", o.csv.header()},
            {"config", c.to_json()},
            {"seed", c.seed},
            {"beta", beta_info},
            {"wall_time_seconds", wall},
            {"exit_code", o.exit_code},
            {"results", o.extra}};
  std::ofstream(base.string() + ".json") << side.dump(2) << '\n';
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig c;
  if (const char* env = std::getenv("HIERPERC_SEED")) {
    try {
      c.seed = std::stoull(env);
    } catch (const std::exception&) {
      err << "HIERPERC_SEED must be an unsigned integer\n";
      return kExitInvalid;
    }
  }
  c.workers = default_workers();

  CLI::App app{"hierperc: hierarchical long-range percolation experiments"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--d", c.d, "lattice dimension");
  app.add_option("--L", c.L, "block side");
  app.add_option("--alpha", c.alpha, "kernel exponent");
  app.add_option("--beta", c.beta, "coupling, or 'auto' for the estimated critical point");
  app.add_option("--seed", c.seed, "64-bit seed (default: HIERPERC_SEED or a fixed constant)");
  app.add_option("--workers", c.workers, "worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--out-dir", c.out_dir, "output directory");
  app.add_option("--config", c.config_file, "key=value file; its values override flags");
  app.add_option("--tol", c.tol, "relative bracket tolerance");
  app.add_option("--budget", c.budget, "betac work budget (vertex-replicas)");
  app.add_option("--n-start", c.n_start, "betac starting scale");
  app.add_option("--n-max", c.n_max, "betac largest scale");
  app.add_option("--reps-max", c.reps_max, "betac replica ceiling per probe");
  app.add_option("--n", c.n_list, "scale(s)")->delimiter(',');
  app.add_option("--p", c.p_list, "exponent(s)")->delimiter(',');
  app.add_option("--fractions", c.fractions, "top-layer time fractions t/t_n")->delimiter(',');
  app.add_option("--reps", c.reps, "replicas");
  app.add_flag("--periodic", c.periodic, "periodic boundary at the top layer");
  app.add_option("--grid-per-decade", c.grid_per_decade, "tail grid density")->check(CLI::Range(1, 100));
  app.add_option("--masses", c.masses, "initial coalescent masses")->delimiter(',');
  app.add_option("--t", c.t, "coalescent duration");
  app.add_option("--method", c.method, "gillespie | final");
  app.add_option("--steps", c.steps, "renormalization steps");
  app.add_option("--draws", c.draws, "particles per law");
  app.add_option("--compare", c.compare, "compare with direct simulation up to this step");
  app.add_option("--mode", c.mode, "renorm mode: disjoint | resample");
  std::string selected;
  for (const auto& name : subcommands())
    app.add_subcommand(name, "run the " + name + " experiment")->callback([&selected, name] { selected = name; });

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
  try {
    // First pass only to locate --config; its entries are appended so they win.
    std::string cfg;
    for (std::size_t i = args.size(); i-- > 0;) {
      const std::string& a = args[i];
      if (a == "--config" && i > 0) cfg = args[i - 1];
      if (a.rfind("--config=", 0) == 0) cfg = a.substr(9);
    }
    if (!cfg.empty()) {
      auto extra = config_args(cfg);
      std::vector<std::string> rev(extra.rbegin(), extra.rend());
      rev.insert(rev.end(), args.begin(), args.end());
      args = std::move(rev);
    }
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitInvalid;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (c.reps == 0) throw ConfigError("--reps must be >= 1");
    if (c.n_list.empty() || c.p_list.empty()) throw ConfigError("--n and --p must be non-empty");
    c.params().validate();
    Outcome o{Csv({})};
    json beta_info = json::object();
    if (selected == "betac") {
      o = cmd_betac(c);
    } else if (selected == "coalescent") {
      o = cmd_coalescent(c);
    } else if (selected == "verify") {
      o = cmd_verify(c);
    } else {
      const auto br = resolve_beta(c);
      beta_info = br.info;
      if (br.inconclusive) {
        err << "beta auto: bracketing was inconclusive\n";
        o = Outcome{Csv({"status"})};
        o.csv.row({"inconclusive"});
        o.exit_code = kExitInconclusive;
      } else if (selected == "sample") {
        o = cmd_sample(c, br.beta);
      } else if (selected == "moments") {
        o = cmd_moments(c, br.beta);
      } else if (selected == "tail") {
        o = cmd_tail(c, br.beta);
      } else if (selected == "sizebias") {
        o = cmd_sizebias(c, br.beta);
      } else if (selected == "lpnorm") {
        o = cmd_lpnorm(c, br.beta);
      } else if (selected == "twopoint") {
        o = cmd_twopoint(c, br.beta);
      } else if (selected == "renorm") {
        o = cmd_renorm(c, br.beta);
      }
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_outputs(c, selected, o, wall, beta_info);
    out << o.csv.str();
    return o.exit_code;
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << '\n';
  } catch (const std::domain_error& e) {
    err << "invalid configuration: " << e.what() << '\n';
  } catch (const std::out_of_range& e) {
    err << "invalid configuration: " << e.what() << '\n';
  }
  return kExitInvalid;
}

}  // namespace hierperc::cli
