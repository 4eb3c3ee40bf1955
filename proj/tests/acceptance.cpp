// Acceptance suite: one PASS/FAIL/SKIP line per criterion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "oracle.hpp"
#include "quadtask/bench/bench.hpp"
#include "quadtask/gen/experiment.hpp"
#include "quadtask/ops/ops.hpp"

using namespace quadtask;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// Collects the first failure and keeps the worst observed value.
struct Tally {
  int cases = 0;
  double worst = 0.0;
  std::string failure;

  void observe(double value, double limit, const std::string& what) {
    ++cases;
    worst = std::max(worst, value);
    if (!(value <= limit) && failure.empty()) failure = what + ": " + fmt("%.3g", value) + " > " + fmt("%.3g", limit);
  }
  void fail(const std::string& what) {
    if (failure.empty()) failure = what;
  }
};

// ---------------------------------------------------------------- generators

Eigen::MatrixXd banded(std::mt19937_64& rng, Index n, Index b) {
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = std::max<Index>(0, j - b); i <= std::min(n - 1, j + b); ++i) m(i, j) = val(rng);
  return m;
}

Eigen::MatrixXd scattered(std::mt19937_64& rng, Index n, double density) {
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::bernoulli_distribution keep(density);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      if (keep(rng)) m(i, j) = val(rng);
  return m;
}

Eigen::MatrixXd spd(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> g;
  const Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
  Eigen::MatrixXd a = oracle::product(b, oracle::transpose(b));
  for (Index i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return oracle::symmetric_from_upper(oracle::upper(a));
}

// Random geometry, runtime and operand for one oracle instance.
struct Instance {
  Index n = 0;
  MatrixParams params;
  RuntimeConfig runtime;
};

Instance random_instance(std::mt19937_64& rng, Index max_n) {
  static constexpr Index kLeaf[] = {16, 32, 64, 128};
  static constexpr LeafKind kKinds[] = {LeafKind::dense, LeafKind::block_sparse, LeafKind::hierarchical};
  Instance in;
  in.n = std::uniform_int_distribution<Index>(1, max_n)(rng);
  const Index leaf = kLeaf[rng() % 4];
  const Index bs = std::min<Index>(leaf, Index{4} << (rng() % 3));
  in.params = MatrixParams::make(in.n, leaf, kKinds[rng() % 3], bs);
  in.runtime.n_workers = 1 + rng() % 4;
  in.runtime.seed = rng();
  in.runtime.mode = rng() % 2 ? ExecutionMode::simulate : ExecutionMode::shared_memory;
  return in;
}

Eigen::MatrixXd random_operand(std::mt19937_64& rng, Index n) {
  switch (rng() % 3) {
    case 0:
      return banded(rng, n, std::uniform_int_distribution<Index>(0, std::max<Index>(1, n / 8))(rng));
    case 1:
      return scattered(rng, n, std::uniform_real_distribution<double>(0.005, 0.2)(rng));
    default: {
      const Index block = std::uniform_int_distribution<Index>(1, 40)(rng);
      return oracle::random_sparse(rng, n, block, std::uniform_real_distribution<double>(0.05, 0.4)(rng), 0.7);
    }
  }
}

Eigen::MatrixXd symmetric(const Eigen::MatrixXd& a) { return oracle::symmetric_from_upper(oracle::upper(a)); }

// Greedy global truncation on the dense matrix: units are the cells of a
// bs x bs grid (single elements for dense leaves), dropped smallest first,
// equal norms together, while the dropped squares stay within tau^2.
Eigen::MatrixXd truncation_oracle(const Eigen::MatrixXd& a, Index unit, double tau) {
  const Index n = a.rows();
  struct Cell {
    double norm;
    Index i, j;
  };
  std::vector<Cell> cells;
  for (Index j = 0; j < n; j += unit)
    for (Index i = 0; i < n; i += unit) {
      const Eigen::MatrixXd blk = a.block(i, j, std::min(unit, n - i), std::min(unit, n - j));
      const double norm = oracle::frobenius(blk);
      if (norm > 0.0) cells.push_back({norm, i, j});
    }
  std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) { return x.norm < y.norm; });
  Eigen::MatrixXd out = a;
  long double used = 0;
  const long double budget = static_cast<long double>(tau) * tau;
  for (std::size_t k = 0; k < cells.size();) {
    std::size_t end = k;
    long double group = 0;
    for (; end < cells.size() && cells[end].norm == cells[k].norm; ++end)
      group += static_cast<long double>(cells[end].norm) * cells[end].norm;
    if (used + group > budget) break;
    used += group;
    for (; k < end; ++k)
      out.block(cells[k].i, cells[k].j, std::min(unit, n - cells[k].i), std::min(unit, n - cells[k].j)).setZero();
  }
  return out;
}

// ---------------------------------------------------------------- criteria

std::string g_bench_exe;
unsigned g_min_cores = 4;

Outcome reference_flops() {
  const double want[] = {7.022e12, 14.22e12, 28.63e12, 57.44e12, 115.1e12, 230.3e12, 460.8e12};
  Index n = 100000;
  double worst_rel = 0.0, worst_secs = 0.0;
  for (double w : want) {
    double got = 0.0;
    const auto start = Clock::now();
    if (!g_bench_exe.empty()) {
      const std::string cmd = g_bench_exe + " flops --case banded --n " + std::to_string(n) + " --b 3000";
      std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
      if (!pipe) return {Status::fail, "cannot run " + cmd};
      std::string out;
      std::array<char, 256> buf{};
      while (std::fgets(buf.data(), buf.size(), pipe.get())) out += buf.data();
      const auto pos = out.find("flops=");
      if (pos == std::string::npos) return {Status::fail, "no flops= line from: " + cmd};
      got = std::stod(out.substr(pos + 6));
    } else {
      got = static_cast<double>(flop_count_exact(ExperimentCase{Family::banded, n, 3000}));
    }
    const double secs = seconds_since(start);
    const double rel = std::abs(got - w) / w;
    worst_rel = std::max(worst_rel, rel);
    worst_secs = std::max(worst_secs, secs);
    if (rel > 1e-3) return {Status::fail, "n=" + std::to_string(n) + " flops " + fmt("%.6e", got) + " vs " + fmt("%.4e", w)};
    if (secs >= 1.0) return {Status::fail, "n=" + std::to_string(n) + " took " + fmt("%.2f", secs) + " s"};
    n *= 2;
  }
  return {Status::pass, std::string("7 banded sizes via ") + (g_bench_exe.empty() ? "flop_count_exact" : "bench flops") +
                            ", worst rel err " + fmt("%.2e", worst_rel) + ", slowest " + fmt("%.3f", worst_secs) + " s"};
}

Outcome reference_block_sizes() {
  const Index growing[] = {15716, 19652, 24621, 30899, 38825, 48828, 61446};
  const Index random[] = {15716, 15705, 15700, 15697, 15696, 15695, 15695};
  const auto start = Clock::now();
  Index n = 100000;
  double worst = 0.0;
  std::string got_line;
  for (int i = 0; i < 7; ++i) {
    const Index g = solve_block_size(Family::growing_block, n, 3000);
    const Index r = solve_block_size(Family::random_blocks, n, 3000);
    for (auto [x, w] : {std::pair{g, growing[i]}, std::pair{r, random[i]}}) {
      const double rel = std::abs(static_cast<double>(x - w)) / static_cast<double>(w);
      worst = std::max(worst, rel);
      if (rel > 5e-3)
        return {Status::fail, "n=" + std::to_string(n) + " solved " + std::to_string(x) + " vs " + std::to_string(w)};
    }
    if (i == 0 || i == 6) got_line += " n=" + std::to_string(n) + ":" + std::to_string(g) + "/" + std::to_string(r);
    n *= 2;
  }
  const double secs = seconds_since(start);
  if (secs >= 10.0) return {Status::fail, "took " + fmt("%.2f", secs) + " s"};
  return {Status::pass, "growing/random" + got_line + ", worst rel err " + fmt("%.2e", worst) + ", " +
                            fmt("%.2f", secs) + " s"};
}

Outcome flop_oracle() {
  std::mt19937_64 rng(2024);
  int triple_checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto family = static_cast<Family>(trial % 3);
    const Index n = std::uniform_int_distribution<Index>(1, 2000)(rng);
    const Index b = std::uniform_int_distribution<Index>(0, 60)(rng);
    ExperimentCase c{family, n, b, 0, 0, rng()};
    if (family == Family::random_blocks) c.n_blocks = std::uniform_int_distribution<Index>(1, 4)(rng);
    // Random blocks fill at most half the dimension so a placement exists.
    if (family != Family::banded)
      c.block_size = std::uniform_int_distribution<Index>(0, family == Family::random_blocks ? n / (2 * c.n_blocks) : n / 3)(rng);
    // Membership recomputed here from the definition; only the seeded
    // placement comes from the library.
    std::vector<Index> starts;
    if (family == Family::growing_block) starts = {0};
    if (family == Family::random_blocks) starts = make_pattern(c).block_starts();
    const Index s = c.block_size;
    for (Index t : starts)
      if (t < 0 || t + s > n) return {Status::fail, "block start out of range in trial " + std::to_string(trial)};
    std::vector<char> in(static_cast<std::size_t>(n * n), 0);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        bool v = std::abs(i - j) <= b;
        for (Index t : starts) v = v || (t <= i && i < t + s && t <= j && j < t + s);
        in[static_cast<std::size_t>(i * n + j)] = v;
      }
    auto at = [&](Index i, Index j) { return in[static_cast<std::size_t>(i * n + j)] != 0; };
    // Multiplications A(i,k) * A(k,j), one multiply and one add each.
    std::uint64_t brute = 0;
    if (n <= 150) {
      for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k)
          if (at(i, k))
            for (Index j = 0; j < n; ++j) brute += at(k, j);
      ++triple_checked;
    } else {
      for (Index k = 0; k < n; ++k) {
        std::uint64_t col = 0, row = 0;
        for (Index i = 0; i < n; ++i) {
          col += at(i, k);
          row += at(k, i);
        }
        brute += col * row;
      }
    }
    brute *= 2;
    const std::uint64_t got = flop_count_exact(c);
    if (got != brute)
      return {Status::fail, to_string(family) + " n=" + std::to_string(n) + " b=" + std::to_string(b) + ": " +
                                std::to_string(got) + " vs brute " + std::to_string(brute)};
  }
  return {Status::pass, "50 seeded instances exact (" + std::to_string(triple_checked) + " by literal triple loop)"};
}

Outcome oracle_suite() {
  std::mt19937_64 rng(4);
  const auto start = Clock::now();
  constexpr int kInstances = 200;
  constexpr Index kMaxN = 512;
  std::map<std::string, Tally> tallies;
  std::uniform_real_distribution<double> coef(-2.0, 2.0);

  for (int t = 0; t < kInstances; ++t) {
    {
      const Instance in = random_instance(rng, kMaxN);
      Runtime rt(in.runtime);
      const bool sym = rng() % 2;
      Eigen::MatrixXd a = random_operand(rng, in.n), b = random_operand(rng, in.n);
      if (sym) a = symmetric(a), b = symmetric(b);
      const double alpha = coef(rng), beta = coef(rng);
      auto ma = build_from_dense(rt, in.params, a, OwnerPolicy{in.runtime.n_workers}, sym);
      auto mb = build_from_dense(rt, in.params, b, OwnerPolicy{in.runtime.n_workers}, sym);
      Eigen::MatrixXd want(in.n, in.n);
      for (Index j = 0; j < in.n; ++j)
        for (Index i = 0; i < in.n; ++i) want(i, j) = alpha * a(i, j) + beta * b(i, j);
      tallies["add"].observe(oracle::relative_error(to_dense(rt, add(rt, ma, mb, alpha, beta)), want), 1e-15, "add");

      const double c = coef(rng);
      Eigen::MatrixXd shifted = a;
      for (Index i = 0; i < in.n; ++i) shifted(i, i) += c;
      tallies["add_scaled_identity"].observe(
          oracle::relative_error(to_dense(rt, add_scaled_identity(rt, ma, c)), shifted), 1e-12, "add_scaled_identity");
    }
    {
      const Instance in = random_instance(rng, kMaxN);
      Runtime rt(in.runtime);
      const Eigen::MatrixXd a = random_operand(rng, in.n), b = random_operand(rng, in.n);
      const OwnerPolicy owners{in.runtime.n_workers};
      auto ma = build_from_dense(rt, in.params, a, owners), mb = build_from_dense(rt, in.params, b, owners);
      tallies["regular multiply"].observe(
          oracle::relative_error(to_dense(rt, multiply(rt, ma, mb)), oracle::product(a, b)), 1e-12, "regular multiply");

      const Eigen::MatrixXd s = symmetric(a);
      auto ms = build_from_dense(rt, in.params, s, owners, true);
      auto sq = symmetric_square(rt, ms);
      if (!sq.symmetric) tallies["symmetric_square"].fail("result not flagged symmetric");
      tallies["symmetric_square"].observe(oracle::relative_error(to_dense(rt, sq), oracle::product(s, s)), 1e-12,
                                          "symmetric_square");

      const bool t_first = rng() % 2;
      auto rk = rank_k(rt, mb, t_first ? Transpose::yes : Transpose::no);
      const Eigen::MatrixXd bt = oracle::transpose(b);
      const Eigen::MatrixXd rk_want = t_first ? oracle::product(bt, b) : oracle::product(b, bt);
      tallies["rank_k"].observe(oracle::relative_error(to_dense(rt, rk), rk_want), 1e-12, "rank_k");
    }
    {
      Instance in = random_instance(rng, kMaxN);
      if (in.params.leaf_kind == LeafKind::hierarchical && rng() % 2) in.params.leaf_kind = LeafKind::dense;
      Runtime rt(in.runtime);
      const Eigen::MatrixXd a = random_operand(rng, in.n);
      auto ma = build_from_dense(rt, in.params, a, OwnerPolicy{in.runtime.n_workers});
      const double tau = std::uniform_real_distribution<double>(0.0, 0.8)(rng) * oracle::frobenius(a);
      const Index unit = in.params.leaf_kind == LeafKind::dense ? 1 : in.params.block_size;
      const auto got = truncate(rt, ma, tau);
      tallies["truncate"].observe(oracle::relative_error(to_dense(rt, got.matrix), truncation_oracle(a, unit, tau)), 1e-12,
                                  "truncate");
    }
    {
      const Instance in = random_instance(rng, kMaxN);
      Runtime rt(in.runtime);
      const bool sym = rng() % 2;
      std::uniform_int_distribution<Index> idx(0, in.n - 1);
      std::uniform_real_distribution<double> val(-1.0, 1.0);
      const int count = std::uniform_int_distribution<int>(0, 4000)(rng);
      std::vector<Triplet> entries;
      Eigen::MatrixXd want = Eigen::MatrixXd::Zero(in.n, in.n);
      for (int e = 0; e < count; ++e) {
        Triplet tr{idx(rng), idx(rng), val(rng)};
        if (e > 0 && rng() % 8 == 0) tr.row = entries.back().row, tr.col = entries.back().col;  // duplicates sum
        entries.push_back(tr);
      }
      for (const auto& tr : entries) {
        if (!sym) want(tr.row, tr.col) += tr.value;
        else if (tr.row <= tr.col) want(tr.row, tr.col) += tr.value;
      }
      if (sym) want = symmetric(want);
      const Matrix m = rng() % 2 ? assign_from_triplets(rt, in.params, entries, sym)
                                 : build_from_triplets(rt, in.params, entries, OwnerPolicy{in.runtime.n_workers}, sym);
      std::vector<Coord> probes;
      for (int e = 0; e < 2000; ++e) probes.push_back({idx(rng), idx(rng)});
      for (const auto& tr : entries) probes.push_back({tr.row, tr.col});
      const std::vector<double> got = extract_elements(rt, m, probes);
      Eigen::VectorXd g(static_cast<Index>(probes.size())), w(static_cast<Index>(probes.size()));
      for (std::size_t k = 0; k < probes.size(); ++k) {
        g(static_cast<Index>(k)) = got[k];
        w(static_cast<Index>(k)) = want(probes[k].row, probes[k].col);
      }
      tallies["build/extract"].observe(std::max(oracle::relative_error(g, w), oracle::relative_error(to_dense(rt, m), want)),
                                       1e-15, "build/extract");
    }
  }
  const double secs = seconds_since(start);
  std::string detail = std::to_string(kInstances) + " instances per op in " + fmt("%.1f", secs) + " s; worst:";
  for (const auto& [name, t] : tallies) {
    detail += " " + name + " " + fmt("%.1e", t.worst);
    if (!t.failure.empty()) return {Status::fail, t.failure};
  }
  if (secs >= 300.0) return {Status::fail, "took " + fmt("%.0f", secs) + " s"};
  return {Status::pass, detail};
}

Outcome inverse_cholesky_residual() {
  std::mt19937_64 rng(5);
  Tally tally;
  for (int t = 0; t < 50; ++t) {
    Instance in = random_instance(rng, 256);
    Runtime rt(in.runtime);
    const Eigen::MatrixXd a = spd(rng, in.n);
    auto z = inverse_cholesky(rt, build_from_dense(rt, in.params, a, OwnerPolicy{in.runtime.n_workers}, true));
    const Eigen::MatrixXd zd = to_dense(rt, z);
    Eigen::MatrixXd r = oracle::product(oracle::product(oracle::transpose(zd), a), zd);
    for (Index i = 0; i < in.n; ++i) r(i, i) -= 1.0;
    tally.observe(oracle::frobenius(r), 1e-8, "n=" + std::to_string(in.n) + " residual");
    if (oracle::upper(zd) != zd) tally.fail("Z not upper triangular at n=" + std::to_string(in.n));
  }
  if (!tally.failure.empty()) return {Status::fail, tally.failure};
  return {Status::pass, "50 SPD instances, worst ||Z^T A Z - I||_F " + fmt("%.2e", tally.worst)};
}

Outcome truncation_contract() {
  std::mt19937_64 rng(6);
  Tally tally;
  int identity = 0, emptied = 0;
  for (int t = 0; t < 1000; ++t) {
    Instance in = random_instance(rng, 160);
    Runtime rt(in.runtime);
    const bool sym = rng() % 4 == 0;
    Eigen::MatrixXd a = random_operand(rng, in.n);
    if (sym) a = symmetric(a);
    auto ma = build_from_dense(rt, in.params, a, OwnerPolicy{in.runtime.n_workers}, sym);
    const double norm = oracle::frobenius(a);
    const double tau = std::uniform_real_distribution<double>(0.0, 1.2)(rng) * norm;
    const auto got = truncate(rt, ma, tau);
    const double err = oracle::frobenius(a - to_dense(rt, got.matrix));
    tally.observe(tau > 0 ? err / tau : err, 1.0, "trial " + std::to_string(t) + " ||A - T(A)|| / tau");
    if (tau >= norm && !got.matrix.root.is_nil()) tally.fail("tau >= ||A|| left a non-nil result in trial " + std::to_string(t));

    if (t % 10 == 0) {
      const auto zero = truncate(rt, ma, 0.0);
      if (zero.matrix.root != ma.root || zero.removed_norm != 0.0) tally.fail("tau = 0 changed the matrix");
      ++identity;
      const auto all = truncate(rt, ma, norm * (1.0 + 1e-12));
      if (!all.matrix.root.is_nil()) tally.fail("tau >= ||A|| left a non-nil result");
      ++emptied;
    }
  }
  if (!tally.failure.empty()) return {Status::fail, tally.failure};
  return {Status::pass, "1000 trials, worst error/tau " + fmt("%.3f", tally.worst) + "; " + std::to_string(identity) +
                            " tau=0 identity and " + std::to_string(emptied) + " tau>=||A|| nil checks"};
}

Outcome approximate_multiply() {
  std::mt19937_64 rng(7);
  Tally tally;
  int pruned_instances = 0;
  for (int t = 0; t < 100; ++t) {
    Instance in = random_instance(rng, 320);
    Runtime rt(in.runtime);
    Eigen::MatrixXd a = random_operand(rng, in.n), b = random_operand(rng, in.n);
    // Graded magnitudes so that some subproducts are small.
    const double decay = std::uniform_real_distribution<double>(0.0, 0.1)(rng);
    for (Index j = 0; j < in.n; ++j)
      for (Index i = 0; i < in.n; ++i) {
        a(i, j) *= std::exp(-decay * std::abs(i - j));
        b(i, j) *= std::exp(-decay * std::abs(i - j));
      }
    const OwnerPolicy owners{in.runtime.n_workers};
    auto ma = build_from_dense(rt, in.params, a, owners), mb = build_from_dense(rt, in.params, b, owners);
    PruneLog log;
    if (serialize_tree(rt, multiply(rt, ma, mb, MultiplyVariant::approximate(0.0), &log)) !=
        serialize_tree(rt, multiply(rt, ma, mb)))
      tally.fail("tau = 0 differs from the regular product at n=" + std::to_string(in.n));
    if (!log.entries().empty()) tally.fail("tau = 0 pruned a subproduct");

    const Eigen::MatrixXd want = oracle::product(a, b);
    const double scale = oracle::frobenius(want);
    const double tau = std::pow(10.0, std::uniform_real_distribution<double>(-4.0, 0.0)(rng)) * scale;
    log.clear();
    const Matrix c = multiply(rt, ma, mb, MultiplyVariant::approximate(tau), &log);
    const double err = oracle::frobenius(want - to_dense(rt, c));
    // Rounding of the kept products is allowed on top of the pruned bound.
    tally.observe(err - log.bound(), 1e-12 * std::max(1.0, scale), "n=" + std::to_string(in.n) + " error above bound");
    tally.observe(log.bound() / (tau > 0 ? tau : 1.0), 1.0, "pruned bound / tau");
    pruned_instances += !log.entries().empty();
  }
  if (!tally.failure.empty()) return {Status::fail, tally.failure};
  return {Status::pass, "tau=0 bit-identical; 100 instances satisfy err <= sum ||A_sub||||B_sub|| <= tau (" +
                            std::to_string(pruned_instances) + " pruned something)"};
}

Outcome determinism() {
  const Index n = 8192;
  const ExperimentCase c{Family::banded, n, n / 32};
  const auto params = MatrixParams::make(n, 256, LeafKind::block_sparse, 64);
  Bytes reference;
  int runs = 0;
  for (auto mode : {ExecutionMode::simulate, ExecutionMode::shared_memory}) {
    for (std::size_t w : {1, 2, 4, 8}) {
      Runtime rt(RuntimeConfig{.n_workers = w, .seed = 100 + w, .mode = mode});
      const Matrix a = generate(rt, c, params, OwnerPolicy{w});
      const Bytes bytes = serialize_tree(rt, multiply(rt, a, a));
      if (reference.empty()) reference = bytes;
      if (bytes != reference)
        return {Status::fail, to_string(mode) + " with " + std::to_string(w) + " workers differs from the first run"};
      ++runs;
    }
  }
  return {Status::pass, "banded n=8192 b=256: " + std::to_string(runs) + " runs (P 1,2,4,8 x both modes) give identical " +
                            std::to_string(reference.size()) + "-byte trees"};
}

Outcome locality() {
  std::vector<double> mean;
  std::string detail = "mean bytes/worker:";
  for (std::size_t p : {2, 4, 8, 16}) {
    BenchConfig cfg;
    cfg.experiment = ExperimentCase{Family::banded, 4096 * static_cast<Index>(p), 256};
    cfg.n_workers = p;
    cfg.mode = ExecutionMode::simulate;
    cfg.repeats = 2;
    cfg.seed = 1;
    double sum = 0.0;
    const auto records = run_bench(cfg);
    for (const auto& r : records) sum += r.bytes_received.mean;
    mean.push_back(sum / static_cast<double>(records.size()));
    detail += " P" + std::to_string(p) + "=" + fmt("%.3g", mean.back());
  }
  bool ok = true;
  detail += "; ratios";
  for (std::size_t i = 1; i < mean.size(); ++i) {
    const double ratio = mean[i] / mean[i - 1];
    detail += " " + fmt("%.2f", ratio);
    ok = ok && ratio <= 1.5;
  }
  detail += " (limit 1.5)";
  return {ok ? Status::pass : Status::fail, detail};
}

Outcome speedup() {
  const unsigned cores = std::thread::hardware_concurrency();
  if (cores < g_min_cores) return {Status::skip, "needs >= 4 cores, found " + std::to_string(cores)};
  auto median_wall = [](std::size_t p) {
    BenchConfig cfg;
    cfg.experiment = ExperimentCase{Family::banded, 16384, 16384 / 32};
    cfg.n_workers = p;
    cfg.mode = ExecutionMode::shared_memory;
    cfg.leaf_dim = 256;
    cfg.repeats = 4;
    std::vector<double> walls;
    for (const auto& r : run_bench(cfg)) walls.push_back(r.wall_seconds);
    std::sort(walls.begin(), walls.end());
    return (walls[1] + walls[2]) / 2.0;
  };
  const double t1 = median_wall(1), t4 = median_wall(4);
  const double s = t1 / t4;
  return {s >= 2.5 ? Status::pass : Status::fail,
          "median wall 1 worker " + fmt("%.3f", t1) + " s, 4 workers " + fmt("%.3f", t4) + " s, speedup " + fmt("%.2f", s) +
              " (limit 2.5)"};
}

Outcome nil_transparency() {
  std::mt19937_64 rng(11);
  Tally tally;
  for (int t = 0; t < 40; ++t) {
    const Instance in = random_instance(rng, 256);
    Runtime rt(in.runtime);
    const auto& p = in.params;
    const Eigen::MatrixXd a = random_operand(rng, in.n);
    const Matrix ma = build_from_dense(rt, p, a, OwnerPolicy{in.runtime.n_workers});
    const Matrix ms = build_from_dense(rt, p, symmetric(a), OwnerPolicy{in.runtime.n_workers}, true);
    const Matrix nil{p, ChunkId{}, false}, nil_s{p, ChunkId{}, true};
    const Matrix zero = build_explicit_zero(rt, p), zero_s = build_explicit_zero(rt, p, true);
    const double c = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    auto compare = [&](const char* what, auto&& op) {
      const Eigen::MatrixXd with_nil = to_dense(rt, op(nil, nil_s));
      const Eigen::MatrixXd with_zero = to_dense(rt, op(zero, zero_s));
      tally.observe(oracle::relative_error(with_zero, with_nil), 1e-15, what);
    };
    compare("add", [&](const Matrix& z, const Matrix&) { return add(rt, ma, z, 1.0, c); });
    compare("add (left)", [&](const Matrix& z, const Matrix&) { return add(rt, z, ma, c, 1.0); });
    compare("add symmetric", [&](const Matrix&, const Matrix& zs) { return add(rt, ms, zs, c, 1.0); });
    compare("add_scaled_identity", [&](const Matrix& z, const Matrix&) { return add_scaled_identity(rt, z, c); });
    compare("multiply", [&](const Matrix& z, const Matrix&) { return multiply(rt, ma, z); });
    compare("multiply (left)", [&](const Matrix& z, const Matrix&) { return multiply(rt, z, ma); });
    compare("symmetric multiply", [&](const Matrix&, const Matrix& zs) {
      return multiply(rt, zs, ma, MultiplyVariant::symmetric());
    });
    compare("symmetric_square", [&](const Matrix&, const Matrix& zs) { return symmetric_square(rt, zs); });
    compare("rank_k", [&](const Matrix& z, const Matrix&) { return rank_k(rt, z); });
    compare("approximate multiply", [&](const Matrix& z, const Matrix&) {
      return multiply(rt, ma, z, MultiplyVariant::approximate(0.1));
    });
    compare("truncate", [&](const Matrix& z, const Matrix&) { return truncate(rt, z, 0.5).matrix; });
    std::vector<Coord> probes;
    std::uniform_int_distribution<Index> idx(0, in.n - 1);
    for (int e = 0; e < 200; ++e) probes.push_back({idx(rng), idx(rng)});
    for (double v : extract_elements(rt, zero, probes))
      if (v != 0.0) tally.fail("extract from an explicit zero tree returned a nonzero");
  }
  if (!tally.failure.empty()) return {Status::fail, tally.failure};
  return {Status::pass, std::to_string(tally.cases) + " nil vs explicit-zero comparisons across 11 operations, worst " +
                            fmt("%.1e", tally.worst)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quadtask acceptance suite"};
  std::vector<int> allow_fail, only;
  app.add_option("--allow-fail", allow_fail, "criteria whose FAIL does not fail the run")->delimiter(',');
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_option("--bench", g_bench_exe, "bench executable for criterion 1 (library call if empty)");
  app.add_option("--min-cores", g_min_cores, "cores below which criterion 10 is skipped");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "weak-scaling banded flop counts", reference_flops},
      {2, "weak-scaling block sizes", reference_block_sizes},
      {3, "flop oracle soundness", flop_oracle},
      {4, "dense oracle equivalence", oracle_suite},
      {5, "inverse Cholesky residual", inverse_cholesky_residual},
      {6, "truncation contract", truncation_contract},
      {7, "approximate multiply bound", approximate_multiply},
      {8, "determinism across workers and modes", determinism},
      {9, "weak-scaling communication per worker", locality},
      {10, "shared-memory speedup on 4 workers", speedup},
      {11, "nil transparency", nil_transparency},
  };

  const std::set<int> allowed(allow_fail.begin(), allow_fail.end());
  const std::set<int> selected(only.begin(), only.end());
  int pass = 0, fail = 0, skip = 0, tolerated = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::skip ? "SKIP" : "FAIL";
    std::cout << "[" << tag << "] " << c.id << " " << c.name << ": " << o.detail << " (" << fmt("%.1f", seconds_since(start))
              << " s)";
    if (o.status == Status::fail && allowed.contains(c.id)) std::cout << " [allowed]";
    std::cout << std::endl;
    if (o.status == Status::pass) ++pass;
    if (o.status == Status::skip) ++skip;
    if (o.status == Status::fail) (allowed.contains(c.id) ? tolerated : fail)++;
  }
  std::cout << "summary: " << pass << " passed, " << fail + tolerated << " failed (" << tolerated << " allowed), " << skip
            << " skipped" << std::endl;
  return fail == 0 ? 0 : 1;
}
