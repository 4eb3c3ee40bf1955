#include "quadtask/ops/ops.hpp"

#include <cmath>
#include <numeric>

#include "quadtask/error.hpp"
#include "task_types.hpp"

namespace quadtask {

using namespace ops_detail;

void PruneLog::add(const PrunedProduct& p) {
  std::lock_guard lock(mutex_);
  entries_.push_back(p);
}

std::vector<PrunedProduct> PruneLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

double PruneLog::bound() const {
  std::lock_guard lock(mutex_);
  double s = 0.0;
  for (const auto& e : entries_) s += e.norm_a * e.norm_b;
  return s;
}

void PruneLog::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
}

void register_matrix_task_types(Runtime& rt) {
  if (!rt.has_task_type(kAdd)) add_task_types(rt);
}

namespace {

ChunkId run_root(Runtime& rt, const char* type, std::vector<ChunkRef> inputs, std::any params = {}) {
  register_matrix_task_types(rt);
  const TaskHandle h = rt.register_task(TaskSpec{type, std::move(inputs), std::move(params)}, 0);
  rt.run_to_completion();
  return rt.result(h);
}

void check_compatible(const Matrix& a, const Matrix& b) {
  const MatrixParams &p = a.params, &q = b.params;
  if (p.n_logical != q.n_logical) {
    throw DimensionMismatch("matrix dimensions differ: " + std::to_string(p.n_logical) + " vs " +
                            std::to_string(q.n_logical));
  }
  if (p != q) throw ConfigError("matrices use different leaf layouts");
}

void require_symmetric(const Matrix& m, const char* what) {
  if (!m.symmetric) throw InvalidArgument(std::string(what) + " requires a symmetric (upper-stored) operand");
}

void require_general(const Matrix& m, const char* what) {
  if (m.symmetric) throw InvalidArgument(std::string(what) + " requires general operands");
}

void require_same(const Matrix& a, const Matrix& b, const char* what) {
  if (a.root != b.root || a.params != b.params || a.symmetric != b.symmetric) {
    throw InvalidArgument(std::string(what) + " takes a single operand passed twice");
  }
}

}  // namespace

Matrix add(Runtime& rt, const Matrix& a, const Matrix& b, double alpha, double beta) {
  check_compatible(a, b);
  if (a.symmetric != b.symmetric) throw InvalidArgument("cannot add a symmetric and a general matrix");
  return {a.params, run_root(rt, kAdd, {a.root, b.root}, AddParams{alpha, beta}), a.symmetric};
}

Matrix scale(Runtime& rt, const Matrix& a, double alpha) {
  if (alpha == 1.0) return a;
  if (alpha == 0.0 || a.root.is_nil()) return {a.params, ChunkId{}, a.symmetric};
  return {a.params, run_root(rt, kScale, {a.root}, ScaleParams{alpha}), a.symmetric};
}

Matrix add_scaled_identity(Runtime& rt, const Matrix& a, double c) {
  if (c == 0.0) return a;
  return {a.params, run_root(rt, kAddIdentity, {a.root}, IdentityParams{c, a.params, 0, 0}), a.symmetric};
}

Matrix multiply(Runtime& rt, const Matrix& a, const Matrix& b, const MultiplyVariant& v, PruneLog* log) {
  check_compatible(a, b);
  using K = MultiplyVariant::Kind;
  switch (v.kind) {
    case K::regular:
      return multiply_transposed(rt, a, b, Transpose::no, Transpose::no);
    case K::symmetric: {
      if (a.symmetric == b.symmetric) throw InvalidArgument("symmetric multiply needs exactly one symmetric operand");
      const bool left = a.symmetric;
      const Matrix& s = left ? a : b;
      const Matrix& g = left ? b : a;
      return {a.params, run_root(rt, kSymm, {s.root, g.root}, SymmParams{left}), false};
    }
    case K::symmetric_square:
      require_same(a, b, "symmetric square");
      return symmetric_square(rt, a);
    case K::rank_k:
      require_same(a, b, "rank-k construction");
      return rank_k(rt, a, Transpose::no);
    case K::approximate: {
      require_general(a, "approximate multiply");
      require_general(b, "approximate multiply");
      if (!(v.tau >= 0.0)) throw InvalidArgument("approximate multiply tolerance must be non-negative");
      MultiplyParams p{Transpose::no, Transpose::no, true, v.tau, log};
      return {a.params, run_root(rt, kMultiply, {a.root, b.root}, p), false};
    }
  }
  throw InvalidArgument("unknown multiply variant");
}

Matrix multiply_transposed(Runtime& rt, const Matrix& a, const Matrix& b, Transpose ta, Transpose tb) {
  check_compatible(a, b);
  require_general(a, "regular multiply");
  require_general(b, "regular multiply");
  return {a.params, run_root(rt, kMultiply, {a.root, b.root}, MultiplyParams{ta, tb}), false};
}

Matrix symmetric_square(Runtime& rt, const Matrix& s) {
  require_symmetric(s, "symmetric square");
  return {s.params, run_root(rt, kSysq, {s.root}), true};
}

Matrix rank_k(Runtime& rt, const Matrix& a, Transpose t) {
  require_general(a, "rank-k construction");
  return {a.params, run_root(rt, kSyrk, {a.root}, SyrkParams{t}), true};
}

TruncationResult truncate(Runtime& rt, const Matrix& a, double tau) {
  if (!(tau >= 0.0)) throw InvalidArgument("truncation tolerance must be non-negative");
  if (a.root.is_nil() || tau == 0.0) return {a, 0.0};
  const double norm = frobenius_norm(rt, a);
  if (tau >= norm) return {Matrix{a.params, ChunkId{}, a.symmetric}, norm};

  const ChunkId values_id = run_root(rt, kNorms, {a.root});
  std::vector<double> norms = rt.fetch<ValuesPayload>(values_id, kUntracked)->values();
  rt.release(values_id);

  // Stored units of a symmetric tree may stand for two mirrored ones, so
  // each counts twice against the budget.
  const double budget = a.symmetric ? tau / std::sqrt(2.0) : tau;
  const auto threshold = truncation_threshold(norms, budget);
  if (!threshold) return {a, 0.0};

  Matrix out{a.params, run_root(rt, kDrop, {a.root}, DropParams{*threshold}), a.symmetric};
  double removed_sq = 0.0;
  if (a.symmetric) {
    const double kept = frobenius_norm(rt, out);
    removed_sq = std::max(0.0, norm * norm - kept * kept);
  } else {
    for (double v : norms) {
      if (v <= *threshold) removed_sq += v * v;
    }
  }
  return {out, std::sqrt(removed_sq)};
}

Matrix inverse_cholesky(Runtime& rt, const Matrix& a) {
  require_symmetric(a, "inverse Cholesky");
  return {a.params, run_root(rt, kInvChol, {a.root}, InvCholParams{a.params, 0, 0}), false};
}

Matrix assign_from_triplets(Runtime& rt, const MatrixParams& params, std::span<const Triplet> entries,
                            bool symmetric) {
  auto kept = std::make_shared<std::vector<Triplet>>();
  kept->reserve(entries.size());
  for (const auto& t : entries) {
    if (t.row < 0 || t.col < 0 || t.row >= params.n_logical || t.col >= params.n_logical) {
      throw IndexOutOfRange("index (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                            ") outside a matrix of dimension " + std::to_string(params.n_logical));
    }
    if (!symmetric || t.row <= t.col) kept->push_back(t);
  }
  BuildParams p{params, 0, 0, 0, std::move(kept)};
  return {params, run_root(rt, kBuild, {}, std::move(p)), symmetric};
}

std::vector<double> extract_elements(Runtime& rt, const Matrix& m, std::span<const Coord> indices) {
  auto coords = std::make_shared<std::vector<Coord>>(indices.begin(), indices.end());
  for (auto& c : *coords) {
    if (c.row < 0 || c.col < 0 || c.row >= m.params.n_logical || c.col >= m.params.n_logical) {
      throw IndexOutOfRange("index (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                            ") outside a matrix of dimension " + std::to_string(m.params.n_logical));
    }
    if (m.symmetric && c.row > c.col) std::swap(c.row, c.col);
  }
  auto out = std::make_shared<std::vector<double>>(coords->size(), 0.0);
  if (m.root.is_nil() || coords->empty()) return *out;
  std::vector<std::size_t> which(coords->size());
  std::iota(which.begin(), which.end(), 0);
  run_root(rt, kExtract, {m.root}, ExtractParams{m.params, 0, 0, std::move(which), coords, out});
  return *out;
}

}  // namespace quadtask
