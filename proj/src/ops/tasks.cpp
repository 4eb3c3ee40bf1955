#include <algorithm>
#include <cmath>
#include <numeric>

#include "quadtask/error.hpp"
#include "task_types.hpp"

namespace quadtask::ops_detail {
namespace {

using Node = std::shared_ptr<const QuadNode>;

Node node_of(TaskContext& ctx, std::size_t i) { return ctx.fetch<QuadNode>(ctx.input(i)); }

ChunkId op_child(const QuadNode& n, Transpose t, int i, int k) { return is_transposed(t) ? n.child(k, i) : n.child(i, k); }

Index half_of(const MatrixParams& p, int level) { return p.node_dim(level) / 2; }

// Builds the parent from four child results, directly when they are all
// known already.
ChunkRef assemble(TaskContext& ctx, int level, const std::array<ChunkRef, 4>& parts) {
  if (std::all_of(parts.begin(), parts.end(), [](const ChunkRef& r) { return r.is_ready(); })) {
    QuadNode::Children c;
    for (int q = 0; q < 4; ++q) c[q] = parts[q].chunk();
    return store_branch(ctx, level, c);
  }
  return ctx.register_task(kAssemble, {parts.begin(), parts.end()}, AssembleParams{level});
}

// Sum of up to two freshly computed terms, first term first.
ChunkRef sum_terms(TaskContext& ctx, const std::vector<ChunkRef>& terms) {
  if (terms.empty()) return ChunkId{};
  if (terms.size() == 1) return terms[0];
  return ctx.register_task(kAdd, {terms[0], terms[1]}, AddParams{1.0, 1.0, true, true});
}

ChunkRef scaled(TaskContext& ctx, ChunkId id, double alpha, bool consume) {
  if (alpha == 1.0) return id;
  if (alpha == 0.0) return ChunkId{};
  return ctx.register_task(kScale, {id}, ScaleParams{alpha, consume});
}

ChunkRef multiply_task(TaskContext& ctx, ChunkId a, ChunkId b, Transpose ta, Transpose tb) {
  return ctx.register_task(kMultiply, {a, b}, MultiplyParams{ta, tb});
}

// ---- add / scale / assemble ----

ChunkRef add_execute(TaskContext& ctx) {
  const auto& p = ctx.params<AddParams>();
  Node a = node_of(ctx, 0), b = node_of(ctx, 1);
  auto done = [&] {
    if (p.consume_a) ctx.release(ctx.input(0));
    if (p.consume_b) ctx.release(ctx.input(1));
  };
  if (a->is_leaf() != b->is_leaf()) throw ContractViolation("add operands at different tree levels");
  if (a->is_leaf()) {
    ChunkId out = store_leaf(ctx, a->level(), leaf_add(a->leaf(), b->leaf(), p.alpha, p.beta));
    done();
    return out;
  }
  std::array<ChunkRef, 4> parts;
  for (int q = 0; q < 4; ++q) {
    const ChunkId x = a->children()[q], y = b->children()[q];
    if (x.is_nil() && y.is_nil()) {
      parts[q] = ChunkId{};
    } else if (y.is_nil()) {
      parts[q] = scaled(ctx, x, p.alpha, p.consume_a);
    } else if (x.is_nil()) {
      parts[q] = scaled(ctx, y, p.beta, p.consume_b);
    } else {
      parts[q] = ctx.register_task(kAdd, {x, y}, p);
    }
  }
  done();
  return assemble(ctx, a->level(), parts);
}

ChunkRef add_fallback(TaskContext& ctx) {
  const auto& p = ctx.params<AddParams>();
  const ChunkId x = ctx.input(0), y = ctx.input(1);
  if (x.is_nil() && y.is_nil()) return ChunkId{};
  if (x.is_nil()) return scaled(ctx, y, p.beta, p.consume_b);
  return scaled(ctx, x, p.alpha, p.consume_a);
}

ChunkRef scale_execute(TaskContext& ctx) {
  const auto& p = ctx.params<ScaleParams>();
  Node a = node_of(ctx, 0);
  if (p.consume) ctx.release(ctx.input(0));
  if (a->is_leaf()) return store_leaf(ctx, a->level(), leaf_scale(a->leaf(), p.alpha));
  std::array<ChunkRef, 4> parts;
  for (int q = 0; q < 4; ++q) {
    const ChunkId x = a->children()[q];
    parts[q] = x.is_nil() ? ChunkRef(ChunkId{}) : ChunkRef(ctx.register_task(kScale, {x}, p));
  }
  return assemble(ctx, a->level(), parts);
}

ChunkRef nil_result(TaskContext&) { return ChunkId{}; }

ChunkRef assemble_execute(TaskContext& ctx) {
  QuadNode::Children c;
  for (int q = 0; q < 4; ++q) c[q] = ctx.input(q);
  return store_branch(ctx, ctx.params<AssembleParams>().level, c);
}

// ---- add_identity ----

ChunkRef identity_recurse(TaskContext& ctx, const IdentityParams& p, const QuadNode::Children& c) {
  const Index half = half_of(p.params, p.level);
  std::array<ChunkRef, 4> parts{c[nw], c[ne], c[sw], c[se]};
  for (int q : {int(nw), int(se)}) {
    IdentityParams child = p;
    child.level = p.level + 1;
    child.offset = p.offset + (q == se ? half : 0);
    if (child.offset < p.params.n_logical) parts[q] = ctx.register_task(kAddIdentity, {c[q]}, child);
  }
  return assemble(ctx, p.level, parts);
}

ChunkRef identity_execute(TaskContext& ctx) {
  const auto& p = ctx.params<IdentityParams>();
  Node a = node_of(ctx, 0);
  if (a->is_leaf()) {
    return store_leaf(ctx, p.level, leaf_add_identity(a->leaf(), p.c, p.params.n_logical - p.offset));
  }
  return identity_recurse(ctx, p, a->children());
}

ChunkRef identity_fallback(TaskContext& ctx) {
  const auto& p = ctx.params<IdentityParams>();
  if (p.offset >= p.params.n_logical || p.c == 0.0) return ChunkId{};
  if (p.level == p.params.depth) {
    return store_leaf(ctx, p.level, leaf_add_identity(leaf_zero(p.params.leaf_shape()), p.c, p.params.n_logical - p.offset));
  }
  return identity_recurse(ctx, p, QuadNode::Children{});
}

// ---- multiply ----

ChunkRef multiply_execute(TaskContext& ctx) {
  const auto& p = ctx.params<MultiplyParams>();
  Node a = node_of(ctx, 0), b = node_of(ctx, 1);
  if (a->is_leaf() != b->is_leaf()) throw ContractViolation("multiply operands at different tree levels");
  if (a->is_leaf()) return store_leaf(ctx, a->level(), leaf_multiply(a->leaf(), b->leaf(), p.ta, p.tb));

  struct Candidate {
    int q;
    ChunkId x, y;
  };
  std::vector<Candidate> cands;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const ChunkId x = op_child(*a, p.ta, i, k), y = op_child(*b, p.tb, k, j);
        if (!x.is_nil() && !y.is_nil()) cands.push_back({quadrant(i, j), x, y});
      }
  // Linear budget split: every surviving subproduct gets tau/m, and a pruned
  // one contributes less than its share, so the total error stays below tau.
  const double share = p.approximate && !cands.empty() ? p.tau / static_cast<double>(cands.size()) : 0.0;
  // Registered in increasing locality for this worker (owned minus remote
  // input weight): it pops its heaviest local subproduct first and remote
  // ones stay queued for their owners. Summation order is unaffected.
  auto locality = [&](const Candidate& c) {
    long long score = 0;
    for (ChunkId id : {c.x, c.y}) {
      const auto w = static_cast<long long>(ctx.weight(id));
      score += ctx.owner(id) == ctx.worker() ? w : -w;
    }
    return score;
  };
  std::vector<long long> score(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) score[i] = locality(cands[i]);
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return score[l] < score[r]; });
  std::vector<ChunkRef> handles(cands.size());
  for (std::size_t i : order) {
    const auto& c = cands[i];
    if (p.approximate) {
      const double na = std::sqrt(ctx.summary(c.x)), nb = std::sqrt(ctx.summary(c.y));
      if (na * nb < share) {
        if (p.log) p.log->add({a->level() + 1, na, nb, share});
        continue;
      }
    }
    MultiplyParams child = p;
    child.tau = share;
    handles[i] = ctx.register_task(kMultiply, {c.x, c.y}, child);
  }
  std::array<std::vector<ChunkRef>, 4> terms;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (!handles[i].is_ready()) terms[cands[i].q].push_back(handles[i]);
  }
  std::array<ChunkRef, 4> parts;
  for (int q = 0; q < 4; ++q) parts[q] = sum_terms(ctx, terms[q]);
  return assemble(ctx, a->level(), parts);
}

// ---- symmetric operations; symmetric inputs store the upper triangle ----

ChunkRef symm_execute(TaskContext& ctx) {
  const bool left = ctx.params<SymmParams>().left;
  Node s = node_of(ctx, 0), b = node_of(ctx, 1);
  if (s->is_leaf()) {
    const Leaf full = leaf_symmetrize(s->leaf());
    return store_leaf(ctx, s->level(), left ? leaf_multiply(full, b->leaf()) : leaf_multiply(b->leaf(), full));
  }
  std::array<std::vector<ChunkRef>, 4> terms;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        // Left: S(i,k) * B(k,j). Right: B(i,k) * S(k,j).
        const int si = left ? i : k, sj = left ? k : j;
        const ChunkId bx = left ? b->child(k, j) : b->child(i, k);
        const ChunkId sx = si <= sj ? s->child(si, sj) : s->child(sj, si);
        if (sx.is_nil() || bx.is_nil()) continue;
        ChunkRef t;
        if (si == sj) {
          t = ctx.register_task(kSymm, {sx, bx}, SymmParams{left});
        } else {
          const Transpose ts = si > sj ? Transpose::yes : Transpose::no;
          t = left ? multiply_task(ctx, sx, bx, ts, Transpose::no) : multiply_task(ctx, bx, sx, Transpose::no, ts);
        }
        terms[quadrant(i, j)].push_back(t);
      }
  std::array<ChunkRef, 4> parts;
  for (int q = 0; q < 4; ++q) parts[q] = sum_terms(ctx, terms[q]);
  return assemble(ctx, s->level(), parts);
}

ChunkRef syrk_execute(TaskContext& ctx) {
  const Transpose t = ctx.params<SyrkParams>().trans;
  const bool tr = is_transposed(t);
  Node a = node_of(ctx, 0);
  if (a->is_leaf()) {
    return store_leaf(ctx, a->level(), leaf_upper(leaf_multiply(a->leaf(), a->leaf(), t, flip(t))));
  }
  // op(A)(i,k) is A(i,k), or A(k,i) when transposed.
  auto part = [&](int i, int k) { return tr ? a->child(k, i) : a->child(i, k); };
  std::array<std::vector<ChunkRef>, 4> terms;
  for (int k = 0; k < 2; ++k) {
    for (int d = 0; d < 2; ++d) {
      const ChunkId x = part(d, k);
      if (!x.is_nil()) terms[quadrant(d, d)].push_back(ctx.register_task(kSyrk, {x}, SyrkParams{t}));
    }
    const ChunkId x = part(0, k), y = part(1, k);
    if (!x.is_nil() && !y.is_nil()) terms[ne].push_back(multiply_task(ctx, x, y, t, flip(t)));
  }
  // Keep first-term-first order per quadrant: k = 0 terms were pushed first.
  std::array<ChunkRef, 4> parts;
  for (int q = 0; q < 4; ++q) parts[q] = sum_terms(ctx, terms[q]);
  return assemble(ctx, a->level(), parts);
}

ChunkRef sysq_execute(TaskContext& ctx) {
  Node s = node_of(ctx, 0);
  if (s->is_leaf()) {
    const Leaf full = leaf_symmetrize(s->leaf());
    return store_leaf(ctx, s->level(), leaf_upper(leaf_multiply(full, full)));
  }
  const ChunkId s00 = s->child(0, 0), s01 = s->child(0, 1), s11 = s->child(1, 1);
  std::array<std::vector<ChunkRef>, 4> terms;
  if (!s00.is_nil()) terms[nw].push_back(ctx.register_task(kSysq, {s00}));
  if (!s01.is_nil()) terms[nw].push_back(ctx.register_task(kSyrk, {s01}, SyrkParams{Transpose::no}));
  if (!s00.is_nil() && !s01.is_nil()) terms[ne].push_back(ctx.register_task(kSymm, {s00, s01}, SymmParams{true}));
  if (!s11.is_nil() && !s01.is_nil()) terms[ne].push_back(ctx.register_task(kSymm, {s11, s01}, SymmParams{false}));
  if (!s01.is_nil()) terms[se].push_back(ctx.register_task(kSyrk, {s01}, SyrkParams{Transpose::yes}));
  if (!s11.is_nil()) terms[se].push_back(ctx.register_task(kSysq, {s11}));
  std::array<ChunkRef, 4> parts;
  for (int q = 0; q < 4; ++q) parts[q] = sum_terms(ctx, terms[q]);
  return assemble(ctx, s->level(), parts);
}

// ---- inverse Cholesky ----

ChunkRef inv_chol_execute(TaskContext& ctx) {
  const auto& p = ctx.params<InvCholParams>();
  Node a = node_of(ctx, 0);
  if (a->is_leaf()) {
    try {
      return store_leaf(ctx, p.level, leaf_inverse_cholesky(a->leaf(), p.params.n_logical - p.offset));
    } catch (const NotPositiveDefinite& e) {
      throw NotPositiveDefinite(p.offset + e.index());
    }
  }
  const Index half = half_of(p.params, p.level);
  InvCholParams top = p, bottom = p;
  top.level = bottom.level = p.level + 1;
  bottom.offset = p.offset + half;

  const ChunkId a00 = a->child(0, 0), a01 = a->child(0, 1), a11 = a->child(1, 1);
  const TaskHandle z00 = ctx.register_task(kInvChol, {a00}, top);
  if (bottom.offset >= p.params.n_logical) return assemble(ctx, p.level, {z00, ChunkId{}, ChunkId{}, ChunkId{}});

  // X = Z00^T A01, S = A11 - X^T X, Z11 = ichol(S), Z01 = -(Z00 X) Z11.
  const TaskHandle x = ctx.register_task(kMultiply, {z00, a01}, MultiplyParams{Transpose::yes, Transpose::no});
  const TaskHandle xtx = ctx.register_task(kSyrk, {x}, SyrkParams{Transpose::yes});
  const TaskHandle s = ctx.register_task(kAdd, {a11, xtx}, AddParams{1.0, -1.0, false, true});
  const TaskHandle z11 = ctx.register_task(kInvChol, {s}, bottom);
  const TaskHandle w = ctx.register_task(kMultiply, {z00, x}, MultiplyParams{});
  const TaskHandle wz = ctx.register_task(kMultiply, {w, z11}, MultiplyParams{});
  const TaskHandle z01 = ctx.register_task(kScale, {wz}, ScaleParams{-1.0, true});
  return assemble(ctx, p.level, {z00, z01, ChunkId{}, z11});
}

ChunkRef inv_chol_fallback(TaskContext& ctx) {
  const auto& p = ctx.params<InvCholParams>();
  if (p.offset >= p.params.n_logical) return ChunkId{};
  throw NotPositiveDefinite(p.offset);
}

// ---- truncation passes ----

ChunkRef norms_execute(TaskContext& ctx) {
  Node a = node_of(ctx, 0);
  if (a->is_leaf()) return ctx.register_chunk(std::make_shared<ValuesPayload>(leaf_unit_norms(a->leaf())));
  std::vector<ChunkRef> parts;
  for (ChunkId c : a->children()) {
    if (!c.is_nil()) parts.push_back(ctx.register_task(kNorms, {c}));
  }
  return ctx.register_task(kConcat, std::move(parts));
}

ChunkRef concat_execute(TaskContext& ctx) {
  std::vector<double> all;
  for (ChunkId id : ctx.inputs()) {
    auto v = ctx.fetch<ValuesPayload>(id);
    all.insert(all.end(), v->values().begin(), v->values().end());
    ctx.release(id);
  }
  return ctx.register_chunk(std::make_shared<ValuesPayload>(std::move(all)));
}

ChunkRef drop_execute(TaskContext& ctx) {
  const auto& p = ctx.params<DropParams>();
  Node a = node_of(ctx, 0);
  if (a->is_leaf()) return store_leaf(ctx, a->level(), leaf_drop_units(a->leaf(), p.threshold));
  std::array<ChunkRef, 4> parts;
  for (int q = 0; q < 4; ++q) {
    const ChunkId c = a->children()[q];
    parts[q] = c.is_nil() ? ChunkRef(ChunkId{}) : ChunkRef(ctx.register_task(kDrop, {c}, p));
  }
  return assemble(ctx, a->level(), parts);
}

// ---- element assignment and extraction ----

ChunkRef build_execute(TaskContext& ctx) {
  const auto& p = ctx.params<BuildParams>();
  const auto& entries = *p.entries;
  if (entries.empty()) return ChunkId{};
  if (p.level == p.params.depth) {
    std::vector<Triplet> local(entries);
    for (auto& t : local) {
      t.row -= p.row0;
      t.col -= p.col0;
    }
    return store_leaf(ctx, p.level, leaf_from_triplets(p.params.leaf_shape(), local));
  }
  const Index half = half_of(p.params, p.level);
  std::array<std::vector<Triplet>, 4> split;
  for (const auto& t : entries) split[quadrant(t.row >= p.row0 + half, t.col >= p.col0 + half)].push_back(t);
  std::array<ChunkRef, 4> parts;
  for (int q = 0; q < 4; ++q) {
    if (split[q].empty()) {
      parts[q] = ChunkId{};
      continue;
    }
    BuildParams child{p.params, p.level + 1, p.row0 + (q / 2) * half, p.col0 + (q % 2) * half,
                      std::make_shared<const std::vector<Triplet>>(std::move(split[q]))};
    parts[q] = ctx.register_task(kBuild, {}, std::move(child));
  }
  return assemble(ctx, p.level, parts);
}

ChunkRef extract_execute(TaskContext& ctx) {
  const auto& p = ctx.params<ExtractParams>();
  Node a = node_of(ctx, 0);
  const auto& coords = *p.coords;
  if (a->is_leaf()) {
    std::vector<Coord> local;
    local.reserve(p.which.size());
    for (auto i : p.which) local.push_back({coords[i].row - p.row0, coords[i].col - p.col0});
    const auto values = leaf_get_elements(a->leaf(), local);
    for (std::size_t k = 0; k < p.which.size(); ++k) (*p.out)[p.which[k]] = values[k];
    return ChunkId{};
  }
  const Index half = half_of(p.params, a->level());
  std::array<std::vector<std::size_t>, 4> split;
  for (auto i : p.which) split[quadrant(coords[i].row >= p.row0 + half, coords[i].col >= p.col0 + half)].push_back(i);
  for (int q = 0; q < 4; ++q) {
    const ChunkId c = a->children()[q];
    if (c.is_nil() || split[q].empty()) continue;
    ctx.register_task(kExtract, {c},
                      ExtractParams{p.params, p.row0 + (q / 2) * half, p.col0 + (q % 2) * half, std::move(split[q]),
                                    p.coords, p.out});
  }
  return ChunkId{};
}

}  // namespace

void ValuesPayload::serialize(ByteWriter& out) const {
  out.u64(values_.size());
  out.f64s(values_);
}

std::shared_ptr<const ValuesPayload> ValuesPayload::decode(std::span<const std::byte> in) {
  ByteReader r(in);
  std::vector<double> v(r.u64());
  r.f64s(v);
  return std::make_shared<ValuesPayload>(std::move(v));
}

void add_task_types(Runtime& rt) {
  rt.add_task_type({kAdd, add_execute, add_fallback});
  rt.add_task_type({kScale, scale_execute, nil_result});
  rt.add_task_type({kAssemble, assemble_execute, assemble_execute});
  rt.add_task_type({kAddIdentity, identity_execute, identity_fallback});
  rt.add_task_type({kMultiply, multiply_execute, nil_result});
  rt.add_task_type({kSymm, symm_execute, nil_result});
  rt.add_task_type({kSyrk, syrk_execute, nil_result});
  rt.add_task_type({kSysq, sysq_execute, nil_result});
  rt.add_task_type({kInvChol, inv_chol_execute, inv_chol_fallback});
  rt.add_task_type({kNorms, norms_execute, nil_result});
  rt.add_task_type({kConcat, concat_execute, concat_execute});
  rt.add_task_type({kDrop, drop_execute, nil_result});
  rt.add_task_type({kBuild, build_execute, build_execute});
  rt.add_task_type({kExtract, extract_execute, nil_result});
}

}  // namespace quadtask::ops_detail
