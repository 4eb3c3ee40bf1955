#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "quadtask/error.hpp"
#include "quadtask/ops/ops.hpp"

using namespace quadtask;

namespace {

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

MatrixParams params(Index n, Index leaf = 32, LeafKind kind = LeafKind::block_sparse, Index bs = 8) {
  return MatrixParams::make(n, leaf, kind, bs);
}

bool normalized(Runtime& rt, const Matrix& m) {
  auto v = find_structure_violation(rt, m);
  if (v) MESSAGE(*v);
  return !v;
}

const LeafKind kKinds[] = {LeafKind::dense, LeafKind::block_sparse, LeafKind::hierarchical};

}  // namespace

TEST_CASE("add: nil algebra and oracle") {
  Runtime rt;
  std::mt19937_64 rng(31);
  const auto p = params(1024, 64, LeafKind::block_sparse, 16);
  Matrix nil{p, ChunkId{}, false};
  CHECK(add(rt, nil, nil).root.is_nil());

  const Eigen::MatrixXd a = banded(rng, 1024, 20), b = banded(rng, 1024, 35);
  auto ma = build_from_dense(rt, p, a), mb = build_from_dense(rt, p, b);
  CHECK(add(rt, ma, ma, 1.0, -1.0).root.is_nil());
  CHECK(add(rt, ma, nil).root == ma.root);
  CHECK(to_dense(rt, add(rt, nil, ma, 1.0, 3.0)) == 3.0 * a);

  auto c = add(rt, ma, mb, 0.5, -2.0);
  CHECK(normalized(rt, c));
  CHECK(oracle::relative_error(to_dense(rt, c), 0.5 * a - 2.0 * b) <= 1e-14);
}

TEST_CASE("add_scaled_identity") {
  Runtime rt;
  std::mt19937_64 rng(32);
  const Index n = 200;
  const auto p = params(n);
  Matrix nil{p, ChunkId{}, false};
  auto id = add_scaled_identity(rt, nil, 1.0);
  CHECK(normalized(rt, id));
  CHECK(to_dense(rt, id) == Eigen::MatrixXd::Identity(n, n));
  const auto s = tree_stats(rt, id);
  CHECK(s.leaf_chunks == 7);  // ceil(200 / 32) diagonal leaves, padding skipped
  CHECK(s.nnz == static_cast<std::size_t>(n));

  const Eigen::MatrixXd a = scattered(rng, n, 0.05);
  auto ma = build_from_dense(rt, p, a);
  CHECK(add_scaled_identity(rt, ma, 0.0).root == ma.root);
  auto c = add_scaled_identity(rt, ma, 2.5);
  CHECK(normalized(rt, c));
  Eigen::MatrixXd want = a;
  for (Index i = 0; i < n; ++i) want(i, i) += 2.5;
  CHECK(to_dense(rt, c) == want);
  // Off-diagonal subtrees are shared, not copied.
  auto root_a = rt.fetch<QuadNode>(ma.root, kUntracked), root_c = rt.fetch<QuadNode>(c.root, kUntracked);
  CHECK(root_a->child(0, 1) == root_c->child(0, 1));
  CHECK(root_a->child(1, 0) == root_c->child(1, 0));
}

TEST_CASE("regular multiply: identity, nil and oracle across leaf kinds") {
  std::mt19937_64 rng(33);
  const Index n = 512;
  const Eigen::MatrixXd a = scattered(rng, n, 0.02), b = scattered(rng, n, 0.02);
  const Eigen::MatrixXd want = oracle::product(a, b);
  for (LeafKind kind : kKinds) {
    Runtime rt(RuntimeConfig{.n_workers = 4});
    const auto p = params(n, 64, kind, 16);
    auto ma = build_from_dense(rt, p, a), mb = build_from_dense(rt, p, b);
    auto id = add_scaled_identity(rt, Matrix{p, ChunkId{}, false}, 1.0);
    CHECK(to_dense(rt, multiply(rt, id, ma)) == a);
    CHECK(multiply(rt, Matrix{p, ChunkId{}, false}, ma).root.is_nil());
    auto c = multiply(rt, ma, mb);
    CHECK(normalized(rt, c));
    CHECK(oracle::relative_error(to_dense(rt, c), want) <= 1e-12);
  }
}

TEST_CASE("transposed operands") {
  std::mt19937_64 rng(34);
  const Index n = 150;
  const Eigen::MatrixXd a = scattered(rng, n, 0.1), b = scattered(rng, n, 0.1);
  Runtime rt;
  const auto p = params(n);
  auto ma = build_from_dense(rt, p, a), mb = build_from_dense(rt, p, b);
  for (auto ta : {Transpose::no, Transpose::yes}) {
    for (auto tb : {Transpose::no, Transpose::yes}) {
      const Eigen::MatrixXd want = oracle::product(is_transposed(ta) ? oracle::transpose(a) : a,
                                                   is_transposed(tb) ? oracle::transpose(b) : b);
      CHECK(oracle::relative_error(to_dense(rt, multiply_transposed(rt, ma, mb, ta, tb)), want) <= 1e-12);
    }
  }
}

TEST_CASE("symmetric multiply from either side") {
  std::mt19937_64 rng(35);
  const Index n = 180;
  const Eigen::MatrixXd s = oracle::symmetric_from_upper(oracle::upper(scattered(rng, n, 0.1)));
  const Eigen::MatrixXd b = scattered(rng, n, 0.1);
  Runtime rt;
  const auto p = params(n);
  auto ms = build_from_dense(rt, p, s, {}, true), mb = build_from_dense(rt, p, b);
  auto left = multiply(rt, ms, mb, MultiplyVariant::symmetric());
  auto right = multiply(rt, mb, ms, MultiplyVariant::symmetric());
  CHECK_FALSE(left.symmetric);
  CHECK(normalized(rt, left));
  CHECK(oracle::relative_error(to_dense(rt, left), oracle::product(s, b)) <= 1e-12);
  CHECK(oracle::relative_error(to_dense(rt, right), oracle::product(b, s)) <= 1e-12);
  CHECK_THROWS_AS(multiply(rt, mb, mb, MultiplyVariant::symmetric()), InvalidArgument);
}

TEST_CASE("symmetric square and rank-k produce exactly symmetric results") {
  std::mt19937_64 rng(36);
  const Index n = 200;
  for (LeafKind kind : kKinds) {
    Runtime rt(RuntimeConfig{.n_workers = 3});
    const auto p = params(n, 32, kind, 8);
    const Eigen::MatrixXd s = oracle::symmetric_from_upper(oracle::upper(scattered(rng, n, 0.05)));
    auto ms = build_from_dense(rt, p, s, {}, true);
    auto sq = multiply(rt, ms, ms, MultiplyVariant::symmetric_square());
    CHECK(sq.symmetric);
    CHECK(normalized(rt, sq));
    const Eigen::MatrixXd sqd = to_dense(rt, sq);
    CHECK(sqd == oracle::transpose(sqd));
    CHECK(oracle::relative_error(sqd, oracle::product(s, s)) <= 1e-12);

    const Eigen::MatrixXd a = scattered(rng, n, 0.05);
    auto ma = build_from_dense(rt, p, a);
    auto aat = multiply(rt, ma, ma, MultiplyVariant::rank_k());
    CHECK(normalized(rt, aat));
    CHECK(oracle::relative_error(to_dense(rt, aat), oracle::product(a, oracle::transpose(a))) <= 1e-12);
    auto ata = rank_k(rt, ma, Transpose::yes);
    CHECK(oracle::relative_error(to_dense(rt, ata), oracle::product(oracle::transpose(a), a)) <= 1e-12);

    CHECK_THROWS_AS(multiply(rt, ma, ma, MultiplyVariant::symmetric_square()), InvalidArgument);
    CHECK_THROWS_AS(multiply(rt, ma, ms, MultiplyVariant::rank_k()), InvalidArgument);
  }
}

TEST_CASE("approximate multiply: tau = 0 is the regular product, pruning stays within tau") {
  std::mt19937_64 rng(37);
  const Index n = 256;
  Runtime rt;
  const auto p = params(n, 32, LeafKind::block_sparse, 8);
  // Graded magnitudes so that some subproducts are small.
  Eigen::MatrixXd a = scattered(rng, n, 0.1), b = scattered(rng, n, 0.1);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      a(i, j) *= std::exp(-0.05 * std::abs(i - j));
      b(i, j) *= std::exp(-0.05 * std::abs(i - j));
    }
  auto ma = build_from_dense(rt, p, a), mb = build_from_dense(rt, p, b);
  auto exact = multiply(rt, ma, mb);
  PruneLog log;
  auto same = multiply(rt, ma, mb, MultiplyVariant::approximate(0.0), &log);
  CHECK(serialize_tree(rt, same) == serialize_tree(rt, exact));
  CHECK(log.entries().empty());

  const Eigen::MatrixXd want = oracle::product(a, b);
  for (double frac : {1e-4, 1e-2, 0.1, 0.5}) {
    const double tau = frac * oracle::frobenius(want);
    log.clear();
    auto approx = multiply(rt, ma, mb, MultiplyVariant::approximate(tau), &log);
    const double err = oracle::frobenius(want - to_dense(rt, approx));
    CHECK(err <= log.bound() * (1 + 1e-12) + 1e-12);
    CHECK(log.bound() <= tau);
    if (frac >= 0.1) CHECK_FALSE(log.entries().empty());
  }
  CHECK_THROWS_AS(multiply(rt, ma, mb, MultiplyVariant::approximate(-1.0)), InvalidArgument);
}

TEST_CASE("truncation contract on quadtrees") {
  std::mt19937_64 rng(38);
  const Index n = 300;
  const Index bs = 8;
  Runtime rt;
  const auto p = params(n, 32, LeafKind::block_sparse, bs);
  const Eigen::MatrixXd a = scattered(rng, n, 0.3);
  auto ma = build_from_dense(rt, p, a);
  auto t0 = truncate(rt, ma, 0.0);
  CHECK(t0.matrix.root == ma.root);
  CHECK(t0.removed_norm == 0.0);
  CHECK(truncate(rt, ma, oracle::frobenius(a) * 1.0001).matrix.root.is_nil());
  CHECK(truncate(rt, ma, frobenius_norm(rt, ma)).matrix.root.is_nil());
  CHECK_THROWS_AS(truncate(rt, ma, -0.1), InvalidArgument);

  const double tau = 0.3 * oracle::frobenius(a);
  auto t = truncate(rt, ma, tau);
  CHECK(normalized(rt, t.matrix));
  const Eigen::MatrixXd kept = to_dense(rt, t.matrix);
  CHECK(oracle::frobenius(a - kept) <= tau);
  // Each dropped unit is a whole block of the leaf grid.
  long double dropped = 0;
  for (Index j = 0; j < n; j += bs)
    for (Index i = 0; i < n; i += bs) {
      const Index r = std::min(bs, n - i), c = std::min(bs, n - j);
      const Eigen::MatrixXd blk = a.block(i, j, r, c);
      if (kept.block(i, j, r, c).isZero(0.0) && !blk.isZero(0.0)) {
        dropped += std::pow(static_cast<long double>(oracle::frobenius(blk)), 2);
      } else {
        CHECK(kept.block(i, j, r, c) == blk);
      }
    }
  CHECK(t.removed_norm * t.removed_norm == doctest::Approx(static_cast<double>(dropped)).epsilon(1e-12));
}

TEST_CASE("truncation of symmetric matrices counts mirrored units") {
  std::mt19937_64 rng(39);
  const Index n = 150;
  const Eigen::MatrixXd s = oracle::symmetric_from_upper(oracle::upper(scattered(rng, n, 0.3)));
  Runtime rt;
  auto ms = build_from_dense(rt, params(n, 32, LeafKind::block_sparse, 8), s, {}, true);
  for (double frac : {0.05, 0.2, 0.6}) {
    const double tau = frac * oracle::frobenius(s);
    auto t = truncate(rt, ms, tau);
    CHECK(t.matrix.symmetric);
    const double err = oracle::frobenius(s - to_dense(rt, t.matrix));
    CHECK(err <= tau);
    CHECK(t.removed_norm == doctest::Approx(err).epsilon(1e-8));
  }
}

TEST_CASE("inverse Cholesky") {
  std::mt19937_64 rng(40);
  SUBCASE("identity and diagonal") {
    Runtime rt;
    const Index n = 100;
    const auto p = params(n);
    auto id = add_scaled_identity(rt, Matrix{p, ChunkId{}, true}, 1.0);
    CHECK(to_dense(rt, inverse_cholesky(rt, id)) == Eigen::MatrixXd::Identity(n, n));
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n), want = d;
    for (Index i = 0; i < n; ++i) {
      d(i, i) = 1.0 + static_cast<double>(i);
      want(i, i) = 1.0 / std::sqrt(d(i, i));
    }
    auto z = inverse_cholesky(rt, build_from_dense(rt, p, d, {}, true));
    CHECK(oracle::relative_error(to_dense(rt, z), want) <= 1e-15);
  }
  SUBCASE("random SPD residual") {
    for (LeafKind kind : kKinds) {
      for (Index n : {40, 129, 256}) {
        Runtime rt(RuntimeConfig{.n_workers = 2});
        const Eigen::MatrixXd a = spd(rng, n);
        auto ma = build_from_dense(rt, params(n, 32, kind, 8), a, {}, true);
        auto z = inverse_cholesky(rt, ma);
        CHECK_FALSE(z.symmetric);
        const Eigen::MatrixXd zd = to_dense(rt, z);
        Eigen::MatrixXd r = oracle::product(oracle::product(oracle::transpose(zd), a), zd);
        for (Index i = 0; i < n; ++i) r(i, i) -= 1.0;
        CHECK(oracle::frobenius(r) <= 1e-8);
        CHECK(oracle::upper(zd) == zd);
      }
    }
  }
  SUBCASE("breakdown names the global diagonal index") {
    Runtime rt;
    const Index n = 100;
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(n, n);
    d(70, 70) = -1.0;
    try {
      inverse_cholesky(rt, build_from_dense(rt, params(n), d, {}, true));
      FAIL("expected breakdown");
    } catch (const NotPositiveDefinite& e) {
      CHECK(e.index() == 70);
    }
    Eigen::MatrixXd hole = Eigen::MatrixXd::Identity(n, n);
    for (Index i = 64; i < 96; ++i) hole(i, i) = 0.0;  // a whole diagonal leaf is nil
    CHECK_THROWS_AS(inverse_cholesky(rt, build_from_dense(rt, params(n), hole, {}, true)), NotPositiveDefinite);
    CHECK_THROWS_AS(inverse_cholesky(rt, build_from_dense(rt, params(n), d)), InvalidArgument);
  }
}

TEST_CASE("task-based assignment and extraction match the direct builders") {
  std::mt19937_64 rng(41);
  const Index n = 700;
  std::uniform_int_distribution<Index> idx(0, n - 1);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::vector<Triplet> entries;
  for (int i = 0; i < 3000; ++i) entries.push_back({idx(rng), idx(rng), val(rng)});
  for (bool symmetric : {false, true}) {
    Runtime rt(RuntimeConfig{.n_workers = 4});
    const auto p = params(n, 64, LeafKind::hierarchical, 16);
    auto task_built = assign_from_triplets(rt, p, entries, symmetric);
    auto direct = build_from_triplets(rt, p, entries, {}, symmetric);
    CHECK(normalized(rt, task_built));
    CHECK(serialize_tree(rt, task_built) == serialize_tree(rt, direct));
    std::vector<Coord> probes;
    for (int i = 0; i < 5000; ++i) probes.push_back({idx(rng), idx(rng)});
    for (const auto& t : entries) probes.push_back({t.row, t.col});
    CHECK(extract_elements(rt, task_built, probes) == get_elements(rt, direct, probes));
  }
  Runtime rt;
  const std::vector<Triplet> bad{{0, 700, 1.0}};
  CHECK_THROWS_AS(assign_from_triplets(rt, params(n), bad), IndexOutOfRange);
  CHECK(assign_from_triplets(rt, params(n), {}).root.is_nil());
  const std::vector<Coord> probe{{0, 0}};
  CHECK(extract_elements(rt, Matrix{params(n), ChunkId{}, false}, probe) == std::vector<double>{0.0});
}

TEST_CASE("parameter mismatches are rejected") {
  Runtime rt;
  Matrix a{params(100), ChunkId{}, false};
  Matrix b{params(120), ChunkId{}, false};
  Matrix c{params(100, 16), ChunkId{}, false};
  Matrix s{params(100), ChunkId{}, true};
  CHECK_THROWS_AS(add(rt, a, b), DimensionMismatch);
  CHECK_THROWS_AS(multiply(rt, a, b), DimensionMismatch);
  CHECK_THROWS_AS(multiply(rt, a, c), ConfigError);
  CHECK_THROWS_AS(add(rt, a, s), InvalidArgument);
  CHECK_THROWS_AS(multiply(rt, a, s), InvalidArgument);
  CHECK_THROWS_AS(rank_k(rt, s), InvalidArgument);
  CHECK_THROWS_AS(symmetric_square(rt, a), InvalidArgument);
}

TEST_CASE("explicit zero operands give the same values as nil") {
  std::mt19937_64 rng(42);
  const Index n = 100;
  const auto p = params(n);
  Runtime rt;
  const Eigen::MatrixXd a = scattered(rng, n, 0.1);
  auto ma = build_from_dense(rt, p, a);
  Matrix nil{p, ChunkId{}, false};
  Matrix zero = build_explicit_zero(rt, p);
  Matrix nil_s{p, ChunkId{}, true};
  Matrix zero_s = build_explicit_zero(rt, p, true);
  auto same = [&](const Matrix& x, const Matrix& y) {
    return (to_dense(rt, x) - to_dense(rt, y)).cwiseAbs().maxCoeff() <= 1e-15;
  };
  CHECK(same(add(rt, ma, nil, 1.0, 2.0), add(rt, ma, zero, 1.0, 2.0)));
  CHECK(same(multiply(rt, ma, nil), multiply(rt, ma, zero)));
  CHECK(same(multiply(rt, zero, ma), multiply(rt, nil, ma)));
  CHECK(same(add_scaled_identity(rt, nil, 1.5), add_scaled_identity(rt, zero, 1.5)));
  CHECK(same(symmetric_square(rt, nil_s), symmetric_square(rt, zero_s)));
  CHECK(same(rank_k(rt, nil), rank_k(rt, zero)));
  CHECK(same(multiply(rt, zero_s, ma, MultiplyVariant::symmetric()), multiply(rt, nil_s, ma, MultiplyVariant::symmetric())));
  CHECK(same(truncate(rt, zero, 0.5).matrix, nil));
  CHECK(same(multiply(rt, ma, zero, MultiplyVariant::approximate(0.1)), nil));
}

TEST_CASE("results do not depend on workers, mode or padding") {
  std::mt19937_64 rng(43);
  const Index n = 300;
  const Eigen::MatrixXd a = banded(rng, n, 12), b = banded(rng, n, 7);
  Bytes reference;
  for (auto mode : {ExecutionMode::simulate, ExecutionMode::shared_memory}) {
    for (std::size_t w : {1, 2, 4, 8}) {
      Runtime rt(RuntimeConfig{.n_workers = w, .seed = 5, .mode = mode});
      const auto p = params(n, 32, LeafKind::block_sparse, 8);
      auto c = multiply(rt, build_from_dense(rt, p, a, OwnerPolicy{w}), build_from_dense(rt, p, b, OwnerPolicy{w}));
      const Bytes bytes = serialize_tree(rt, c);
      if (reference.empty()) reference = bytes;
      CHECK(bytes == reference);
    }
  }
  Runtime rt;
  const Eigen::MatrixXd want = oracle::product(a, b);
  for (Index leaf : {16, 32, 64, 512}) {
    const auto p = params(n, leaf, LeafKind::block_sparse, 8);
    auto c = multiply(rt, build_from_dense(rt, p, a), build_from_dense(rt, p, b));
    CHECK(oracle::relative_error(to_dense(rt, c), want) <= 1e-13);
  }
}

TEST_CASE("multiply releases its temporaries") {
  std::mt19937_64 rng(44);
  const Index n = 256;
  Runtime rt(RuntimeConfig{.n_workers = 4});
  const auto p = params(n, 32, LeafKind::block_sparse, 8);
  auto ma = build_from_dense(rt, p, banded(rng, n, 40));
  auto mb = build_from_dense(rt, p, banded(rng, n, 40));
  const std::size_t before = rt.store().chunk_count();
  auto c = multiply(rt, ma, mb);
  const auto s = tree_stats(rt, c);
  CHECK(rt.store().chunk_count() == before + s.leaf_chunks + s.branch_chunks);
  auto sq = symmetric_square(rt, build_from_dense(rt, p, oracle::symmetric_from_upper(oracle::upper(banded(rng, n, 30))), {}, true));
  CHECK(normalized(rt, sq));
}
