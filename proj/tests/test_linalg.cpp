#include "calibra/error.hpp"
#include "calibra/linalg.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace calibra;

namespace {

SymMatrix sym(std::initializer_list<std::initializer_list<double>> rows) {
  const Index n = static_cast<Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return SymMatrix(m);
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Direct application of the sweep definition, written without the library.
Eigen::MatrixXd naive_sweep(const Eigen::MatrixXd& g, Index k) {
  Eigen::MatrixXd h = g;
  const double p = g(k, k);
  for (Index j = 0; j < g.rows(); ++j)
    for (Index l = 0; l < g.cols(); ++l) {
      if (j == k && l == k) h(j, l) = -1.0 / p;
      else if (j == k) h(j, l) = g(k, l) / p;
      else if (l == k) h(j, l) = g(j, k) / p;
      else h(j, l) = g(j, l) - g(j, k) * g(k, l) / p;
    }
  return h;
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("sweep examples") {
  const SymMatrix id = SymMatrix::identity(2);
  CHECK(max_abs(sweep(id, 0).matrix() - sym({{-1, 0}, {0, 1}}).matrix()) == 0.0);

  const SymMatrix g = sym({{2, 1}, {1, 2}});
  CHECK(max_abs(sweep(g, 0).matrix() - sym({{-0.5, 0.5}, {0.5, 1.5}}).matrix()) < 1e-15);

  CHECK_THROWS_AS(sweep(sym({{0, 1}, {1, 2}}), 0), SingularPivotError);
  CHECK_THROWS_AS(sweep(g, 2), PreconditionError);
}

TEST_CASE("reverse sweep examples") {
  const SymMatrix g = sym({{2, 1}, {1, 2}});
  CHECK(max_abs(reverse_sweep(sweep(g, 0), 0).matrix() - g.matrix()) < 1e-10);
  CHECK(max_abs(reverse_sweep(sym({{-1, 0}, {0, 1}}), 0).matrix() - Eigen::MatrixXd::Identity(2, 2)) == 0.0);
  CHECK_THROWS_AS(reverse_sweep(sym({{0, 1}, {1, 2}}), 0), SingularPivotError);
}

TEST_CASE("pivot tolerance is relative to the largest diagonal") {
  CHECK_THROWS_AS(sweep(sym({{1e-14, 0}, {0, 1e3}}), 0), SingularPivotError);
  CHECK_NOTHROW(sweep(sym({{1e-14, 0}, {0, 1e-14}}), 0));
}

TEST_CASE("sweep matches the definition on random matrices") {
  RngStream rng(3);
  for (int t = 0; t < 50; ++t) {
    const Index dim = 2 + static_cast<Index>(rng.uniform_index(6));
    const Eigen::MatrixXd g = testing::random_spd(rng, dim);
    const Index k = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(dim)));
    CHECK(max_abs(sweep(SymMatrix(g), k).matrix() - naive_sweep(g, k)) < 1e-10 * (1 + max_abs(g)));
  }
}

TEST_CASE("sweeping all pivots in any order gives the negative inverse") {
  RngStream rng(11);
  for (int t = 0; t < 100; ++t) {
    const Index dim = 1 + static_cast<Index>(rng.uniform_index(8));
    const Eigen::MatrixXd g = testing::random_spd(rng, dim);
    std::vector<Index> order(static_cast<std::size_t>(dim));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const Eigen::MatrixXd swept = sweep(SymMatrix(g), order).matrix();
    const Eigen::MatrixXd inv = -g.inverse();
    CHECK(max_abs(swept - inv) <= 1e-8 * max_abs(inv));
  }
}

TEST_CASE("sweep commutes and reverse sweep undoes it") {
  RngStream rng(12);
  for (int t = 0; t < 100; ++t) {
    const Index dim = 2 + static_cast<Index>(rng.uniform_index(6));
    const SymMatrix g(testing::random_spd(rng, dim));
    const Index j = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(dim)));
    Index k = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(dim - 1)));
    if (k >= j) ++k;
    const Eigen::MatrixXd a = sweep(sweep(g, j), k).matrix();
    const Eigen::MatrixXd b = sweep(sweep(g, k), j).matrix();
    CHECK(max_abs(a - b) < 1e-10 * std::max(1.0, max_abs(a)));
    CHECK(max_abs(reverse_sweep(sweep(g, j), j).matrix() - g.matrix()) < 1e-10 * std::max(1.0, max_abs(g.matrix())));
  }
}

TEST_CASE("sym matrix construction symmetrizes") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 0.5, 0.5 + 1e-14, 1;
  const SymMatrix s(m);
  CHECK(s(0, 1) == s(1, 0));
  m(1, 0) = 3.0;
  CHECK_THROWS_AS(SymMatrix{m}, PreconditionError);
}

TEST_CASE("conditional_mvn examples") {
  MvnParams p{Eigen::Vector2d(1.0, -2.0), sym({{1, 0.5}, {0.5, 1}})};
  const ConditionalMvn marg = conditional_mvn(p, std::vector<Index>{});
  CHECK(marg.targets == std::vector<Index>{0, 1});
  CHECK(max_abs(marg.intercept - p.mu) == 0.0);
  CHECK(max_abs(marg.residual_cov.matrix() - p.sigma.matrix()) < 1e-15);

  p.mu.setZero();
  const std::vector<Index> obs{0};
  const ConditionalMvn c = conditional_mvn(p, obs);
  CHECK(c.targets == std::vector<Index>{1});
  CHECK(c.slopes(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(c.residual_cov(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(c.intercept(0) == doctest::Approx(0.0));

  MvnParams diag{Eigen::Vector3d(1, 2, 3), SymMatrix(Eigen::Vector3d(1, 4, 9).asDiagonal().toDenseMatrix())};
  const std::vector<Index> obs2{1};
  const ConditionalMvn cd = conditional_mvn(diag, obs2);
  CHECK(max_abs(cd.slopes) == 0.0);
  CHECK(cd.residual_cov(0, 0) == 1.0);
  CHECK(cd.residual_cov(1, 1) == 9.0);
  CHECK(cd.intercept(1) == 3.0);

  MvnParams bad{Eigen::Vector2d::Zero(), sym({{1, 2}, {2, 1}})};
  CHECK_THROWS_AS(conditional_mvn(bad, obs), NotPositiveDefiniteError);
}

TEST_CASE("conditional_mvn matches the textbook partitioned formula") {
  RngStream rng(21);
  for (int t = 0; t < 60; ++t) {
    const Index dim = 2 + static_cast<Index>(rng.uniform_index(5));
    const Eigen::MatrixXd s = testing::random_spd(rng, dim);
    Eigen::VectorXd mu(dim);
    for (Index j = 0; j < dim; ++j) mu(j) = rng.normal();
    std::vector<Index> obs, mis;
    for (Index j = 0; j < dim; ++j) (rng.uniform() < 0.5 ? obs : mis).push_back(j);
    if (mis.empty()) {
      mis.push_back(obs.back());
      obs.pop_back();
    }
    const ConditionalMvn c = conditional_mvn({mu, SymMatrix(s)}, obs);
    const Index q = static_cast<Index>(obs.size()), r = static_cast<Index>(mis.size());
    Eigen::MatrixXd soo(q, q), smo(r, q), smm(r, r);
    for (Index a = 0; a < r; ++a) {
      for (Index b = 0; b < q; ++b) smo(a, b) = s(mis[a], obs[b]);
      for (Index b = 0; b < r; ++b) smm(a, b) = s(mis[a], mis[b]);
    }
    for (Index a = 0; a < q; ++a)
      for (Index b = 0; b < q; ++b) soo(a, b) = s(obs[a], obs[b]);
    Eigen::MatrixXd slopes = q ? Eigen::MatrixXd(smo * soo.inverse()) : Eigen::MatrixXd(r, 0);
    Eigen::MatrixXd resid = smm - (q ? Eigen::MatrixXd(slopes * smo.transpose()) : Eigen::MatrixXd::Zero(r, r));
    Eigen::VectorXd mo(q), mm(r);
    for (Index a = 0; a < q; ++a) mo(a) = mu(obs[a]);
    for (Index a = 0; a < r; ++a) mm(a) = mu(mis[a]);
    const Eigen::VectorXd icpt = mm - (q ? Eigen::VectorXd(slopes * mo) : Eigen::VectorXd::Zero(r));
    const double scale = 1 + max_abs(s);
    if (q) CHECK(max_abs(c.slopes - slopes) < 1e-8 * scale);
    CHECK(max_abs(c.residual_cov.matrix() - resid) < 1e-8 * scale);
    CHECK(max_abs(c.intercept - icpt) < 1e-8 * scale);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.residual_cov.matrix()).eigenvalues();
    CHECK(ev.minCoeff() >= -1e-10);
    CHECK(max_abs(c.residual_cov.matrix() - c.residual_cov.matrix().transpose()) == 0.0);
  }
}

TEST_CASE("cholesky examples") {
  CHECK(max_abs(cholesky(SymMatrix::identity(3)) - Eigen::MatrixXd::Identity(3, 3)) == 0.0);
  Eigen::MatrixXd expect(2, 2);
  expect << 2, 0, 1, 2;
  CHECK(max_abs(cholesky(sym({{4, 2}, {2, 5}})) - expect) < 1e-15);
  CHECK_THROWS_AS(cholesky(sym({{1, 2}, {2, 1}})), NotPositiveDefiniteError);
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
  RngStream rng(31);
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd g = testing::random_spd(rng, 1 + static_cast<Index>(rng.uniform_index(8)));
    const Eigen::MatrixXd l = cholesky(SymMatrix(g));
    CHECK(max_abs(l * l.transpose() - g) <= 1e-10 * max_abs(g));
    CHECK(max_abs(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix()) == 0.0);
  }
}

TEST_CASE("psd factor, inverse and log determinant") {
  const SymMatrix rank1(Eigen::Vector2d(1, 2) * Eigen::Vector2d(1, 2).transpose());
  CHECK_FALSE(is_positive_definite(rank1));
  CHECK(is_positive_semidefinite(rank1));
  const Eigen::MatrixXd f = psd_factor(rank1);
  CHECK(max_abs(f * f.transpose() - rank1.matrix()) < 1e-12);
  CHECK_THROWS_AS(psd_factor(sym({{1, 2}, {2, 1}})), NotPositiveDefiniteError);

  const SymMatrix g = sym({{4, 2}, {2, 5}});
  CHECK(max_abs(inverse_spd(g).matrix() * g.matrix() - Eigen::MatrixXd::Identity(2, 2)) < 1e-14);
  CHECK(log_det_spd(g) == doctest::Approx(std::log(16.0)).epsilon(1e-14));
  const Eigen::MatrixXd l = cholesky(g);
  CHECK(max_abs(invert_lower(l) * l - Eigen::MatrixXd::Identity(2, 2)) < 1e-15);
}

TEST_CASE("mvn params validation") {
  MvnParams p{Eigen::Vector2d::Zero(), SymMatrix::identity(3)};
  CHECK_THROWS_AS(p.validate(), PreconditionError);
  p.sigma = sym({{1, 2}, {2, 1}});
  CHECK_THROWS_AS(p.validate(), NotPositiveDefiniteError);
  p.sigma = SymMatrix::identity(2);
  CHECK_NOTHROW(p.validate());
}

}
