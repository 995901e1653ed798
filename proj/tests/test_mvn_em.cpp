#include "calibra/error.hpp"
#include "calibra/monotone.hpp"
#include "calibra/mvn_em.hpp"

#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace calibra;
using testing::NA;

namespace {

MvnParams bivariate(double rho) {
  Eigen::Matrix2d s;
  s << 1, rho, rho, 1;
  return {Eigen::Vector2d::Zero(), SymMatrix(s)};
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Bivariate MAR data: y1 complete, y2 deleted with probability rising in y1.
DataMatrix mar_bivariate(RngStream& rng, Index n) {
  Eigen::Matrix2d s;
  s << 1.0, 0.6, 0.6, 2.0;
  Eigen::MatrixXd y = testing::mvn_sample(rng, Eigen::Vector2d(1.0, -1.0), s, n);
  for (Index i = 0; i < n; ++i)
    if (rng.uniform() < 1.0 / (1.0 + std::exp(-y(i, 0)))) y(i, 1) = NA;
  return testing::make_data(y);
}

// Monotone order y1 observed first.
DataMatrix sort_monotone(const DataMatrix& d) {
  std::vector<Index> obs, mis;
  for (Index i = 0; i < d.rows(); ++i) (d.is_missing(i, 1) ? mis : obs).push_back(i);
  Eigen::MatrixXd v(d.rows(), 2);
  Index r = 0;
  for (Index i : obs) v.row(r++) = d.values().row(i);
  for (Index i : mis) v.row(r++) = d.values().row(i);
  return testing::make_data(v);
}

DataMatrix general_pattern(RngStream& rng, Index n, Index k, double rate) {
  const Eigen::MatrixXd s = testing::random_spd(rng, k);
  Eigen::MatrixXd y = testing::mvn_sample(rng, Eigen::VectorXd::Zero(k), s, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 1; j < k; ++j)
      if (rng.uniform() < rate) y(i, j) = NA;
  return testing::make_data(y);
}

}  // namespace

TEST_SUITE("mvn_em") {

TEST_CASE("e_step with complete data returns raw sums") {
  Eigen::MatrixXd y(3, 2);
  y << 1, 2, 3, 5, -1, 0.5;
  const SufficientStats st = e_step(testing::make_data(y), bivariate(0.3));
  CHECK(st.n == 3);
  CHECK(max_abs(st.t1 - y.colwise().sum().transpose()) < 1e-14);
  CHECK(max_abs(st.t2.matrix() - y.transpose() * y) < 1e-13);
}

TEST_CASE("e_step fully missing row contributes unconditional moments") {
  Eigen::MatrixXd y(1, 2);
  y << NA, NA;
  MvnParams p{Eigen::Vector2d(1, 2), SymMatrix(Eigen::Matrix2d{{2, 0.5}, {0.5, 1}})};
  const SufficientStats st = e_step(testing::make_data(y), p);
  CHECK(max_abs(st.t1 - p.mu) < 1e-15);
  CHECK(max_abs(st.t2.matrix() - (p.sigma.matrix() + p.mu * p.mu.transpose())) < 1e-14);
}

TEST_CASE("e_step bivariate conditional moments by hand") {
  Eigen::MatrixXd y(1, 2);
  y << 1.0, NA;
  const SufficientStats st = e_step(testing::make_data(y), bivariate(0.5));
  CHECK(st.t1(0) == doctest::Approx(1.0));
  CHECK(st.t1(1) == doctest::Approx(0.5));
  CHECK(st.t2(0, 0) == doctest::Approx(1.0));
  CHECK(st.t2(0, 1) == doctest::Approx(0.5));
  CHECK(st.t2(1, 1) == doctest::Approx(0.25 + 0.75));
}

TEST_CASE("m_step examples") {
  Eigen::MatrixXd y(2, 2);
  y << 0, 0, 2, 2;
  const DataMatrix d = testing::make_data(y);
  CHECK_THROWS_AS(m_step(e_step(d, bivariate(0.0))), DegenerateCovarianceError);

  RngStream rng(3);
  const Eigen::MatrixXd z = testing::mvn_sample(rng, Eigen::Vector3d(1, 2, 3), testing::random_spd(rng, 3), 50);
  const MvnParams p = m_step(e_step(testing::make_data(z), MvnParams{Eigen::Vector3d::Zero(), SymMatrix::identity(3)}));
  const Eigen::VectorXd mean = z.colwise().mean().transpose();
  const Eigen::MatrixXd centered = z.rowwise() - mean.transpose();
  CHECK(max_abs(p.mu - mean) < 1e-12);
  CHECK(max_abs(p.sigma.matrix() - centered.transpose() * centered / 50.0) < 1e-12);
}

TEST_CASE("complete data converges in one iteration to sample moments") {
  RngStream rng(4);
  const Eigen::MatrixXd z = testing::mvn_sample(rng, Eigen::Vector2d(0, 1), Eigen::Matrix2d{{1, 0.2}, {0.2, 1}}, 40);
  const EmResult r = fit_em(testing::make_data(z));
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  const Eigen::VectorXd mean = z.colwise().mean().transpose();
  const Eigen::MatrixXd c = z.rowwise() - mean.transpose();
  CHECK(max_abs(r.params.mu - mean) < 1e-12);
  CHECK(max_abs(r.params.sigma.matrix() - c.transpose() * c / 40.0) < 1e-12);
}

TEST_CASE("fit_em preconditions") {
  Eigen::MatrixXd y(3, 2);
  y << 1, NA, 2, NA, 3, NA;
  CHECK_THROWS_AS(fit_em(testing::make_data(y)), PreconditionError);
  y(0, 1) = 1.0;
  CHECK_THROWS_AS(fit_em(testing::make_data(y)), PreconditionError);
  y(1, 1) = 2.0;
  EmOptions bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(fit_em(testing::make_data(y), std::nullopt, bad), PreconditionError);
}

TEST_CASE("moment init uses available cases") {
  Eigen::MatrixXd y(4, 2);
  y << 1, 2, 3, NA, 5, 4, NA, 6;
  const MvnParams p = moment_init(testing::make_data(y));
  CHECK(p.mu(0) == doctest::Approx(3.0));
  CHECK(p.mu(1) == doctest::Approx(4.0));
  CHECK(p.sigma(0, 1) == 0.0);
  CHECK(p.sigma(0, 0) > 0.0);
}

TEST_CASE("observed_loglik examples") {
  Eigen::MatrixXd y(1, 1);
  y << 0.0;
  const MvnParams std1{Eigen::VectorXd::Zero(1), SymMatrix::identity(1)};
  CHECK(observed_loglik(testing::make_data(y), std1) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)));

  Eigen::MatrixXd z(2, 2);
  z << 0.3, -0.1, NA, 1.0;
  Eigen::MatrixXd z1 = z.topRows(1);
  const MvnParams p = bivariate(0.4);
  Eigen::MatrixXd both(2, 2);
  both << 0.3, -0.1, NA, NA;
  CHECK(observed_loglik(testing::make_data(both), p) == observed_loglik(testing::make_data(z1), p));
}

TEST_CASE("observed_loglik matches quadrature over the missing coordinate") {
  RngStream rng(5);
  for (int t = 0; t < 10; ++t) {
    const Eigen::MatrixXd s = testing::random_spd(rng, 2);
    const Eigen::Vector2d mu(rng.normal(), rng.normal());
    Eigen::MatrixXd y = testing::mvn_sample(rng, mu, s, 6);
    y(1, 1) = NA;
    y(2, 0) = NA;
    y(4, 1) = NA;
    const MvnParams p{mu, SymMatrix(s)};
    const Eigen::Matrix2d inv = s.inverse();
    const double logdet = std::log(s.determinant());
    auto density = [&](double a, double b) {
      const Eigen::Vector2d r(a - mu(0), b - mu(1));
      return std::exp(-0.5 * r.dot(inv * r) - std::log(2 * std::numbers::pi) - 0.5 * logdet);
    };
    double oracle = 0.0;
    for (Index i = 0; i < y.rows(); ++i) {
      const bool m0 = std::isnan(y(i, 0)), m1 = std::isnan(y(i, 1));
      if (!m0 && !m1) {
        oracle += std::log(density(y(i, 0), y(i, 1)));
        continue;
      }
      // Trapezoid over the missing coordinate on +-12 sd.
      const Index miss = m0 ? 0 : 1;
      const double sd = std::sqrt(s(miss, miss));
      const int steps = 20000;
      const double lo = mu(miss) - 12 * sd, h = 24 * sd / steps;
      double acc = 0.0;
      for (int q = 0; q <= steps; ++q) {
        const double v = lo + q * h;
        const double f = m0 ? density(v, y(i, 1)) : density(y(i, 0), v);
        acc += (q == 0 || q == steps) ? 0.5 * f : f;
      }
      oracle += std::log(acc * h);
    }
    CHECK(observed_loglik(testing::make_data(y), p) == doctest::Approx(oracle).epsilon(1e-8));
  }
}

TEST_CASE("observed_score matches central finite differences") {
  RngStream rng(6);
  const DataMatrix d = general_pattern(rng, 40, 3, 0.3);
  MvnParams p{Eigen::Vector3d(0.1, -0.2, 0.3), SymMatrix(testing::random_spd(rng, 3))};
  const Eigen::VectorXd g = observed_score(d, p);
  const Eigen::VectorXd x = pack_params(p);
  for (Index a = 0; a < x.size(); ++a) {
    Eigen::VectorXd xp = x, xm = x;
    xp(a) += 1e-5;
    xm(a) -= 1e-5;
    const double fd = (observed_loglik(d, unpack_params(xp, 3)) - observed_loglik(d, unpack_params(xm, 3))) / 2e-5;
    CHECK(g(a) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
  CHECK(max_abs(unpack_params(x, 3).sigma.matrix() - p.sigma.matrix()) == 0.0);
}

TEST_CASE("EM ascends and stops at a stationary point") {
  RngStream rng(7);
  for (int t = 0; t < 10; ++t) {
    const DataMatrix d = general_pattern(rng, 60, 3, 0.3);
    EmOptions opt;
    opt.tol = 1e-12;
    opt.param_tol = 1e-10;
    opt.max_iter = 5000;
    const EmResult r = fit_em(d, std::nullopt, opt);
    REQUIRE(r.converged);
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
      CHECK(r.loglik_trace[i] >= r.loglik_trace[i - 1] - 1e-10);
    CHECK(r.loglik_trace.back() == doctest::Approx(observed_loglik(d, r.params)).epsilon(1e-12));
    CHECK(observed_score(d, r.params).norm() < 1e-6);
  }
}

TEST_CASE("EM on monotone bivariate data agrees with the factored ML") {
  RngStream rng(8);
  for (int t = 0; t < 10; ++t) {
    const DataMatrix d = sort_monotone(mar_bivariate(rng, 80));
    EmOptions opt;
    opt.tol = 1e-14;
    opt.param_tol = 1e-12;
    opt.max_iter = 10000;
    const EmResult r = fit_em(d, std::nullopt, opt);
    const MvnParams ml = *fit_factored_ml(d).derived;
    CHECK(max_abs(r.params.mu - ml.mu) < 1e-8);
    CHECK(max_abs(r.params.sigma.matrix() - ml.sigma.matrix()) < 1e-8);
    // The factored ML is a fixed point of one EM iteration.
    const MvnParams again = m_step(e_step(d, ml));
    CHECK(max_abs(again.mu - ml.mu) < 1e-10);
    CHECK(max_abs(again.sigma.matrix() - ml.sigma.matrix()) < 1e-10);
  }
}

TEST_CASE("non-convergence is flagged, not thrown") {
  RngStream rng(9);
  const DataMatrix d = general_pattern(rng, 50, 3, 0.4);
  EmOptions opt;
  opt.max_iter = 1;
  opt.tol = 1e-14;
  const EmResult r = fit_em(d, std::nullopt, opt);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);
}

TEST_CASE("em json layout") {
  Eigen::MatrixXd y(3, 2);
  y << 1, 2, 3, 5, 2, 3;
  const EmResult r = fit_em(testing::make_data(y));
  const auto j = to_json(r, {"a", "b"});
  CHECK(j.at("columns").size() == 2);
  CHECK(j.at("sigma").size() == 4);
  CHECK(j.at("sigma")[1].get<double>() == j.at("sigma")[2].get<double>());
  CHECK(j.at("converged").get<bool>());
}

}
