#include <cmath>
#include <limits>

#include "doctest.h"
#include "mapsel/errors.hpp"
#include "mapsel/penalties.hpp"

using namespace mapsel;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_binomial(std::size_t n, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 1; i <= k; ++i) s += std::log(static_cast<double>(n - k + i) / static_cast<double>(i));
  return s;
}

PriorSpec geometric(const ModelSpace& space, std::size_t r, double q) {
  return PriorSpec::truncated_geometric(q, penalty_log_counts(space, r));
}

}  // namespace

TEST_CASE("penalty_log_counts collapses the saturated size") {
  const auto complete = penalty_log_counts(ModelSpace::complete(6), 4);
  REQUIRE(complete.size() == 5);
  for (std::size_t k = 0; k < 4; ++k) CHECK(complete[k] == doctest::Approx(log_binomial(6, k)).epsilon(1e-14));
  CHECK(complete[4] == 0.0);

  const auto hier = penalty_log_counts(ModelSpace::paired_hierarchy(3), 6);
  // 3 mains plus 2 interactions.
  CHECK(std::isfinite(hier[5]));
  CHECK(hier[6] == 0.0);
  CHECK_THROWS_AS(penalty_log_counts(ModelSpace::complete(3), 4), DomainError);
}

TEST_CASE("truncated geometric prior uses the exact finite normalizer") {
  const double q = 0.3;
  const auto prior = geometric(ModelSpace::ordered(5), 5, q);
  const double norm = (1 - q) / (1 - std::pow(q, 6));
  double total = 0.0;
  for (std::size_t k = 0; k <= 5; ++k) {
    CHECK(prior.weight(k) == doctest::Approx(norm * std::pow(q, static_cast<double>(k))).epsilon(1e-14));
    total += prior.weight(k);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(PriorSpec::truncated_geometric(1.0, penalty_log_counts(ModelSpace::ordered(3), 3)), DomainError);

  // Tiny ratios remain representable in log space.
  const auto tiny = PriorSpec::truncated_geometric(std::exp(-180.0), penalty_log_counts(ModelSpace::ordered(10), 10));
  CHECK(tiny.log_weight(10) == doctest::Approx(-1800.0).epsilon(1e-12));
}

TEST_CASE("custom and uniform priors") {
  const std::vector<double> w{1, 2, 1};
  const auto c = PriorSpec::custom(w);
  CHECK(c.weight(1) == doctest::Approx(0.5));
  CHECK(c.kind() == PriorKind::Custom);
  CHECK_THROWS_AS(PriorSpec::custom(std::vector<double>{0, 0}), DomainError);
  CHECK_THROWS_AS(PriorSpec::custom(std::vector<double>{1, -1}), DomainError);

  const auto u = PriorSpec::uniform(penalty_log_counts(ModelSpace::complete(4), 4));
  for (std::size_t k = 0; k <= 4; ++k) CHECK(u.weight(k) == doctest::Approx(0.2));
}

TEST_CASE("map_penalty: ordered space with a geometric prior is linear with the closed-form slope") {
  for (double gamma : {0.25, 1.0, 3.0, 50.0}) {
    for (double q : {0.05, 0.5, 0.9}) {
      const auto space = ModelSpace::ordered(12);
      const auto pen = map_penalty(space, geometric(space, 12, q), gamma, 1.7);
      const double slope = 2 * 1.7 * lambda_map_geometric(gamma, q);
      for (std::size_t k = 1; k <= 12; ++k) {
        const double inc = pen(k) - pen(0);
        CHECK(inc == doctest::Approx(slope * static_cast<double>(k)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("map_penalty: hand-substituted increment at gamma=3, q=1/2, k=2") {
  // 2 (4/3) ln(2 * 2) * 2 = (16/3) ln 4.
  const auto space = ModelSpace::ordered(5);
  const auto pen = map_penalty(space, geometric(space, 5, 0.5), 3.0, 1.0);
  CHECK(pen(2) - pen(0) == doctest::Approx(16.0 / 3.0 * std::log(4.0)).epsilon(1e-12));
  CHECK(pen(2) - pen(0) == doctest::Approx(7.394).epsilon(2e-4));
}

TEST_CASE("map_penalty: complete space with a uniform prior") {
  const std::size_t p = 9, r = 6;
  const double gamma = 2.0, sigma2 = 0.5;
  const auto space = ModelSpace::complete(p);
  const auto prior = PriorSpec::uniform(penalty_log_counts(space, r));
  const auto pen = map_penalty(space, prior, gamma, sigma2);
  for (std::size_t k = 0; k < r; ++k) {
    const double expect = 2 * sigma2 * (1 + 1 / gamma) *
                          (log_binomial(p, k) + std::log(static_cast<double>(r + 1)) +
                           0.5 * static_cast<double>(k) * std::log(1 + gamma));
    CHECK(pen(k) == doctest::Approx(expect).epsilon(1e-12));
  }
  // Saturated size: m(r) = 1.
  const double sat = 2 * sigma2 * (1 + 1 / gamma) * (std::log(7.0) + 3.0 * std::log(3.0));
  CHECK(pen(r) == doctest::Approx(sat).epsilon(1e-12));
}

TEST_CASE("map_penalty: unattainable sizes and invalid priors") {
  // Grouped space with groups of size 2: odd sizes are unattainable.
  const auto space = ModelSpace::grouped(6, {{0, 1}, {2, 3}, {4, 5}});
  const auto prior = geometric(space, 6, 0.5);
  const auto pen = map_penalty(space, prior, 1.0, 1.0);
  for (std::size_t k = 1; k <= 5; k += 2) CHECK(pen(k) == kInf);
  for (std::size_t k = 0; k <= 6; k += 2) CHECK(std::isfinite(pen(k)));

  const std::vector<double> mass_at_unattainable{1, 1, 1, 0, 1, 0, 1};
  const std::vector<double> ok{1, 0, 1, 0, 1, 0, 1};
  CHECK_THROWS_AS(map_penalty(space, PriorSpec::custom(std::vector<double>{1, 0, 0, 0, 1, 0, 1}), 1.0, 1.0),
                  ConfigError);
  CHECK_THROWS_AS(map_penalty(space, PriorSpec::custom(mass_at_unattainable), 1.0, 1.0), ConfigError);
  CHECK_NOTHROW(map_penalty(space, PriorSpec::custom(ok), 1.0, 1.0));
  CHECK_THROWS_AS(map_penalty(space, prior, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(map_penalty(space, prior, 1.0, -1.0), DomainError);
}

TEST_CASE("linear penalties") {
  CHECK(linear_penalty(lambda_aic(), 1.0, 5)(3) == doctest::Approx(6.0));
  CHECK(lambda_ric(100) == doctest::Approx(std::log(100.0)));
  CHECK(lambda_ric(100) == doctest::Approx(4.6).epsilon(0.002));
  // BIC at n = e^2 is 1; with integer n, check the formula at n = 7 and 8 brackets it.
  CHECK(lambda_bic(7) < 1.0);
  CHECK(lambda_bic(8) > 1.0);
  CHECK(lambda_bic(100) == doctest::Approx(0.5 * std::log(100.0)));
  CHECK_THROWS_AS(linear_penalty(0.0, 1.0, 3), DomainError);
}

TEST_CASE("c(gamma)") {
  CHECK(c_gamma(0.25) == doctest::Approx(8.0));
  CHECK(c_gamma(1.0) == doctest::Approx(24.5));
  for (double g : {1e-6, 0.1, 1.0, 10.0}) CHECK(c_gamma(g) > 4.5);
}

TEST_CASE("check_prior_conditions: ordered space, q below exp(-c(gamma))") {
  for (double gamma : {0.25, 1.0, 4.0}) {
    const auto space = ModelSpace::ordered(10);
    const double q = std::exp(-c_gamma(gamma)) * 0.9;
    const auto prior = geometric(space, 10, q);
    const auto rep = check_prior_conditions(space, prior, gamma, minimal_lower_constant(space, prior));
    CHECK(rep.c_gamma == doctest::Approx(c_gamma(gamma)));
    CHECK(rep.upper_ok);
    CHECK(rep.lower_ok);
    CHECK(rep.l_k_ok);
    CHECK(rep.theorem1_applicable);
    CHECK(rep.tail_mass_ok);
    CHECK(rep.rows.size() == 10);
  }
}

TEST_CASE("check_prior_conditions: complete p=8, q=0.5, gamma=1 against direct evaluation") {
  const std::size_t p = 8;
  const double q = 0.5, gamma = 1.0, c = 2.0;
  const auto space = ModelSpace::complete(p);
  const auto prior = geometric(space, p, q);
  const auto rep = check_prior_conditions(space, prior, gamma, c);
  REQUIRE(rep.rows.size() == p);
  const double norm = (1 - q) / (1 - std::pow(q, static_cast<double>(p + 1)));
  const double cg = 8 * 1.75 * 1.75;
  double tail = 0.0;
  for (const auto& row : rep.rows) {
    const double k = static_cast<double>(row.k);
    const double m = row.k == p ? 1.0 : std::exp(log_binomial(p, row.k));
    const double pi = norm * std::pow(q, k);
    tail += pi;
    CHECK(row.lower_ok == (std::min(std::pow(m, -c), std::exp(-c * k)) <= pi));
    CHECK(row.upper_ok == (pi <= m * std::exp(-cg * k)));
    CHECK(row.l_k == doctest::Approx(std::log(m / pi) / k).epsilon(1e-12));
    const double lhs = 2 * (2 * row.l_k + std::log(2.0));
    const double rhs = 1.5 * std::pow(1 + std::sqrt(2 * row.l_k), 2);
    CHECK(row.risk_condition_ok == (lhs >= rhs));
  }
  // q = 1/2 is far above exp(-24.5): the upper inequality fails.
  CHECK_FALSE(rep.upper_ok);
  CHECK_FALSE(rep.theorem1_applicable);
  CHECK(rep.tail_mass == doctest::Approx(tail).epsilon(1e-12));
  CHECK(rep.tail_mass == doctest::Approx(1 - prior.weight(0)).epsilon(1e-12));
  CHECK(rep.tail_mass_ok);
}

TEST_CASE("minimal_lower_constant is the smallest passing c") {
  const auto space = ModelSpace::complete(7);
  const auto prior = geometric(space, 7, 0.2);
  const double c = minimal_lower_constant(space, prior);
  CHECK(check_prior_conditions(space, prior, 1.0, c * (1 + 1e-12)).lower_ok);
  CHECK_FALSE(check_prior_conditions(space, prior, 1.0, c * (1 - 1e-6)).lower_ok);
}

TEST_CASE("penalty_lower_bound_check") {
  SUBCASE("ordered, q = exp(-c(gamma)) exactly: lower bound nearly tight") {
    const double gamma = 1.0;
    const auto space = ModelSpace::ordered(10);
    const auto prior = geometric(space, 10, std::exp(-c_gamma(gamma)));
    const auto pen = map_penalty(space, prior, gamma, 1.0);
    const auto rep = penalty_lower_bound_check(pen, space, prior, gamma, 1.0, minimal_lower_constant(space, prior));
    CHECK(rep.applicable);
    CHECK(rep.passed);
    for (const auto& row : rep.rows) CHECK(row.pen == doctest::Approx(row.lower).epsilon(1e-9));
  }
  SUBCASE("prior failing the upper inequality is skipped with a reason") {
    const auto space = ModelSpace::complete(8);
    const auto prior = geometric(space, 8, 0.3);
    const auto pen = map_penalty(space, prior, 1.0, 1.0);
    const auto rep = penalty_lower_bound_check(pen, space, prior, 1.0, 1.0, 1.0);
    CHECK_FALSE(rep.applicable);
    CHECK_FALSE(rep.reason.empty());
  }
  SUBCASE("complete p=8 with a compliant prior: both bounds by direct evaluation") {
    const double gamma = 1.0, sigma2 = 2.0;
    const auto space = ModelSpace::complete(8);
    const auto prior = geometric(space, 8, 0.3 * std::exp(-c_gamma(gamma)));
    const auto pen = map_penalty(space, prior, gamma, sigma2);
    const double c = minimal_lower_constant(space, prior);
    const auto rep = penalty_lower_bound_check(pen, space, prior, gamma, sigma2, c);
    REQUIRE(rep.applicable);
    CHECK(rep.passed);
    const double cg = c_gamma(gamma);
    const double big_c = 2 * 2 * (std::max(c, cg) + 1 + std::log(2.0));
    CHECK(rep.upper_constant == doctest::Approx(big_c).epsilon(1e-14));
    REQUIRE(rep.rows.size() == 8);
    for (const auto& row : rep.rows) {
      const double k = static_cast<double>(row.k);
      const double lm = row.k == 8 ? 0.0 : log_binomial(8, row.k);
      CHECK(pen(row.k) >= 2 * sigma2 * 2 * k * (cg + 0.5 * std::log(2.0)));
      CHECK(pen(row.k) <= big_c * sigma2 * std::max(lm, k));
    }
  }
}

TEST_CASE("penalty properties over random compliant priors") {
  for (double gamma : {0.25, 1.0, 4.0}) {
    for (double shrink : {0.01, 0.5, 0.9}) {
      for (const auto& space : {ModelSpace::ordered(10), ModelSpace::complete(10), ModelSpace::paired_hierarchy(4)}) {
        const std::size_t r = space.p();
        const auto prior = geometric(space, r, shrink * std::exp(-c_gamma(gamma)));
        const auto pen = map_penalty(space, prior, gamma, 1.0);
        const auto rep = check_prior_conditions(space, prior, gamma, 1.0);
        CHECK(rep.tail_mass < 1.0);
        if (!rep.upper_ok) continue;
        double prev = pen(0);
        for (std::size_t k = 1; k <= r; ++k) {
          if (!std::isfinite(pen(k))) continue;
          CHECK(pen(k) > prev);
          prev = pen(k);
        }
      }
    }
  }
}
