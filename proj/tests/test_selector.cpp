#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "mapsel/errors.hpp"
#include "mapsel/selector.hpp"

using namespace mapsel;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = nd(rng);
  return x;
}

Eigen::MatrixXd orthonormal_columns(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(n, p, rng));
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
}

// Residual sum of squares from a pivoted QR solve of the raw columns.
double oracle_rss(const Eigen::MatrixXd& x, bool intercept, const Eigen::VectorXd& y, const std::vector<Index>& cols) {
  const Eigen::Index k = static_cast<Eigen::Index>(cols.size()) + (intercept ? 1 : 0);
  if (k == 0) return y.squaredNorm();
  Eigen::MatrixXd a(x.rows(), k);
  Eigen::Index c = 0;
  if (intercept) a.col(c++).setOnes();
  for (Index j : cols) a.col(c++) = x.col(static_cast<Eigen::Index>(j));
  const Eigen::VectorXd b = a.colPivHouseholderQr().solve(y);
  return (y - a * b).squaredNorm();
}

struct BruteForce {
  Model model;
  double objective = kInf;
};

// Minimizes RSS + Pen over every subset of {0..p-1} that the space admits.
BruteForce brute_force(const Eigen::MatrixXd& x, bool intercept, const Eigen::VectorXd& y, const ModelSpace& space,
                       const PenaltyFn& pen) {
  const std::size_t p = space.p();
  BruteForce best;
  std::size_t best_size = 0;
  for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
    std::vector<Index> cols;
    for (Index j = 0; j < p; ++j)
      if (mask >> j & 1u) cols.push_back(j);
    if (cols.size() > pen.r()) continue;
    const Model m(cols);
    if (!contains(space, m)) continue;
    const double obj = oracle_rss(x, intercept, y, cols) + pen(cols.size());
    const bool better = obj < best.objective - 1e-9 * std::max(1.0, std::abs(obj)) ||
                        (std::abs(obj - best.objective) <= 1e-9 * std::max(1.0, std::abs(obj)) &&
                         (cols.size() < best_size || (cols.size() == best_size && m < best.model)));
    if (better) {
      best.objective = obj;
      best.model = m;
      best_size = cols.size();
    }
  }
  return best;
}

std::vector<ModelSpace> small_spaces() {
  return {ModelSpace::complete(6), ModelSpace::ordered(6), ModelSpace::paired_hierarchy(3),
          ModelSpace::grouped(6, {{0}, {1, 2}, {3, 4, 5}}),
          ModelSpace::explicit_list(6, {Model({0}), Model({0, 3}), Model({1, 2, 5}), Model({0, 1, 2, 3, 4})})};
}

}  // namespace

TEST_CASE("zero response selects the null model") {
  std::mt19937_64 rng(11);
  const DesignMatrix x(random_matrix(15, 6, rng));
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(15);
  for (const auto& space : small_spaces()) {
    const auto res = select(x, y, space, linear_penalty(1.0, 1.0, 6));
    CHECK(res.model.size() == 0);
    CHECK(res.objective == doctest::Approx(0.0));
  }
}

TEST_CASE("orthonormal design, complete space, linear penalty: hard thresholding") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd q = orthonormal_columns(32, 12, rng);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(12);
    beta.head(4) << 3, -2.5, 1.5, 4;
    const Eigen::VectorXd y = q * beta + random_matrix(32, 1, rng).col(0);
    const double lambda = std::log(12.0);
    const DesignMatrix x(q, Intercept::Exclude);
    const auto res = select(x, y, ModelSpace::complete(12), linear_penalty(lambda, 1.0, 12));
    std::vector<Index> expected;
    for (Index j = 0; j < 12; ++j) {
      const double z = q.col(static_cast<Eigen::Index>(j)).dot(y);
      if (z * z > 2 * lambda) expected.push_back(j);
    }
    CHECK(res.model == Model(expected));
    const auto greedy = select(x, y, ModelSpace::complete(12), linear_penalty(lambda, 1.0, 12), Strategy::Greedy);
    CHECK(greedy.model == res.model);
    CHECK(greedy.objective == doctest::Approx(res.objective).epsilon(1e-10));
  }
}

TEST_CASE("ordered space, cubic truth, RIC penalty") {
  const std::size_t n = 20, p = 10;
  std::vector<double> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  const Eigen::MatrixXd basis = orthonormal_polynomial_basis(nodes, p + 1);
  const Eigen::MatrixXd cols = basis.rightCols(p);
  const DesignMatrix x(cols);
  const auto pen = linear_penalty(lambda_ric(p), 1.0, p);

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd y = (20 * cols.col(0) - 15 * cols.col(1) + 25 * cols.col(2) + random_matrix(n, 1, rng).col(0)).array() + 2.0;
    const auto res = select(x, y, ModelSpace::ordered(p), pen);
    // Direct scan of the p + 1 nested models.
    std::size_t best_k = 0;
    double best = kInf;
    std::vector<Index> prefix;
    for (std::size_t k = 0; k <= p; ++k) {
      const double obj = oracle_rss(cols, true, y, prefix) + pen(k);
      if (obj < best) best = obj, best_k = k;
      prefix.push_back(k);
    }
    CHECK(res.model.size() == best_k);
    CHECK(res.objective == doctest::Approx(best).epsilon(1e-10));
    if (trial == 0) CHECK(res.model.size() == 3);
  }
}

TEST_CASE("exhaustive selection equals brute force on every family") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const bool intercept = trial % 2 == 0;
    const Eigen::MatrixXd a = random_matrix(14, 6, rng);
    Eigen::VectorXd beta = random_matrix(6, 1, rng).col(0);
    for (Eigen::Index j = 0; j < 6; ++j)
      if (rng() % 2) beta(j) = 0;
    const Eigen::VectorXd y = a * beta + 0.7 * random_matrix(14, 1, rng).col(0);
    const DesignMatrix x(a, intercept ? Intercept::Include : Intercept::Exclude);
    for (const auto& space : small_spaces()) {
      for (double lambda : {0.3, 1.0, 2.5}) {
        const auto pen = linear_penalty(lambda, 0.5, 6);
        const auto res = select(x, y, space, pen);
        const auto oracle = brute_force(a, intercept, y, space, pen);
        CHECK(res.objective == doctest::Approx(oracle.objective).epsilon(1e-9));
        CHECK(res.model == oracle.model);
        CHECK(contains(space, res.model));
        CHECK(res.per_size[res.model.size()].total == doctest::Approx(res.objective).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("select_map: brute force over all 2^6 models") {
  std::mt19937_64 rng(15);
  const auto space = ModelSpace::complete(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd a = random_matrix(20, 6, rng);
    const Eigen::VectorXd y = a.col(1) * 2 - a.col(4) + random_matrix(20, 1, rng).col(0);
    const auto prior = PriorSpec::truncated_geometric(0.3, penalty_log_counts(space, 6));
    const auto res = select_map(DesignMatrix(a), y, space, prior, 2.0, 1.0);
    const auto oracle = brute_force(a, true, y, space, map_penalty(space, prior, 2.0, 1.0));
    CHECK(res.model == oracle.model);
    CHECK(res.objective == doctest::Approx(oracle.objective).epsilon(1e-9));
  }
}

TEST_CASE("select_map on an ordered space equals the closed-form linear penalty") {
  std::mt19937_64 rng(16);
  const auto space = ModelSpace::ordered(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd a = random_matrix(25, 8, rng);
    const Eigen::VectorXd y = a.leftCols(3).rowwise().sum() + 1.5 * random_matrix(25, 1, rng).col(0);
    const double gamma = 0.5 + trial, q = 0.1 + 0.04 * trial;
    const auto prior = PriorSpec::truncated_geometric(q, penalty_log_counts(space, 8));
    const DesignMatrix x(a);
    const auto map = select_map(x, y, space, prior, gamma, 1.0);
    const auto lin = select(x, y, space, linear_penalty(lambda_map_geometric(gamma, q), 1.0, 8));
    CHECK(map.model == lin.model);
  }
}

TEST_CASE("larger gamma never selects a larger ordered model") {
  std::mt19937_64 rng(17);
  const auto space = ModelSpace::ordered(10);
  const auto prior = PriorSpec::truncated_geometric(0.5, penalty_log_counts(space, 10));
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd a = random_matrix(30, 10, rng);
    const Eigen::VectorXd y = a.leftCols(4) * Eigen::Vector4d(1, 0.6, 0.4, 0.2) + random_matrix(30, 1, rng).col(0);
    const DesignMatrix x(a);
    const auto small = select_map(x, y, space, prior, 1.0, 1.0);
    const auto large = select_map(x, y, space, prior, 100.0, 1.0);
    CHECK(large.model.size() <= small.model.size());
  }
}

TEST_CASE("greedy objective upper-bounds exhaustive") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 15; ++trial) {
    const Eigen::MatrixXd a = random_matrix(16, 6, rng);
    const Eigen::VectorXd y = a.col(0) - a.col(3) + random_matrix(16, 1, rng).col(0);
    const DesignMatrix x(a);
    for (const auto& space : small_spaces()) {
      const auto pen = linear_penalty(1.0, 1.0, 6);
      const auto ex = select(x, y, space, pen, Strategy::Exhaustive);
      const auto gr = select(x, y, space, pen, Strategy::Greedy);
      CHECK(gr.objective >= ex.objective - 1e-9);
      CHECK(contains(space, gr.model));
      for (std::size_t k = 0; k < ex.per_size.size(); ++k) CHECK(gr.per_size[k].rss >= ex.per_size[k].rss - 1e-9);
    }
  }
}

TEST_CASE("joint scaling of y and sigma leaves the selection unchanged") {
  std::mt19937_64 rng(19);
  const auto space = ModelSpace::paired_hierarchy(3);
  const auto prior = PriorSpec::truncated_geometric(0.2, penalty_log_counts(space, 6));
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd a = random_matrix(20, 6, rng);
    const Eigen::VectorXd y = a.col(0) + 0.5 * a.col(1) + random_matrix(20, 1, rng).col(0);
    const DesignMatrix x(a);
    for (double s : {0.01, 7.0, 1e3}) {
      CHECK(select_map(x, y, space, prior, 1.0, 1.0).model == select_map(x, s * y, space, prior, 1.0, s * s).model);
      CHECK(select(x, y, space, linear_penalty(2.0, 1.0, 6)).model ==
            select(x, s * y, space, linear_penalty(2.0, s * s, 6)).model);
    }
  }
}

TEST_CASE("parallel per-size search matches the serial reference") {
  std::mt19937_64 rng(20);
  for (const auto& space : {ModelSpace::complete(12), ModelSpace::paired_hierarchy(4),
                            ModelSpace::grouped(12, {{0, 1}, {2}, {3, 4, 5}, {6}, {7, 8}, {9, 10, 11}})}) {
    const Eigen::MatrixXd a = random_matrix(40, static_cast<Eigen::Index>(space.p()), rng);
    const Eigen::VectorXd y = a.leftCols(3).rowwise().sum() + random_matrix(40, 1, rng).col(0);
    const DesignMatrix x(a);
    for (auto strategy : {Strategy::Exhaustive, Strategy::Greedy}) {
      const auto par = best_per_size(x, y, space, space.p(), strategy);
      const auto ser = serial::best_per_size(x, y, space, space.p(), strategy);
      REQUIRE(par.size() == ser.size());
      for (std::size_t k = 0; k < par.size(); ++k) {
        CHECK(par[k].rss == ser[k].rss);
        CHECK(par[k].model == ser[k].model);
      }
    }
  }
}

TEST_CASE("exhaustive search refuses spaces above the enumeration cap") {
  std::mt19937_64 rng(21);
  const Eigen::MatrixXd a = random_matrix(30, 21, rng);
  const Eigen::VectorXd y = random_matrix(30, 1, rng).col(0);
  const DesignMatrix x(a);
  CHECK_THROWS_AS(select(x, y, ModelSpace::complete(21), linear_penalty(1.0, 1.0, 21)), CapacityError);
  CHECK_NOTHROW(select(x, y, ModelSpace::complete(21), linear_penalty(1.0, 1.0, 21), Strategy::Greedy));
  CHECK_NOTHROW(select(x, y, ModelSpace::ordered(21), linear_penalty(1.0, 1.0, 21)));
}

TEST_CASE("posterior weights") {
  std::mt19937_64 rng(22);
  const double gamma = 1.5, sigma2 = 0.8;

  SUBCASE("zero response: equal weights within a size, closed form across sizes") {
    const auto space = ModelSpace::complete(5);
    const auto prior = PriorSpec::truncated_geometric(0.4, penalty_log_counts(space, 5));
    const auto table = posterior_weights(DesignMatrix(random_matrix(10, 5, rng)), Eigen::VectorXd::Zero(10), space,
                                         prior, gamma, sigma2);
    REQUIRE(table.entries.size() == 32);
    double total = 0.0;
    for (const auto& e : table.entries) total += e.weight;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    auto unnormalized = [&](std::size_t k) {
      const double m = k == 5 ? 1.0 : std::exp(log_count_models(space, k));
      return prior.weight(k) / m * std::pow(1 + gamma, -0.5 * static_cast<double>(k));
    };
    double z = 0.0;
    for (const auto& e : table.entries) z += unnormalized(e.model.size());
    for (const auto& e : table.entries) CHECK(e.weight == doctest::Approx(unnormalized(e.model.size()) / z).epsilon(1e-10));
  }

  SUBCASE("equal quadform and size give equal weight") {
    Eigen::MatrixXd a = random_matrix(12, 4, rng);
    a.col(3) = a.col(2);
    const Eigen::VectorXd y = random_matrix(12, 1, rng).col(0);
    const auto space = ModelSpace::complete(4);
    const auto prior = PriorSpec::uniform(penalty_log_counts(space, 4));
    const auto table = posterior_weights(DesignMatrix(a, Intercept::Exclude), y, space, prior, gamma, sigma2);
    double w2 = -1, w3 = -1;
    for (const auto& e : table.entries) {
      if (e.model == Model({2})) w2 = e.weight;
      if (e.model == Model({3})) w3 = e.weight;
    }
    CHECK(w2 == doctest::Approx(w3).epsilon(1e-12));
  }

  SUBCASE("posterior argmax equals the MAP selection") {
    for (int trial = 0; trial < 30; ++trial) {
      const Eigen::MatrixXd a = random_matrix(18, 6, rng);
      const Eigen::VectorXd y = a.col(trial % 6) * 1.2 + random_matrix(18, 1, rng).col(0);
      const DesignMatrix x(a);
      for (const auto& space : small_spaces()) {
        const auto prior = PriorSpec::truncated_geometric(0.35, penalty_log_counts(space, 6));
        const auto post = posterior_weights(x, y, space, prior, gamma, sigma2);
        const auto sel = select_map(x, y, space, prior, gamma, sigma2);
        CHECK(post.argmax().model == sel.model);
      }
    }
  }
}
