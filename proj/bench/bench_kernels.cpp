// Wall-clock comparison of the OpenMP kernels against their serial references.
// Each pair is also checked for identical output, so a speedup never hides a mismatch.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mapsel/harness.hpp"
#include "mapsel/linalg.hpp"
#include "mapsel/selector.hpp"

using namespace mapsel;

namespace {

template <class F>
double best_of(int runs, F&& f) {
  double best = 1e300;
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const std::string& name, double parallel, double serial, bool same) {
  std::printf("%-34s parallel %9.4fs  serial %9.4fs  speedup %5.2fx  %s\n", name.c_str(), parallel, serial,
              serial / parallel, same ? "identical" : "MISMATCH");
}

bool same_entries(const std::vector<SizeEntry>& a, const std::vector<SizeEntry>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k].rss != b[k].rss || !(a[k].model == b[k].model)) return false;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  const int runs = argc > 1 ? std::atoi(argv[1]) : 3;
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled; both columns run serially\n");
#endif
  bool all_same = true;

  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  const auto gaussian = [&](Eigen::Index n, Eigen::Index p) {
    Eigen::MatrixXd m(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) m(i, j) = nd(rng);
    return m;
  };

  {
    const DesignMatrix x(gaussian(200, 18), Intercept::Exclude);
    const Eigen::VectorXd y = gaussian(200, 1).col(0);
    const auto space = ModelSpace::complete(18);
    std::vector<SizeEntry> a, b;
    const double tp = best_of(runs, [&] { a = best_per_size(x, y, space, x.rank(), Strategy::Exhaustive); });
    const double ts = best_of(runs, [&] { b = serial::best_per_size(x, y, space, x.rank(), Strategy::Exhaustive); });
    const bool same = same_entries(a, b);
    all_same &= same;
    report("best_per_size complete p=18", tp, ts, same);
  }

  {
    const DesignMatrix x(gaussian(60, 20), Intercept::Exclude);
    SparseEigs a, b;
    const double tp = best_of(runs, [&] { a = sparse_eigs(x, 5); });
    const double ts = best_of(runs, [&] { b = serial::sparse_eigs(x, 5); });
    const bool same = a.tau == b.tau && a.phi_min == b.phi_min && a.phi_max == b.phi_max;
    all_same &= same;
    report("sparse_eigs p=20 k<=5", tp, ts, same);
  }

  {
    SimConfig c;
    c.replications = 1000;
    SimReport a, b;
    const double tp = best_of(runs, [&] { a = run_simulation(c); });
    const double ts = best_of(runs, [&] { b = serial::run_simulation(c); });
    bool same = a.rows.size() == b.rows.size();
    for (std::size_t i = 0; same && i < a.rows.size(); ++i) same = a.rows[i].amse == b.rows[i].amse;
    all_same &= same;
    report("run_simulation default, 1000 reps", tp, ts, same);
  }

  return all_same ? 0 : 1;
}
