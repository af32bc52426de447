// Benchmark comparing the OpenMP kernels against their serial reference
// implementations: batch verification fan-out and grid-search fan-out.
// Results must agree bit-exactly; only the wall clock should differ.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dlaser/features.hpp"
#include "dlaser/neural.hpp"
#include "dlaser/rng.hpp"
#include "dlaser/verify.hpp"

using namespace dlaser;

namespace {

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) :
#ifdef _OPENMP
                                omp_get_max_threads();
#else
                                1;
#endif
  std::printf("bench_parallel: %d worker thread(s)\n\n", threads);

  // --- batch verification ---------------------------------------------------
  const NetworkTopology topo = NetworkTopology::load(DLASER_ROOT "/data/topo_v1.txt");
  const AdaptationSpace space = enumerate_space(topo);
  UncertaintyProfile profile;
  profile.rng_seed = 1;
  profile.snr_init_min = -14.0;
  profile.snr_init_max = 12.0;
  const NetworkState state = initial_state(topo, profile);
  VerifierConfig cfg;
  cfg.runs_per_option = 500;
  cfg.base_seed = 2;
  cfg.threads = threads;
  cfg.sim.slot_capacity = 24;

  double t0 = now();
  const BatchVerifyResult serial = verify_batch_serial(topo, state, space.options, cfg);
  const double t_serial = now() - t0;
  t0 = now();
  const BatchVerifyResult parallel = verify_batch(topo, state, space.options, cfg);
  const double t_parallel = now() - t0;

  bool identical = serial.results.size() == parallel.results.size();
  for (const auto& [id, q] : serial.results) {
    const QualityVector& p = parallel.results.at(id);
    identical = identical && q.packet_loss == p.packet_loss && q.latency == p.latency &&
                q.energy == p.energy;
  }
  std::printf("verify_batch  (216 options x %d runs)\n", cfg.runs_per_option);
  std::printf("  serial   %.3f s\n", t_serial);
  std::printf("  openmp   %.3f s   speedup %.2fx   results identical: %s\n\n", t_parallel,
              t_serial / t_parallel, identical ? "yes" : "NO");

  // --- grid search ------------------------------------------------------------
  SplitMix64 rng(77);
  const long width = input_layout(topo).width();
  Matrix train_x(1200, width), val_x(400, width);
  for (double& v : train_x.v) v = rng.uniform(-1, 1);
  for (double& v : val_x.v) v = rng.uniform(-1, 1);
  auto labels_for = [&](const Matrix& x) {
    LabelSet y(2);
    for (long r = 0; r < x.rows; ++r) {
      y[0].push_back(x.at(r, 0) > 0 ? 1.0 : 0.0);
      y[1].push_back(x.at(r, 1) * 3.0);
    }
    return y;
  };
  const LabelSet train_y = labels_for(train_x);
  const LabelSet val_y = labels_for(val_x);
  const std::vector<HeadKindSpec> heads{{"t1", true}, {"o1", false}};

  std::vector<HyperParams> grid;
  for (int batch : {16, 32})
    for (double lr : {5e-3, 2e-3})
      for (int wdt : {16, 24}) {
        HyperParams hp;
        hp.core_layers = {wdt, wdt / 2};
        hp.class_layers = {8};
        hp.regr_layers = {8};
        hp.batch_size = batch;
        hp.learning_rate = lr;
        grid.push_back(hp);
      }

  GridSearchOptions opts;
  opts.epochs = 12;
  opts.patience = 4;
  opts.seed = 9;

  opts.threads = 1;
  t0 = now();
  const GridSearchResult gs_serial =
      grid_search(grid, train_x, train_y, val_x, val_y, heads, opts);
  const double g_serial = now() - t0;

  opts.threads = threads;
  t0 = now();
  const GridSearchResult gs_parallel =
      grid_search(grid, train_x, train_y, val_x, val_y, heads, opts);
  const double g_parallel = now() - t0;

  bool same_choice = gs_serial.best_index == gs_parallel.best_index;
  for (size_t i = 0; i < grid.size(); ++i)
    same_choice =
        same_choice && gs_serial.rows[i].val_loss == gs_parallel.rows[i].val_loss;
  std::printf("grid_search   (%zu combinations x %d epochs)\n", grid.size(), opts.epochs);
  std::printf("  serial   %.3f s\n", g_serial);
  std::printf("  openmp   %.3f s   speedup %.2fx   results identical: %s\n", g_parallel,
              g_serial / g_parallel, same_choice ? "yes" : "NO");

  return identical && same_choice ? 0 : 1;
}
