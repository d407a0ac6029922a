// Serial reference vs OpenMP kernels, plus one training batch of the default
// model at 1 thread and at the machine's thread count.

#include <benchmark/benchmark.h>

#include "eostb/kernels.hpp"
#include "eostb/rng.hpp"
#include "eostb/scenegen.hpp"
#include "eostb/train.hpp"

#ifdef EOSTB_HAVE_OPENMP
#include <omp.h>
#endif

using namespace eostb;

namespace {

Matrix random_matrix(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& x : m.data) x = rng.normal();
  return m;
}

template <void (*Gemm)(ConstMatView, ConstMatView, MatView, bool)>
void bm_gemm_nn(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  Matrix c(n, n);
  for (auto _ : st) {
    Gemm(view(a), view(b), view(c), false);
    benchmark::DoNotOptimize(c.data.data());
  }
  st.SetItemsProcessed(st.iterations() * 2LL * n * n * n);
}

void bm_batch(benchmark::State& st) {
#ifdef EOSTB_HAVE_OPENMP
  const int saved = omp_get_max_threads();
  omp_set_num_threads(static_cast<int>(st.range(0)));
#endif
  DatasetConfig d;
  d.train_size = 16;
  const Vocab v = d.vocab();
  const auto data = build_dataset(d, Split::train);
  std::vector<const Example*> batch;
  for (const auto& ex : data) batch.push_back(&ex);
  ModelConfig m;
  m.vocab_size = v.size();
  m.scene_slots = d.perception.slots;
  m.feature_dim = d.perception.feature_dim();
  const Params p = init_params(m, 1);
  Grads g;
  for (auto _ : st) benchmark::DoNotOptimize(batch_loss_and_grads(p, batch, ObjectiveSpec{}, v.eos(), 0, g));
#ifdef EOSTB_HAVE_OPENMP
  omp_set_num_threads(saved);
#endif
}

}  // namespace

BENCHMARK(bm_gemm_nn<kernels::ref::gemm_nn>)->Name("gemm_nn/ref")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(bm_gemm_nn<kernels::par::gemm_nn>)->Name("gemm_nn/par")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(bm_batch)->Name("train_batch16/threads")->Arg(1)->Arg(kernels::max_threads())->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
