#include <benchmark/benchmark.h>

#include <vector>

#include "dosreg/estimators.hpp"

namespace {

void BM_DosDerivativeCurve(benchmark::State& state) {
  const auto model = dosreg::make_box_model(1, 64, 1.0, 2.0);
  const dosreg::DisorderField disorder(dosreg::SingleSiteDensity(3));
  const std::vector<double> energies{-1.0, 0.0, 1.0, 2.0, 3.0};
  dosreg::McConfig mc;
  mc.n_samples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dosreg::estimate_dos_derivative_curve(
        model, disorder, model.n_sites(), energies, 0.2, 1, mc));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DosDerivativeCurve)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_TelescopeSeries(benchmark::State& state) {
  const auto model = dosreg::make_box_model(1, 12, 1.0, 10.0);
  const dosreg::DisorderField disorder(dosreg::SingleSiteDensity(3));
  dosreg::McConfig mc;
  mc.n_samples = 100;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dosreg::telescope_series_diagnostic(
        model, disorder, 4, 20, dosreg::ComplexShift(5.0, 0.1), 0, mc));
  }
}
BENCHMARK(BM_TelescopeSeries)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
