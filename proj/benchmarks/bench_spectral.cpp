#include <benchmark/benchmark.h>

#include <vector>

#include "dosreg/graph_model.hpp"
#include "dosreg/lemma_verify.hpp"
#include "dosreg/spectral.hpp"

namespace {

std::vector<double> half_filled(std::size_t n) { return std::vector<double>(n, 0.5); }

void BM_BandedResolventColumn(benchmark::State& state) {
  const auto model = dosreg::make_box_model(1, static_cast<int>(state.range(0)), 1.0, 2.0);
  const auto omega = half_filled(model.n_sites());
  const auto h = dosreg::assemble_operator(model, omega, model.n_sites());
  const dosreg::ComplexShift z(0.3, 0.1);
  for (auto _ : state) {
    dosreg::ResolventSolver solver(h, z);
    benchmark::DoNotOptimize(solver.column(0));
  }
  state.SetLabel(h.is_banded() ? "banded" : "dense");
}
BENCHMARK(BM_BandedResolventColumn)->Arg(16)->Arg(64)->Arg(256);

void BM_DenseResolventColumn(benchmark::State& state) {
  const auto model = dosreg::make_box_model(2, static_cast<int>(state.range(0)), 1.0, 2.0);
  const auto omega = half_filled(model.n_sites());
  const auto h = dosreg::assemble_operator(model, omega, model.n_sites());
  const dosreg::ComplexShift z(0.3, 0.1);
  for (auto _ : state) {
    dosreg::ResolventSolver solver(h, z);
    benchmark::DoNotOptimize(solver.column(0));
  }
}
BENCHMARK(BM_DenseResolventColumn)->Arg(3)->Arg(6)->Arg(10);

void BM_Eigensystem(benchmark::State& state) {
  const auto model = dosreg::make_box_model(1, static_cast<int>(state.range(0)), 1.0, 2.0);
  const auto omega = half_filled(model.n_sites());
  const auto h = dosreg::assemble_hamiltonian(model, omega, model.n_sites());
  for (auto _ : state) benchmark::DoNotOptimize(dosreg::Eigensystem(h).eigenvalues());
}
BENCHMARK(BM_Eigensystem)->Arg(16)->Arg(64);

void BM_DissipativeExp(benchmark::State& state) {
  dosreg::Rng rng(7);
  const auto a = dosreg::random_dissipative(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(dosreg::dissipative_exp(a, 3.0));
}
BENCHMARK(BM_DissipativeExp)->Arg(2)->Arg(6)->Arg(8);

}  // namespace
