#include <benchmark/benchmark.h>

#include <alc/metrics.hpp>
#include <alc/net.hpp>
#include <alc/refine.hpp>
#include <alc/selection.hpp>
#include <alc/synthgen.hpp>

using namespace alc;

namespace {

Tensor bench_image(int side, std::uint64_t seed) {
    Rng rng(seed);
    Tensor img = Tensor::zeros({side, side});
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

ModelState bench_model(int n_classes = 2) {
    Arch arch;
    arch.n_classes = n_classes;
    Rng rng(1);
    return init_params(arch, rng);
}

void BM_ForwardDeterministic(benchmark::State& state) {
    const ModelState m = bench_model();
    const Tensor img = bench_image(static_cast<int>(state.range(0)), 2);
    const ForwardMode mode;
    for (auto _ : state) benchmark::DoNotOptimize(forward(m, img, mode));
}
BENCHMARK(BM_ForwardDeterministic)->Arg(32)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
    const ModelState m = bench_model();
    const int side = static_cast<int>(state.range(0));
    const Tensor img = bench_image(side, 3);
    LabelGrid label(side, side);
    for (int y = side / 4; y < side / 2; ++y)
        for (int x = side / 4; x < side / 2; ++x) label.at(y, x) = 1;
    const ForwardMode mode;
    for (auto _ : state) {
        Tape tape;
        const Tensor prob = forward(m, img, mode, tape);
        benchmark::DoNotOptimize(backward(m, tape, seg_loss_grad(prob, label)));
    }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(64);

void BM_PerturbedStack(benchmark::State& state) {
    const ModelState m = bench_model();
    const Tensor img = bench_image(32, 4);
    ForwardMode mode;
    mode.kind = ForwardKind::kStochastic;
    const int passes = static_cast<int>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(perturbed_stack(m, img, passes, mode, ++seed, "b"));
}
BENCHMARK(BM_PerturbedStack)->Arg(2)->Arg(8);

void BM_RefineLabel(benchmark::State& state) {
    const ModelState m = bench_model();
    const Tensor img = bench_image(32, 5);
    ForwardMode mode;
    mode.kind = ForwardKind::kStochastic;
    const ProbStack stack = perturbed_stack(m, img, 8, mode, 9, "b");
    for (auto _ : state) benchmark::DoNotOptimize(refine_label(stack));
}
BENCHMARK(BM_RefineLabel);

void BM_SampleUncertainty(benchmark::State& state) {
    const ModelState m = bench_model();
    const Tensor img = bench_image(32, 6);
    ForwardMode mode;
    mode.kind = ForwardKind::kStochastic;
    const ProbStack stack = perturbed_stack(m, img, 8, mode, 10, "b");
    for (auto _ : state) benchmark::DoNotOptimize(sample_uncertainty(stack));
}
BENCHMARK(BM_SampleUncertainty);

void BM_Hd95(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    Rng rng(7);
    LabelGrid a(side, side), b(side, side);
    for (auto& v : a.v) v = rng.uniform() < 0.3 ? 1 : 0;
    for (auto& v : b.v) v = rng.uniform() < 0.3 ? 1 : 0;
    a.at(0, 0) = b.at(0, 0) = 1;
    for (auto _ : state) benchmark::DoNotOptimize(hd95(a, b));
}
BENCHMARK(BM_Hd95)->Arg(32)->Arg(128);

void BM_MakeShapesDataset(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(make_shapes_dataset(++seed, 10, 32, 32, 2));
}
BENCHMARK(BM_MakeShapesDataset);

void BM_CorruptLabel(benchmark::State& state) {
    const Dataset ds = make_shapes_dataset(8, 1, 64, 64, 3);
    Rng rng(9);
    for (auto _ : state)
        benchmark::DoNotOptimize(corrupt_label(ds.samples[0].label, 3, 3, 15, rng));
}
BENCHMARK(BM_CorruptLabel);

}  // namespace

BENCHMARK_MAIN();
