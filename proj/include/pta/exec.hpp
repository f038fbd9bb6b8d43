#pragma once

namespace pta {

// Hot kernels run either as plain loops or OpenMP parallel-for. Both paths
// produce bit-identical results; tests compare them and tools/bench_kernels
// times them.
enum class ExecMode {
    Serial,
    Parallel,
};

} // namespace pta
