#include "poolgaze/pool_kernels.hpp"

#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace poolgaze {

std::vector<PeriodSummary> pool_period_summaries(const DataRoot& root, const MachineRegistry& registry, Date start,
                                                 int span_days, const ReconstructionParams& params, ReadMode mode) {
    const auto n = static_cast<long>(registry.entries.size());
    std::vector<PeriodSummary> out(registry.entries.size());
    std::vector<std::exception_ptr> errors(registry.entries.size());

    // Machines vary a lot in record volume, hence dynamic scheduling.
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) {
        const auto& e = registry.entries[static_cast<std::size_t>(i)];
        try {
            out[static_cast<std::size_t>(i)] =
                period_summary_days(root, e.machine, e.slot_count, start, span_days, params, mode);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& err : errors) {
        if (err) {
            std::rethrow_exception(err);
        }
    }
    return out;
}

std::vector<PeriodSummary> pool_period_summaries_serial(const DataRoot& root, const MachineRegistry& registry,
                                                        Date start, int span_days,
                                                        const ReconstructionParams& params, ReadMode mode) {
    std::vector<PeriodSummary> out;
    out.reserve(registry.entries.size());
    for (const auto& e : registry.entries) {
        out.push_back(period_summary_days(root, e.machine, e.slot_count, start, span_days, params, mode));
    }
    return out;
}

int pool_kernel_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace poolgaze
