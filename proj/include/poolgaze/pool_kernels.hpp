#pragma once

// Pool-wide accounting: one PeriodSummary per registered machine. The
// parallel kernel distributes machines over OpenMP threads; the serial
// version is the reference it is tested and benchmarked against.

#include "poolgaze/aggregator.hpp"

#include <vector>

namespace poolgaze {

/// Results follow registry order.
std::vector<PeriodSummary> pool_period_summaries(const DataRoot& root, const MachineRegistry& registry, Date start,
                                                 int span_days, const ReconstructionParams& params, ReadMode mode);

std::vector<PeriodSummary> pool_period_summaries_serial(const DataRoot& root, const MachineRegistry& registry,
                                                        Date start, int span_days,
                                                        const ReconstructionParams& params, ReadMode mode);

/// Number of threads the parallel kernel will use.
int pool_kernel_threads();

} // namespace poolgaze
