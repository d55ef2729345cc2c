#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace stacca {

/// Numerically stable summation with a fixed association order, so aggregate
/// metrics do not depend on accumulation chunking.
double pairwise_sum(const double* x, std::size_t n);
double pairwise_sum(const std::vector<double>& x);

/// Runs fn(0..n-1) on up to `threads` workers; indices are claimed from an
/// atomic counter. threads <= 1 degenerates to a serial loop. The first
/// exception thrown by any worker is rethrown after the join.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace stacca
