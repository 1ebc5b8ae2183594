#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dst/matrix.hpp"

namespace dst {

struct DecompositionConfig {
    std::size_t trend_window = 0;  // odd kernel length w; 0 = next odd >= period + 1
    std::size_t period = 24;       // seasonality length p, in steps
    std::size_t block_window = 3;  // blocks averaged per sliding window (l)
    std::size_t block_stride = 1;  // window stride, in blocks (m)

    std::size_t resolved_trend_window() const;
    void validate(std::size_t series_length) const;
};

/// Additive split; trend + seasonal + residual reconstructs the input
/// exactly (floating-point addition aside).
struct Components {
    Matrix trend;
    Matrix seasonal;
    Matrix residual;
};

/// (1 - |x|^3)^3 on [-1, 1], zero outside.
double tricube(double x);

/// Moving weighted average with tricube weights k_j ∝ tricube(j / ((w-1)/2 + 1)),
/// j in [-(w-1)/2, (w-1)/2]. At the edges the truncated kernel is renormalized
/// over the in-bounds indices. Requires odd w <= 2T - 1.
std::vector<double> extract_trend(std::span<const double> series, std::size_t trend_window);

/// Block-wise seasonal estimate: the series is split into period-length
/// blocks (a trailing partial block participates entry-wise), padded on both
/// ends with ceil((l-1)/2) copies of the edge blocks, and each output block i
/// takes the average of the l padded blocks starting at the last strided
/// window position at or before i.
std::vector<double> extract_seasonal(std::span<const double> detrended,
                                     const DecompositionConfig& config);

/// One seasonal series per period, extracted successively (each one is
/// subtracted before the next period is processed).
std::vector<std::vector<double>> extract_seasonal_set(std::span<const double> detrended,
                                                      const std::vector<std::size_t>& periods,
                                                      std::size_t block_window,
                                                      std::size_t block_stride);

/// Per-channel decomposition of a (channels x length) sample; rows are
/// independent. Exactly one seasonal component.
Components decompose(const Matrix& input, const DecompositionConfig& config);

/// Convenience overload for a single series.
Components decompose(std::span<const double> series, const DecompositionConfig& config);

}  // namespace dst
