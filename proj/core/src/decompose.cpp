#include "dst/decompose.hpp"

#include <cmath>
#include <stdexcept>

namespace dst {

std::size_t DecompositionConfig::resolved_trend_window() const {
    if (trend_window) return trend_window;
    std::size_t w = period + 1;
    if (w % 2 == 0) ++w;
    return w;
}

void DecompositionConfig::validate(std::size_t series_length) const {
    if (period < 2) throw std::invalid_argument("decompose: period must be >= 2");
    if (block_window < 1) throw std::invalid_argument("decompose: block_window must be >= 1");
    if (block_stride < 1) throw std::invalid_argument("decompose: block_stride must be >= 1");
    if (series_length < period)
        throw std::invalid_argument("decompose: series shorter than one period");
    std::size_t w = resolved_trend_window();
    if (w % 2 == 0) throw std::invalid_argument("decompose: trend_window must be odd");
    if (w > 2 * series_length - 1)
        throw std::invalid_argument("decompose: trend_window too large for series");
}

double tricube(double x) {
    double a = std::abs(x);
    if (a > 1.0) return 0.0;
    double t = 1.0 - a * a * a;
    return t * t * t;
}

std::vector<double> extract_trend(std::span<const double> series, std::size_t trend_window) {
    if (trend_window % 2 == 0)
        throw std::invalid_argument("extract_trend: window must be odd");
    const std::size_t T = series.size();
    if (trend_window > 2 * T - 1)
        throw std::invalid_argument("extract_trend: window too large for series");

    const std::size_t half = (trend_window - 1) / 2;
    std::vector<double> weights(trend_window);
    for (std::size_t j = 0; j < trend_window; ++j) {
        double offset = static_cast<double>(j) - static_cast<double>(half);
        weights[j] = tricube(offset / (static_cast<double>(half) + 1.0));
    }

    std::vector<double> trend(T);
    for (std::size_t t = 0; t < T; ++t) {
        double acc = 0.0, wsum = 0.0;
        std::size_t jlo = half > t ? half - t : 0;
        std::size_t jhi = std::min(trend_window, T + half - t);
        for (std::size_t j = jlo; j < jhi; ++j) {
            acc += weights[j] * series[t + j - half];
            wsum += weights[j];
        }
        trend[t] = acc / wsum;
    }
    return trend;
}

namespace {

// The series viewed as period-length blocks with symmetric edge padding.
// Padded block index b maps to original block clamp(b - pad, 0, n - 1).
struct BlockView {
    std::span<const double> series;
    std::size_t period;
    std::size_t n_blocks;
    std::size_t pad;

    std::size_t block_length(std::size_t original) const {
        if (original + 1 < n_blocks) return period;
        return series.size() - (n_blocks - 1) * period;
    }
    std::size_t padded_count() const { return n_blocks + 2 * pad; }
    std::size_t original_of(std::size_t padded) const {
        if (padded < pad) return 0;
        std::size_t b = padded - pad;
        return b >= n_blocks ? n_blocks - 1 : b;
    }
    double entry(std::size_t padded, std::size_t r) const {
        std::size_t b = original_of(padded);
        return series[b * period + r];
    }
    std::size_t entry_count(std::size_t padded) const { return block_length(original_of(padded)); }
};

}  // namespace

std::vector<double> extract_seasonal(std::span<const double> detrended,
                                     const DecompositionConfig& config) {
    config.validate(detrended.size());
    const std::size_t T = detrended.size();
    const std::size_t p = config.period;
    const std::size_t l = config.block_window;
    const std::size_t m = config.block_stride;

    // pad = ceil((l-1)/2), which equals l/2 in integer arithmetic.
    BlockView blocks{detrended, p, (T + p - 1) / p, l / 2};

    std::vector<double> seasonal(T);
    for (std::size_t i = 0; i < blocks.n_blocks; ++i) {
        // Window of l padded blocks at the last strided position <= i.
        std::size_t w0 = (i / m) * m;
        std::size_t len = blocks.block_length(i);
        for (std::size_t r = 0; r < len; ++r) {
            double acc = 0.0;
            std::size_t count = 0;
            for (std::size_t j = w0; j < w0 + l && j < blocks.padded_count(); ++j) {
                if (r < blocks.entry_count(j)) {
                    acc += blocks.entry(j, r);
                    ++count;
                }
            }
            seasonal[i * p + r] = count ? acc / static_cast<double>(count) : 0.0;
        }
    }
    return seasonal;
}

std::vector<std::vector<double>> extract_seasonal_set(std::span<const double> detrended,
                                                      const std::vector<std::size_t>& periods,
                                                      std::size_t block_window,
                                                      std::size_t block_stride) {
    std::vector<double> current(detrended.begin(), detrended.end());
    std::vector<std::vector<double>> out;
    out.reserve(periods.size());
    for (std::size_t p : periods) {
        DecompositionConfig cfg;
        cfg.period = p;
        cfg.block_window = block_window;
        cfg.block_stride = block_stride;
        auto seasonal = extract_seasonal(current, cfg);
        for (std::size_t t = 0; t < current.size(); ++t) current[t] -= seasonal[t];
        out.push_back(std::move(seasonal));
    }
    return out;
}

Components decompose(const Matrix& input, const DecompositionConfig& config) {
    config.validate(input.cols());
    const std::size_t D = input.rows(), L = input.cols();
    Components c;
    c.trend = Matrix(D, L);
    c.seasonal = Matrix(D, L);
    c.residual = Matrix(D, L);

    std::size_t w = config.resolved_trend_window();
    for (std::size_t d = 0; d < D; ++d) {
        auto row = input.row(d);
        auto trend = extract_trend(row, w);
        std::vector<double> detrended(L);
        for (std::size_t t = 0; t < L; ++t) detrended[t] = row[t] - trend[t];
        auto seasonal = extract_seasonal(detrended, config);
        for (std::size_t t = 0; t < L; ++t) {
            c.trend(d, t) = trend[t];
            c.seasonal(d, t) = seasonal[t];
            c.residual(d, t) = row[t] - trend[t] - seasonal[t];
        }
    }
    return c;
}

Components decompose(std::span<const double> series, const DecompositionConfig& config) {
    Matrix m(1, series.size(), std::vector<double>(series.begin(), series.end()));
    return decompose(m, config);
}

}  // namespace dst
