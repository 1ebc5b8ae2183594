#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dst/matrix.hpp"

namespace dst {

// ---- calendar ---------------------------------------------------------------

struct CivilTime {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31
    int hour = 0;
    int minute = 0;
    int second = 0;
};

std::int64_t days_from_civil(int year, int month, int day);
CivilTime civil_from_seconds(std::int64_t epoch_seconds);
std::int64_t seconds_from_civil(const CivilTime& c);

/// Monday = 0 .. Sunday = 6.
int weekday_monday0(std::int64_t epoch_seconds);

/// Strict `YYYY-MM-DD HH:MM:SS`; throws std::runtime_error on anything else.
std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t epoch_seconds);

// ---- table ------------------------------------------------------------------

/// T timestamped rows of D channels; missing observations are NaN until
/// impute_missing has run.
struct TimeSeriesTable {
    std::vector<std::int64_t> timestamps;
    Matrix values;  // T x D
    std::vector<std::string> channel_names;
    std::int64_t resolution = 0;  // seconds between consecutive rows

    std::size_t rows() const { return timestamps.size(); }
    std::size_t channels() const { return channel_names.size(); }
    bool has_missing() const;
};

struct TableSchema {
    std::string timestamp_column;     // empty = first column
    std::int64_t resolution_seconds = 0;  // 0 = infer from the smallest gap
    std::vector<std::string> channels;    // empty = every non-timestamp column
    std::size_t max_channels = 0;         // 0 = no limit
};

/// Reads a comma-separated table with a header row. Rows are sorted by
/// timestamp, exact duplicate timestamps are dropped (first kept), and gaps
/// in the timestamp grid become missing (NaN) rows. Lines starting with '#'
/// are ignored. Throws on unparseable timestamps, off-grid rows, or a table
/// with zero channels.
TimeSeriesTable load_table(const std::string& path, const TableSchema& schema = {});

/// Writes the same format load_table reads. Missing values become empty
/// cells. If `trailer_comment` is nonempty it is appended as a final
/// '#'-prefixed line (used for provenance stamps).
void save_table(const std::string& path, const TimeSeriesTable& table,
                const std::string& trailer_comment = "");

/// Fills every missing value with the mean of observed values in the same
/// (month, day-of-week, hour) bucket of that channel, falling back to the
/// channel mean when the bucket has no observations. Observed values are
/// untouched; the operation is idempotent.
TimeSeriesTable impute_missing(const TimeSeriesTable& table);

// ---- standardization ----------------------------------------------------------

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> std;  // population standard deviation, strictly positive
};

/// Per-channel mean and population std over rows [row_begin, row_end).
/// Throws if a channel has zero variance in that range.
NormalizationStats compute_stats(const TimeSeriesTable& table, std::size_t row_begin,
                                 std::size_t row_end);

TimeSeriesTable standardize(const TimeSeriesTable& table, const NormalizationStats& stats);
TimeSeriesTable destandardize(const TimeSeriesTable& table, const NormalizationStats& stats);

/// Undo standardization on a (D x H) channel-major forecast block.
Matrix destandardize_forecast(const Matrix& forecast, const NormalizationStats& stats);

// ---- time features ------------------------------------------------------------

/// 4 x T matrix of normalized calendar features, rows in order
/// hour-of-day/23 - 0.5, day-of-week/6 - 0.5 (Monday = 0),
/// (day-of-month - 1)/30 - 0.5, (month - 1)/11 - 0.5. All values in
/// [-0.5, 0.5].
Matrix make_time_features(std::span<const std::int64_t> timestamps);

// ---- windowing & splits --------------------------------------------------------

struct WindowSample {
    Matrix lookback;              // D x L
    Matrix target;                // D x H
    Matrix time_features;         // 4 x L
    Matrix target_time_features;  // 4 x H
    std::size_t t_end = 0;        // table row index of the last look-back instant
};

/// Every stride-spaced sample with a full look-back and a full horizon;
/// count = floor((T - L - H)/stride) + 1. Throws when T < L + H.
std::vector<WindowSample> window_samples(const TimeSeriesTable& table, std::size_t lookback,
                                         std::size_t horizon, std::size_t stride = 1);

/// Samples whose targets lie fully inside rows [range_begin, range_end).
/// Look-back may reach at most `lookback` rows before range_begin (and never
/// before row 0), which is exactly the benchmark split convention.
std::vector<WindowSample> window_samples_in_range(const TimeSeriesTable& table,
                                                  std::size_t range_begin, std::size_t range_end,
                                                  std::size_t lookback, std::size_t horizon,
                                                  std::size_t stride = 1);

struct SplitConfig {
    double train_fraction = 0.7;
    double val_fraction = 0.1;
    double test_fraction = 0.2;
};

struct SplitBounds {
    std::size_t train_end = 0;  // train = [0, train_end)
    std::size_t val_end = 0;    // val   = [train_end, val_end), test = [val_end, T)
};

/// Contiguous chronological split. Fractions must be nonnegative and sum to 1.
SplitBounds split_bounds(const SplitConfig& config, std::size_t rows);

}  // namespace dst
