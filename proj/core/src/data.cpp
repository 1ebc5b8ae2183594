#include "dst/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dst/util.hpp"

namespace dst {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

}  // namespace

// Civil-date arithmetic after Howard Hinnant's algorithms; proleptic
// Gregorian calendar, no time zones.
std::int64_t days_from_civil(int year, int month, int day) {
    year -= month <= 2;
    const std::int64_t era = floor_div(year, 400);
    const unsigned yoe = static_cast<unsigned>(year - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(month + (month > 2 ? -3 : 9)) + 2) / 5 +
                         static_cast<unsigned>(day) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilTime civil_from_seconds(std::int64_t epoch_seconds) {
    std::int64_t days = floor_div(epoch_seconds, 86400);
    std::int64_t sod = floor_mod(epoch_seconds, 86400);

    std::int64_t z = days + 719468;
    const std::int64_t era = floor_div(z, 146097);
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;

    CivilTime c;
    c.year = static_cast<int>(y + (m <= 2));
    c.month = static_cast<int>(m);
    c.day = static_cast<int>(d);
    c.hour = static_cast<int>(sod / 3600);
    c.minute = static_cast<int>((sod % 3600) / 60);
    c.second = static_cast<int>(sod % 60);
    return c;
}

std::int64_t seconds_from_civil(const CivilTime& c) {
    return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 + c.minute * 60 +
           c.second;
}

int weekday_monday0(std::int64_t epoch_seconds) {
    // 1970-01-01 was a Thursday (= 3 with Monday = 0).
    return static_cast<int>(floor_mod(floor_div(epoch_seconds, 86400) + 3, 7));
}

std::int64_t parse_timestamp(const std::string& text) {
    CivilTime c;
    char sep1 = 0, sep2 = 0, sep3 = 0, sep4 = 0, sep5 = 0;
    if (std::sscanf(text.c_str(), "%d%c%d%c%d %d%c%d%c%d", &c.year, &sep1, &c.month, &sep2, &c.day,
                    &c.hour, &sep3, &c.minute, &sep4, &c.second) != 10 ||
        sep1 != '-' || sep2 != '-' || sep3 != ':' || sep4 != ':')
        throw std::runtime_error("unparseable timestamp: '" + text + "'");
    (void)sep5;
    if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 || c.hour < 0 || c.hour > 23 ||
        c.minute < 0 || c.minute > 59 || c.second < 0 || c.second > 59)
        throw std::runtime_error("unparseable timestamp: '" + text + "'");
    // Reject dates like Feb 30 by round-tripping through the day count.
    CivilTime rt = civil_from_seconds(seconds_from_civil(c));
    if (rt.year != c.year || rt.month != c.month || rt.day != c.day)
        throw std::runtime_error("unparseable timestamp: '" + text + "'");
    return seconds_from_civil(c);
}

std::string format_timestamp(std::int64_t epoch_seconds) {
    CivilTime c = civil_from_seconds(epoch_seconds);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", c.year, c.month, c.day, c.hour,
                  c.minute, c.second);
    return buf;
}

bool TimeSeriesTable::has_missing() const {
    for (double v : values.data())
        if (std::isnan(v)) return true;
    return false;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_cell(const std::string& cell) {
    if (cell.empty() || cell == "NaN" || cell == "nan" || cell == "NA") return kNan;
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw std::runtime_error("unparseable numeric cell: '" + cell + "'");
    return v;
}

}  // namespace

TimeSeriesTable load_table(const std::string& path, const TableSchema& schema) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open table file: " + path);

    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty table file: " + path);
    auto header = split_csv_line(line);

    std::size_t ts_col = 0;
    if (!schema.timestamp_column.empty()) {
        auto it = std::find(header.begin(), header.end(), schema.timestamp_column);
        if (it == header.end())
            throw std::runtime_error("timestamp column not found: " + schema.timestamp_column);
        ts_col = static_cast<std::size_t>(it - header.begin());
    }

    std::vector<std::size_t> channel_cols;
    std::vector<std::string> channel_names;
    if (!schema.channels.empty()) {
        for (const auto& want : schema.channels) {
            auto it = std::find(header.begin(), header.end(), want);
            if (it == header.end())
                throw std::runtime_error("channel column not found: " + want);
            channel_cols.push_back(static_cast<std::size_t>(it - header.begin()));
            channel_names.push_back(want);
        }
    } else {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c == ts_col) continue;
            channel_cols.push_back(c);
            channel_names.push_back(header[c]);
        }
    }
    if (schema.max_channels > 0 && channel_cols.size() > schema.max_channels) {
        channel_cols.resize(schema.max_channels);
        channel_names.resize(schema.max_channels);
    }
    if (channel_cols.empty()) throw std::runtime_error("table has zero channels: " + path);

    std::vector<std::pair<std::int64_t, std::vector<double>>> rows;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("row width does not match header in " + path);
        std::vector<double> vals(channel_cols.size());
        for (std::size_t i = 0; i < channel_cols.size(); ++i) vals[i] = parse_cell(cells[channel_cols[i]]);
        rows.emplace_back(parse_timestamp(cells[ts_col]), std::move(vals));
    }
    if (rows.empty()) throw std::runtime_error("table has no data rows: " + path);

    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    // Duplicate timestamps are rejected: the first occurrence wins.
    rows.erase(std::unique(rows.begin(), rows.end(),
                           [](const auto& a, const auto& b) { return a.first == b.first; }),
               rows.end());

    std::int64_t resolution = schema.resolution_seconds;
    if (resolution <= 0) {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            std::int64_t delta = rows[i].first - rows[i - 1].first;
            if (resolution <= 0 || delta < resolution) resolution = delta;
        }
        if (resolution <= 0)
            throw std::runtime_error("cannot infer resolution from a single-row table: " + path);
    }

    const std::int64_t t0 = rows.front().first;
    for (const auto& [ts, vals] : rows)
        if ((ts - t0) % resolution != 0)
            throw std::runtime_error("non-constant resolution after gap-fill in " + path +
                                     " at " + format_timestamp(ts));

    std::size_t grid_rows = static_cast<std::size_t>((rows.back().first - t0) / resolution) + 1;
    TimeSeriesTable table;
    table.channel_names = std::move(channel_names);
    table.resolution = resolution;
    table.timestamps.resize(grid_rows);
    table.values = Matrix(grid_rows, channel_cols.size(), kNan);
    for (std::size_t r = 0; r < grid_rows; ++r)
        table.timestamps[r] = t0 + static_cast<std::int64_t>(r) * resolution;
    for (const auto& [ts, vals] : rows) {
        std::size_t r = static_cast<std::size_t>((ts - t0) / resolution);
        for (std::size_t c = 0; c < vals.size(); ++c) table.values(r, c) = vals[c];
    }
    return table;
}

void save_table(const std::string& path, const TimeSeriesTable& table,
                const std::string& trailer_comment) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write table file: " + path);
    os << "date";
    for (const auto& name : table.channel_names) os << ',' << name;
    os << '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
        os << format_timestamp(table.timestamps[r]);
        for (std::size_t c = 0; c < table.channels(); ++c) {
            double v = table.values(r, c);
            os << ',';
            if (!std::isnan(v)) os << format_double(v);
        }
        os << '\n';
    }
    if (!trailer_comment.empty()) os << "# " << trailer_comment << '\n';
    if (!os) throw std::runtime_error("write failed for table file: " + path);
}

TimeSeriesTable impute_missing(const TimeSeriesTable& table) {
    TimeSeriesTable out = table;
    const std::size_t T = table.rows(), D = table.channels();

    // Bucket key: month 1..12, weekday 0..6, hour 0..23.
    std::vector<int> bucket(T);
    for (std::size_t r = 0; r < T; ++r) {
        CivilTime c = civil_from_seconds(table.timestamps[r]);
        bucket[r] = ((c.month - 1) * 7 + weekday_monday0(table.timestamps[r])) * 24 + c.hour;
    }
    constexpr int kBuckets = 12 * 7 * 24;

    for (std::size_t d = 0; d < D; ++d) {
        std::vector<double> sum(kBuckets, 0.0);
        std::vector<std::size_t> count(kBuckets, 0);
        double channel_sum = 0.0;
        std::size_t channel_count = 0;
        for (std::size_t r = 0; r < T; ++r) {
            double v = table.values(r, d);
            if (std::isnan(v)) continue;
            sum[bucket[r]] += v;
            ++count[bucket[r]];
            channel_sum += v;
            ++channel_count;
        }
        double channel_mean = channel_count ? channel_sum / static_cast<double>(channel_count) : 0.0;
        for (std::size_t r = 0; r < T; ++r) {
            if (!std::isnan(table.values(r, d))) continue;
            int b = bucket[r];
            out.values(r, d) =
                count[b] ? sum[b] / static_cast<double>(count[b]) : channel_mean;
        }
    }
    return out;
}

NormalizationStats compute_stats(const TimeSeriesTable& table, std::size_t row_begin,
                                 std::size_t row_end) {
    if (row_end > table.rows() || row_begin >= row_end)
        throw std::invalid_argument("compute_stats: bad row range");
    const std::size_t D = table.channels();
    const double n = static_cast<double>(row_end - row_begin);
    NormalizationStats stats;
    stats.mean.resize(D);
    stats.std.resize(D);
    for (std::size_t d = 0; d < D; ++d) {
        double s = 0.0;
        for (std::size_t r = row_begin; r < row_end; ++r) s += table.values(r, d);
        double mean = s / n;
        double sq = 0.0;
        for (std::size_t r = row_begin; r < row_end; ++r) {
            double dv = table.values(r, d) - mean;
            sq += dv * dv;
        }
        double sd = std::sqrt(sq / n);
        if (!(sd > 0.0))
            throw std::invalid_argument("compute_stats: channel '" + table.channel_names[d] +
                                        "' has zero variance");
        stats.mean[d] = mean;
        stats.std[d] = sd;
    }
    return stats;
}

namespace {

void check_stats(const TimeSeriesTable& table, const NormalizationStats& stats) {
    if (stats.mean.size() != table.channels() || stats.std.size() != table.channels())
        throw std::invalid_argument("standardize: stats dimension mismatch");
    for (double s : stats.std)
        if (!(s > 0.0)) throw std::invalid_argument("standardize: std must be positive");
}

}  // namespace

TimeSeriesTable standardize(const TimeSeriesTable& table, const NormalizationStats& stats) {
    check_stats(table, stats);
    TimeSeriesTable out = table;
    for (std::size_t r = 0; r < table.rows(); ++r)
        for (std::size_t d = 0; d < table.channels(); ++d)
            out.values(r, d) = (table.values(r, d) - stats.mean[d]) / stats.std[d];
    return out;
}

TimeSeriesTable destandardize(const TimeSeriesTable& table, const NormalizationStats& stats) {
    check_stats(table, stats);
    TimeSeriesTable out = table;
    for (std::size_t r = 0; r < table.rows(); ++r)
        for (std::size_t d = 0; d < table.channels(); ++d)
            out.values(r, d) = table.values(r, d) * stats.std[d] + stats.mean[d];
    return out;
}

Matrix destandardize_forecast(const Matrix& forecast, const NormalizationStats& stats) {
    if (forecast.rows() != stats.mean.size())
        throw std::invalid_argument("destandardize_forecast: channel count mismatch");
    Matrix out = forecast;
    for (std::size_t d = 0; d < forecast.rows(); ++d)
        for (std::size_t h = 0; h < forecast.cols(); ++h)
            out(d, h) = forecast(d, h) * stats.std[d] + stats.mean[d];
    return out;
}

Matrix make_time_features(std::span<const std::int64_t> timestamps) {
    Matrix out(4, timestamps.size());
    for (std::size_t t = 0; t < timestamps.size(); ++t) {
        CivilTime c = civil_from_seconds(timestamps[t]);
        out(0, t) = static_cast<double>(c.hour) / 23.0 - 0.5;
        out(1, t) = static_cast<double>(weekday_monday0(timestamps[t])) / 6.0 - 0.5;
        out(2, t) = static_cast<double>(c.day - 1) / 30.0 - 0.5;
        out(3, t) = static_cast<double>(c.month - 1) / 11.0 - 0.5;
    }
    return out;
}

namespace {

WindowSample cut_sample(const TimeSeriesTable& table, std::size_t t_end, std::size_t L,
                        std::size_t H) {
    const std::size_t D = table.channels();
    WindowSample s;
    s.t_end = t_end;
    s.lookback = Matrix(D, L);
    s.target = Matrix(D, H);
    std::size_t start = t_end + 1 - L;
    for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t i = 0; i < L; ++i) s.lookback(d, i) = table.values(start + i, d);
        for (std::size_t i = 0; i < H; ++i) s.target(d, i) = table.values(t_end + 1 + i, d);
    }
    s.time_features = make_time_features(
        std::span<const std::int64_t>(table.timestamps.data() + start, L));
    s.target_time_features = make_time_features(
        std::span<const std::int64_t>(table.timestamps.data() + t_end + 1, H));
    return s;
}

}  // namespace

std::vector<WindowSample> window_samples(const TimeSeriesTable& table, std::size_t lookback,
                                         std::size_t horizon, std::size_t stride) {
    if (table.rows() < lookback + horizon)
        throw std::invalid_argument("window_samples: table shorter than lookback + horizon");
    return window_samples_in_range(table, 0, table.rows(), lookback, horizon, stride);
}

std::vector<WindowSample> window_samples_in_range(const TimeSeriesTable& table,
                                                  std::size_t range_begin, std::size_t range_end,
                                                  std::size_t lookback, std::size_t horizon,
                                                  std::size_t stride) {
    if (lookback == 0 || horizon == 0) throw std::invalid_argument("window lengths must be positive");
    if (stride == 0) throw std::invalid_argument("stride must be positive");
    if (range_end > table.rows()) throw std::invalid_argument("range exceeds table");

    std::vector<WindowSample> out;
    // Targets stay inside the range; the look-back may reach up to L rows
    // before it (but never before the table starts).
    std::size_t first_t_end = lookback - 1;
    if (range_begin > 0 && range_begin - 1 > first_t_end) first_t_end = range_begin - 1;
    if (range_end < horizon + 1) return out;
    std::size_t last_t_end = range_end - horizon - 1;
    if (last_t_end < first_t_end) return out;
    for (std::size_t t = first_t_end; t <= last_t_end; t += stride)
        out.push_back(cut_sample(table, t, lookback, horizon));
    return out;
}

SplitBounds split_bounds(const SplitConfig& config, std::size_t rows) {
    if (config.train_fraction < 0 || config.val_fraction < 0 || config.test_fraction < 0)
        throw std::invalid_argument("split fractions must be nonnegative");
    double total = config.train_fraction + config.val_fraction + config.test_fraction;
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");
    SplitBounds b;
    b.train_end = static_cast<std::size_t>(static_cast<double>(rows) * config.train_fraction);
    b.val_end = b.train_end +
                static_cast<std::size_t>(static_cast<double>(rows) * config.val_fraction);
    b.val_end = std::min(b.val_end, rows);
    return b;
}

}  // namespace dst
