#include "dst/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "dst/decompose.hpp"
#include "dst/util.hpp"

namespace dst {

std::vector<std::pair<std::size_t, std::size_t>> ComponentGraph::edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < adjacency.rows(); ++i)
        for (std::size_t j = 0; j < adjacency.cols(); ++j)
            if (adjacency(i, j) != 0.0) out.emplace_back(i, j);
    return out;
}

std::vector<double> downsample(std::span<const double> series, std::size_t factor) {
    if (factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
    if (factor == 1) return {series.begin(), series.end()};
    std::size_t out_len = (series.size() + factor - 1) / factor;
    std::vector<double> out(out_len);
    for (std::size_t w = 0; w < out_len; ++w) {
        std::size_t begin = w * factor;
        std::size_t end = std::min(begin + factor, series.size());
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i) acc += series[i];
        out[w] = acc / static_cast<double>(end - begin);
    }
    return out;
}

double dtw_distance(std::span<const double> a, std::span<const double> b, std::size_t band) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) throw std::invalid_argument("dtw_distance: empty series");

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // Two-row DP; row index i walks series a.
    std::vector<double> prev(m + 1, kInf), cur(m + 1, kInf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        std::fill(cur.begin(), cur.end(), kInf);
        std::size_t jlo = 1, jhi = m;
        if (band < m) {
            // Sakoe-Chiba band of half-width `band` around the diagonal.
            std::size_t center = i * m / n;
            jlo = center > band ? center - band : 1;
            jhi = std::min(m, center + band);
            jlo = std::max<std::size_t>(jlo, 1);
        }
        for (std::size_t j = jlo; j <= jhi; ++j) {
            double cost = std::abs(a[i - 1] - b[j - 1]);
            double best = std::min({prev[j], cur[j - 1], prev[j - 1]});
            cur[j] = cost + best;
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

DistanceMatrix pairwise_distances(const std::vector<std::vector<double>>& channels,
                                  bool normalize, std::size_t band) {
    const std::size_t D = channels.size();
    if (D == 0) throw std::invalid_argument("pairwise_distances: no channels");
    for (const auto& c : channels)
        if (c.size() != channels[0].size())
            throw std::invalid_argument("pairwise_distances: channel length mismatch");

    DistanceMatrix dist;
    dist.values = Matrix(D, D, 0.0);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = i + 1; j < D; ++j) pairs.emplace_back(i, j);

    // Pairs are independent; shard them over a few threads and write into
    // disjoint cells, which keeps the result deterministic.
    std::size_t workers = std::min<std::size_t>(std::thread::hardware_concurrency(), pairs.size());
    if (workers <= 1) {
        for (auto [i, j] : pairs) {
            double d = dtw_distance(channels[i], channels[j], band);
            dist.values(i, j) = d;
            dist.values(j, i) = d;
        }
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&, w]() {
                for (std::size_t p = w; p < pairs.size(); p += workers) {
                    auto [i, j] = pairs[p];
                    double d = dtw_distance(channels[i], channels[j], band);
                    dist.values(i, j) = d;
                    dist.values(j, i) = d;
                }
            });
        }
        for (auto& t : threads) t.join();
    }

    if (normalize && D > 1) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t j = 0; j < D; ++j) {
                if (i == j) continue;
                lo = std::min(lo, dist.values(i, j));
                hi = std::max(hi, dist.values(i, j));
            }
        double range = hi - lo;
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t j = 0; j < D; ++j) {
                if (i == j) continue;
                dist.values(i, j) = range > 0.0 ? (dist.values(i, j) - lo) / range : 0.0;
            }
        dist.normalized = true;
    }
    return dist;
}

ComponentGraph knn_graph(const DistanceMatrix& dist, std::size_t k) {
    const std::size_t D = dist.values.rows();
    if (dist.values.cols() != D) throw std::invalid_argument("knn_graph: matrix not square");
    if (k < 1 || k > D - 1) throw std::invalid_argument("knn_graph: K out of range [1, D-1]");

    ComponentGraph g;
    g.adjacency = Matrix(D, D, 0.0);
    std::vector<std::size_t> order(D);
    for (std::size_t i = 0; i < D; ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return dist.values(i, a) < dist.values(i, b);  // stable: ties keep lower index first
        });
        std::size_t taken = 0;
        for (std::size_t j : order) {
            if (j == i) continue;
            g.adjacency(i, j) = 1.0;
            if (++taken == k) break;
        }
    }
    return g;
}

ComponentGraphSet build_component_graphs(const Matrix& values, const GraphBuildConfig& config) {
    const std::size_t T = values.rows(), D = values.cols();
    if (config.periods.empty())
        throw std::invalid_argument("build_component_graphs: need at least one period");
    std::size_t p0 = config.periods.front();
    std::size_t ds_trend = config.downsample_trend ? config.downsample_trend : p0;
    std::size_t ds_residual = config.downsample_residual ? config.downsample_residual : p0;
    std::size_t trend_window = config.trend_window;
    if (!trend_window) {
        DecompositionConfig dc;
        dc.period = p0;
        trend_window = dc.resolved_trend_window();
    }

    // Component series per channel: trend, one per seasonality period, residual.
    const std::size_t n_components = 2 + config.periods.size();
    std::vector<std::vector<std::vector<double>>> component_channels(
        n_components, std::vector<std::vector<double>>(D));

    for (std::size_t d = 0; d < D; ++d) {
        std::vector<double> channel = values.col(d);
        auto trend = extract_trend(channel, trend_window);
        std::vector<double> detrended(T);
        for (std::size_t t = 0; t < T; ++t) detrended[t] = channel[t] - trend[t];
        auto seasonals = extract_seasonal_set(detrended, config.periods, config.block_window,
                                              config.block_stride);
        std::vector<double> residual = detrended;
        for (const auto& s : seasonals)
            for (std::size_t t = 0; t < T; ++t) residual[t] -= s[t];

        component_channels[0][d] = downsample(trend, ds_trend);
        for (std::size_t s = 0; s < seasonals.size(); ++s)
            component_channels[1 + s][d] = downsample(seasonals[s], config.downsample_seasonal);
        component_channels[n_components - 1][d] = downsample(residual, ds_residual);
    }

    ComponentGraphSet set;
    for (std::size_t c = 0; c < n_components; ++c) {
        std::string tag;
        if (c == 0)
            tag = "trend";
        else if (c + 1 == n_components)
            tag = "residual";
        else
            tag = config.periods.size() == 1 ? "seasonal" : "seasonal" + std::to_string(c);
        auto dist = pairwise_distances(component_channels[c], config.normalize_distances,
                                       config.band);
        auto graph = knn_graph(dist, config.k);
        graph.component_tag = tag;
        set.tags.push_back(tag);
        set.graphs.push_back(std::move(graph));
        set.distances.push_back(std::move(dist));
    }
    return set;
}

void save_edge_list(const std::string& path, const ComponentGraph& graph,
                    const std::string& trailer_comment) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write edge list: " + path);
    for (auto [src, dst] : graph.edges()) os << src << ',' << dst << '\n';
    if (!trailer_comment.empty()) os << "# " << trailer_comment << '\n';
    if (!os) throw std::runtime_error("write failed for edge list: " + path);
}

ComponentGraph load_edge_list(const std::string& path, std::size_t nodes,
                              const std::string& component_tag) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open edge list: " + path);
    ComponentGraph g;
    g.component_tag = component_tag;
    g.adjacency = Matrix(nodes, nodes, 0.0);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("malformed edge line in " + path + ": '" + line + "'");
        std::size_t src = 0, dst = 0;
        auto r1 = std::from_chars(line.data(), line.data() + comma, src);
        auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), dst);
        if (r1.ec != std::errc{} || r2.ec != std::errc{} || src >= nodes || dst >= nodes)
            throw std::runtime_error("malformed edge line in " + path + ": '" + line + "'");
        g.adjacency(src, dst) = 1.0;
    }
    return g;
}

void save_matrix(const std::string& path, const Matrix& m, const std::string& trailer_comment) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write matrix: " + path);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) os << ',';
            os << format_double(m(r, c));
        }
        os << '\n';
    }
    if (!trailer_comment.empty()) os << "# " << trailer_comment << '\n';
    if (!os) throw std::runtime_error("write failed for matrix: " + path);
}

Matrix load_matrix(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open matrix: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            auto comma = line.find(',', pos);
            std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                           : comma - pos);
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{})
                throw std::runtime_error("malformed matrix cell in " + path + ": '" + cell + "'");
            row.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows[0].size())
            throw std::runtime_error("ragged matrix rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty matrix file: " + path);
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

}  // namespace dst
