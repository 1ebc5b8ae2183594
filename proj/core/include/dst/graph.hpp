#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dst/matrix.hpp"

namespace dst {

/// Symmetric nonnegative pairwise distances with a zero diagonal. When
/// `normalized` is set, off-diagonal entries were min-max scaled into [0, 1].
struct DistanceMatrix {
    Matrix values;  // D x D
    bool normalized = false;
};

/// Directed K-nearest-neighbor adjacency: adjacency(i, j) == 1 means channel
/// j is one of the K selected neighbors of channel i (messages flow j -> i in
/// the model). Diagonal is zero; self-loops are the model's business.
struct ComponentGraph {
    Matrix adjacency;  // D x D of 0/1
    std::string component_tag;

    std::size_t nodes() const { return adjacency.rows(); }
    std::vector<std::pair<std::size_t, std::size_t>> edges() const;
};

/// Non-overlapping window means; a trailing partial window is averaged over
/// its actual count. factor 1 is the identity.
std::vector<double> downsample(std::span<const double> series, std::size_t factor);

/// Classical boundary-anchored dynamic-programming DTW with local cost
/// |a_i - b_j| and steps (i-1,j), (i,j-1), (i-1,j-1). `band` is a Sakoe-Chiba
/// half-width; the default leaves the alignment unconstrained.
double dtw_distance(std::span<const double> a, std::span<const double> b,
                    std::size_t band = std::numeric_limits<std::size_t>::max());

/// All-pairs DTW over equal-length channel series. With `normalize`, the
/// off-diagonal entries are min-max scaled. Pairs are computed concurrently.
DistanceMatrix pairwise_distances(const std::vector<std::vector<double>>& channels,
                                  bool normalize = true,
                                  std::size_t band = std::numeric_limits<std::size_t>::max());

/// For each node, edges to the K smallest off-diagonal distances; ties break
/// toward the lower channel index. Requires 1 <= K <= D - 1.
ComponentGraph knn_graph(const DistanceMatrix& dist, std::size_t k);

struct GraphBuildConfig {
    std::vector<std::size_t> periods = {24};  // seasonality periods (r >= 1; r = 1 in practice)
    std::size_t block_window = 3;
    std::size_t block_stride = 1;
    std::size_t trend_window = 0;        // 0 = derived from the first period
    std::size_t k = 3;                   // neighbors per node
    std::size_t downsample_trend = 0;    // 0 = first period
    std::size_t downsample_seasonal = 1;
    std::size_t downsample_residual = 0;  // 0 = first period
    std::size_t band = std::numeric_limits<std::size_t>::max();
    bool normalize_distances = true;
};

struct ComponentGraphSet {
    // Component order: trend, one entry per period ("seasonal", "seasonal2",
    // ...), residual.
    std::vector<std::string> tags;
    std::vector<ComponentGraph> graphs;
    std::vector<DistanceMatrix> distances;
};

/// Offline graph inference: decompose each channel of the (T x D) value
/// matrix, downsample each component, run pairwise DTW, and keep the K
/// nearest neighbors per node. The result is static.
ComponentGraphSet build_component_graphs(const Matrix& values, const GraphBuildConfig& config);

// ---- persistence -----------------------------------------------------------

/// One `src,dst` line per edge, lexicographic order, '#' comments allowed.
void save_edge_list(const std::string& path, const ComponentGraph& graph,
                    const std::string& trailer_comment = "");
ComponentGraph load_edge_list(const std::string& path, std::size_t nodes,
                              const std::string& component_tag);

/// Plain delimited matrix, one row per line.
void save_matrix(const std::string& path, const Matrix& m, const std::string& trailer_comment = "");
Matrix load_matrix(const std::string& path);

}  // namespace dst
