#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "remtrack/geometry.hpp"

namespace remtrack {

struct NodeId {
    int instance = 0;
    int t = 0;
    bool operator==(const NodeId&) const = default;
};

using FrameInput = std::vector<InstanceBox>;

/// Spatial layer of the graph at one time step. Nodes are kept in ascending
/// instance order; neighbor lists hold node indices, also ascending.
struct GraphFrame {
    std::vector<int> instances;
    std::vector<BoundingBox> boxes;
    std::vector<double> distances;  // row-major n x n scaled distances
    std::vector<std::vector<std::size_t>> neighbors;

    std::size_t size() const { return instances.size(); }
    std::optional<std::size_t> index_of(int instance) const;
    double distance(std::size_t i, std::size_t j) const { return distances[i * size() + j]; }
    std::size_t spatial_edge_count() const;  // undirected

    bool operator==(const GraphFrame&) const = default;
};

/// Per-frame node sets with spatial edges, plus temporal edges that link the
/// same instance across consecutive frames. `temporal[t]` lists the instances
/// linked from frame t to frame t + 1.
struct SpatioTemporalGraph {
    double d_th = 15.0;
    std::vector<GraphFrame> frames;
    std::vector<std::vector<int>> temporal;

    std::size_t frame_count() const { return frames.size(); }
    /// True iff `instance` has a node at t - 1 and at t.
    bool continues(int t, int instance) const;

    bool operator==(const SpatioTemporalGraph&) const = default;
};

/// Builds the spatial layer of one frame. Throws on duplicate ids.
GraphFrame make_graph_frame(const FrameInput& input, double d_th);

SpatioTemporalGraph build_graph(std::span<const FrameInput> frames, double d_th);

/// Appends frame `t`, which must be the next frame index. The node set of the
/// new frame is the previous one minus `left` plus `entered`; `boxes` gives a
/// box for every instance of that set and nothing else.
void update_graph(SpatioTemporalGraph& graph, int t, const std::set<int>& entered,
                  const std::set<int>& left, const FrameInput& boxes);

/// Instances spatially adjacent to `instance` at frame t, ascending.
std::vector<int> neighbors(const SpatioTemporalGraph& graph, int t, int instance);

}  // namespace remtrack
