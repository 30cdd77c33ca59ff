#include "remtrack/st_graph.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>
#include <string>

namespace remtrack {

std::optional<std::size_t> GraphFrame::index_of(int instance) const {
    const auto it = std::lower_bound(instances.begin(), instances.end(), instance);
    if (it == instances.end() || *it != instance) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - instances.begin());
}

std::size_t GraphFrame::spatial_edge_count() const {
    std::size_t n = 0;
    for (const auto& nb : neighbors) {
        n += nb.size();
    }
    return n / 2;
}

bool SpatioTemporalGraph::continues(int t, int instance) const {
    if (t <= 0 || static_cast<std::size_t>(t) > temporal.size()) {
        return false;
    }
    const auto& links = temporal[static_cast<std::size_t>(t - 1)];
    return std::binary_search(links.begin(), links.end(), instance);
}

GraphFrame make_graph_frame(const FrameInput& input, double d_th) {
    FrameInput sorted = input;
    std::sort(sorted.begin(), sorted.end(),
              [](const InstanceBox& a, const InstanceBox& b) { return a.instance < b.instance; });
    GraphFrame f;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (sorted[k].instance < 0) {
            throw std::invalid_argument("graph: negative instance id " +
                                        std::to_string(sorted[k].instance));
        }
        if (k > 0 && sorted[k].instance == sorted[k - 1].instance) {
            throw std::invalid_argument("graph: duplicate instance id " +
                                        std::to_string(sorted[k].instance) + " within a frame");
        }
        f.instances.push_back(sorted[k].instance);
        f.boxes.push_back(sorted[k].box);
    }
    const std::size_t n = f.size();
    f.distances = distance_matrix(f.boxes);
    const std::vector<bool> adj = adjacency(f.boxes, d_th);
    f.neighbors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (adj[i * n + j]) {
                f.neighbors[i].push_back(j);
            }
        }
    }
    return f;
}

namespace {

std::vector<int> shared_instances(const GraphFrame& a, const GraphFrame& b) {
    std::vector<int> out;
    std::set_intersection(a.instances.begin(), a.instances.end(), b.instances.begin(),
                          b.instances.end(), std::back_inserter(out));
    return out;
}

}  // namespace

SpatioTemporalGraph build_graph(std::span<const FrameInput> frames, double d_th) {
    SpatioTemporalGraph g;
    g.d_th = d_th;
    for (const auto& input : frames) {
        g.frames.push_back(make_graph_frame(input, d_th));
        if (g.frames.size() >= 2) {
            g.temporal.push_back(shared_instances(g.frames[g.frames.size() - 2], g.frames.back()));
        }
    }
    return g;
}

void update_graph(SpatioTemporalGraph& graph, int t, const std::set<int>& entered,
                  const std::set<int>& left, const FrameInput& boxes) {
    if (t < 0 || static_cast<std::size_t>(t) != graph.frames.size()) {
        throw std::invalid_argument("update_graph: frame " + std::to_string(t) +
                                    " is not the next frame (" +
                                    std::to_string(graph.frames.size()) + ")");
    }
    for (int id : entered) {
        if (left.count(id)) {
            throw std::invalid_argument("update_graph: instance " + std::to_string(id) +
                                        " both entered and left");
        }
    }
    std::set<int> expected;
    if (t > 0) {
        const GraphFrame& prev = graph.frames.back();
        for (int id : prev.instances) {
            if (entered.count(id)) {
                throw std::invalid_argument("update_graph: instance " + std::to_string(id) +
                                            " entered but is already live");
            }
            if (!left.count(id)) {
                expected.insert(id);
            }
        }
        for (int id : left) {
            if (!prev.index_of(id)) {
                throw std::invalid_argument("update_graph: instance " + std::to_string(id) +
                                            " left but was not live");
            }
        }
    } else if (!left.empty()) {
        throw std::invalid_argument("update_graph: nothing can leave before frame 0");
    }
    expected.insert(entered.begin(), entered.end());

    std::set<int> given;
    for (const auto& ib : boxes) {
        given.insert(ib.instance);
    }
    if (given != expected || given.size() != boxes.size()) {
        throw std::invalid_argument("update_graph: boxes do not cover exactly the live instances");
    }
    graph.frames.push_back(make_graph_frame(boxes, graph.d_th));
    if (graph.frames.size() >= 2) {
        graph.temporal.push_back(
            shared_instances(graph.frames[graph.frames.size() - 2], graph.frames.back()));
    }
}

std::vector<int> neighbors(const SpatioTemporalGraph& graph, int t, int instance) {
    if (t < 0 || static_cast<std::size_t>(t) >= graph.frames.size()) {
        throw std::out_of_range("neighbors: frame " + std::to_string(t) + " out of range");
    }
    const GraphFrame& f = graph.frames[static_cast<std::size_t>(t)];
    const auto idx = f.index_of(instance);
    if (!idx) {
        throw std::out_of_range("neighbors: instance " + std::to_string(instance) +
                                " has no node at frame " + std::to_string(t));
    }
    std::vector<int> out;
    for (std::size_t j : f.neighbors[*idx]) {
        out.push_back(f.instances[j]);
    }
    return out;
}

}  // namespace remtrack
