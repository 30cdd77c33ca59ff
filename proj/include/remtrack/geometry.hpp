#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "remtrack/tape.hpp"

namespace remtrack {

/// Minimum width/height used when a box degenerates (noisy regression output).
inline constexpr double kMinBoxSize = 1e-3;

/// Axis-aligned box in center form, scene units.
struct BoundingBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 1.0;
    double h = 1.0;

    static BoundingBox from_corner(double left, double top, double width, double height) {
        return {left + 0.5 * width, top + 0.5 * height, width, height};
    }
    double left() const { return cx - 0.5 * w; }
    double top() const { return cy - 0.5 * h; }
    double right() const { return cx + 0.5 * w; }
    double bottom() const { return cy + 0.5 * h; }
    double area() const { return w * h; }

    bool valid() const;
    /// Copy with w, h raised to at least kMinBoxSize.
    BoundingBox clamped() const;

    bool operator==(const BoundingBox&) const = default;
};

/// One instance's box in one frame.
struct InstanceBox {
    int instance = 0;
    BoundingBox box;
    bool operator==(const InstanceBox&) const = default;
};

/// Per-frame boxes of a tracking result or ground truth; frame k is index k.
using BoxSequence = std::vector<std::vector<InstanceBox>>;

/// sqrt(dx^2 / min(w_a, w_b) + dy^2 / min(h_a, h_b)).
double scaled_distance(const BoundingBox& a, const BoundingBox& b);

/// Row-major n x n matrix of scaled distances.
std::vector<double> distance_matrix(std::span<const BoundingBox> boxes);

/// A[i*n + j] is true iff i != j and D_ij <= d_th.
std::vector<bool> adjacency(std::span<const BoundingBox> boxes, double d_th);

double iou(const BoundingBox& a, const BoundingBox& b);

/// IoU minus the empty fraction of the smallest enclosing box; in [-1, 1].
double giou(const BoundingBox& a, const BoundingBox& b);

/// 1 - GIoU(pred, target) where `pred` is a 4-vector (cx, cy, w, h) node.
/// Differentiable with respect to `pred`.
ad::Var giou_loss(ad::Tape& tape, ad::Var pred, const BoundingBox& target);

}  // namespace remtrack
