#include "remtrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace remtrack {

bool BoundingBox::valid() const {
    return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h) &&
           w > 0.0 && h > 0.0;
}

BoundingBox BoundingBox::clamped() const {
    return {cx, cy, std::max(w, kMinBoxSize), std::max(h, kMinBoxSize)};
}

double scaled_distance(const BoundingBox& a, const BoundingBox& b) {
    const BoundingBox ca = a.clamped();
    const BoundingBox cb = b.clamped();
    const double dx = ca.cx - cb.cx;
    const double dy = ca.cy - cb.cy;
    const double w_min = std::min(ca.w, cb.w);
    const double h_min = std::min(ca.h, cb.h);
    // The y-term is added: both terms are squared distances, so the radicand
    // stays nonnegative.
    return std::sqrt(dx * dx / w_min + dy * dy / h_min);
}

std::vector<double> distance_matrix(std::span<const BoundingBox> boxes) {
    const std::size_t n = boxes.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = scaled_distance(boxes[i], boxes[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    return d;
}

std::vector<bool> adjacency(std::span<const BoundingBox> boxes, double d_th) {
    if (!(d_th > 0.0)) {
        throw std::invalid_argument("adjacency: d_th must be positive");
    }
    const std::size_t n = boxes.size();
    const std::vector<double> d = distance_matrix(boxes);
    std::vector<bool> a(n * n, false);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a[i * n + j] = i != j && d[i * n + j] <= d_th;
        }
    }
    return a;
}

namespace {

double overlap_1d(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

double iou(const BoundingBox& a_in, const BoundingBox& b_in) {
    const BoundingBox a = a_in.clamped();
    const BoundingBox b = b_in.clamped();
    const double inter = overlap_1d(a.left(), a.right(), b.left(), b.right()) *
                         overlap_1d(a.top(), a.bottom(), b.top(), b.bottom());
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BoundingBox& a_in, const BoundingBox& b_in) {
    const BoundingBox a = a_in.clamped();
    const BoundingBox b = b_in.clamped();
    const double inter = overlap_1d(a.left(), a.right(), b.left(), b.right()) *
                         overlap_1d(a.top(), a.bottom(), b.top(), b.bottom());
    const double uni = a.area() + b.area() - inter;
    const double cw = std::max(a.right(), b.right()) - std::min(a.left(), b.left());
    const double ch = std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top());
    const double enclose = cw * ch;
    return inter / uni - (enclose - uni) / enclose;
}

ad::Var giou_loss(ad::Tape& tape, ad::Var pred, const BoundingBox& target_in) {
    if (tape.size(pred) != 4) {
        throw std::invalid_argument("giou_loss: prediction must have 4 entries");
    }
    const auto pv = tape.value(pred);
    const bool w_clamped = pv[2] < kMinBoxSize;
    const bool h_clamped = pv[3] < kMinBoxSize;
    const BoundingBox p = BoundingBox{pv[0], pv[1], pv[2], pv[3]}.clamped();
    const BoundingBox q = target_in.clamped();

    const double x1 = p.left(), x2 = p.right(), y1 = p.top(), y2 = p.bottom();
    const double X1 = q.left(), X2 = q.right(), Y1 = q.top(), Y2 = q.bottom();

    const double iw_raw = std::min(x2, X2) - std::max(x1, X1);
    const double ih_raw = std::min(y2, Y2) - std::max(y1, Y1);
    const double iw = std::max(0.0, iw_raw);
    const double ih = std::max(0.0, ih_raw);
    const double inter = iw * ih;
    const double area_p = p.w * p.h;
    const double uni = area_p + q.w * q.h - inter;
    const double cw = std::max(x2, X2) - std::min(x1, X1);
    const double ch = std::max(y2, Y2) - std::min(y1, Y1);
    const double enclose = cw * ch;
    const double loss = 2.0 - inter / uni - uni / enclose;

    return tape.custom({loss}, {pred}, [=](ad::Tape& t, std::span<const double> g_out) {
        const double g = g_out[0];
        // loss = 2 - I/U - U/C with U = A_p + A_q - I.
        const double dL_dI = -(uni + inter) / (uni * uni) + 1.0 / enclose;
        const double dL_dA = inter / (uni * uni) - 1.0 / enclose;
        const double dL_dC = uni / (enclose * enclose);

        double gx1 = 0.0, gx2 = 0.0, gy1 = 0.0, gy2 = 0.0;
        if (iw_raw > 0.0 && ih_raw > 0.0) {
            const double d_iw = dL_dI * ih;
            const double d_ih = dL_dI * iw;
            if (x2 <= X2) gx2 += d_iw;
            if (x1 >= X1) gx1 -= d_iw;
            if (y2 <= Y2) gy2 += d_ih;
            if (y1 >= Y1) gy1 -= d_ih;
        }
        const double d_cw = dL_dC * ch;
        const double d_ch = dL_dC * cw;
        if (x2 > X2) gx2 += d_cw;
        if (x1 < X1) gx1 -= d_cw;
        if (y2 > Y2) gy2 += d_ch;
        if (y1 < Y1) gy1 -= d_ch;

        std::vector<double> gp(4);
        gp[0] = g * (gx1 + gx2);
        gp[1] = g * (gy1 + gy2);
        gp[2] = w_clamped ? 0.0 : g * (0.5 * (gx2 - gx1) + dL_dA * p.h);
        gp[3] = h_clamped ? 0.0 : g * (0.5 * (gy2 - gy1) + dL_dA * p.w);
        t.add_grad(pred, gp);
    });
}

}  // namespace remtrack
