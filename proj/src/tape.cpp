#include "remtrack/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace remtrack::ad {

namespace {

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_scalar(double x) {
    // log(1 + e^x) without overflow for large x.
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

double canonical_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) {
        s += t;
    }
    return s;
}

Tape::Tape(bool record) : record_(record) { nodes_.reserve(256); }

Var Tape::push(std::vector<double> value, bool requires_grad, Backward backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = record_ && requires_grad;
    if (node.requires_grad) {
        node.backward = std::move(backward);
    }
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

bool Tape::any_requires(std::initializer_list<Var> vs) const {
    if (!record_) {
        return false;
    }
    for (Var v : vs) {
        if (nodes_[v.id].requires_grad) {
            return true;
        }
    }
    return false;
}

void Tape::check_same_size(Var a, Var b, const char* op) const {
    if (size(a) != size(b)) {
        throw std::invalid_argument(std::string(op) + ": size mismatch " + std::to_string(size(a)) +
                                    " vs " + std::to_string(size(b)));
    }
}

std::vector<double>& Tape::grad_buffer(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) {
        n.grad.assign(n.value.size(), 0.0);
    }
    return n.grad;
}

void Tape::add_grad(Var v, std::span<const double> g) {
    if (!nodes_[v.id].requires_grad) {
        return;
    }
    auto& buf = grad_buffer(v.id);
    for (std::size_t k = 0; k < g.size(); ++k) {
        buf[k] += g[k];
    }
}

std::vector<double>* Tape::param_grad(const ParamRef& p) {
    if (param_grads_ == nullptr) {
        return nullptr;
    }
    return &(*param_grads_)[p.slot];
}

std::span<const double> Tape::value(Var v) const { return nodes_[v.id].value; }

double Tape::scalar(Var v) const {
    if (size(v) != 1) {
        throw std::invalid_argument("scalar: node has " + std::to_string(size(v)) + " entries");
    }
    return nodes_[v.id].value[0];
}

std::span<const double> Tape::grad(Var v) const { return nodes_[v.id].grad; }

// ---------------------------------------------------------------------------
// Leaves

Var Tape::constant(std::vector<double> values) { return push(std::move(values), false, {}); }

Var Tape::constant(std::span<const double> values) {
    return constant(std::vector<double>(values.begin(), values.end()));
}

Var Tape::variable(std::vector<double> values) {
    // Leaf: gradient is kept, nothing to propagate.
    return push(std::move(values), true, [](Tape&, std::uint32_t) {});
}

Var Tape::zeros(std::size_t n) { return constant(std::vector<double>(n, 0.0)); }

Var Tape::param(const ParamRef& p) {
    return push(p->data, true, [p](Tape& t, std::uint32_t self) {
        if (auto* pg = t.param_grad(p)) {
            const auto& g = t.nodes_[self].grad;
            for (std::size_t k = 0; k < g.size(); ++k) {
                (*pg)[k] += g[k];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Affine maps

Var Tape::matvec(const ParamRef& w, Var x, std::size_t row_begin, std::size_t row_count,
                 std::size_t col_begin, std::size_t col_count) {
    const Tensor& W = *w;
    if (W.rank() != 2) {
        throw std::invalid_argument("matvec: weight is not a matrix");
    }
    const std::size_t ld = W.cols();
    if (row_count == kAll) {
        row_count = W.rows() - row_begin;
    }
    if (col_count == kAll) {
        col_count = ld - col_begin;
    }
    if (row_begin + row_count > W.rows() || col_begin + col_count > ld) {
        throw std::invalid_argument("matvec: block out of range");
    }
    if (size(x) != col_count) {
        throw std::invalid_argument("matvec: " + shape_to_string(W.shape) + " block expects " +
                                    std::to_string(col_count) + " inputs, got " +
                                    std::to_string(size(x)));
    }
    const auto xv = value(x);
    std::vector<double> out(row_count);
    for (std::size_t r = 0; r < row_count; ++r) {
        const double* row = W.data.data() + (row_begin + r) * ld + col_begin;
        double acc = 0.0;
        for (std::size_t c = 0; c < col_count; ++c) {
            acc += row[c] * xv[c];
        }
        out[r] = acc;
    }
    return push(std::move(out), true,
                [w, x, row_begin, row_count, col_begin, col_count](Tape& t, std::uint32_t self) {
                    const Tensor& W = *w;
                    const std::size_t ld = W.cols();
                    const auto& gy = t.nodes_[self].grad;
                    if (t.nodes_[x.id].requires_grad) {
                        auto& gx = t.grad_buffer(x.id);
                        for (std::size_t r = 0; r < row_count; ++r) {
                            const double g = gy[r];
                            const double* row = W.data.data() + (row_begin + r) * ld + col_begin;
                            for (std::size_t c = 0; c < col_count; ++c) {
                                gx[c] += row[c] * g;
                            }
                        }
                    }
                    if (auto* pg = t.param_grad(w)) {
                        const auto& xv = t.nodes_[x.id].value;
                        for (std::size_t r = 0; r < row_count; ++r) {
                            const double g = gy[r];
                            double* grow = pg->data() + (row_begin + r) * ld + col_begin;
                            for (std::size_t c = 0; c < col_count; ++c) {
                                grow[c] += g * xv[c];
                            }
                        }
                    }
                });
}

Var Tape::affine(const ParamRef& w, const ParamRef& b, Var x) {
    if (b->size() != w->rows()) {
        throw std::invalid_argument("affine: bias length " + std::to_string(b->size()) +
                                    " does not match " + shape_to_string(w->shape));
    }
    return add(matvec(w, x), param(b));
}

Var Tape::scaled_column(const ParamRef& w, std::size_t col, double coeff) {
    const Tensor& W = *w;
    if (W.rank() != 2 || col >= W.cols()) {
        throw std::invalid_argument("scaled_column: column out of range");
    }
    std::vector<double> out(W.rows());
    for (std::size_t r = 0; r < W.rows(); ++r) {
        out[r] = coeff * W.at(r, col);
    }
    return push(std::move(out), true, [w, col, coeff](Tape& t, std::uint32_t self) {
        if (auto* pg = t.param_grad(w)) {
            const auto& gy = t.nodes_[self].grad;
            const std::size_t ld = w->cols();
            for (std::size_t r = 0; r < gy.size(); ++r) {
                (*pg)[r * ld + col] += gy[r] * coeff;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Elementwise

Var Tape::add(Var a, Var b) {
    check_same_size(a, b, "add");
    const auto av = value(a);
    const auto bv = value(b);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = av[k] + bv[k];
    }
    return push(std::move(out), any_requires({a, b}), [a, b](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        t.add_grad(a, g);
        t.add_grad(b, g);
    });
}

Var Tape::sub(Var a, Var b) {
    check_same_size(a, b, "sub");
    const auto av = value(a);
    const auto bv = value(b);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = av[k] - bv[k];
    }
    return push(std::move(out), any_requires({a, b}), [a, b](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        t.add_grad(a, g);
        if (t.nodes_[b.id].requires_grad) {
            auto& gb = t.grad_buffer(b.id);
            for (std::size_t k = 0; k < g.size(); ++k) {
                gb[k] -= g[k];
            }
        }
    });
}

Var Tape::mul(Var a, Var b) {
    check_same_size(a, b, "mul");
    const auto av = value(a);
    const auto bv = value(b);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = av[k] * bv[k];
    }
    return push(std::move(out), any_requires({a, b}), [a, b](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        if (t.nodes_[a.id].requires_grad) {
            const auto& bv = t.nodes_[b.id].value;
            auto& ga = t.grad_buffer(a.id);
            for (std::size_t k = 0; k < g.size(); ++k) {
                ga[k] += g[k] * bv[k];
            }
        }
        if (t.nodes_[b.id].requires_grad) {
            const auto& av = t.nodes_[a.id].value;
            auto& gb = t.grad_buffer(b.id);
            for (std::size_t k = 0; k < g.size(); ++k) {
                gb[k] += g[k] * av[k];
            }
        }
    });
}

Var Tape::one_minus(Var a) {
    const auto av = value(a);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = 1.0 - av[k];
    }
    return push(std::move(out), any_requires({a}), [a](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        auto& ga = t.grad_buffer(a.id);
        for (std::size_t k = 0; k < g.size(); ++k) {
            ga[k] -= g[k];
        }
    });
}

Var Tape::scale(Var a, double c) {
    const auto av = value(a);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = c * av[k];
    }
    return push(std::move(out), any_requires({a}), [a, c](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        auto& ga = t.grad_buffer(a.id);
        for (std::size_t k = 0; k < g.size(); ++k) {
            ga[k] += c * g[k];
        }
    });
}

Var Tape::sigmoid(Var a) {
    const auto av = value(a);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = sigmoid_scalar(av[k]);
    }
    return push(std::move(out), any_requires({a}), [a](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        const auto& y = t.nodes_[self].value;
        auto& ga = t.grad_buffer(a.id);
        for (std::size_t k = 0; k < g.size(); ++k) {
            ga[k] += g[k] * y[k] * (1.0 - y[k]);
        }
    });
}

Var Tape::tanh(Var a) {
    const auto av = value(a);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = std::tanh(av[k]);
    }
    return push(std::move(out), any_requires({a}), [a](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        const auto& y = t.nodes_[self].value;
        auto& ga = t.grad_buffer(a.id);
        for (std::size_t k = 0; k < g.size(); ++k) {
            ga[k] += g[k] * (1.0 - y[k] * y[k]);
        }
    });
}

Var Tape::leaky_relu(Var a, double slope) {
    const auto av = value(a);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = av[k] > 0.0 ? av[k] : slope * av[k];
    }
    return push(std::move(out), any_requires({a}), [a, slope](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        const auto& x = t.nodes_[a.id].value;
        auto& ga = t.grad_buffer(a.id);
        for (std::size_t k = 0; k < g.size(); ++k) {
            ga[k] += x[k] > 0.0 ? g[k] : slope * g[k];
        }
    });
}

Var Tape::softplus(Var a) {
    const auto av = value(a);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = softplus_scalar(av[k]);
    }
    return push(std::move(out), any_requires({a}), [a](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        const auto& x = t.nodes_[a.id].value;
        auto& ga = t.grad_buffer(a.id);
        for (std::size_t k = 0; k < g.size(); ++k) {
            ga[k] += g[k] * sigmoid_scalar(x[k]);
        }
    });
}

Var Tape::exp(Var a) {
    const auto av = value(a);
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = std::exp(av[k]);
    }
    return push(std::move(out), any_requires({a}), [a](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        const auto& y = t.nodes_[self].value;
        auto& ga = t.grad_buffer(a.id);
        for (std::size_t k = 0; k < g.size(); ++k) {
            ga[k] += g[k] * y[k];
        }
    });
}

// ---------------------------------------------------------------------------
// Structure

Var Tape::concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Tape::concat(std::span<const Var> parts) {
    std::vector<double> out;
    bool req = false;
    for (Var p : parts) {
        const auto pv = value(p);
        out.insert(out.end(), pv.begin(), pv.end());
        req = req || (record_ && nodes_[p.id].requires_grad);
    }
    std::vector<Var> owned(parts.begin(), parts.end());
    return push(std::move(out), req, [owned](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        std::size_t offset = 0;
        for (Var p : owned) {
            const std::size_t n = t.nodes_[p.id].value.size();
            t.add_grad(p, std::span<const double>(g.data() + offset, n));
            offset += n;
        }
    });
}

Var Tape::slice(Var a, std::size_t begin, std::size_t count) {
    if (begin + count > size(a)) {
        throw std::invalid_argument("slice: range out of bounds");
    }
    const auto av = value(a);
    std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(begin),
                            av.begin() + static_cast<std::ptrdiff_t>(begin + count));
    return push(std::move(out), any_requires({a}), [a, begin](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        auto& ga = t.grad_buffer(a.id);
        for (std::size_t k = 0; k < g.size(); ++k) {
            ga[begin + k] += g[k];
        }
    });
}

Var Tape::stack(std::span<const Var> scalars) {
    std::vector<double> out;
    out.reserve(scalars.size());
    bool req = false;
    for (Var s : scalars) {
        out.push_back(scalar(s));
        req = req || (record_ && nodes_[s.id].requires_grad);
    }
    std::vector<Var> owned(scalars.begin(), scalars.end());
    return push(std::move(out), req, [owned](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        for (std::size_t k = 0; k < owned.size(); ++k) {
            t.add_grad(owned[k], std::span<const double>(&g[k], 1));
        }
    });
}

// ---------------------------------------------------------------------------
// Reductions

Var Tape::dot(Var a, Var b) {
    check_same_size(a, b, "dot");
    const auto av = value(a);
    const auto bv = value(b);
    double acc = 0.0;
    for (std::size_t k = 0; k < av.size(); ++k) {
        acc += av[k] * bv[k];
    }
    return push({acc}, any_requires({a, b}), [a, b](Tape& t, std::uint32_t self) {
        const double g = t.nodes_[self].grad[0];
        if (t.nodes_[a.id].requires_grad) {
            const auto& bv = t.nodes_[b.id].value;
            auto& ga = t.grad_buffer(a.id);
            for (std::size_t k = 0; k < ga.size(); ++k) {
                ga[k] += g * bv[k];
            }
        }
        if (t.nodes_[b.id].requires_grad) {
            const auto& av = t.nodes_[a.id].value;
            auto& gb = t.grad_buffer(b.id);
            for (std::size_t k = 0; k < gb.size(); ++k) {
                gb[k] += g * av[k];
            }
        }
    });
}

Var Tape::sum(Var a) {
    double acc = 0.0;
    for (double x : value(a)) {
        acc += x;
    }
    return push({acc}, any_requires({a}), [a](Tape& t, std::uint32_t self) {
        const double g = t.nodes_[self].grad[0];
        auto& ga = t.grad_buffer(a.id);
        for (double& x : ga) {
            x += g;
        }
    });
}

Var Tape::mean(std::span<const Var> scalars) {
    if (scalars.empty()) {
        return constant(std::vector<double>{0.0});
    }
    return scale(sum(stack(scalars)), 1.0 / static_cast<double>(scalars.size()));
}

Var Tape::softmax(Var logits) {
    const auto lv = value(logits);
    if (lv.empty()) {
        throw std::invalid_argument("softmax: empty input");
    }
    const double mx = *std::max_element(lv.begin(), lv.end());
    std::vector<double> out(lv.size());
    for (std::size_t k = 0; k < lv.size(); ++k) {
        out[k] = std::exp(lv[k] - mx);
    }
    std::vector<double> terms = out;
    const double denom = canonical_sum(terms);
    for (double& o : out) {
        o /= denom;
    }
    return push(std::move(out), any_requires({logits}), [logits](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        const auto& y = t.nodes_[self].value;
        double gy = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            gy += g[k] * y[k];
        }
        auto& gl = t.grad_buffer(logits.id);
        for (std::size_t k = 0; k < g.size(); ++k) {
            gl[k] += y[k] * (g[k] - gy);
        }
    });
}

Var Tape::weighted_sum(Var weights, std::span<const Var> items) {
    const auto wv = value(weights);
    if (wv.size() != items.size() || items.empty()) {
        throw std::invalid_argument("weighted_sum: weights/items mismatch");
    }
    const std::size_t n = size(items[0]);
    for (Var it : items) {
        if (size(it) != n) {
            throw std::invalid_argument("weighted_sum: item size mismatch");
        }
    }
    std::vector<double> out(n);
    std::vector<double> terms(items.size());
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t k = 0; k < items.size(); ++k) {
            terms[k] = wv[k] * nodes_[items[k].id].value[c];
        }
        out[c] = canonical_sum(terms);
    }
    bool req = record_ && nodes_[weights.id].requires_grad;
    for (Var it : items) {
        req = req || (record_ && nodes_[it.id].requires_grad);
    }
    std::vector<Var> owned(items.begin(), items.end());
    return push(std::move(out), req, [weights, owned](Tape& t, std::uint32_t self) {
        const auto& g = t.nodes_[self].grad;
        const auto& wv = t.nodes_[weights.id].value;
        if (t.nodes_[weights.id].requires_grad) {
            auto& gw = t.grad_buffer(weights.id);
            for (std::size_t k = 0; k < owned.size(); ++k) {
                const auto& iv = t.nodes_[owned[k].id].value;
                double acc = 0.0;
                for (std::size_t c = 0; c < g.size(); ++c) {
                    acc += g[c] * iv[c];
                }
                gw[k] += acc;
            }
        }
        for (std::size_t k = 0; k < owned.size(); ++k) {
            if (!t.nodes_[owned[k].id].requires_grad) {
                continue;
            }
            auto& gi = t.grad_buffer(owned[k].id);
            for (std::size_t c = 0; c < g.size(); ++c) {
                gi[c] += wv[k] * g[c];
            }
        }
    });
}

Var Tape::custom(std::vector<double> value, std::initializer_list<Var> parents,
                 CustomBackward backward) {
    return push(std::move(value), any_requires(parents),
                [bw = std::move(backward)](Tape& t, std::uint32_t self) {
                    // Copy: the callback may grow other nodes' buffers.
                    const std::vector<double> g = t.nodes_[self].grad;
                    bw(t, g);
                });
}

void Tape::backward(Var loss, Gradients* param_grads) {
    if (!record_) {
        throw std::logic_error("backward: tape was built without recording");
    }
    if (size(loss) != 1) {
        throw std::invalid_argument("backward: loss must be a scalar");
    }
    for (auto& n : nodes_) {
        n.grad.clear();
    }
    if (!nodes_[loss.id].requires_grad) {
        return;
    }
    param_grads_ = param_grads;
    grad_buffer(loss.id)[0] = 1.0;
    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.empty() || !n.backward) {
            continue;
        }
        n.backward(*this, id);
    }
    param_grads_ = nullptr;
}

}  // namespace remtrack::ad
