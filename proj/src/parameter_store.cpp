#include "remtrack/parameter_store.hpp"

#include <sstream>
#include <stdexcept>

namespace remtrack::ad {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t k = 0; k < shape.size(); ++k) {
        os << (k ? "x" : "") << shape[k];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), data(shape_product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> values)
    : shape(std::move(dims)), data(std::move(values)) {
    if (data.size() != shape_product(shape)) {
        throw std::invalid_argument("Tensor: " + std::to_string(data.size()) +
                                    " values do not fill shape " + shape_to_string(shape));
    }
}

Gradients::Gradients(const std::vector<std::size_t>& sizes) {
    buffers_.reserve(sizes.size());
    for (std::size_t n : sizes) {
        buffers_.emplace_back(n, 0.0);
    }
}

void Gradients::zero() {
    for (auto& b : buffers_) {
        std::fill(b.begin(), b.end(), 0.0);
    }
}

void Gradients::add(const Gradients& other, double scale) {
    if (other.slots() != slots()) {
        throw std::invalid_argument("Gradients::add: slot count mismatch");
    }
    for (std::size_t s = 0; s < buffers_.size(); ++s) {
        auto& dst = buffers_[s];
        const auto& src = other.buffers_[s];
        for (std::size_t k = 0; k < dst.size(); ++k) {
            dst[k] += scale * src[k];
        }
    }
}

ParamRef ParameterStore::add(const std::string& name, Tensor value) {
    if (contains(name)) {
        throw std::invalid_argument("ParameterStore: duplicate parameter '" + name + "'");
    }
    if (value.data.size() != shape_product(value.shape)) {
        throw std::invalid_argument("ParameterStore: malformed tensor for '" + name + "'");
    }
    Entry e;
    e.name = name;
    e.value = std::make_unique<Tensor>(std::move(value));
    e.moments.m.assign(e.value->size(), 0.0);
    e.moments.v.assign(e.value->size(), 0.0);
    entries_.push_back(std::move(e));
    index_[name] = entries_.size() - 1;
    return ParamRef{entries_.back().value.get(), entries_.size() - 1};
}

ParamRef ParameterStore::ref(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::out_of_range("ParameterStore: no parameter '" + name + "'");
    }
    return ParamRef{entries_[it->second].value.get(), it->second};
}

Tensor& ParameterStore::tensor(const std::string& name) { return tensor(ref(name).slot); }

const Tensor& ParameterStore::tensor(const std::string& name) const { return *ref(name).tensor; }

std::size_t ParameterStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        n += e.value->size();
    }
    return n;
}

Gradients ParameterStore::make_gradients() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(entries_.size());
    for (const auto& e : entries_) {
        sizes.push_back(e.value->size());
    }
    return Gradients(sizes);
}

void ParameterStore::accumulate(const Gradients& grads, double scale) {
    if (grads.slots() != entries_.size()) {
        throw std::invalid_argument("ParameterStore::accumulate: slot count mismatch");
    }
    for (std::size_t s = 0; s < entries_.size(); ++s) {
        Tensor& t = *entries_[s].value;
        if (!t.grad) {
            t.grad.emplace(t.size(), 0.0);
        }
        const auto& src = grads[s];
        for (std::size_t k = 0; k < src.size(); ++k) {
            (*t.grad)[k] += scale * src[k];
        }
    }
}

void ParameterStore::clear_gradients() {
    for (auto& e : entries_) {
        e.value->grad.reset();
    }
}

ParameterStore ParameterStore::clone() const {
    ParameterStore out;
    for (const auto& e : entries_) {
        out.add(e.name, *e.value);
        out.entries_.back().moments = e.moments;
    }
    return out;
}

}  // namespace remtrack::ad
