#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "remtrack/tensor.hpp"

namespace remtrack::ad {

/// Handle to a parameter inside a ParameterStore. `slot` indexes the matching
/// gradient buffer in a Gradients object.
struct ParamRef {
    const Tensor* tensor = nullptr;
    std::size_t slot = 0;

    const Tensor& operator*() const { return *tensor; }
    const Tensor* operator->() const { return tensor; }
};

struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

/// Per-slot gradient buffers, shaped like the parameters of one store.
class Gradients {
public:
    Gradients() = default;
    explicit Gradients(const std::vector<std::size_t>& sizes);

    std::vector<double>& operator[](std::size_t slot) { return buffers_[slot]; }
    const std::vector<double>& operator[](std::size_t slot) const { return buffers_[slot]; }
    std::size_t slots() const { return buffers_.size(); }

    void zero();
    /// this += scale * other, slot by slot in index order.
    void add(const Gradients& other, double scale = 1.0);

private:
    std::vector<std::vector<double>> buffers_;
};

/// Named learnable tensors plus their Adam moments. Names are unique; insertion
/// order is preserved and defines slot indices.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;
    ParameterStore(ParameterStore&&) = default;
    ParameterStore& operator=(ParameterStore&&) = default;

    ParamRef add(const std::string& name, Tensor value);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    ParamRef ref(const std::string& name) const;
    Tensor& tensor(const std::string& name);
    const Tensor& tensor(const std::string& name) const;
    Tensor& tensor(std::size_t slot) { return *entries_[slot].value; }
    const Tensor& tensor(std::size_t slot) const { return *entries_[slot].value; }
    const std::string& name(std::size_t slot) const { return entries_[slot].name; }
    AdamMoments& moments(std::size_t slot) { return entries_[slot].moments; }
    const AdamMoments& moments(std::size_t slot) const { return entries_[slot].moments; }

    std::size_t size() const { return entries_.size(); }
    std::size_t parameter_count() const;

    /// Fresh zeroed gradient buffers matching this store.
    Gradients make_gradients() const;
    /// Adds `grads` (times `scale`) into each tensor's grad, creating it if absent.
    void accumulate(const Gradients& grads, double scale = 1.0);
    void clear_gradients();

    /// Deep copy of values (and moments); used to snapshot parameters.
    ParameterStore clone() const;

private:
    struct Entry {
        std::string name;
        std::unique_ptr<Tensor> value;  // stable address for ParamRef
        AdamMoments moments;
    };
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace remtrack::ad
