#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vwapforge/numerics/rng.hpp"
#include "vwapforge/numerics/tensor.hpp"

namespace vwapforge {

enum class Init { zeros, glorot_uniform };

/// Named learnable tensors with gradient buffers of identical shape.
/// Iteration order is the lexicographic name order, which keeps every
/// traversal (initialization, Adam, checkpointing) deterministic.
class ParamStore {
public:
    struct Entry {
        Tensor value;
        Tensor grad;
    };

    explicit ParamStore(std::uint64_t rng_seed = 1) : rng_seed_(rng_seed), rng_(rng_seed) {}

    std::uint64_t rng_seed() const noexcept { return rng_seed_; }

    /// Registers a parameter. Initialization draws from the store's seeded
    /// stream in registration order.
    Tensor& add(const std::string& name, Shape shape, Init init = Init::glorot_uniform) {
        if (entries_.count(name)) throw Error("param store: duplicate parameter '" + name + "'");
        Tensor value(shape, 0.0);
        if (init == Init::glorot_uniform) {
            const std::size_t fan_in = shape.size() == 1 ? 1 : shape[0];
            const std::size_t fan_out = shape.back();
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            for (auto& v : value.storage()) v = rng_.uniform(-limit, limit);
        }
        auto [it, ok] = entries_.emplace(name, Entry{std::move(value), Tensor(shape, 0.0)});
        return it->second.value;
    }

    /// Registers a parameter with explicit values.
    Tensor& set(const std::string& name, Tensor value) {
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            Tensor grad(value.shape(), 0.0);
            it = entries_.emplace(name, Entry{std::move(value), std::move(grad)}).first;
        } else {
            if (it->second.value.shape() != value.shape()) {
                throw ShapeError("param store: '" + name + "' has shape " +
                                 shape_string(it->second.value.shape()) + ", got " +
                                 shape_string(value.shape()));
            }
            it->second.value = std::move(value);
        }
        return it->second.value;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Entry& entry(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw Error("param store: unknown parameter '" + name + "'");
        return it->second;
    }
    const Entry& entry(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw Error("param store: unknown parameter '" + name + "'");
        return it->second;
    }

    Tensor& value(const std::string& name) { return entry(name).value; }
    const Tensor& value(const std::string& name) const { return entry(name).value; }
    Tensor& grad(const std::string& name) { return entry(name).grad; }
    const Tensor& grad(const std::string& name) const { return entry(name).grad; }

    void zero_grads() {
        for (auto& [name, e] : entries_) e.grad.fill(0.0);
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& [name, e] : entries_) n += e.value.size();
        return n;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [name, e] : entries_) out.push_back(name);
        return out;
    }

    std::map<std::string, Entry>& entries() noexcept { return entries_; }
    const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

    /// Value-only equality (gradients ignored).
    bool same_values(const ParamStore& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        for (const auto& [name, e] : entries_) {
            auto it = other.entries_.find(name);
            if (it == other.entries_.end() || !(it->second.value == e.value)) return false;
        }
        return true;
    }

private:
    std::uint64_t rng_seed_;
    Rng rng_;
    std::map<std::string, Entry> entries_;
};

} // namespace vwapforge
