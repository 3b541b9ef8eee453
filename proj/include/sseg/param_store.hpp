#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sseg/tape.hpp"
#include "sseg/tensor.hpp"

namespace sseg {

/// Ordered registry of named parameters. Registration order is the
/// checkpoint payload order, so it must be deterministic.
template <typename T>
class ParamStoreT {
public:
    TensorT<T>& add(const std::string& name, TensorT<T> init) {
        if (values_.count(name)) throw SpecError("parameter registered twice: " + name);
        order_.push_back(name);
        return values_[name] = std::move(init);
    }

    bool has(const std::string& name) const { return values_.count(name) != 0; }

    TensorT<T>& get(const std::string& name) {
        auto it = values_.find(name);
        if (it == values_.end()) throw SpecError("unknown parameter: " + name);
        return it->second;
    }
    const TensorT<T>& get(const std::string& name) const {
        return const_cast<ParamStoreT*>(this)->get(name);
    }

    const std::vector<std::string>& names() const { return order_; }

    std::int64_t total_size() const {
        std::int64_t n = 0;
        for (const auto& name : order_) n += values_.at(name).numel();
        return n;
    }

    template <typename U>
    ParamStoreT<U> cast() const {
        ParamStoreT<U> out;
        for (const auto& name : order_) out.add(name, values_.at(name).template cast<U>());
        return out;
    }

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, TensorT<T>> values_;
};

using ParamStore = ParamStoreT<float>;

/// Parameters bound onto a tape as gradient-tracked leaves; model builders
/// address them by name.
template <typename T>
class BoundParamsT {
public:
    BoundParamsT(TapeT<T>& tape, const ParamStoreT<T>& store) : tape_(&tape) {
        for (const auto& name : store.names()) ids_[name] = tape.param(TensorT<T>(store.get(name)));
    }

    /// Binds already-pushed leaves (grad-check harness hands out its own ids).
    BoundParamsT(TapeT<T>& tape, const std::vector<std::string>& names,
                 const std::vector<typename TapeT<T>::Id>& ids)
        : tape_(&tape) {
        if (names.size() != ids.size()) throw SpecError("param binding name/id count mismatch");
        for (size_t i = 0; i < names.size(); ++i) ids_[names[i]] = ids[i];
    }

    typename TapeT<T>::Id operator[](const std::string& name) const {
        auto it = ids_.find(name);
        if (it == ids_.end()) throw SpecError("parameter not bound: " + name);
        return it->second;
    }

    TapeT<T>& tape() const { return *tape_; }

    /// Accumulates tape gradients into `grads` (same layout as the store).
    void collect_grads(ParamStoreT<T>& grads) const {
        for (const auto& [name, id] : ids_) {
            const auto& g = tape_->grad(id);
            auto& slot = grads.get(name);
            for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += g.data[i];
        }
    }

private:
    TapeT<T>* tape_;
    std::unordered_map<std::string, typename TapeT<T>::Id> ids_;
};

}  // namespace sseg
