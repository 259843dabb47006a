#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hearken/graph.hpp"
#include "hearken/tensor.hpp"

namespace hearken {

// Named parameter store for one model component. Entry order is insertion
// order and is the iteration order everywhere (optimizer updates, leaf
// creation, serialization), which keeps training bit-reproducible.
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  int add(const std::string& name, Tensor value, bool trainable = true) {
    if (by_name_.count(name)) throw std::logic_error("duplicate parameter: " + name);
    by_name_[name] = static_cast<int>(entries_.size());
    entries_.push_back({name, std::move(value), trainable});
    return static_cast<int>(entries_.size()) - 1;
  }

  Tensor& at(const std::string& name) { return entries_[index(name)].value; }
  const Tensor& at(const std::string& name) const { return entries_[index(name)].value; }
  bool has(const std::string& name) const { return by_name_.count(name) != 0; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void set_all_trainable(bool trainable) {
    for (auto& e : entries_) e.trainable = trainable;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  // FNV-1a over names, shapes and raw value bytes; used by the frozen-weight
  // assertions.
  std::uint64_t content_hash() const;

 private:
  int index(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::logic_error("unknown parameter: " + name);
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

// Graph leaves for every entry of a registry, looked up by parameter name
// while assembling a forward pass.
class LeafMap {
 public:
  LeafMap() = default;
  LeafMap(Graph& g, const ParamRegistry& reg, bool with_grads) {
    ids_.reserve(reg.size());
    for (const auto& e : reg.entries()) {
      Graph::NodeId id = g.leaf(e.value, with_grads && e.trainable);
      by_name_[e.name] = id;
      ids_.push_back(id);
    }
  }

  Graph::NodeId operator[](const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::logic_error("LeafMap: unknown parameter " + name);
    return it->second;
  }

  const std::vector<Graph::NodeId>& ids() const { return ids_; }

 private:
  std::unordered_map<std::string, Graph::NodeId> by_name_;
  std::vector<Graph::NodeId> ids_;
};

}  // namespace hearken
