#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "attre2vec/common.hpp"
#include "attre2vec/tensor.hpp"

namespace attre2vec {

// Named map of trainable tensors with deterministic iteration order (order of
// registration). One training loop owns a store at a time; frozen stores may
// be read concurrently.
class ParameterStore {
 public:
  std::size_t add(const std::string& name, std::vector<std::size_t> shape) {
    if (index_.count(name))
      throw ValidationError("duplicate parameter name '" + name + "'");
    const std::size_t idx = entries_.size();
    entries_.push_back({name, Tensor::zeros(std::move(shape)), false});
    index_.emplace(name, idx);
    return idx;
  }

  bool contains(const std::string& name) const { return index_.count(name); }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  Tensor& tensor(std::size_t i) { return entries_[i].tensor; }
  const Tensor& tensor(std::size_t i) const { return entries_[i].tensor; }
  Tensor& tensor(const std::string& name) { return entries_[index_of(name)].tensor; }
  const Tensor& tensor(const std::string& name) const {
    return entries_[index_of(name)].tensor;
  }

  void zero_grads() {
    for (auto& e : entries_) {
      e.tensor.zero_grad();
      e.grad_valid = false;
    }
  }

  void mark_grad_valid(std::size_t i) { entries_[i].grad_valid = true; }
  bool grad_valid(std::size_t i) const { return entries_[i].grad_valid; }

  std::size_t total_parameters() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

 private:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool grad_valid = false;
  };

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace attre2vec
