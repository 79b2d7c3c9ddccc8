#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "stgan/tensor.hpp"

namespace stgan {

struct ParameterEntry {
  std::string name;
  Tensor value;
  Tensor grad;
  bool grad_ready = false;
};

/// Named parameters with paired gradients, iterated in insertion order.
///
/// Layers keep the integer index returned by add() and address their
/// weights through it; names are only used for checkpoints and reports.
/// Gradients accumulate (+=) until zero_grad() is called.
class ParameterStore {
 public:
  std::size_t add(const std::string& name, Shape shape);

  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  const ParameterEntry& entry(std::size_t i) const { return entries_.at(i); }
  ParameterEntry& entry(std::size_t i) { return entries_.at(i); }

  const Tensor& value(std::size_t i) const { return entries_[i].value; }
  Tensor& value(std::size_t i) { return entries_[i].value; }
  // Mutable gradient access marks the gradient as populated.
  Tensor& grad(std::size_t i);
  const Tensor& grad(std::size_t i) const { return entries_[i].grad; }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  void zero_values();
  // grad(i) += other.grad(i) for every entry; layouts must match.
  void accumulate_gradients(const ParameterStore& other);
  bool same_layout(const ParameterStore& other) const;

  // FNV-1a over the bit patterns of all values (used to assert untouched stores).
  std::uint64_t checksum() const;

 private:
  std::vector<ParameterEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace stgan
