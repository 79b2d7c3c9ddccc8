#include "stgan/parameters.hpp"

#include <cstring>

#include "stgan/errors.hpp"

namespace stgan {

std::size_t ParameterStore::add(const std::string& name, Shape shape) {
  if (contains(name)) throw ContractViolation("duplicate parameter name: " + name);
  const std::size_t idx = entries_.size();
  entries_.push_back(ParameterEntry{name, Tensor(shape), Tensor(shape), false});
  index_.emplace(name, idx);
  return idx;
}

std::size_t ParameterStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractViolation("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

Tensor& ParameterStore::grad(std::size_t i) {
  auto& e = entries_.at(i);
  e.grad_ready = true;
  return e.grad;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) {
    e.grad.fill(0.0);
    e.grad_ready = true;
  }
}

void ParameterStore::zero_values() {
  for (auto& e : entries_) e.value.fill(0.0);
}

bool ParameterStore::same_layout(const ParameterStore& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        entries_[i].value.shape() != other.entries_[i].value.shape()) {
      return false;
    }
  }
  return true;
}

void ParameterStore::accumulate_gradients(const ParameterStore& other) {
  if (!same_layout(other)) throw ContractViolation("accumulate_gradients: parameter layouts differ");
  for (std::size_t i = 0; i < size(); ++i) {
    auto& g = grad(i);
    const auto& src = other.entries_[i].grad;
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += src[k];
  }
}

std::uint64_t ParameterStore::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& e : entries_) {
    for (double v : e.value.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

}  // namespace stgan
