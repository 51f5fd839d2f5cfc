#include "qdsc/agent/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qdsc::agent {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::add(Transition t) {
  if (!std::isfinite(t.reward)) throw std::invalid_argument("replay buffer: non-finite reward");
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch) {
  if (batch > items_.size()) throw std::invalid_argument("replay buffer: batch larger than contents");
  // Floyd's algorithm: each batch-subset equally likely, O(batch^2).
  std::vector<std::size_t> picked;
  picked.reserve(batch);
  const std::size_t n = items_.size();
  for (std::size_t j = n - batch; j < n; ++j) {
    const std::size_t r = std::uniform_int_distribution<std::size_t>(0, j)(rng_);
    picked.push_back(std::find(picked.begin(), picked.end(), r) == picked.end() ? r : j);
  }
  return picked;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch) {
  std::vector<const Transition*> out;
  for (std::size_t i : sample_indices(batch)) out.push_back(&items_[i]);
  return out;
}

}  // namespace qdsc::agent
