#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "qdsc/common/random.hpp"

namespace qdsc::agent {

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool done = false;  // terminal: no bootstrap from next_state
};

/// Fixed-capacity ring of transitions with uniform minibatch sampling
/// (without replacement inside one batch).
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void add(Transition t);
  [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
  [[nodiscard]] const Transition& at(std::size_t i) const { return items_.at(i); }

  /// Distinct indices into the buffer, uniformly drawn. Requires
  /// batch <= size().
  std::vector<std::size_t> sample_indices(std::size_t batch);
  std::vector<const Transition*> sample(std::size_t batch);

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
  Rng rng_;
};

}  // namespace qdsc::agent
