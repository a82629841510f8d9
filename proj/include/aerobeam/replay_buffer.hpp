#pragma once

#include <vector>

#include "aerobeam/diffnet.hpp"
#include "aerobeam/rng.hpp"

namespace aerobeam::rl {

using nn::Matrix;
using nn::Vector;

struct Transition {
  Vector observation;
  Vector action;  // raw, in [-1, 1]^d
  double reward = 0.0;
  Vector next_observation;
  bool done = false;
};

// Column-per-sample view of a sampled minibatch.
struct Batch {
  Matrix observations;
  Matrix actions;
  Vector rewards;
  Matrix next_observations;
  Vector dones;  // 1.0 for terminal transitions
  std::vector<int> slots;

  int size() const { return static_cast<int>(rewards.size()); }
};

// Fixed-capacity ring; the oldest transition is overwritten once full.
class ReplayBuffer {
 public:
  ReplayBuffer(int obs_dim, int action_dim, int capacity);

  void push(const Transition& t);
  // Uniform with replacement. Throws DomainError when fewer than `batch`
  // transitions are stored.
  Batch sample(int batch, Rng& rng) const;
  Transition at(int slot) const;

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  int obs_dim() const { return static_cast<int>(obs_.rows()); }
  int action_dim() const { return static_cast<int>(act_.rows()); }

 private:
  Matrix obs_;
  Matrix act_;
  Matrix next_;
  Vector rew_;
  Vector done_;
  int capacity_ = 0;
  int size_ = 0;
  int cursor_ = 0;
};

}  // namespace aerobeam::rl
