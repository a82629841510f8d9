#include "aerobeam/replay_buffer.hpp"

#include <cmath>

#include "aerobeam/errors.hpp"

namespace aerobeam::rl {

ReplayBuffer::ReplayBuffer(int obs_dim, int action_dim, int capacity)
    : obs_(obs_dim, capacity),
      act_(action_dim, capacity),
      next_(obs_dim, capacity),
      rew_(capacity),
      done_(capacity),
      capacity_(capacity) {
  if (capacity < 1 || obs_dim < 1 || action_dim < 1) {
    throw DomainError("replay buffer needs positive capacity and dimensions");
  }
}

void ReplayBuffer::push(const Transition& t) {
  if (t.observation.size() != obs_.rows() || t.next_observation.size() != obs_.rows() ||
      t.action.size() != act_.rows()) {
    throw ShapeError("transition dimensions do not match the replay buffer");
  }
  if (!std::isfinite(t.reward)) throw DomainError("transition reward is not finite");
  obs_.col(cursor_) = t.observation;
  act_.col(cursor_) = t.action;
  next_.col(cursor_) = t.next_observation;
  rew_[cursor_] = t.reward;
  done_[cursor_] = t.done ? 1.0 : 0.0;
  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

Batch ReplayBuffer::sample(int batch, Rng& rng) const {
  if (batch < 1) throw DomainError("batch size must be >= 1");
  if (size_ < batch) {
    throw DomainError("replay buffer holds " + std::to_string(size_) +
                      " transitions, fewer than the batch size " + std::to_string(batch));
  }
  std::uniform_int_distribution<int> pick(0, size_ - 1);
  Batch b;
  b.observations.resize(obs_.rows(), batch);
  b.actions.resize(act_.rows(), batch);
  b.next_observations.resize(obs_.rows(), batch);
  b.rewards.resize(batch);
  b.dones.resize(batch);
  b.slots.resize(batch);
  for (int i = 0; i < batch; ++i) {
    const int s = pick(rng);
    b.slots[i] = s;
    b.observations.col(i) = obs_.col(s);
    b.actions.col(i) = act_.col(s);
    b.next_observations.col(i) = next_.col(s);
    b.rewards[i] = rew_[s];
    b.dones[i] = done_[s];
  }
  return b;
}

Transition ReplayBuffer::at(int slot) const {
  if (slot < 0 || slot >= size_) throw DomainError("replay slot out of range");
  return {obs_.col(slot), act_.col(slot), rew_[slot], next_.col(slot), done_[slot] != 0.0};
}

}  // namespace aerobeam::rl
