#include "coachmarl/learner/replay_buffer.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "coachmarl/errors.hpp"

namespace coachmarl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ParameterError("replay buffer capacity must be positive");
  episodes_.reserve(std::min<std::size_t>(capacity, 1024));
}

void ReplayBuffer::push(EpisodeRecord episode) {
  if (episodes_.size() < capacity_) {
    episodes_.push_back(std::move(episode));
  } else {
    episodes_[next_] = std::move(episode);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const EpisodeRecord*> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (!can_sample(batch_size)) {
    throw ParameterError("cannot sample " + std::to_string(batch_size) + " episodes from a buffer holding " +
                         std::to_string(size()));
  }
  // Partial Fisher-Yates over indices.
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<const EpisodeRecord*> out;
  out.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
    std::swap(idx[k], idx[pick(rng)]);
    out.push_back(&episodes_[idx[k]]);
  }
  return out;
}

}  // namespace coachmarl
