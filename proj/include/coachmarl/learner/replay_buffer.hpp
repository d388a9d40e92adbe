#pragma once

#include <cstddef>
#include <vector>

#include "coachmarl/episode.hpp"
#include "coachmarl/rng.hpp"

namespace coachmarl {

/// Fixed-capacity ring of whole episodes; the oldest episode is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(EpisodeRecord episode);
  std::size_t size() const noexcept { return episodes_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool can_sample(std::size_t batch_size) const noexcept { return batch_size > 0 && size() >= batch_size; }

  /// batch_size distinct episodes, uniformly at random. Throws ParameterError if
  /// fewer than batch_size episodes are stored.
  std::vector<const EpisodeRecord*> sample(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<EpisodeRecord> episodes_;
};

}  // namespace coachmarl
