#pragma once

#include <numeric>
#include <vector>

#include "ri/rng.hpp"

namespace ri::internal {

// Endless stream of row indices: a shuffled pass over [0, n), reshuffled
// whenever it runs out. One instance per dataset keeps labeled and
// unlabeled batch order independent but fully seeded.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, std::uint64_t seed) : rng_(seed), idx_(n) {
    std::iota(idx_.begin(), idx_.end(), std::size_t{0});
    rng_.shuffle(idx_);
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      if (pos_ == idx_.size()) {
        rng_.shuffle(idx_);
        pos_ = 0;
      }
      out.push_back(idx_[pos_++]);
    }
    return out;
  }

 private:
  Rng rng_;
  std::vector<std::size_t> idx_;
  std::size_t pos_ = 0;
};

}  // namespace ri::internal
