#pragma once

// Time partitions 0 = t_0 < t_1 < ... < t_M = T.

#include <stdexcept>
#include <vector>

#include "cgode/precision.hpp"

namespace cgode {

template <class R>
class Partition {
 public:
  Partition() = default;

  explicit Partition(std::vector<R> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) throw std::invalid_argument("Partition: need at least two nodes");
    for (size_t m = 1; m < nodes_.size(); ++m)
      if (!(nodes_[m] > nodes_[m - 1]))
        throw std::invalid_argument("Partition: nodes must be strictly increasing");
  }

  // Uniform partition with t_m = T*m/M so that t_M == T exactly.
  template <class Ctx>
  static Partition uniform(const R& T, long M, const Ctx& ctx) {
    if (M < 1) throw std::invalid_argument("Partition: M must be >= 1");
    std::vector<R> nodes;
    nodes.reserve(M + 1);
    for (long m = 0; m <= M; ++m) nodes.push_back(T * m / M);
    nodes.back() = T;
    (void)ctx;
    return Partition(std::move(nodes));
  }

  long intervals() const { return static_cast<long>(nodes_.size()) - 1; }
  const R& node(long m) const { return nodes_[m]; }
  const std::vector<R>& nodes() const { return nodes_; }
  const R& left() const { return nodes_.front(); }
  const R& right() const { return nodes_.back(); }
  R dt(long m) const { return nodes_[m + 1] - nodes_[m]; }

  R min_dt() const {
    R best = dt(0);
    for (long m = 1; m < intervals(); ++m) {
      R d = dt(m);
      if (d < best) best = d;
    }
    return best;
  }
  R max_dt() const {
    R best = dt(0);
    for (long m = 1; m < intervals(); ++m) {
      R d = dt(m);
      if (d > best) best = d;
    }
    return best;
  }

  // Interval index m such that t in (t_m, t_{m+1}], with t == t_0 mapping to 0
  // (left-continuous convention at the shared endpoints).
  long locate(const R& t) const {
    if (t < nodes_.front() || t > nodes_.back())
      throw std::domain_error("Partition: t outside [t_0, t_M]");
    long lo = 0, hi = intervals() - 1;
    while (lo < hi) {
      long mid = (lo + hi) / 2;
      if (t <= nodes_[mid + 1]) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

 private:
  std::vector<R> nodes_;
};

}  // namespace cgode
