#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cmlab/vec.hpp"

namespace cmlab {

enum class InsertOutcome { Inserted, Replaced, Rejected };

struct InsertResult {
  InsertOutcome outcome;
  double evicted_priority = 0.0;  // meaningful only for Replaced
};

struct BufferStats {
  double variance = 0.0;
  double cosine_agreement = 1.0;
  int occupancy = 0;
};

// Fixed-capacity store of payload vectors keyed by a decaying scalar priority.
// A full buffer admits a new entry only when its priority strictly exceeds the
// current minimum; the evicted entry is the minimum-priority one, ties broken
// toward the smallest insertion index. Priorities decay multiplicatively;
// payloads never do.
class CriticalBuffer {
 public:
  struct Entry {
    double priority;
    Vec payload;
    std::uint64_t insertion_index;
  };

  CriticalBuffer(int capacity, double decay) : capacity_(capacity), decay_(decay) {
    if (capacity < 1) throw std::invalid_argument("buffer: capacity must be >= 1");
    if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("buffer: decay must be in (0, 1]");
  }

  InsertResult maybe_insert(double priority, const Vec& payload) {
    if (priority < 0.0) throw std::invalid_argument("buffer: priority must be non-negative");
    if (!entries_.empty() && payload.size() != entries_.front().payload.size())
      throw std::invalid_argument("buffer: payload dimension mismatch");
    if (static_cast<int>(entries_.size()) < capacity_) {
      entries_.push_back({priority, payload, next_index_++});
      return {InsertOutcome::Inserted};
    }
    const std::size_t k = min_priority_slot();
    if (priority > entries_[k].priority) {
      const double evicted = entries_[k].priority;
      entries_[k] = {priority, payload, next_index_++};
      return {InsertOutcome::Replaced, evicted};
    }
    return {InsertOutcome::Rejected};
  }

  void decay_priorities() {
    for (Entry& e : entries_) e.priority *= decay_;
  }

  // Mean payload; the zero vector of dim_hint when empty.
  Vec mean(int dim_hint) const {
    if (entries_.empty()) return Vec(static_cast<std::size_t>(dim_hint), 0.0);
    Vec m(entries_.front().payload.size(), 0.0);
    for (const Entry& e : entries_) m += e.payload;
    const double inv = 1.0 / static_cast<double>(entries_.size());
    for (double& v : m) v *= inv;
    return m;
  }

  BufferStats stats() const {
    BufferStats st;
    st.occupancy = occupancy();
    if (entries_.empty()) return st;
    const Vec mu = mean(static_cast<int>(entries_.front().payload.size()));
    double acc = 0.0;
    for (const Entry& e : entries_)
      for (std::size_t d = 0; d < mu.size(); ++d) {
        const double dev = e.payload[d] - mu[d];
        acc += dev * dev;
      }
    st.variance = acc / (static_cast<double>(entries_.size()) * static_cast<double>(mu.size()));
    if (entries_.size() < 2) return st;

    // Reference = highest-norm payload, ties toward the smallest insertion index.
    std::size_t ref = 0;
    double ref_norm = norm2(entries_[0].payload);
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      const double n = norm2(entries_[i].payload);
      if (n > ref_norm ||
          (n == ref_norm && entries_[i].insertion_index < entries_[ref].insertion_index)) {
        ref = i;
        ref_norm = n;
      }
    }
    double cos_sum = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (i == ref) continue;
      const double n = norm2(entries_[i].payload);
      cos_sum += (ref_norm == 0.0 || n == 0.0)
                     ? 0.0
                     : dot(entries_[ref].payload, entries_[i].payload) / (ref_norm * n);
    }
    st.cosine_agreement = cos_sum / static_cast<double>(entries_.size() - 1);
    return st;
  }

  int occupancy() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  double decay_factor() const { return decay_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::size_t min_priority_slot() const {
    std::size_t k = 0;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      if (entries_[i].priority < entries_[k].priority ||
          (entries_[i].priority == entries_[k].priority &&
           entries_[i].insertion_index < entries_[k].insertion_index))
        k = i;
    }
    return k;
  }

  int capacity_;
  double decay_;
  std::vector<Entry> entries_;
  std::uint64_t next_index_ = 0;
};

}  // namespace cmlab
