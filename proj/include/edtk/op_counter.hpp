#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>

namespace edtk {

/// Plain snapshot of operation counts. One multiply-add is one unit.
struct OpCounts {
  std::uint64_t multiply_adds = 0;
  std::uint64_t comparisons = 0;
  std::uint64_t additions = 0;
  std::uint64_t memory_moves = 0;
  std::uint64_t transcendentals = 0;

  std::uint64_t total() const { return multiply_adds + comparisons + additions + memory_moves + transcendentals; }

  OpCounts& operator+=(const OpCounts& o);
  friend OpCounts operator+(OpCounts a, const OpCounts& b) { return a += b; }
  friend OpCounts operator-(const OpCounts& a, const OpCounts& b);
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

std::ostream& operator<<(std::ostream& os, const OpCounts& c);

/// Thread-safe accumulator for the measured cost of tensor operations.
///
/// Every tensor-core primitive reports into the counter returned by
/// active_counter(). Increments are relaxed atomics, so one counter may be
/// shared by several threads and totals stay exact.
class OpCounter {
 public:
  OpCounter() = default;
  OpCounter(const OpCounter&) = delete;
  OpCounter& operator=(const OpCounter&) = delete;

  void add_multiply_adds(std::uint64_t n) { multiply_adds_.fetch_add(n, std::memory_order_relaxed); }
  void add_comparisons(std::uint64_t n) { comparisons_.fetch_add(n, std::memory_order_relaxed); }
  void add_additions(std::uint64_t n) { additions_.fetch_add(n, std::memory_order_relaxed); }
  void add_memory_moves(std::uint64_t n) { memory_moves_.fetch_add(n, std::memory_order_relaxed); }
  void add_transcendentals(std::uint64_t n) { transcendentals_.fetch_add(n, std::memory_order_relaxed); }

  OpCounts snapshot() const;
  void reset();

 private:
  std::atomic<std::uint64_t> multiply_adds_{0};
  std::atomic<std::uint64_t> comparisons_{0};
  std::atomic<std::uint64_t> additions_{0};
  std::atomic<std::uint64_t> memory_moves_{0};
  std::atomic<std::uint64_t> transcendentals_{0};
};

/// Process-wide default counter.
OpCounter& global_counter();

/// Counter receiving increments on the calling thread: the innermost
/// CounterScope's counter, or global_counter() when none is active.
OpCounter& active_counter();

/// Routes the calling thread's increments to `counter` for the scope's lifetime.
class CounterScope {
 public:
  explicit CounterScope(OpCounter& counter);
  ~CounterScope();
  CounterScope(const CounterScope&) = delete;
  CounterScope& operator=(const CounterScope&) = delete;

 private:
  OpCounter* previous_;
};

/// Measures the increments of the active counter between construction and read().
class CountDelta {
 public:
  CountDelta() : start_(active_counter().snapshot()) {}
  OpCounts read() const { return active_counter().snapshot() - start_; }

 private:
  OpCounts start_;
};

}  // namespace edtk
