#include "edtk/op_counter.hpp"

#include <ostream>

namespace edtk {

OpCounts& OpCounts::operator+=(const OpCounts& o) {
  multiply_adds += o.multiply_adds;
  comparisons += o.comparisons;
  additions += o.additions;
  memory_moves += o.memory_moves;
  transcendentals += o.transcendentals;
  return *this;
}

OpCounts operator-(const OpCounts& a, const OpCounts& b) {
  return OpCounts{a.multiply_adds - b.multiply_adds, a.comparisons - b.comparisons, a.additions - b.additions,
                  a.memory_moves - b.memory_moves, a.transcendentals - b.transcendentals};
}

std::ostream& operator<<(std::ostream& os, const OpCounts& c) {
  return os << "{macs=" << c.multiply_adds << " cmp=" << c.comparisons << " add=" << c.additions
            << " mov=" << c.memory_moves << " exp=" << c.transcendentals << "}";
}

OpCounts OpCounter::snapshot() const {
  return OpCounts{multiply_adds_.load(std::memory_order_relaxed), comparisons_.load(std::memory_order_relaxed),
                  additions_.load(std::memory_order_relaxed), memory_moves_.load(std::memory_order_relaxed),
                  transcendentals_.load(std::memory_order_relaxed)};
}

void OpCounter::reset() {
  multiply_adds_.store(0, std::memory_order_relaxed);
  comparisons_.store(0, std::memory_order_relaxed);
  additions_.store(0, std::memory_order_relaxed);
  memory_moves_.store(0, std::memory_order_relaxed);
  transcendentals_.store(0, std::memory_order_relaxed);
}

namespace {
thread_local OpCounter* tls_counter = nullptr;
}

OpCounter& global_counter() {
  static OpCounter counter;
  return counter;
}

OpCounter& active_counter() { return tls_counter ? *tls_counter : global_counter(); }

CounterScope::CounterScope(OpCounter& counter) : previous_(tls_counter) { tls_counter = &counter; }

CounterScope::~CounterScope() { tls_counter = previous_; }

}  // namespace edtk
