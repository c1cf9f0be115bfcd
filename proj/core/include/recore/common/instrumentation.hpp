#pragma once

#include <atomic>
#include <cstdint>

// Process-wide call counters used to prove that the deployment path never
// augments observations and never reads ground-truth depth.
namespace recore::instrumentation {

struct Counters {
  std::atomic<std::uint64_t> style_intervene_calls{0};
  std::atomic<std::uint64_t> depth_reads{0};
};

Counters& counters();

inline void count_style_intervene() { counters().style_intervene_calls.fetch_add(1, std::memory_order_relaxed); }
inline void count_depth_read() { counters().depth_reads.fetch_add(1, std::memory_order_relaxed); }

struct Snapshot {
  std::uint64_t style_intervene_calls;
  std::uint64_t depth_reads;
};

inline Snapshot snapshot() {
  return {counters().style_intervene_calls.load(), counters().depth_reads.load()};
}

}  // namespace recore::instrumentation
