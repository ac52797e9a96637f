#pragma once

#include <cstddef>
#include <new>

namespace unerf {

// Process-wide byte counters for tensor buffers. Every Tensor and gradient
// buffer goes through TrackingAllocator, so current/peak reflect the numeric
// working set only (not STL bookkeeping or the tape's node vector).
struct MemoryStats {
  static std::size_t current_bytes() noexcept;
  static std::size_t peak_bytes() noexcept;
  // Sets the peak to the current value.
  static void reset_peak() noexcept;

  static void on_allocate(std::size_t bytes) noexcept;
  static void on_deallocate(std::size_t bytes) noexcept;
};

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    MemoryStats::on_allocate(n * sizeof(T));
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{64}));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    MemoryStats::on_deallocate(n * sizeof(T));
    ::operator delete(p, std::align_val_t{64});
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

}  // namespace unerf
