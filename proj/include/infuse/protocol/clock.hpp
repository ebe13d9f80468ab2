#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace infuse {

/// Milliseconds on whatever timeline the owning clock uses.
using Millis = std::chrono::milliseconds;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Millis now() const override {
    return std::chrono::duration_cast<Millis>(
        std::chrono::system_clock::now().time_since_epoch());
  }
};

/// Manually driven clock. Monotone: set/advance never move it backwards.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Millis start = Millis{0}) : now_(start.count()) {}

  Millis now() const override { return Millis{now_.load(std::memory_order_acquire)}; }

  void advance(Millis d) {
    if (d.count() > 0) now_.fetch_add(d.count(), std::memory_order_acq_rel);
  }

  void set(Millis t) {
    auto cur = now_.load(std::memory_order_acquire);
    while (t.count() > cur &&
           !now_.compare_exchange_weak(cur, t.count(), std::memory_order_acq_rel)) {
    }
  }

 private:
  std::atomic<std::int64_t> now_;
};

}  // namespace infuse
