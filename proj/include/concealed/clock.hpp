#pragma once

#include <atomic>
#include <chrono>

namespace concealed {

using Millis = std::chrono::milliseconds;

/// Time source for expiry and batching decisions. Tests and the simulation harness drive a
/// ManualClock; servers use SteadyClock.
class Clock {
  public:
    virtual ~Clock() = default;
    virtual Millis now() const = 0;
};

class SteadyClock final : public Clock {
  public:
    Millis now() const override {
        return std::chrono::duration_cast<Millis>(
                std::chrono::steady_clock::now().time_since_epoch());
    }
};

class ManualClock final : public Clock {
  public:
    explicit ManualClock(Millis start = Millis{0}) : now_{start.count()} {}

    Millis now() const override { return Millis{now_.load()}; }
    void advance(Millis d) { now_ += d.count(); }
    void set(Millis t) { now_ = t.count(); }

  private:
    std::atomic<Millis::rep> now_;
};

}  // namespace concealed
