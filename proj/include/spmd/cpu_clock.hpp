#pragma once

#include <chrono>

namespace spmd {

// CPU seconds consumed by the whole process (all threads).
double process_cpu_seconds();

// CPU seconds consumed by the calling thread.
double thread_cpu_seconds();

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  void reset() { start_ = std::chrono::steady_clock::now(); }
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace spmd
