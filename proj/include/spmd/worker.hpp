#pragma once

#include <filesystem>

namespace spmd::worker {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitFailure = 1;

// Worker entry point: read the spec, evaluate the assigned grid range,
// persist out<rank>, then remove filelock<rank>. On any failure a fail<rank>
// marker is written before the lock is removed. If the marker cannot be
// written the lock is left in place. Never throws.
int run_worker(const std::filesystem::path& spec_path);

}  // namespace spmd::worker
