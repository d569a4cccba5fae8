#pragma once

#include <mutex>

namespace l1gibbs::detail {

// FFTW's planner is not reentrant; every plan creation and destruction in
// the library goes through this lock. Executing existing plans is safe.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace l1gibbs::detail
