#pragma once

#include <exception>

namespace mrf::detail {

/// Keeps the first exception raised inside an OpenMP loop body so it can be
/// rethrown on the calling thread (letting it escape the region aborts).
class ParallelErrors {
 public:
  template <class F>
  void guard(F&& body) noexcept {
    try {
      body();
    } catch (...) {
#pragma omp critical(mrf_parallel_errors)
      if (!first_) first_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (first_) std::rethrow_exception(first_);
  }

 private:
  std::exception_ptr first_;
};

}  // namespace mrf::detail
