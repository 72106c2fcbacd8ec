#pragma once

#include <exception>
#include <limits>
#include <mutex>

namespace sgdlm::kernels {

template <class Body>
void for_each_index(Exec ex, std::size_t n, Body&& body) {
  if (ex == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr err;
  std::size_t err_index = std::numeric_limits<std::size_t>::max();
  std::mutex mu;
  const auto sn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < sn; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (static_cast<std::size_t>(i) < err_index) {
        err_index = static_cast<std::size_t>(i);
        err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace sgdlm::kernels
