#ifndef KACSPHERE_CORE_FFT_HPP
#define KACSPHERE_CORE_FFT_HPP

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "error.hpp"

namespace kacsphere {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// In-place complex FFT of arbitrary rank over a contiguous row-major buffer.
/// FFTW_ESTIMATE plans keep results independent of timing.
class ComplexFft {
 public:
  ComplexFft(std::vector<int> dims, std::complex<double>* data, int sign) {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), reinterpret_cast<fftw_complex*>(data),
                          reinterpret_cast<fftw_complex*>(data), sign, FFTW_ESTIMATE);
    if (!plan_) throw CapacityError("FFTW could not create a plan");
  }
  ComplexFft(const ComplexFft&) = delete;
  ComplexFft& operator=(const ComplexFft&) = delete;
  ~ComplexFft() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void execute() { fftw_execute(plan_); }

 private:
  fftw_plan plan_ = nullptr;
};

inline void fft_inplace(std::vector<int> dims, std::vector<std::complex<double>>& data, int sign) {
  ComplexFft plan(std::move(dims), data.data(), sign);
  plan.execute();
}

}  // namespace kacsphere

#endif
