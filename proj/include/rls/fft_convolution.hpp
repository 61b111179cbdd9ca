#pragma once

#include <complex>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "rls/lattice.hpp"

namespace rls {

namespace detail {

inline int fft_friendly_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

struct FftwBuffer {
  explicit FftwBuffer(size_t n)
      : data(reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * n))), size(n) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* raw() { return reinterpret_cast<fftw_complex*>(data); }
  cplx* data;
  size_t size;
};

// FFTW planning is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlan {
  FftwPlan(const Index3& n, FftwBuffer& buf, int sign) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_3d(n[0], n[1], n[2], buf.raw(), buf.raw(), sign, FFTW_ESTIMATE);
  }
  ~FftwPlan() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  void run(FftwBuffer& buf) const { fftw_execute_dft(plan, buf.raw(), buf.raw()); }
  fftw_plan plan;
};

}  // namespace detail

// Applies y_i = sum_j T(index_i - index_j) x_j for B x B block kernels by
// zero-padded FFT convolution over the grid's bounding box. Block kernels
// are split into B*B scalar convolutions sharing B forward and B inverse
// transforms. Not thread-safe: one instance per worker.
template <int B>
class FftConvolver {
 public:
  using Block = Eigen::Matrix<cplx, B, B>;

  FftConvolver(const SupportGrid& grid, const KernelTable<Block>& table) : grid_(grid) {
    for (int a = 0; a < 3; ++a) pad_[a] = detail::fft_friendly_size(2 * grid.extent[a] - 1);
    volume_ = static_cast<size_t>(pad_[0]) * pad_[1] * pad_[2];
    work_.reserve(B);
    for (int c = 0; c < B; ++c) work_.push_back(std::make_unique<detail::FftwBuffer>(volume_));
    forward_ = std::make_unique<detail::FftwPlan>(pad_, *work_[0], FFTW_FORWARD);
    backward_ = std::make_unique<detail::FftwPlan>(pad_, *work_[0], FFTW_BACKWARD);

    kernel_hat_.resize(static_cast<size_t>(B) * B);
    const Index3 e = grid.extent;
    for (int r = 0; r < B; ++r)
      for (int c = 0; c < B; ++c) {
        auto& buf = *work_[0];
        std::fill(buf.data, buf.data + volume_, cplx(0.0));
        for (int i = -(e[0] - 1); i < e[0]; ++i)
          for (int j = -(e[1] - 1); j < e[1]; ++j)
            for (int k = -(e[2] - 1); k < e[2]; ++k) {
              const Index3 o{i, j, k};
              buf.data[wrap(o)] = table(o)(r, c);
            }
        forward_->run(buf);
        kernel_hat_[r * B + c].assign(buf.data, buf.data + volume_);
      }
  }

  // x, y hold B components per node, node-major.
  Eigen::VectorXcd convolve(const Eigen::VectorXcd& x) const {
    const size_t n = grid_.size();
    for (int c = 0; c < B; ++c) {
      auto& buf = *work_[c];
      std::fill(buf.data, buf.data + volume_, cplx(0.0));
      for (size_t j = 0; j < n; ++j) buf.data[place(grid_.index[j])] = x[B * j + c];
      forward_->run(buf);
    }
    std::vector<cplx> acc(static_cast<size_t>(B) * volume_, cplx(0.0));
    for (int r = 0; r < B; ++r)
      for (int c = 0; c < B; ++c) {
        const auto& kh = kernel_hat_[r * B + c];
        const cplx* xc = work_[c]->data;
        cplx* out = acc.data() + r * volume_;
        for (size_t p = 0; p < volume_; ++p) out[p] += kh[p] * xc[p];
      }
    Eigen::VectorXcd y(B * n);
    const double scale = 1.0 / static_cast<double>(volume_);
    for (int r = 0; r < B; ++r) {
      auto& buf = *work_[0];
      std::copy(acc.begin() + r * volume_, acc.begin() + (r + 1) * volume_, buf.data);
      backward_->run(buf);
      for (size_t i = 0; i < n; ++i) y[B * i + r] = buf.data[place(grid_.index[i])] * scale;
    }
    return y;
  }

  const Index3& padded() const { return pad_; }

 private:
  size_t wrap(const Index3& o) const {
    size_t f = 0;
    for (int a = 0; a < 3; ++a) f = f * pad_[a] + ((o[a] % pad_[a]) + pad_[a]) % pad_[a];
    return f;
  }
  size_t place(const Index3& idx) const {
    return (static_cast<size_t>(idx[0] - grid_.lo[0]) * pad_[1] + (idx[1] - grid_.lo[1])) * pad_[2] +
           (idx[2] - grid_.lo[2]);
  }

  const SupportGrid& grid_;
  Index3 pad_{1, 1, 1};
  size_t volume_ = 0;
  std::vector<std::unique_ptr<detail::FftwBuffer>> work_;
  std::unique_ptr<detail::FftwPlan> forward_, backward_;
  std::vector<std::vector<cplx>> kernel_hat_;
};

}  // namespace rls
