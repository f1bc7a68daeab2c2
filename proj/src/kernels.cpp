#include "qst/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace qst::kernels {

namespace {

std::atomic<Mode> g_mode{Mode::OpenMP};

int detect_threads() {
  if (const char* env = std::getenv("QST_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int> g_threads{detect_threads()};

}  // namespace

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

int threads() { return g_threads.load(std::memory_order_relaxed); }
void set_threads(int n) {
  if (n > 0) g_threads.store(n, std::memory_order_relaxed);
}

// ---------------------------------------------------------------------------
// conv2d: out[oy][ox][oc] = sum_{ky,kx,ic} in[iy][ix][ic] * w[ky][kx][ic][oc]
// with iy = oy*stride - pad_top + ky, ix analogous; out-of-range taps are 0.
// The serial reference is written for clarity; the OpenMP variant keeps the
// same per-element accumulation order and parallelizes over output rows.
// ---------------------------------------------------------------------------

namespace {

inline void conv2d_forward_row(const double* in, const double* w, double* out,
                               const ConvShape& s, int oy) {
  const int ic_n = s.in_c, oc_n = s.out_c, k = s.kernel;
  for (int ox = 0; ox < s.out_w; ++ox) {
    double* o = out + (static_cast<std::size_t>(oy) * s.out_w + ox) * oc_n;
    for (int oc = 0; oc < oc_n; ++oc) o[oc] = 0.0;
    for (int ky = 0; ky < k; ++ky) {
      const int iy = oy * s.stride - s.pad_top + ky;
      if (iy < 0 || iy >= s.in_h) continue;
      for (int kx = 0; kx < k; ++kx) {
        const int ix = ox * s.stride - s.pad_left + kx;
        if (ix < 0 || ix >= s.in_w) continue;
        const double* ip =
            in + (static_cast<std::size_t>(iy) * s.in_w + ix) * ic_n;
        const double* wp =
            w + ((static_cast<std::size_t>(ky) * k + kx) * ic_n) * oc_n;
        for (int ic = 0; ic < ic_n; ++ic) {
          const double v = ip[ic];
          const double* wrow = wp + static_cast<std::size_t>(ic) * oc_n;
          for (int oc = 0; oc < oc_n; ++oc) o[oc] += v * wrow[oc];
        }
      }
    }
  }
}

}  // namespace

void conv2d_forward_serial(const double* in, const double* w, double* out,
                           const ConvShape& s) {
  for (int oy = 0; oy < s.out_h; ++oy) conv2d_forward_row(in, w, out, s, oy);
}

void conv2d_forward_omp(const double* in, const double* w, double* out,
                        const ConvShape& s) {
#pragma omp parallel for schedule(static) num_threads(threads())
  for (int oy = 0; oy < s.out_h; ++oy) conv2d_forward_row(in, w, out, s, oy);
}

void conv2d_forward(const double* in, const double* w, double* out,
                    const ConvShape& s, Mode m) {
  if (m == Mode::OpenMP)
    conv2d_forward_omp(in, w, out, s);
  else
    conv2d_forward_serial(in, w, out, s);
}

namespace {

inline void conv2d_input_grad_row(const double* grad_out, const double* w,
                                  double* grad_in, const ConvShape& s,
                                  int iy) {
  const int ic_n = s.in_c, oc_n = s.out_c, k = s.kernel;
  for (int ix = 0; ix < s.in_w; ++ix) {
    double* gi = grad_in + (static_cast<std::size_t>(iy) * s.in_w + ix) * ic_n;
    for (int ic = 0; ic < ic_n; ++ic) gi[ic] = 0.0;
    for (int ky = 0; ky < k; ++ky) {
      const int oy_num = iy + s.pad_top - ky;
      if (oy_num < 0 || oy_num % s.stride != 0) continue;
      const int oy = oy_num / s.stride;
      if (oy >= s.out_h) continue;
      for (int kx = 0; kx < k; ++kx) {
        const int ox_num = ix + s.pad_left - kx;
        if (ox_num < 0 || ox_num % s.stride != 0) continue;
        const int ox = ox_num / s.stride;
        if (ox >= s.out_w) continue;
        const double* go =
            grad_out + (static_cast<std::size_t>(oy) * s.out_w + ox) * oc_n;
        const double* wp =
            w + ((static_cast<std::size_t>(ky) * k + kx) * ic_n) * oc_n;
        for (int ic = 0; ic < ic_n; ++ic) {
          const double* wrow = wp + static_cast<std::size_t>(ic) * oc_n;
          double acc = 0.0;
          for (int oc = 0; oc < oc_n; ++oc) acc += go[oc] * wrow[oc];
          gi[ic] += acc;
        }
      }
    }
  }
}

}  // namespace

void conv2d_input_grad_serial(const double* grad_out, const double* w,
                              double* grad_in, const ConvShape& s) {
  for (int iy = 0; iy < s.in_h; ++iy)
    conv2d_input_grad_row(grad_out, w, grad_in, s, iy);
}

void conv2d_input_grad_omp(const double* grad_out, const double* w,
                           double* grad_in, const ConvShape& s) {
#pragma omp parallel for schedule(static) num_threads(threads())
  for (int iy = 0; iy < s.in_h; ++iy)
    conv2d_input_grad_row(grad_out, w, grad_in, s, iy);
}

void conv2d_input_grad(const double* grad_out, const double* w,
                       double* grad_in, const ConvShape& s, Mode m) {
  if (m == Mode::OpenMP)
    conv2d_input_grad_omp(grad_out, w, grad_in, s);
  else
    conv2d_input_grad_serial(grad_out, w, grad_in, s);
}

namespace {

// One (ky, kx) tap of the weight gradient; writes the ic x oc block.
inline void conv2d_weight_grad_tap(const double* in, const double* grad_out,
                                   double* grad_w, const ConvShape& s, int ky,
                                   int kx) {
  const int ic_n = s.in_c, oc_n = s.out_c;
  double* gw =
      grad_w + ((static_cast<std::size_t>(ky) * s.kernel + kx) * ic_n) * oc_n;
  for (int oy = 0; oy < s.out_h; ++oy) {
    const int iy = oy * s.stride - s.pad_top + ky;
    if (iy < 0 || iy >= s.in_h) continue;
    for (int ox = 0; ox < s.out_w; ++ox) {
      const int ix = ox * s.stride - s.pad_left + kx;
      if (ix < 0 || ix >= s.in_w) continue;
      const double* ip =
          in + (static_cast<std::size_t>(iy) * s.in_w + ix) * ic_n;
      const double* go =
          grad_out + (static_cast<std::size_t>(oy) * s.out_w + ox) * oc_n;
      for (int ic = 0; ic < ic_n; ++ic) {
        double* grow = gw + static_cast<std::size_t>(ic) * oc_n;
        const double v = ip[ic];
        for (int oc = 0; oc < oc_n; ++oc) grow[oc] += v * go[oc];
      }
    }
  }
}

}  // namespace

void conv2d_weight_grad_serial(const double* in, const double* grad_out,
                               double* grad_w, const ConvShape& s) {
  for (int ky = 0; ky < s.kernel; ++ky)
    for (int kx = 0; kx < s.kernel; ++kx)
      conv2d_weight_grad_tap(in, grad_out, grad_w, s, ky, kx);
}

void conv2d_weight_grad_omp(const double* in, const double* grad_out,
                            double* grad_w, const ConvShape& s) {
  const int taps = s.kernel * s.kernel;
#pragma omp parallel for schedule(static) num_threads(threads())
  for (int t = 0; t < taps; ++t)
    conv2d_weight_grad_tap(in, grad_out, grad_w, s, t / s.kernel,
                           t % s.kernel);
}

void conv2d_weight_grad(const double* in, const double* grad_out,
                        double* grad_w, const ConvShape& s, Mode m) {
  if (m == Mode::OpenMP)
    conv2d_weight_grad_omp(in, grad_out, grad_w, s);
  else
    conv2d_weight_grad_serial(in, grad_out, grad_w, s);
}

// ---------------------------------------------------------------------------
// image_convolve: centered kernel, zero padding, same output size.
// ---------------------------------------------------------------------------

namespace {

inline void image_convolve_row(const double* in, int h, int w,
                               const double* kernel, int kh, int kw,
                               double* out, int y) {
  const int ay = kh / 2, ax = kw / 2;
  for (int x = 0; x < w; ++x) {
    double acc = 0.0;
    for (int ky = 0; ky < kh; ++ky) {
      const int iy = y + ky - ay;
      if (iy < 0 || iy >= h) continue;
      for (int kx = 0; kx < kw; ++kx) {
        const int ix = x + kx - ax;
        if (ix < 0 || ix >= w) continue;
        acc += kernel[ky * kw + kx] * in[iy * w + ix];
      }
    }
    out[y * w + x] = acc;
  }
}

}  // namespace

void image_convolve_serial(const double* in, int h, int w,
                           const double* kernel, int kh, int kw, double* out) {
  for (int y = 0; y < h; ++y)
    image_convolve_row(in, h, w, kernel, kh, kw, out, y);
}

void image_convolve_omp(const double* in, int h, int w, const double* kernel,
                        int kh, int kw, double* out) {
#pragma omp parallel for schedule(static) num_threads(threads())
  for (int y = 0; y < h; ++y)
    image_convolve_row(in, h, w, kernel, kh, kw, out, y);
}

void image_convolve(const double* in, int h, int w, const double* kernel,
                    int kh, int kw, double* out, Mode m) {
  if (m == Mode::OpenMP)
    image_convolve_omp(in, h, w, kernel, kh, kw, out);
  else
    image_convolve_serial(in, h, w, kernel, kh, kw, out);
}

// ---------------------------------------------------------------------------
// Rank-1 measurement batches.
// ---------------------------------------------------------------------------

namespace {

inline double expect_rank1_one(const CMatrix& rho, const CMatrix& columns,
                               double scale, int i) {
  const auto u = columns.col(i);
  const cxd v = u.dot(rho * u);  // u^H rho u
  return scale * v.real();
}

}  // namespace

void expect_rank1_batch_serial(const CMatrix& rho, const CMatrix& columns,
                               double scale, double* out) {
  const int n = static_cast<int>(columns.cols());
  for (int i = 0; i < n; ++i) out[i] = expect_rank1_one(rho, columns, scale, i);
}

void expect_rank1_batch_omp(const CMatrix& rho, const CMatrix& columns,
                            double scale, double* out) {
  const int n = static_cast<int>(columns.cols());
#pragma omp parallel for schedule(static) num_threads(threads())
  for (int i = 0; i < n; ++i) out[i] = expect_rank1_one(rho, columns, scale, i);
}

void expect_rank1_batch(const CMatrix& rho, const CMatrix& columns,
                        double scale, double* out, Mode m) {
  if (m == Mode::OpenMP)
    expect_rank1_batch_omp(rho, columns, scale, out);
  else
    expect_rank1_batch_serial(rho, columns, scale, out);
}

void rank1_weighted_sum_serial(const CMatrix& columns, const double* weights,
                               double scale, CMatrix& out) {
  const int dim = static_cast<int>(columns.rows());
  const int n = static_cast<int>(columns.cols());
  CMatrix scaled(dim, n);
  for (int i = 0; i < n; ++i) scaled.col(i) = columns.col(i) * (scale * weights[i]);
  out.noalias() = scaled * columns.adjoint();
}

void rank1_weighted_sum_omp(const CMatrix& columns, const double* weights,
                            double scale, CMatrix& out) {
  const int dim = static_cast<int>(columns.rows());
  const int n = static_cast<int>(columns.cols());
  CMatrix scaled(dim, n);
#pragma omp parallel for schedule(static) num_threads(threads())
  for (int i = 0; i < n; ++i) scaled.col(i) = columns.col(i) * (scale * weights[i]);
  out.noalias() = scaled * columns.adjoint();
}

void rank1_weighted_sum(const CMatrix& columns, const double* weights,
                        double scale, CMatrix& out, Mode m) {
  if (m == Mode::OpenMP)
    rank1_weighted_sum_omp(columns, weights, scale, out);
  else
    rank1_weighted_sum_serial(columns, weights, scale, out);
}

}  // namespace qst::kernels
