#pragma once

#include <cstddef>

#include "qst/common.hpp"

// Hot inner loops, each available as a plain serial reference and an
// OpenMP-parallel variant. The serial versions are the ground truth the
// parallel ones are tested against; both must produce bit-identical output
// (each output element is accumulated in the same order regardless of the
// thread count). Dispatch is controlled per call or by the global mode.

namespace qst::kernels {

enum class Mode { Serial, OpenMP };

Mode mode();
void set_mode(Mode m);

// Worker count for the OpenMP variants. Honors QST_THREADS if set,
// otherwise the hardware concurrency.
int threads();
void set_threads(int n);

struct ConvShape {
  int in_h = 0, in_w = 0, in_c = 0;
  int out_h = 0, out_w = 0, out_c = 0;
  int kernel = 0, stride = 1;
  int pad_top = 0, pad_left = 0;
};

// Direct 2D convolution, HWC layout, weights [k][k][in_c][out_c].
// out must be pre-sized to out_h*out_w*out_c and is overwritten.
void conv2d_forward_serial(const double* in, const double* w, double* out,
                           const ConvShape& s);
void conv2d_forward_omp(const double* in, const double* w, double* out,
                        const ConvShape& s);
void conv2d_forward(const double* in, const double* w, double* out,
                    const ConvShape& s, Mode m = mode());

// Gradient w.r.t. the convolution input. grad_in is overwritten.
void conv2d_input_grad_serial(const double* grad_out, const double* w,
                              double* grad_in, const ConvShape& s);
void conv2d_input_grad_omp(const double* grad_out, const double* w,
                           double* grad_in, const ConvShape& s);
void conv2d_input_grad(const double* grad_out, const double* w,
                       double* grad_in, const ConvShape& s, Mode m = mode());

// Gradient w.r.t. the weights; accumulates into grad_w (caller zeroes).
void conv2d_weight_grad_serial(const double* in, const double* grad_out,
                               double* grad_w, const ConvShape& s);
void conv2d_weight_grad_omp(const double* in, const double* grad_out,
                            double* grad_w, const ConvShape& s);
void conv2d_weight_grad(const double* in, const double* grad_out,
                        double* grad_w, const ConvShape& s, Mode m = mode());

// Single-channel image convolution with an arbitrary kernel, zero padded
// to "same" size. Used by the Gaussian convolution noise channel and the
// fixed convolution layer. kernel is kh*kw row-major, anchored at its
// center (kh, kw odd).
void image_convolve_serial(const double* in, int h, int w, const double* kernel,
                           int kh, int kw, double* out);
void image_convolve_omp(const double* in, int h, int w, const double* kernel,
                        int kh, int kw, double* out);
void image_convolve(const double* in, int h, int w, const double* kernel,
                    int kh, int kw, double* out, Mode m = mode());

// Batched rank-1 expectation values d_i = Re(u_i^H rho u_i) for a set of
// state columns U = [u_0 ... u_{n-1}] (dim x n), optionally scaled.
void expect_rank1_batch_serial(const CMatrix& rho, const CMatrix& columns,
                               double scale, double* out);
void expect_rank1_batch_omp(const CMatrix& rho, const CMatrix& columns,
                            double scale, double* out);
void expect_rank1_batch(const CMatrix& rho, const CMatrix& columns,
                        double scale, double* out, Mode m = mode());

// Weighted sum of rank-1 projectors G = sum_i g_i u_i u_i^H (adjoint of the
// batched expectation). G is overwritten.
void rank1_weighted_sum_serial(const CMatrix& columns, const double* weights,
                               double scale, CMatrix& out);
void rank1_weighted_sum_omp(const CMatrix& columns, const double* weights,
                            double scale, CMatrix& out);
void rank1_weighted_sum(const CMatrix& columns, const double* weights,
                        double scale, CMatrix& out, Mode m = mode());

// Generic index-parallel loop used by embarrassingly parallel batch work
// (operator construction, per-point Wigner values, dataset generation).
// body(i) must write only to slot i of its output.
template <typename Body>
void parallel_for(std::size_t n, const Body& body, Mode m = mode()) {
  if (m == Mode::OpenMP) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      body(static_cast<std::size_t>(i));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

}  // namespace qst::kernels
