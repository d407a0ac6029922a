#include "eostb/kernels.hpp"

#include <cstddef>

#ifdef EOSTB_HAVE_OPENMP
#include <omp.h>
#endif

namespace eostb::kernels {

namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr long kParallelWork = 1L << 15;

long work(int m, int n, int k) { return static_cast<long>(m) * n * k; }

}  // namespace

namespace ref {

void gemm_nn(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
  for (int i = 0; i < a.rows; ++i) {
    double* ci = c.ptr + static_cast<std::size_t>(i) * c.cols;
    if (!accumulate)
      for (int j = 0; j < c.cols; ++j) ci[j] = 0.0;
    const double* ai = a.ptr + static_cast<std::size_t>(i) * a.cols;
    for (int p = 0; p < a.cols; ++p) {
      const double av = ai[p];
      const double* bp = b.ptr + static_cast<std::size_t>(p) * b.cols;
      for (int j = 0; j < c.cols; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.ptr + static_cast<std::size_t>(i) * a.cols;
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = b.ptr + static_cast<std::size_t>(j) * b.cols;
      double s = 0.0;
      for (int p = 0; p < a.cols; ++p) s += ai[p] * bj[p];
      double& out = c.ptr[static_cast<std::size_t>(i) * c.cols + j];
      out = accumulate ? out + s : s;
    }
  }
}

void gemm_tn(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  if (!accumulate)
    for (std::size_t t = 0; t < c.size(); ++t) c.ptr[t] = 0.0;
  for (int p = 0; p < a.rows; ++p) {
    const double* ap = a.ptr + static_cast<std::size_t>(p) * a.cols;
    const double* bp = b.ptr + static_cast<std::size_t>(p) * b.cols;
    for (int i = 0; i < a.cols; ++i) {
      const double av = ap[i];
      double* ci = c.ptr + static_cast<std::size_t>(i) * c.cols;
      for (int j = 0; j < c.cols; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace ref

namespace par {

void gemm_nn(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) {
    double* ci = c.ptr + static_cast<std::size_t>(i) * c.cols;
    if (!accumulate)
      for (int j = 0; j < c.cols; ++j) ci[j] = 0.0;
    const double* ai = a.ptr + static_cast<std::size_t>(i) * a.cols;
    for (int p = 0; p < a.cols; ++p) {
      const double av = ai[p];
      const double* bp = b.ptr + static_cast<std::size_t>(p) * b.cols;
      for (int j = 0; j < c.cols; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.ptr + static_cast<std::size_t>(i) * a.cols;
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = b.ptr + static_cast<std::size_t>(j) * b.cols;
      double s = 0.0;
      for (int p = 0; p < a.cols; ++p) s += ai[p] * bj[p];
      double& out = c.ptr[static_cast<std::size_t>(i) * c.cols + j];
      out = accumulate ? out + s : s;
    }
  }
}

// Row i of C only reads column i of A, so rows are independent; the p loop
// stays innermost-but-one to keep the reference reduction order.
void gemm_tn(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.cols; ++i) {
    double* ci = c.ptr + static_cast<std::size_t>(i) * c.cols;
    if (!accumulate)
      for (int j = 0; j < c.cols; ++j) ci[j] = 0.0;
    for (int p = 0; p < a.rows; ++p) {
      const double av = a.ptr[static_cast<std::size_t>(p) * a.cols + i];
      const double* bp = b.ptr + static_cast<std::size_t>(p) * b.cols;
      for (int j = 0; j < c.cols; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace par

void gemm_nn(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  if (work(a.rows, b.cols, a.cols) >= kParallelWork && max_threads() > 1)
    par::gemm_nn(a, b, c, accumulate);
  else
    ref::gemm_nn(a, b, c, accumulate);
}

void gemm_nt(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  if (work(a.rows, b.rows, a.cols) >= kParallelWork && max_threads() > 1)
    par::gemm_nt(a, b, c, accumulate);
  else
    ref::gemm_nt(a, b, c, accumulate);
}

void gemm_tn(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  if (work(a.cols, b.cols, a.rows) >= kParallelWork && max_threads() > 1)
    par::gemm_tn(a, b, c, accumulate);
  else
    ref::gemm_tn(a, b, c, accumulate);
}

int max_threads() {
#ifdef EOSTB_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace eostb::kernels
