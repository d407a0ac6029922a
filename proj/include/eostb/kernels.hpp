#pragma once

#include "eostb/tensor.hpp"

// Dense GEMM kernels used by the transformer.
//
// Two implementations share one accumulation order per output element:
//   ref::  plain serial loops, kept as the reference for tests;
//   par::  OpenMP row-parallel versions.
// Because every output element is reduced in the same order in both, their
// results are bit-identical for any thread count.
//
// Shapes (row-major):
//   gemm_nn: C[m,n] (+)= A[m,k] * B[k,n]
//   gemm_nt: C[m,n] (+)= A[m,k] * B[n,k]^T
//   gemm_tn: C[m,n] (+)= A[k,m]^T * B[k,n]
namespace eostb::kernels {

namespace ref {
void gemm_nn(ConstMatView a, ConstMatView b, MatView c, bool accumulate);
void gemm_nt(ConstMatView a, ConstMatView b, MatView c, bool accumulate);
void gemm_tn(ConstMatView a, ConstMatView b, MatView c, bool accumulate);
}  // namespace ref

namespace par {
void gemm_nn(ConstMatView a, ConstMatView b, MatView c, bool accumulate);
void gemm_nt(ConstMatView a, ConstMatView b, MatView c, bool accumulate);
void gemm_tn(ConstMatView a, ConstMatView b, MatView c, bool accumulate);
}  // namespace par

// Dispatching entry points used by the model. They pick par:: for large
// products and ref:: otherwise.
void gemm_nn(ConstMatView a, ConstMatView b, MatView c, bool accumulate = false);
void gemm_nt(ConstMatView a, ConstMatView b, MatView c, bool accumulate = false);
void gemm_tn(ConstMatView a, ConstMatView b, MatView c, bool accumulate = false);

// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace eostb::kernels
