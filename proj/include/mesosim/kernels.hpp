#pragma once

#include <cstddef>
#include <string_view>

namespace mesosim::kernels {

// Data-parallel inner loops of the simulation step, over contiguous double
// arrays (link state is stored structure-of-arrays). Each kernel has a scalar
// reference implementation and, on x86-64 with AVX2, a vectorized variant
// selected once at startup. Elementwise kernels are bit-identical across
// backends; reductions may differ by reassociation rounding only.

enum class Backend { scalar, avx2 };

Backend active_backend();

// Test hook. Returns false if the requested backend is unavailable on this
// machine. The MESOSIM_KERNELS env var ("scalar"/"avx2") overrides autodetect.
bool force_backend(Backend b);

const char* backend_name(Backend b);

// sum of x[0..n)
double sum(const double* x, std::size_t n);

// sum of a[i] + b[i]
double sum2(const double* a, const double* b, std::size_t n);

// inner product
double dot(const double* a, const double* b, std::size_t n);

// served[i] = min(q[i], cap[i]); q[i] -= served[i].
// One pass of a capacity-limited service rule.
void serve_capped(double* q, const double* cap, double* served, std::size_t n);

// Window-mean link speed:
//   v[i] = vff[i]                                  if x_sum[i] <= 0
//        = min(vff[i], max(v_min, out_sum[i]*len[i]/x_sum[i] * inv_t))  else
void link_speeds(const double* out_sum, const double* x_sum, const double* len,
                 const double* vff, double v_min, double inv_t, double* v,
                 std::size_t n);

namespace detail {
// Scalar reference implementations, exposed for equivalence tests.
double sum_scalar(const double* x, std::size_t n);
double sum2_scalar(const double* a, const double* b, std::size_t n);
double dot_scalar(const double* a, const double* b, std::size_t n);
void serve_capped_scalar(double* q, const double* cap, double* served,
                         std::size_t n);
void link_speeds_scalar(const double* out_sum, const double* x_sum,
                        const double* len, const double* vff, double v_min,
                        double inv_t, double* v, std::size_t n);
}  // namespace detail

}  // namespace mesosim::kernels
