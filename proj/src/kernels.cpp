#include "mesosim/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>

namespace mesosim::kernels {

namespace detail {

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sum2_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] + b[i];
  return acc;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void serve_capped_scalar(double* q, const double* cap, double* served,
                         std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::min(q[i], cap[i]);
    served[i] = s;
    q[i] -= s;
  }
}

void link_speeds_scalar(const double* out_sum, const double* x_sum,
                        const double* len, const double* vff, double v_min,
                        double inv_t, double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x_sum[i] > 0.0) {
      const double ratio = out_sum[i] * len[i] / x_sum[i] * inv_t;
      v[i] = std::min(vff[i], std::max(v_min, ratio));
    } else {
      v[i] = vff[i];
    }
  }
}

}  // namespace detail

#if defined(__x86_64__)
namespace avx2 {
double sum(const double* x, std::size_t n);
double sum2(const double* a, const double* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void serve_capped(double* q, const double* cap, double* served, std::size_t n);
void link_speeds(const double* out_sum, const double* x_sum, const double* len,
                 const double* vff, double v_min, double inv_t, double* v,
                 std::size_t n);
}  // namespace avx2
#endif

namespace {

struct Dispatch {
  Backend backend;
  double (*sum)(const double*, std::size_t);
  double (*sum2)(const double*, const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  void (*serve_capped)(double*, const double*, double*, std::size_t);
  void (*link_speeds)(const double*, const double*, const double*,
                      const double*, double, double, double*, std::size_t);
};

constexpr Dispatch kScalar = {Backend::scalar,
                              detail::sum_scalar,
                              detail::sum2_scalar,
                              detail::dot_scalar,
                              detail::serve_capped_scalar,
                              detail::link_speeds_scalar};

#if defined(__x86_64__)
constexpr Dispatch kAvx2 = {Backend::avx2,       avx2::sum,
                            avx2::sum2,          avx2::dot,
                            avx2::serve_capped,  avx2::link_speeds};

bool avx2_available() { return __builtin_cpu_supports("avx2"); }
#else
bool avx2_available() { return false; }
#endif

Dispatch pick_default() {
  if (const char* env = std::getenv("MESOSIM_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return kScalar;
#if defined(__x86_64__)
    if (std::strcmp(env, "avx2") == 0 && avx2_available()) return kAvx2;
#endif
  }
#if defined(__x86_64__)
  if (avx2_available()) return kAvx2;
#endif
  return kScalar;
}

Dispatch g_dispatch = pick_default();

}  // namespace

Backend active_backend() { return g_dispatch.backend; }

bool force_backend(Backend b) {
  if (b == Backend::scalar) {
    g_dispatch = kScalar;
    return true;
  }
#if defined(__x86_64__)
  if (avx2_available()) {
    g_dispatch = kAvx2;
    return true;
  }
#endif
  return false;
}

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

double sum(const double* x, std::size_t n) { return g_dispatch.sum(x, n); }

double sum2(const double* a, const double* b, std::size_t n) {
  return g_dispatch.sum2(a, b, n);
}

double dot(const double* a, const double* b, std::size_t n) {
  return g_dispatch.dot(a, b, n);
}

void serve_capped(double* q, const double* cap, double* served,
                  std::size_t n) {
  g_dispatch.serve_capped(q, cap, served, n);
}

void link_speeds(const double* out_sum, const double* x_sum, const double* len,
                 const double* vff, double v_min, double inv_t, double* v,
                 std::size_t n) {
  g_dispatch.link_speeds(out_sum, x_sum, len, vff, v_min, inv_t, v, n);
}

}  // namespace mesosim::kernels
