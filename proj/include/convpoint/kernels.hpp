#pragma once

#include <cstddef>
#include <string>

// Dense arithmetic kernels used by the tensor ops and the convolution
// inner loops. A scalar reference implementation always exists; on x86-64
// an AVX2/FMA variant is selected at runtime when the CPU supports it.
// The CONVPOINT_KERNELS environment variable ("scalar" or "avx2") forces
// a backend, mainly for the equivalence tests.

namespace convpoint::kern {

struct Backend {
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // x *= alpha
    void (*scale)(double alpha, double* x, std::size_t n);
    // C += A(rows x inner) * B(inner x cols), row-major
    void (*matmul)(const double* a, const double* b, double* c,
                   std::size_t rows, std::size_t inner, std::size_t cols);
    // C += A(rows x inner) * B(cols x inner)^T
    void (*matmul_nt)(const double* a, const double* b, double* c,
                      std::size_t rows, std::size_t inner, std::size_t cols);
    // C += A(inner x rows)^T * B(inner x cols)
    void (*matmul_tn)(const double* a, const double* b, double* c,
                      std::size_t rows, std::size_t inner, std::size_t cols);
    // y[i] = max(0, x[i])
    void (*relu)(const double* x, double* y, std::size_t n);
    // dx[i] += x[i] > 0 ? g[i] : 0
    void (*relu_grad)(const double* x, const double* g, double* dx, std::size_t n);
    // Adam moment update + parameter step, elementwise
    void (*adam)(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);
    const char* name;
};

extern const Backend scalar_backend;
#if defined(__x86_64__)
extern const Backend avx2_backend;
#endif

// Active backend, chosen once at startup.
const Backend& active();

// Force a backend by name; returns false if unavailable on this machine.
bool select(const std::string& name);

bool avx2_supported();

// Convenience forwarders.
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void scale(double a, double* x, std::size_t n) { active().scale(a, x, n); }
inline void matmul(const double* a, const double* b, double* c,
                   std::size_t r, std::size_t i, std::size_t co) { active().matmul(a, b, c, r, i, co); }
inline void matmul_nt(const double* a, const double* b, double* c,
                      std::size_t r, std::size_t i, std::size_t co) { active().matmul_nt(a, b, c, r, i, co); }
inline void matmul_tn(const double* a, const double* b, double* c,
                      std::size_t r, std::size_t i, std::size_t co) { active().matmul_tn(a, b, c, r, i, co); }
inline void relu(const double* x, double* y, std::size_t n) { active().relu(x, y, n); }
inline void relu_grad(const double* x, const double* g, double* dx, std::size_t n) { active().relu_grad(x, g, dx, n); }
inline void adam(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double b1, double b2, double eps, double bc1, double bc2) {
    active().adam(p, g, m, v, n, lr, b1, b2, eps, bc1, bc2);
}

} // namespace convpoint::kern
