#include "convpoint/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace convpoint::kern {
namespace {

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void s_scale(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void s_matmul(const double* a, const double* b, double* c,
              std::size_t rows, std::size_t inner, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < inner; ++k) {
            const double av = a[r * inner + k];
            const double* brow = b + k * cols;
            double* crow = c + r * cols;
            for (std::size_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
        }
}

void s_matmul_nt(const double* a, const double* b, double* c,
                 std::size_t rows, std::size_t inner, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j)
            c[r * cols + j] += s_dot(a + r * inner, b + j * inner, inner);
}

void s_matmul_tn(const double* a, const double* b, double* c,
                 std::size_t rows, std::size_t inner, std::size_t cols) {
    // a is inner x rows, b is inner x cols
    for (std::size_t k = 0; k < inner; ++k)
        for (std::size_t r = 0; r < rows; ++r) {
            const double av = a[k * rows + r];
            const double* brow = b + k * cols;
            double* crow = c + r * cols;
            for (std::size_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
        }
}

void s_relu(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_grad(const double* x, const double* g, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 0.0) dx[i] += g[i];
}

void s_adam(double* p, const double* g, double* m, double* v, std::size_t n,
            double lr, double beta1, double beta2, double eps,
            double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const Backend scalar_backend = {
    s_axpy, s_dot, s_scale, s_matmul, s_matmul_nt, s_matmul_tn,
    s_relu, s_relu_grad, s_adam, "scalar",
};

} // namespace convpoint::kern
