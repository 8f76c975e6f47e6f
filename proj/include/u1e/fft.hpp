#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace u1e {

// Type-I discrete sine transform of length m:
//   X_k = sum_{j=1..m} x_j sin(pi j k / (m+1)),  k = 1..m.
// Used to diagonalize the 5-point Dirichlet Laplacian. When 2(m+1) is a
// power of two the transform runs through a radix-2 FFT; otherwise it falls
// back to a precomputed sine matrix (small grids only).
class SineTransform {
public:
    explicit SineTransform(int m) : m_(m), M_(2 * (m + 1)) {
        use_fft_ = (M_ & (M_ - 1)) == 0 && M_ >= 8;
        if (use_fft_) {
            twiddle_.resize(static_cast<size_t>(M_) / 2);
            for (int k = 0; k < M_ / 2; ++k)
                twiddle_[static_cast<size_t>(k)] =
                    std::polar(1.0, -2.0 * M_PI * k / M_);
            bitrev_.resize(static_cast<size_t>(M_));
            int bits = 0;
            while ((1 << bits) < M_) ++bits;
            for (int i = 0; i < M_; ++i) {
                int r = 0;
                for (int b = 0; b < bits; ++b)
                    if (i & (1 << b)) r |= 1 << (bits - 1 - b);
                bitrev_[static_cast<size_t>(i)] = r;
            }
        } else {
            sine_.resize(static_cast<size_t>(m_) * m_);
            for (int k = 1; k <= m_; ++k)
                for (int j = 1; j <= m_; ++j)
                    sine_[static_cast<size_t>(k - 1) * m_ + (j - 1)] =
                        std::sin(M_PI * j * k / (m_ + 1));
        }
    }

    int length() const { return m_; }

    // In-place on a caller-provided scratch pad to avoid allocation in loops.
    struct Scratch {
        std::vector<std::complex<double>> buf;
    };

    void apply(const double* x, double* out, Scratch& s) const {
        if (!use_fft_) {
            for (int k = 0; k < m_; ++k) {
                const double* row = &sine_[static_cast<size_t>(k) * m_];
                double acc = 0.0;
                for (int j = 0; j < m_; ++j) acc += row[j] * x[j];
                out[k] = acc;
            }
            return;
        }
        auto& a = s.buf;
        a.assign(static_cast<size_t>(M_), {0.0, 0.0});
        for (int j = 1; j <= m_; ++j) {
            a[static_cast<size_t>(j)] = {x[j - 1], 0.0};
            a[static_cast<size_t>(M_ - j)] = {-x[j - 1], 0.0};
        }
        fft(a);
        // odd extension => X_k = -Im(A_k) / 2
        for (int k = 1; k <= m_; ++k) out[k - 1] = -0.5 * a[static_cast<size_t>(k)].imag();
    }

private:
    void fft(std::vector<std::complex<double>>& a) const {
        const int n = M_;
        for (int i = 0; i < n; ++i) {
            int j = bitrev_[static_cast<size_t>(i)];
            if (i < j) std::swap(a[static_cast<size_t>(i)], a[static_cast<size_t>(j)]);
        }
        for (int len = 2; len <= n; len <<= 1) {
            const int half = len >> 1;
            const int stride = n / len;
            for (int i = 0; i < n; i += len) {
                for (int k = 0; k < half; ++k) {
                    const std::complex<double> w = twiddle_[static_cast<size_t>(k) * stride];
                    std::complex<double> u = a[static_cast<size_t>(i + k)];
                    std::complex<double> t = w * a[static_cast<size_t>(i + k + half)];
                    a[static_cast<size_t>(i + k)] = u + t;
                    a[static_cast<size_t>(i + k + half)] = u - t;
                }
            }
        }
    }

    int m_, M_;
    bool use_fft_ = false;
    std::vector<std::complex<double>> twiddle_;
    std::vector<int> bitrev_;
    std::vector<double> sine_;
};

inline std::shared_ptr<const SineTransform> sine_transform_for(int m) {
    static std::mutex mtx;
    static std::map<int, std::shared_ptr<const SineTransform>> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
    auto plan = std::make_shared<const SineTransform>(m);
    cache.emplace(m, plan);
    return plan;
}

} // namespace u1e
