#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"

namespace u1e {

// Uniform Cartesian grid on [-L,L]^2. n is odd so the origin sits on a node.
// Fields are stored row-major with y as the outer index: value(ix, iy) lives
// at v[iy*n + ix], matching the snapshot layout (n rows of n values, y-outer).
struct GridSpec {
    double L = 16.0;
    int n = 257;

    double h() const { return 2.0 * L / (n - 1); }
    double x(int i) const { return -L + i * h(); }

    void validate() const {
        if (L <= 0.0) throw ValidationError("grid: L must be positive");
        if (n < 33) throw ValidationError("grid: n must be at least 33");
        if (n % 2 == 0) throw ValidationError("grid: n must be odd");
    }

    bool operator==(const GridSpec& o) const { return L == o.L && n == o.n; }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

struct ScalarField {
    GridSpec grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(const GridSpec& g, double fill = 0.0)
        : grid(g), v(static_cast<size_t>(g.n) * g.n, fill) {}

    double& at(int ix, int iy) { return v[static_cast<size_t>(iy) * grid.n + ix]; }
    double at(int ix, int iy) const { return v[static_cast<size_t>(iy) * grid.n + ix]; }
    size_t size() const { return v.size(); }

    template <class Fn>
    static ScalarField sample(const GridSpec& g, Fn&& fn) {
        ScalarField f(g);
        parallel_rows(g.n, [&](int iy) {
            const double y = g.x(iy);
            for (int ix = 0; ix < g.n; ++ix) f.at(ix, iy) = fn(g.x(ix), y);
        });
        return f;
    }
};

struct VectorField {
    ScalarField x, y;

    VectorField() = default;
    explicit VectorField(const GridSpec& g) : x(g), y(g) {}
    const GridSpec& grid() const { return x.grid; }
};

// Symmetric 2-tensor with three stored components; yy is an independent field
// so tracelessness is a checkable invariant rather than an assumption.
struct SymTensorField {
    ScalarField xx, xy, yy;
    bool traceless = false;

    SymTensorField() = default;
    explicit SymTensorField(const GridSpec& g) : xx(g), xy(g), yy(g) {}
    const GridSpec& grid() const { return xx.grid; }
};

struct WeightSpec {
    int m = 0;       // derivative order, 0..3
    double p = 2.0;  // integrability exponent, > 1
    double delta = 0.0;

    void validate() const {
        if (m < 0 || m > 3) throw ValidationError("WeightSpec: m must be in {0,1,2,3}");
        if (!(p > 1.0)) throw ValidationError("WeightSpec: p must exceed 1");
    }
};

// ---------------------------------------------------------------------------
// Pointwise algebra

inline void check_same_grid(const GridSpec& a, const GridSpec& b) {
    if (a != b) throw ValidationError("fields live on different grids");
}

template <class Fn>
inline ScalarField map_field(const ScalarField& a, Fn&& fn) {
    ScalarField out(a.grid);
    parallel_rows(a.grid.n, [&](int iy) {
        const size_t row = static_cast<size_t>(iy) * a.grid.n;
        for (int ix = 0; ix < a.grid.n; ++ix) out.v[row + ix] = fn(a.v[row + ix]);
    });
    return out;
}

template <class Fn>
inline ScalarField zip_fields(const ScalarField& a, const ScalarField& b, Fn&& fn) {
    check_same_grid(a.grid, b.grid);
    ScalarField out(a.grid);
    parallel_rows(a.grid.n, [&](int iy) {
        const size_t row = static_cast<size_t>(iy) * a.grid.n;
        for (int ix = 0; ix < a.grid.n; ++ix) out.v[row + ix] = fn(a.v[row + ix], b.v[row + ix]);
    });
    return out;
}

inline ScalarField operator+(const ScalarField& a, const ScalarField& b) {
    return zip_fields(a, b, [](double u, double w) { return u + w; });
}
inline ScalarField operator-(const ScalarField& a, const ScalarField& b) {
    return zip_fields(a, b, [](double u, double w) { return u - w; });
}
inline ScalarField operator*(const ScalarField& a, const ScalarField& b) {
    return zip_fields(a, b, [](double u, double w) { return u * w; });
}
inline ScalarField operator*(double c, const ScalarField& a) {
    return map_field(a, [c](double u) { return c * u; });
}
inline ScalarField operator/(const ScalarField& a, const ScalarField& b) {
    return zip_fields(a, b, [](double u, double w) { return u / w; });
}

inline void axpy(double c, const ScalarField& x, ScalarField& y) {
    check_same_grid(x.grid, y.grid);
    parallel_rows(y.grid.n, [&](int iy) {
        const size_t row = static_cast<size_t>(iy) * y.grid.n;
        for (int ix = 0; ix < y.grid.n; ++ix) y.v[row + ix] += c * x.v[row + ix];
    });
}

inline bool all_finite(const ScalarField& f) {
    for (double u : f.v)
        if (!std::isfinite(u)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Stencils. First derivatives are 4th order (centered in the interior,
// one-sided within 2 nodes of the boundary). The Laplacian is the 2nd-order
// 5-point stencil: it must be exactly the operator the elliptic solver
// inverts, so discrete identities close.

namespace detail {

inline void deriv_line(const double* f, double* out, int n, int stride, double h) {
    const double c = 1.0 / (12.0 * h);
    auto g = [&](int i) { return f[static_cast<ptrdiff_t>(i) * stride]; };
    out[0] = c * (-25.0 * g(0) + 48.0 * g(1) - 36.0 * g(2) + 16.0 * g(3) - 3.0 * g(4));
    out[1] = c * (-3.0 * g(0) - 10.0 * g(1) + 18.0 * g(2) - 6.0 * g(3) + g(4));
    for (int i = 2; i < n - 2; ++i)
        out[i] = c * (g(i - 2) - 8.0 * g(i - 1) + 8.0 * g(i + 1) - g(i + 2));
    out[n - 2] = -c * (-3.0 * g(n - 1) - 10.0 * g(n - 2) + 18.0 * g(n - 3) - 6.0 * g(n - 4) + g(n - 5));
    out[n - 1] = -c * (-25.0 * g(n - 1) + 48.0 * g(n - 2) - 36.0 * g(n - 3) + 16.0 * g(n - 4) - 3.0 * g(n - 5));
}

inline void second_deriv_line(const double* f, double* out, int n, int stride, double h) {
    const double c = 1.0 / (h * h);
    auto g = [&](int i) { return f[static_cast<ptrdiff_t>(i) * stride]; };
    out[0] = c * (2.0 * g(0) - 5.0 * g(1) + 4.0 * g(2) - g(3));
    for (int i = 1; i < n - 1; ++i) out[i] = c * (g(i - 1) - 2.0 * g(i) + g(i + 1));
    out[n - 1] = c * (2.0 * g(n - 1) - 5.0 * g(n - 2) + 4.0 * g(n - 3) - g(n - 4));
}

} // namespace detail

inline ScalarField deriv_x(const ScalarField& f) {
    const int n = f.grid.n;
    const double h = f.grid.h();
    ScalarField out(f.grid);
    parallel_rows(n, [&](int iy) {
        detail::deriv_line(&f.v[static_cast<size_t>(iy) * n], &out.v[static_cast<size_t>(iy) * n], n, 1, h);
    });
    return out;
}

inline ScalarField deriv_y(const ScalarField& f) {
    const int n = f.grid.n;
    const double h = f.grid.h();
    ScalarField out(f.grid);
    parallel_rows(n, [&](int ix) {
        std::vector<double> col(static_cast<size_t>(n));
        detail::deriv_line(&f.v[static_cast<size_t>(ix)], col.data(), n, n, h);
        for (int iy = 0; iy < n; ++iy) out.v[static_cast<size_t>(iy) * n + ix] = col[static_cast<size_t>(iy)];
    });
    return out;
}

inline VectorField gradient(const ScalarField& f) {
    VectorField g(f.grid);
    g.x = deriv_x(f);
    g.y = deriv_y(f);
    return g;
}

inline ScalarField laplacian(const ScalarField& f) {
    const int n = f.grid.n;
    const double h = f.grid.h();
    ScalarField out(f.grid);
    parallel_rows(n, [&](int iy) {
        detail::second_deriv_line(&f.v[static_cast<size_t>(iy) * n], &out.v[static_cast<size_t>(iy) * n], n, 1, h);
    });
    ScalarField dyy(f.grid);
    parallel_rows(n, [&](int ix) {
        std::vector<double> col(static_cast<size_t>(n));
        detail::second_deriv_line(&f.v[static_cast<size_t>(ix)], col.data(), n, n, h);
        for (int iy = 0; iy < n; ++iy) dyy.v[static_cast<size_t>(iy) * n + ix] = col[static_cast<size_t>(iy)];
    });
    axpy(1.0, dyy, out);
    return out;
}

inline ScalarField divergence(const VectorField& u) {
    ScalarField out = deriv_x(u.x);
    axpy(1.0, deriv_y(u.y), out);
    return out;
}

// Hessian from composed first-derivative stencils; xy and yx agree exactly
// because the per-axis operators commute.
inline SymTensorField hessian(const ScalarField& f) {
    SymTensorField hess(f.grid);
    ScalarField dx = deriv_x(f);
    ScalarField dy = deriv_y(f);
    hess.xx = deriv_x(dx);
    hess.xy = deriv_y(dx);
    hess.yy = deriv_y(dy);
    return hess;
}

// ---------------------------------------------------------------------------
// Quadrature and norms (2D trapezoidal rule)

inline double trapezoid_weight(int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

inline double integrate(const ScalarField& f) {
    const int n = f.grid.n;
    const double h = f.grid.h();
    const double cell = h * h;
    return cell * parallel_row_sum(n, [&](int iy) {
        const double wy = trapezoid_weight(iy, n);
        const size_t row = static_cast<size_t>(iy) * n;
        double s = 0.0;
        for (int ix = 0; ix < n; ++ix) s += trapezoid_weight(ix, n) * f.v[row + ix];
        return wy * s;
    });
}

inline double norm_lp(const ScalarField& f, double p) {
    if (!(p > 1.0)) throw ValidationError("norm_lp: p must exceed 1");
    const int n = f.grid.n;
    const double cell = f.grid.h() * f.grid.h();
    double s = parallel_row_sum(n, [&](int iy) {
        const double wy = trapezoid_weight(iy, n);
        const size_t row = static_cast<size_t>(iy) * n;
        double acc = 0.0;
        for (int ix = 0; ix < n; ++ix)
            acc += trapezoid_weight(ix, n) * std::pow(std::fabs(f.v[row + ix]), p);
        return wy * acc;
    });
    return std::pow(cell * s, 1.0 / p);
}

inline double norm_l2(const ScalarField& f) {
    const int n = f.grid.n;
    const double cell = f.grid.h() * f.grid.h();
    double s = parallel_row_sum(n, [&](int iy) {
        const double wy = trapezoid_weight(iy, n);
        const size_t row = static_cast<size_t>(iy) * n;
        double acc = 0.0;
        for (int ix = 0; ix < n; ++ix) {
            const double u = f.v[row + ix];
            acc += trapezoid_weight(ix, n) * u * u;
        }
        return wy * acc;
    });
    return std::sqrt(cell * s);
}

inline double norm_sup(const ScalarField& f) {
    return parallel_row_max(f.grid.n, [&](int iy) {
        const size_t row = static_cast<size_t>(iy) * f.grid.n;
        double m = 0.0;
        for (int ix = 0; ix < f.grid.n; ++ix) m = std::max(m, std::fabs(f.v[row + ix]));
        return m;
    });
}

// <x> = (1 + |x|^2)^(1/2)
inline ScalarField japanese_bracket(const GridSpec& g, double power) {
    return ScalarField::sample(g, [power](double x, double y) {
        return std::pow(1.0 + x * x + y * y, 0.5 * power);
    });
}

// || u ||_{W^{m,p}_delta} = sum_{|b| <= m} || <x>^(delta+|b|) D^b u ||_{L^p},
// one term per multi-index b, derivatives taken with the module stencils.
inline double weighted_norm(const ScalarField& f, const WeightSpec& w) {
    w.validate();
    const GridSpec& g = f.grid;

    std::vector<ScalarField> store;
    store.reserve(10);

    store.push_back(f); // order 0
    if (w.m >= 1) {
        store.push_back(deriv_x(f));
        store.push_back(deriv_y(f));
    }
    if (w.m >= 2) {
        const ScalarField& d1x = store[1];
        const ScalarField& d1y = store[2];
        store.push_back(deriv_x(d1x));
        store.push_back(deriv_y(d1x));
        store.push_back(deriv_y(d1y));
    }
    if (w.m >= 3) {
        const ScalarField& d2xx = store[3];
        const ScalarField& d2xy = store[4];
        const ScalarField& d2yy = store[5];
        store.push_back(deriv_x(d2xx));
        store.push_back(deriv_y(d2xx));
        store.push_back(deriv_y(d2xy));
        store.push_back(deriv_y(d2yy));
    }

    static const int order_of[10] = {0, 1, 1, 2, 2, 2, 3, 3, 3, 3};
    static const size_t count_for_m[4] = {1, 3, 6, 10};

    double total = 0.0;
    for (size_t k = 0; k < count_for_m[w.m]; ++k) {
        ScalarField weight = japanese_bracket(g, w.delta + order_of[k]);
        total += norm_lp(weight * store[k], w.p);
    }
    return total;
}

inline double weighted_norm(const VectorField& u, const WeightSpec& w) {
    return weighted_norm(u.x, w) + weighted_norm(u.y, w);
}

inline double weighted_norm(const SymTensorField& s, const WeightSpec& w) {
    // tensor convention: sum over all components, xy counted twice
    return weighted_norm(s.xx, w) + 2.0 * weighted_norm(s.xy, w) + weighted_norm(s.yy, w);
}

} // namespace u1e
