#pragma once

// Truncated-Taylor scalars ("jets") carrying a value, first derivatives and
// second derivatives with respect to up to three input coordinates.
//
// Jet<S> is generic over the underlying scalar: S = double gives plain
// forward-mode propagation (used by oracles and inference), S = ad::Var
// records every component operation on the active tape so that reverse
// accumulation over trainable parameters composes with the input
// derivatives.
//
// The Hessian is stored as a lower triangle, so symmetry holds by
// construction. All arithmetic follows the chain rule through second order:
// Leibniz for products, Faà di Bruno for unary functions.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "qpinn/tape.hpp"

namespace qpinn::ad {

inline constexpr int kMaxDim = 3;

/// Lower-triangle index of the (i, j) Hessian entry, i >= j.
constexpr int tri_index(int i, int j) { return i * (i + 1) / 2 + j; }
constexpr int tri_count(int dim) { return dim * (dim + 1) / 2; }

/// (i, j) coordinates of triangle slot t, in storage order.
inline constexpr std::array<std::array<int, 2>, 6> kTriCoord = {
    {{0, 0}, {1, 0}, {1, 1}, {2, 0}, {2, 1}, {2, 2}}};

inline double value_of(double x) { return x; }
inline double value_of(Var x) { return x.v; }

template <class S>
struct Jet {
    S v{};
    std::array<S, kMaxDim> g{};
    std::array<S, 6> h{};
    int dim = 0;

    Jet() = default;

    static Jet constant(S value, int dim = 0) {
        Jet j;
        j.v = value;
        j.dim = dim;
        return j;
    }

    /// Independent variable number `index` out of `dim`.
    static Jet seed(S value, int index, int dim) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("jet dimension must be 1..3");
        if (index < 0 || index >= dim) throw std::invalid_argument("seed index out of range");
        Jet j;
        j.v = value;
        j.dim = dim;
        j.g[static_cast<std::size_t>(index)] = S(1.0);
        return j;
    }

    S hess(int i, int j) const { return i >= j ? h[tri_index(i, j)] : h[tri_index(j, i)]; }
    double value() const { return value_of(v); }
};

/// Seed a coordinate vector: element i carries value coords[i], gradient e_i
/// and zero Hessian.
template <class S>
std::vector<Jet<S>> seed_inputs(std::span<const S> coords) {
    const int dim = static_cast<int>(coords.size());
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("jet dimension must be 1..3");
    std::vector<Jet<S>> out;
    out.reserve(coords.size());
    for (int i = 0; i < dim; ++i) out.push_back(Jet<S>::seed(coords[i], i, dim));
    return out;
}

/// Accumulate sign * (p * q) projected onto component `comp` into `acc`.
/// Components are ordered value, g[0..dim), then the Hessian triangle; the
/// projection is the Leibniz rule restricted to that slot.
template <class S>
inline void mac_product(Acc<S>& acc, const Jet<S>& p, const Jet<S>& q, int comp, int dim,
                        double sign = 1.0) {
    if (comp == 0) {
        acc.add(sign, p.v, q.v);
        return;
    }
    if (comp <= dim) {
        const int i = comp - 1;
        acc.add(sign, p.v, q.g[i]);
        acc.add(sign, p.g[i], q.v);
        return;
    }
    const int t = comp - 1 - dim;
    const int i = kTriCoord[t][0];
    const int j = kTriCoord[t][1];
    acc.add(sign, p.v, q.h[t]);
    acc.add(sign, p.g[i], q.g[j]);
    acc.add(sign, p.g[j], q.g[i]);  // doubles the diagonal term when i == j
    acc.add(sign, p.h[t], q.v);
}

template <class S>
inline S& jet_comp(Jet<S>& j, int comp, int dim) {
    if (comp == 0) return j.v;
    if (comp <= dim) return j.g[comp - 1];
    return j.h[comp - 1 - dim];
}

template <class S>
inline const S& jet_comp(const Jet<S>& j, int comp, int dim) {
    if (comp == 0) return j.v;
    if (comp <= dim) return j.g[comp - 1];
    return j.h[comp - 1 - dim];
}

constexpr int comp_count(int dim) { return 1 + dim + tri_count(dim); }

// ---------------------------------------------------------------------------
// Arithmetic

template <class S>
Jet<S> operator+(const Jet<S>& a, const Jet<S>& b) {
    Jet<S> r;
    r.dim = a.dim > b.dim ? a.dim : b.dim;
    r.v = a.v + b.v;
    for (int i = 0; i < r.dim; ++i) r.g[i] = a.g[i] + b.g[i];
    for (int t = 0; t < tri_count(r.dim); ++t) r.h[t] = a.h[t] + b.h[t];
    return r;
}

template <class S>
Jet<S> operator-(const Jet<S>& a, const Jet<S>& b) {
    Jet<S> r;
    r.dim = a.dim > b.dim ? a.dim : b.dim;
    r.v = a.v - b.v;
    for (int i = 0; i < r.dim; ++i) r.g[i] = a.g[i] - b.g[i];
    for (int t = 0; t < tri_count(r.dim); ++t) r.h[t] = a.h[t] - b.h[t];
    return r;
}

template <class S>
Jet<S> operator-(const Jet<S>& a) {
    Jet<S> r;
    r.dim = a.dim;
    r.v = -a.v;
    for (int i = 0; i < r.dim; ++i) r.g[i] = -a.g[i];
    for (int t = 0; t < tri_count(r.dim); ++t) r.h[t] = -a.h[t];
    return r;
}

template <class S>
Jet<S> operator*(const Jet<S>& a, const Jet<S>& b) {
    Jet<S> r;
    r.dim = a.dim > b.dim ? a.dim : b.dim;
    const int nc = comp_count(r.dim);
    for (int c = 0; c < nc; ++c) {
        Acc<S> acc;
        mac_product(acc, a, b, c, r.dim);
        jet_comp(r, c, r.dim) = acc.done();
    }
    return r;
}

template <class S>
Jet<S> operator/(const Jet<S>& a, const Jet<S>& b) {
    if (value_of(b.v) == 0.0) throw std::domain_error("jet division by zero value");
    Jet<S> r;
    r.dim = a.dim > b.dim ? a.dim : b.dim;
    const S inv = S(1.0) / b.v;
    r.v = a.v * inv;
    for (int i = 0; i < r.dim; ++i) {
        Acc<S> acc;
        acc.add(a.g[i], 1.0);
        acc.add(-1.0, r.v, b.g[i]);
        r.g[i] = acc.done() * inv;
    }
    for (int t = 0; t < tri_count(r.dim); ++t) {
        const int i = kTriCoord[t][0];
        const int j = kTriCoord[t][1];
        Acc<S> acc;
        acc.add(a.h[t], 1.0);
        acc.add(-1.0, r.g[i], b.g[j]);
        acc.add(-1.0, r.g[j], b.g[i]);
        acc.add(-1.0, r.v, b.h[t]);
        r.h[t] = acc.done() * inv;
    }
    return r;
}

// Mixed jet/scalar forms.
template <class S>
Jet<S> operator+(const Jet<S>& a, S c) {
    Jet<S> r = a;
    r.v = a.v + c;
    return r;
}
template <class S>
Jet<S> operator+(S c, const Jet<S>& a) {
    return a + c;
}
template <class S>
Jet<S> operator-(const Jet<S>& a, S c) {
    Jet<S> r = a;
    r.v = a.v - c;
    return r;
}
template <class S>
Jet<S> operator-(S c, const Jet<S>& a) {
    Jet<S> r = -a;
    r.v = c - a.v;
    return r;
}
template <class S>
Jet<S> operator*(const Jet<S>& a, S c) {
    Jet<S> r;
    r.dim = a.dim;
    r.v = a.v * c;
    for (int i = 0; i < r.dim; ++i) r.g[i] = a.g[i] * c;
    for (int t = 0; t < tri_count(r.dim); ++t) r.h[t] = a.h[t] * c;
    return r;
}
template <class S>
Jet<S> operator*(S c, const Jet<S>& a) {
    return a * c;
}

template <class S>
Jet<S> scale(const Jet<S>& a, double c) {
    return a * S(c);
}

// ---------------------------------------------------------------------------
// Elementary functions (Faà di Bruno through second order)

/// f(x) given f(x.v), f'(x.v), f''(x.v).
template <class S>
Jet<S> jet_chain(const Jet<S>& x, S f0, S f1, S f2) {
    Jet<S> r;
    r.dim = x.dim;
    r.v = f0;
    for (int i = 0; i < r.dim; ++i) r.g[i] = f1 * x.g[i];
    for (int t = 0; t < tri_count(r.dim); ++t) {
        const int i = kTriCoord[t][0];
        const int j = kTriCoord[t][1];
        Acc<S> acc;
        acc.add(f1, x.h[t]);
        acc.add(f2, x.g[i], x.g[j]);
        r.h[t] = acc.done();
    }
    return r;
}

template <class S>
Jet<S> sin(const Jet<S>& x) {
    using std::sin;
    using std::cos;
    const S s = sin(x.v);
    const S c = cos(x.v);
    return jet_chain(x, s, c, -s);
}

template <class S>
Jet<S> cos(const Jet<S>& x) {
    using std::sin;
    using std::cos;
    const S s = sin(x.v);
    const S c = cos(x.v);
    return jet_chain(x, c, -s, -c);
}

template <class S>
Jet<S> exp(const Jet<S>& x) {
    using std::exp;
    const S e = exp(x.v);
    return jet_chain(x, e, e, e);
}

/// tanh'' is formed as -2 t (1 - t^2); the factored form avoids the
/// cancellation in 2 t^3 - 2 t for large |x|.
template <class S>
Jet<S> tanh(const Jet<S>& x) {
    using std::tanh;
    const S t = tanh(x.v);
    const S sech2 = S(1.0) - t * t;
    const S f2 = S(-2.0) * t * sech2;
    return jet_chain(x, t, sech2, f2);
}

template <class S>
Jet<S> sqrt(const Jet<S>& x) {
    using std::sqrt;
    if (value_of(x.v) <= 0.0) throw std::domain_error("jet sqrt of non-positive value");
    const S r0 = sqrt(x.v);
    const S f1 = S(0.5) / r0;
    const S f2 = S(-0.5) * f1 / x.v;
    return jet_chain(x, r0, f1, f2);
}

namespace detail {
template <class S>
S spow(S x, int k) {
    // Integer power by repeated multiplication; k >= 0.
    S r(1.0);
    S base = x;
    for (int e = k; e > 0; e >>= 1) {
        if (e & 1) r = r * base;
        if (e > 1) base = base * base;
    }
    return r;
}
}  // namespace detail

template <class S>
Jet<S> powi(const Jet<S>& x, int k) {
    if (k == 0) return Jet<S>::constant(S(1.0), x.dim);
    if (k == 1) return x;
    if (k < 0) {
        Jet<S> one = Jet<S>::constant(S(1.0), x.dim);
        return one / powi(x, -k);
    }
    const S f0 = detail::spow(x.v, k);
    const S f1 = S(static_cast<double>(k)) * detail::spow(x.v, k - 1);
    const S f2 = (k >= 2) ? S(static_cast<double>(k) * (k - 1)) * detail::spow(x.v, k - 2) : S(0.0);
    return jet_chain(x, f0, f1, f2);
}

// ---------------------------------------------------------------------------
// Complex jets: quantum amplitudes carrying input derivatives.

template <class S>
struct CJet {
    Jet<S> re{};
    Jet<S> im{};

    static CJet constant(double r, double i, int dim = 0) {
        return {Jet<S>::constant(S(r), dim), Jet<S>::constant(S(i), dim)};
    }
};

template <class S>
CJet<S> operator+(const CJet<S>& a, const CJet<S>& b) {
    return {a.re + b.re, a.im + b.im};
}
template <class S>
CJet<S> operator-(const CJet<S>& a, const CJet<S>& b) {
    return {a.re - b.re, a.im - b.im};
}

template <class S>
CJet<S> operator*(const CJet<S>& a, const CJet<S>& b) {
    const int dim = a.re.dim > b.re.dim ? a.re.dim : b.re.dim;
    const int nc = comp_count(dim);
    CJet<S> r;
    r.re.dim = r.im.dim = dim;
    for (int c = 0; c < nc; ++c) {
        Acc<S> re_acc;
        mac_product(re_acc, a.re, b.re, c, dim, 1.0);
        mac_product(re_acc, a.im, b.im, c, dim, -1.0);
        jet_comp(r.re, c, dim) = re_acc.done();
        Acc<S> im_acc;
        mac_product(im_acc, a.re, b.im, c, dim, 1.0);
        mac_product(im_acc, a.im, b.re, c, dim, 1.0);
        jet_comp(r.im, c, dim) = im_acc.done();
    }
    return r;
}

template <class S>
CJet<S> conj(const CJet<S>& a) {
    return {a.re, -a.im};
}

/// |z|^2 as a real jet, fused per component.
template <class S>
Jet<S> abs2(const CJet<S>& a) {
    const int dim = a.re.dim > a.im.dim ? a.re.dim : a.im.dim;
    Jet<S> r;
    r.dim = dim;
    for (int c = 0; c < comp_count(dim); ++c) {
        Acc<S> acc;
        mac_product(acc, a.re, a.re, c, dim);
        mac_product(acc, a.im, a.im, c, dim);
        jet_comp(r, c, dim) = acc.done();
    }
    return r;
}

}  // namespace qpinn::ad
