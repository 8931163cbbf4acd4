#pragma once

// Continuous-variable (bosonic qumode) simulation in a truncated Fock basis.
//
// Conventions:
//   * amplitudes are stored mode-0 major: index = sum_k n_k * cutoff^(m-1-k).
//   * quadrature operator q = a + a^dag (so a coherent state D(alpha)|0> has
//     <q> = 2 alpha); this is declared here once and used consistently.
//   * displacement D(alpha, phi) = exp(beta a^dag - conj(beta) a) with
//     beta = alpha e^{i phi}; squeezing S(r, phi) = exp((conj(z) a^2 -
//     z a^dag^2)/2) with z = r e^{i phi}; beamsplitter B(psi, phi) =
//     exp(psi (e^{i phi} a^dag b - e^{-i phi} a b^dag)).
//
// Displacement and squeezing matrix elements come from the standard stable
// Fock-basis recurrences; the dense matrix exponentials live in the test
// suite as independent oracles. Truncation leaks norm instead of raising:
// callers read the norm telemetry.

#include <cstdint>
#include <stdexcept>
#include <type_traits>
#include <string>
#include <vector>

#include "qpinn/jet.hpp"

namespace qpinn::cv {

using ad::Acc;
using ad::CJet;
using ad::Jet;
using ad::comp_count;
using ad::jet_comp;
using ad::mac_product;
using ad::value_of;

// Complex scalar over the differentiation scalar S.
template <class S>
struct CS {
    S re{};
    S im{};
};

template <class S>
CS<S> cmul(const CS<S>& a, const CS<S>& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
template <class S>
CS<S> conj(const CS<S>& a) {
    return {a.re, -a.im};
}
template <class S>
CS<S> cscale(const CS<S>& a, std::type_identity_t<S> c) {
    return {a.re * c, a.im * c};
}
template <class S>
CS<S> cscale(const CS<S>& a, double c)
    requires(!std::is_same_v<S, double>)
{
    return {a.re * S(c), a.im * S(c)};
}
template <class S>
CS<S> csub(const CS<S>& a, const CS<S>& b) {
    return {a.re - b.re, a.im - b.im};
}

template <class S>
struct FockState {
    std::vector<CJet<S>> amp;
    int n_modes = 0;
    int cutoff = 0;
    int jet_dim = 0;

    static FockState vacuum(int n_modes, int cutoff, int jet_dim = 0) {
        if (n_modes < 1 || n_modes > 4) throw std::invalid_argument("unsupported qumode count");
        if (cutoff < 2 || cutoff > 64) throw std::invalid_argument("unsupported cutoff dimension");
        FockState st;
        st.n_modes = n_modes;
        st.cutoff = cutoff;
        st.jet_dim = jet_dim;
        std::size_t total = 1;
        for (int k = 0; k < n_modes; ++k) total *= static_cast<std::size_t>(cutoff);
        st.amp.assign(total, CJet<S>::constant(0.0, 0.0, jet_dim));
        st.amp[0] = CJet<S>::constant(1.0, 0.0, jet_dim);
        return st;
    }

    std::size_t size() const { return amp.size(); }

    std::size_t stride(int mode) const {
        std::size_t s = 1;
        for (int k = mode + 1; k < n_modes; ++k) s *= static_cast<std::size_t>(cutoff);
        return s;
    }

    int occupation(std::size_t idx, int mode) const {
        return static_cast<int>((idx / stride(mode)) % static_cast<std::size_t>(cutoff));
    }

    void check_mode(int mode) const {
        if (mode < 0 || mode >= n_modes) throw std::invalid_argument("mode index out of range");
    }
};

// ---------------------------------------------------------------------------
// Fock-basis operator matrices

namespace detail {

inline const std::vector<double>& sqrt_table(int upto) {
    static thread_local std::vector<double> table;
    if (static_cast<int>(table.size()) < upto + 1) {
        table.resize(upto + 1);
        for (int i = 0; i <= upto; ++i) table[i] = std::sqrt(static_cast<double>(i));
    }
    return table;
}

}  // namespace detail

/// <m| D(alpha e^{i phi}) |n> for m, n < cutoff, filled column by column:
///   D[m][0]   = beta / sqrt(m) * D[m-1][0]
///   D[m][n+1] = (sqrt(m) D[m-1][n] - conj(beta) D[m][n]) / sqrt(n+1)
template <class S>
std::vector<CS<S>> displacement_matrix(int cutoff, S alpha, S phi) {
    using std::cos;
    using std::exp;
    using std::sin;
    const auto& rt = detail::sqrt_table(cutoff);
    const CS<S> beta{alpha * cos(phi), alpha * sin(phi)};
    const CS<S> betac = conj(beta);

    std::vector<CS<S>> d(static_cast<std::size_t>(cutoff) * cutoff, CS<S>{S(0.0), S(0.0)});
    auto at = [&](int m, int n) -> CS<S>& { return d[static_cast<std::size_t>(m) * cutoff + n]; };

    at(0, 0) = {exp(alpha * alpha * S(-0.5)), S(0.0)};
    for (int m = 1; m < cutoff; ++m) at(m, 0) = cscale(cmul(beta, at(m - 1, 0)), 1.0 / rt[m]);
    for (int n = 0; n + 1 < cutoff; ++n) {
        for (int m = 0; m < cutoff; ++m) {
            CS<S> up = (m > 0) ? cscale(at(m - 1, n), rt[m]) : CS<S>{S(0.0), S(0.0)};
            at(m, n + 1) = cscale(csub(up, cmul(betac, at(m, n))), 1.0 / rt[n + 1]);
        }
    }
    return d;
}

/// <m| S(r e^{i phi}) |n>; entries with odd m+n vanish. With mu = cosh r and
/// nu = e^{i phi} sinh r:
///   S[0][0]   = 1 / sqrt(mu)
///   S[0][n+1] = conj(nu) sqrt(n) / (mu sqrt(n+1)) * S[0][n-1]
///   S[m+1][n] = (sqrt(n) S[m][n-1] - nu sqrt(m) S[m-1][n]) / (mu sqrt(m+1))
template <class S>
std::vector<CS<S>> squeezing_matrix(int cutoff, S r, S phi) {
    using std::cos;
    using std::cosh;
    using std::sin;
    using std::sinh;
    using std::sqrt;
    const auto& rt = detail::sqrt_table(cutoff);
    const S mu = cosh(r);
    const S sh = sinh(r);
    const CS<S> nu{cos(phi) * sh, sin(phi) * sh};
    const CS<S> nuc = conj(nu);
    const S inv_mu = S(1.0) / mu;

    std::vector<CS<S>> sq(static_cast<std::size_t>(cutoff) * cutoff, CS<S>{S(0.0), S(0.0)});
    auto at = [&](int m, int n) -> CS<S>& { return sq[static_cast<std::size_t>(m) * cutoff + n]; };

    at(0, 0) = {S(1.0) / sqrt(mu), S(0.0)};
    for (int n = 1; n + 1 < cutoff; n += 2) {
        at(0, n + 1) = cscale(cscale(cmul(nuc, at(0, n - 1)), rt[n] / rt[n + 1]), inv_mu);
    }
    for (int m = 0; m + 1 < cutoff; ++m) {
        for (int n = 0; n < cutoff; ++n) {
            if ((m + 1 + n) % 2 != 0) continue;
            CS<S> left = (n > 0) ? cscale(at(m, n - 1), rt[n]) : CS<S>{S(0.0), S(0.0)};
            CS<S> right = (m > 0) ? cscale(cmul(nu, at(m - 1, n)), rt[m]) : CS<S>{S(0.0), S(0.0)};
            at(m + 1, n) = cscale(cscale(csub(left, right), inv_mu), 1.0 / rt[m + 1]);
        }
    }
    return sq;
}

/// Real beamsplitter exp(psi (a^dag b - a b^dag)) restricted to the
/// photon-number blocks it preserves. blocks[N] is the (hi-lo+1)^2 row-major
/// matrix over occupations lo..hi of the first mode, lo = max(0, N-cutoff+1),
/// hi = min(N, cutoff-1).
template <class S>
std::vector<std::vector<S>> bs_real_blocks(int cutoff, S t, S s) {
    const auto& rt = detail::sqrt_table(2 * cutoff);
    const int max_block = 2 * (cutoff - 1);
    std::vector<std::vector<S>> blocks(max_block + 1);

    auto lo_of = [&](int n) { return std::max(0, n - (cutoff - 1)); };
    auto hi_of = [&](int n) { return std::min(n, cutoff - 1); };

    blocks[0] = {S(1.0)};
    for (int bn = 1; bn <= max_block; ++bn) {
        const int lo = lo_of(bn), hi = hi_of(bn);
        const int sz = hi - lo + 1;
        const int plo = lo_of(bn - 1), phi_ = hi_of(bn - 1);
        const int psz = phi_ - plo + 1;
        auto prev = [&](int p, int m) -> S {
            if (p < plo || p > phi_ || m < plo || m > phi_) return S(0.0);
            return blocks[bn - 1][static_cast<std::size_t>(p - plo) * psz + (m - plo)];
        };
        auto& blk = blocks[bn];
        blk.assign(static_cast<std::size_t>(sz) * sz, S(0.0));
        for (int p = lo; p <= hi; ++p) {
            for (int m = lo; m <= hi; ++m) {
                const int n = bn - m;
                Acc<S> acc;
                if (p >= 1) {
                    // sqrt(p) B_N[p][m] = t sqrt(m) B_{N-1}[p-1][m-1]
                    //                   + s sqrt(n) B_{N-1}[p-1][m]
                    if (m >= 1) acc.add(rt[m] / rt[p], t, prev(p - 1, m - 1));
                    if (n >= 1) acc.add(rt[n] / rt[p], s, prev(p - 1, m));
                } else {
                    // sqrt(N) B_N[0][m] = -s sqrt(m) B_{N-1}[0][m-1]
                    //                   + t sqrt(n) B_{N-1}[0][m]
                    if (m >= 1) acc.add(-rt[m] / rt[bn], s, prev(0, m - 1));
                    if (n >= 1) acc.add(rt[n] / rt[bn], t, prev(0, m));
                }
                blk[static_cast<std::size_t>(p - lo) * sz + (m - lo)] = acc.done();
            }
        }
    }
    return blocks;
}

// ---------------------------------------------------------------------------
// Applying operators to states

namespace detail {

/// state <- M (x) I acting on `mode`, M a cutoff x cutoff complex matrix.
template <class S>
void apply_mode_matrix(FockState<S>& st, int mode, std::span<const CS<S>> m) {
    const int c = st.cutoff;
    const std::size_t stride = st.stride(mode);
    const std::size_t block = stride * static_cast<std::size_t>(c);
    const int dim = st.jet_dim;
    const int nc = comp_count(dim);
    std::vector<CJet<S>> col(static_cast<std::size_t>(c));

    for (std::size_t hi = 0; hi < st.size(); hi += block) {
        for (std::size_t lo = 0; lo < stride; ++lo) {
            const std::size_t base = hi + lo;
            for (int k = 0; k < c; ++k) col[k] = st.amp[base + k * stride];
            for (int j = 0; j < c; ++j) {
                const CS<S>* row = &m[static_cast<std::size_t>(j) * c];
                CJet<S>& out = st.amp[base + j * stride];
                out.re.dim = out.im.dim = dim;
                for (int comp = 0; comp < nc; ++comp) {
                    Acc<S> racc;
                    for (int k = 0; k < c; ++k) {
                        racc.add(row[k].re, jet_comp(col[k].re, comp, dim));
                        racc.add(-1.0, row[k].im, jet_comp(col[k].im, comp, dim));
                    }
                    jet_comp(out.re, comp, dim) = racc.done();
                    Acc<S> iacc;
                    for (int k = 0; k < c; ++k) {
                        iacc.add(row[k].re, jet_comp(col[k].im, comp, dim));
                        iacc.add(row[k].im, jet_comp(col[k].re, comp, dim));
                    }
                    jet_comp(out.im, comp, dim) = iacc.done();
                }
            }
        }
    }
}

/// Same with a constant real matrix (used by the cubic-phase eigenbasis).
template <class S>
void apply_mode_real_const(FockState<S>& st, int mode, std::span<const double> m) {
    const int c = st.cutoff;
    const std::size_t stride = st.stride(mode);
    const std::size_t block = stride * static_cast<std::size_t>(c);
    const int dim = st.jet_dim;
    const int nc = comp_count(dim);
    std::vector<CJet<S>> col(static_cast<std::size_t>(c));

    for (std::size_t hi = 0; hi < st.size(); hi += block) {
        for (std::size_t lo = 0; lo < stride; ++lo) {
            const std::size_t base = hi + lo;
            for (int k = 0; k < c; ++k) col[k] = st.amp[base + k * stride];
            for (int j = 0; j < c; ++j) {
                const double* row = &m[static_cast<std::size_t>(j) * c];
                CJet<S>& out = st.amp[base + j * stride];
                out.re.dim = out.im.dim = dim;
                for (int comp = 0; comp < nc; ++comp) {
                    Acc<S> racc;
                    for (int k = 0; k < c; ++k) racc.add(jet_comp(col[k].re, comp, dim), row[k]);
                    jet_comp(out.re, comp, dim) = racc.done();
                    Acc<S> iacc;
                    for (int k = 0; k < c; ++k) iacc.add(jet_comp(col[k].im, comp, dim), row[k]);
                    jet_comp(out.im, comp, dim) = iacc.done();
                }
            }
        }
    }
}

template <class S>
bool is_identity_phase(const CS<S>& ph) {
    return ad::is_constant(ph.re) && ad::is_constant(ph.im) && value_of(ph.re) == 1.0 &&
           value_of(ph.im) == 0.0;
}

/// state <- diag(phases over occupation of `mode`) state.
template <class S>
void apply_mode_phases(FockState<S>& st, int mode, std::span<const CS<S>> phases) {
    const int dim = st.jet_dim;
    const int nc = comp_count(dim);
    std::vector<char> skip(phases.size());
    for (std::size_t k = 0; k < phases.size(); ++k) skip[k] = is_identity_phase(phases[k]);
    for (std::size_t idx = 0; idx < st.size(); ++idx) {
        const int occ = st.occupation(idx, mode);
        if (skip[occ]) continue;
        const CS<S>& ph = phases[occ];
        CJet<S>& a = st.amp[idx];
        const CJet<S> old = a;
        for (int comp = 0; comp < nc; ++comp) {
            Acc<S> racc;
            racc.add(ph.re, jet_comp(old.re, comp, dim));
            racc.add(-1.0, ph.im, jet_comp(old.im, comp, dim));
            jet_comp(a.re, comp, dim) = racc.done();
            Acc<S> iacc;
            iacc.add(ph.re, jet_comp(old.im, comp, dim));
            iacc.add(ph.im, jet_comp(old.re, comp, dim));
            jet_comp(a.im, comp, dim) = iacc.done();
        }
    }
}

}  // namespace detail

/// Phase-space rotation R(theta) = exp(i theta n) on one mode.
template <class S>
void rotation(FockState<S>& st, int mode, S theta) {
    st.check_mode(mode);
    using std::cos;
    using std::sin;
    std::vector<CS<S>> phases(st.cutoff);
    for (int n = 0; n < st.cutoff; ++n) {
        const S arg = theta * S(static_cast<double>(n));
        phases[n] = {cos(arg), sin(arg)};
    }
    detail::apply_mode_phases<S>(st, mode, phases);
}

template <class S>
void displace(FockState<S>& st, int mode, S alpha, S phi) {
    st.check_mode(mode);
    const auto m = displacement_matrix(st.cutoff, alpha, phi);
    detail::apply_mode_matrix<S>(st, mode, m);
}

template <class S>
void squeeze(FockState<S>& st, int mode, S r, S phi) {
    st.check_mode(mode);
    const auto m = squeezing_matrix(st.cutoff, r, phi);
    detail::apply_mode_matrix<S>(st, mode, m);
}

/// B(psi, phi) = R_a(phi) exp(psi (a^dag b - a b^dag)) R_a(-phi).
template <class S>
void beamsplitter(FockState<S>& st, int mode_a, int mode_b, S psi, S phi) {
    st.check_mode(mode_a);
    st.check_mode(mode_b);
    if (mode_a == mode_b) throw std::invalid_argument("beamsplitter needs two distinct modes");
    using std::cos;
    using std::sin;

    const bool phased = !(ad::is_constant(phi) && value_of(phi) == 0.0);
    if (phased) rotation(st, mode_a, -phi);

    const int c = st.cutoff;
    const auto blocks = bs_real_blocks(c, cos(psi), sin(psi));
    const std::size_t sa = st.stride(mode_a);
    const std::size_t sb = st.stride(mode_b);
    const int dim = st.jet_dim;
    const int nc = comp_count(dim);

    std::vector<CJet<S>> slab(static_cast<std::size_t>(c) * c);
    for (std::size_t base = 0; base < st.size(); ++base) {
        if (st.occupation(base, mode_a) != 0 || st.occupation(base, mode_b) != 0) continue;
        for (int na = 0; na < c; ++na)
            for (int nb = 0; nb < c; ++nb)
                slab[static_cast<std::size_t>(na) * c + nb] = st.amp[base + na * sa + nb * sb];

        for (int bn = 0; bn <= 2 * (c - 1); ++bn) {
            const int lo = std::max(0, bn - (c - 1));
            const int hi = std::min(bn, c - 1);
            const int sz = hi - lo + 1;
            const auto& blk = blocks[bn];
            for (int p = lo; p <= hi; ++p) {
                const int q = bn - p;
                CJet<S>& out = st.amp[base + p * sa + q * sb];
                out.re.dim = out.im.dim = dim;
                for (int comp = 0; comp < nc; ++comp) {
                    Acc<S> racc;
                    for (int m = lo; m <= hi; ++m) {
                        racc.add(blk[static_cast<std::size_t>(p - lo) * sz + (m - lo)],
                                 jet_comp(slab[static_cast<std::size_t>(m) * c + (bn - m)].re, comp, dim));
                    }
                    jet_comp(out.re, comp, dim) = racc.done();
                    Acc<S> iacc;
                    for (int m = lo; m <= hi; ++m) {
                        iacc.add(blk[static_cast<std::size_t>(p - lo) * sz + (m - lo)],
                                 jet_comp(slab[static_cast<std::size_t>(m) * c + (bn - m)].im, comp, dim));
                    }
                    jet_comp(out.im, comp, dim) = iacc.done();
                }
            }
        }
    }

    if (phased) rotation(st, mode_a, phi);
}

// ---------------------------------------------------------------------------
// Nonlinearities

enum class Nonlinearity { Kerr, CubicPhase, CrossKerr };

/// Kerr gate exp(i kappa n^2), diagonal in the number basis.
template <class S>
void kerr(FockState<S>& st, int mode, S kappa) {
    st.check_mode(mode);
    using std::cos;
    using std::sin;
    std::vector<CS<S>> phases(st.cutoff);
    for (int n = 0; n < st.cutoff; ++n) {
        const S arg = kappa * S(static_cast<double>(n) * n);
        phases[n] = {cos(arg), sin(arg)};
    }
    detail::apply_mode_phases<S>(st, mode, phases);
}

/// Cross-Kerr gate exp(i kappa n_a n_b), diagonal over a mode pair.
template <class S>
void cross_kerr(FockState<S>& st, int mode_a, int mode_b, S kappa) {
    if (st.n_modes < 2) throw std::invalid_argument("cross-Kerr needs at least two qumodes");
    st.check_mode(mode_a);
    st.check_mode(mode_b);
    if (mode_a == mode_b) throw std::invalid_argument("cross-Kerr needs two distinct modes");
    using std::cos;
    using std::sin;
    const int c = st.cutoff;
    std::vector<CS<S>> phases(static_cast<std::size_t>(c) * c);
    for (int na = 0; na < c; ++na)
        for (int nb = 0; nb < c; ++nb) {
            const S arg = kappa * S(static_cast<double>(na) * nb);
            phases[static_cast<std::size_t>(na) * c + nb] = {cos(arg), sin(arg)};
        }

    const int dim = st.jet_dim;
    const int nc = comp_count(dim);
    std::vector<char> skip(phases.size());
    for (std::size_t k = 0; k < phases.size(); ++k) skip[k] = detail::is_identity_phase(phases[k]);
    for (std::size_t idx = 0; idx < st.size(); ++idx) {
        const std::size_t key =
            static_cast<std::size_t>(st.occupation(idx, mode_a)) * c + st.occupation(idx, mode_b);
        if (skip[key]) continue;
        const CS<S>& ph = phases[key];
        CJet<S>& a = st.amp[idx];
        const CJet<S> old = a;
        for (int comp = 0; comp < nc; ++comp) {
            Acc<S> racc;
            racc.add(ph.re, jet_comp(old.re, comp, dim));
            racc.add(-1.0, ph.im, jet_comp(old.im, comp, dim));
            jet_comp(a.re, comp, dim) = racc.done();
            Acc<S> iacc;
            iacc.add(ph.re, jet_comp(old.im, comp, dim));
            iacc.add(ph.im, jet_comp(old.re, comp, dim));
            jet_comp(a.im, comp, dim) = iacc.done();
        }
    }
}

/// Eigen-decomposition of the (constant) quadrature operator q = a + a^dag,
/// used to exponentiate the cubic phase gate exactly within the truncation.
struct CubicBasis {
    int cutoff = 0;
    std::vector<double> vectors;     // row-major V, columns are eigenvectors
    std::vector<double> vectors_t;   // V^T
    std::vector<double> lambda;      // eigenvalues of q
};

namespace detail {

/// Cyclic Jacobi diagonalization of a dense symmetric matrix.
inline void symmetric_eigen(std::vector<double> a, int n, std::vector<double>& values,
                            std::vector<double>& vectors) {
    vectors.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) vectors[static_cast<std::size_t>(i) * n + i] = 1.0;
    auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    auto V = [&](int i, int j) -> double& { return vectors[static_cast<std::size_t>(i) * n + j]; };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
        if (off < 1e-26) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (A(p, q) == 0.0) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    values.resize(n);
    for (int i = 0; i < n; ++i) values[i] = a[static_cast<std::size_t>(i) * n + i];
}

}  // namespace detail

inline CubicBasis make_cubic_basis(int cutoff) {
    std::vector<double> q(static_cast<std::size_t>(cutoff) * cutoff, 0.0);
    for (int n = 0; n + 1 < cutoff; ++n) {
        const double v = std::sqrt(static_cast<double>(n + 1));
        q[static_cast<std::size_t>(n) * cutoff + n + 1] = v;
        q[static_cast<std::size_t>(n + 1) * cutoff + n] = v;
    }
    CubicBasis basis;
    basis.cutoff = cutoff;
    detail::symmetric_eigen(std::move(q), cutoff, basis.lambda, basis.vectors);
    basis.vectors_t.assign(basis.vectors.size(), 0.0);
    for (int i = 0; i < cutoff; ++i)
        for (int j = 0; j < cutoff; ++j)
            basis.vectors_t[static_cast<std::size_t>(i) * cutoff + j] =
                basis.vectors[static_cast<std::size_t>(j) * cutoff + i];
    return basis;
}

/// Cubic phase gate exp(i gamma q^3 / 3) = V exp(i gamma lambda^3 / 3) V^T.
template <class S>
void cubic_phase(FockState<S>& st, int mode, S gamma, const CubicBasis& basis) {
    st.check_mode(mode);
    if (basis.cutoff != st.cutoff) throw std::invalid_argument("cubic basis cutoff mismatch");
    using std::cos;
    using std::sin;
    detail::apply_mode_real_const<S>(st, mode, basis.vectors_t);
    std::vector<CS<S>> phases(st.cutoff);
    for (int k = 0; k < st.cutoff; ++k) {
        const double l3 = basis.lambda[k] * basis.lambda[k] * basis.lambda[k] / 3.0;
        const S arg = gamma * S(l3);
        phases[k] = {cos(arg), sin(arg)};
    }
    detail::apply_mode_phases<S>(st, mode, phases);
    detail::apply_mode_real_const<S>(st, mode, basis.vectors);
}

template <class S>
void cubic_phase(FockState<S>& st, int mode, S gamma) {
    const CubicBasis basis = make_cubic_basis(st.cutoff);
    cubic_phase(st, mode, gamma, basis);
}

// ---------------------------------------------------------------------------
// Measurement and encoding

enum class Measurement { Number, Quadrature };

template <class S>
Jet<S> norm_sq(const FockState<S>& st) {
    const int dim = st.jet_dim;
    Jet<S> r;
    r.dim = dim;
    for (int c = 0; c < comp_count(dim); ++c) {
        Acc<S> acc;
        for (const auto& a : st.amp) {
            mac_product(acc, a.re, a.re, c, dim);
            mac_product(acc, a.im, a.im, c, dim);
        }
        jet_comp(r, c, dim) = acc.done();
    }
    return r;
}

/// Per-mode <n> or <q> of the (possibly sub-normalized) state, normalized by
/// the surviving norm.
template <class S>
std::vector<Jet<S>> measure(const FockState<S>& st, Measurement scheme) {
    const int dim = st.jet_dim;
    const int nc = comp_count(dim);
    const Jet<S> nsq = norm_sq(st);
    if (nsq.value() == 0.0) throw std::domain_error("measurement of a zero-norm state");

    std::vector<Jet<S>> out(st.n_modes);
    const auto& rt = detail::sqrt_table(st.cutoff);
    for (int mode = 0; mode < st.n_modes; ++mode) {
        Jet<S> raw;
        raw.dim = dim;
        if (scheme == Measurement::Number) {
            for (int c = 0; c < nc; ++c) {
                Acc<S> acc;
                for (std::size_t idx = 0; idx < st.size(); ++idx) {
                    const int n = st.occupation(idx, mode);
                    if (n == 0) continue;
                    mac_product(acc, st.amp[idx].re, st.amp[idx].re, c, dim, static_cast<double>(n));
                    mac_product(acc, st.amp[idx].im, st.amp[idx].im, c, dim, static_cast<double>(n));
                }
                jet_comp(raw, c, dim) = acc.done();
            }
        } else {
            // <q> = 2 Re<a> = 2 sum sqrt(n+1) Re(conj(x_n) x_{n+1})
            const std::size_t stride = st.stride(mode);
            for (int c = 0; c < nc; ++c) {
                Acc<S> acc;
                for (std::size_t idx = 0; idx < st.size(); ++idx) {
                    const int n = st.occupation(idx, mode);
                    if (n + 1 >= st.cutoff) continue;
                    const CJet<S>& x = st.amp[idx];
                    const CJet<S>& y = st.amp[idx + stride];
                    mac_product(acc, x.re, y.re, c, dim, 2.0 * rt[n + 1]);
                    mac_product(acc, x.im, y.im, c, dim, 2.0 * rt[n + 1]);
                }
                jet_comp(raw, c, dim) = acc.done();
            }
        }
        out[mode] = raw / nsq;
    }
    return out;
}

/// Vacuum displaced by D(features[k], 0) on every mode; features are jets so
/// input derivatives flow through the coherent amplitudes
/// e^{-a^2/2} a^n / sqrt(n!).
template <class S>
FockState<S> encode_displacement(std::span<const Jet<S>> features, int n_modes, int cutoff,
                                 int jet_dim) {
    if (static_cast<int>(features.size()) != n_modes)
        throw std::invalid_argument("displacement encoding needs one feature per mode");
    const auto& rt = detail::sqrt_table(cutoff);

    std::vector<std::vector<Jet<S>>> cols(n_modes);
    for (int k = 0; k < n_modes; ++k) {
        const Jet<S>& a = features[k];
        auto& col = cols[k];
        col.reserve(cutoff);
        col.push_back(ad::exp(a * a * S(-0.5)));
        for (int n = 1; n < cutoff; ++n) col.push_back(col.back() * a * S(1.0 / rt[n]));
    }

    FockState<S> st = FockState<S>::vacuum(n_modes, cutoff, jet_dim);
    for (std::size_t idx = 0; idx < st.size(); ++idx) {
        Jet<S> prod = cols[0][st.occupation(idx, 0)];
        for (int k = 1; k < n_modes; ++k) prod = prod * cols[k][st.occupation(idx, k)];
        st.amp[idx].re = prod;
        st.amp[idx].im = Jet<S>::constant(S(0.0), jet_dim);
    }
    return st;
}

// ---------------------------------------------------------------------------
// Layer structure (interferometer / squeeze / interferometer / displace /
// nonlinearity) and its flat parameter layout.

enum class Parameterization { Full, PhaseFree };

/// Rectangular-mesh beamsplitter pair schedule; m(m-1)/2 pairs.
inline std::vector<std::pair<int, int>> interferometer_pairs(int n_modes) {
    std::vector<std::pair<int, int>> pairs;
    for (int l = 0; l < n_modes; ++l)
        for (int i = 0; i + 1 < n_modes; ++i)
            if ((l + i) % 2 == 0) pairs.emplace_back(i, i + 1);
    return pairs;
}

struct CvOptions {
    int n_qumodes = 2;
    int cutoff = 20;
    int n_layers = 1;
    Measurement measurement = Measurement::Quadrature;
    Nonlinearity nonlinearity = Nonlinearity::Kerr;
    Parameterization parameterization = Parameterization::Full;
};

/// Flat slot offsets of one layer. Phase slots exist even in phase-free mode;
/// they are simply frozen at zero and excluded from the trainable set.
struct CvParamLayout {
    int n_modes = 0;
    int pairs = 0;       // beamsplitters per interferometer
    int rotations = 0;   // n_modes - 1 per interferometer
    int nl_count = 0;
    int per_layer = 0;
    int n_layers = 0;
    int total = 0;
    // per-layer offsets
    int int1_psi, int1_phi, int1_rot;
    int sq_r, sq_phi;
    int int2_psi, int2_phi, int2_rot;
    int disp_alpha, disp_phi;
    int nl;
    std::vector<uint8_t> frozen;  // size == total
};

inline CvParamLayout make_cv_layout(const CvOptions& opt) {
    CvParamLayout lay;
    const int m = opt.n_qumodes;
    lay.n_modes = m;
    lay.pairs = m * (m - 1) / 2;
    lay.rotations = m - 1;
    lay.nl_count = (opt.nonlinearity == Nonlinearity::CrossKerr) ? lay.pairs : m;
    lay.n_layers = opt.n_layers;

    int o = 0;
    lay.int1_psi = o; o += lay.pairs;
    lay.int1_phi = o; o += lay.pairs;
    lay.int1_rot = o; o += lay.rotations;
    lay.sq_r = o; o += m;
    lay.sq_phi = o; o += m;
    lay.int2_psi = o; o += lay.pairs;
    lay.int2_phi = o; o += lay.pairs;
    lay.int2_rot = o; o += lay.rotations;
    lay.disp_alpha = o; o += m;
    lay.disp_phi = o; o += m;
    lay.nl = o; o += lay.nl_count;
    lay.per_layer = o;
    lay.total = o * opt.n_layers;

    lay.frozen.assign(static_cast<std::size_t>(lay.total), 0);
    if (opt.parameterization == Parameterization::PhaseFree) {
        for (int layer = 0; layer < opt.n_layers; ++layer) {
            const int base = layer * lay.per_layer;
            for (int k = 0; k < lay.pairs; ++k) {
                lay.frozen[base + lay.int1_phi + k] = 1;
                lay.frozen[base + lay.int2_phi + k] = 1;
            }
            for (int k = 0; k < m; ++k) {
                lay.frozen[base + lay.sq_phi + k] = 1;
                lay.frozen[base + lay.disp_phi + k] = 1;
            }
        }
    }
    return lay;
}

/// One layer: Interferometer1 -> Squeeze -> Interferometer2 -> Displace ->
/// Nonlinearity, consuming `layer_params` laid out per CvParamLayout.
template <class S>
void cv_layer(FockState<S>& st, const CvOptions& opt, const CvParamLayout& lay,
              std::span<const S> layer_params, const CubicBasis* basis = nullptr) {
    if (static_cast<int>(layer_params.size()) != lay.per_layer)
        throw std::invalid_argument("cv layer parameter slice has the wrong length");
    const int m = opt.n_qumodes;
    const auto pairs = interferometer_pairs(m);

    auto interferometer = [&](int psi_off, int phi_off, int rot_off) {
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            beamsplitter(st, pairs[k].first, pairs[k].second, layer_params[psi_off + k],
                         layer_params[phi_off + k]);
        }
        for (int i = 0; i + 1 < m; ++i) rotation(st, i, layer_params[rot_off + i]);
    };

    interferometer(lay.int1_psi, lay.int1_phi, lay.int1_rot);
    for (int k = 0; k < m; ++k)
        squeeze(st, k, layer_params[lay.sq_r + k], layer_params[lay.sq_phi + k]);
    interferometer(lay.int2_psi, lay.int2_phi, lay.int2_rot);
    for (int k = 0; k < m; ++k)
        displace(st, k, layer_params[lay.disp_alpha + k], layer_params[lay.disp_phi + k]);

    switch (opt.nonlinearity) {
        case Nonlinearity::Kerr:
            for (int k = 0; k < m; ++k) kerr(st, k, layer_params[lay.nl + k]);
            break;
        case Nonlinearity::CubicPhase:
            for (int k = 0; k < m; ++k) {
                if (basis != nullptr)
                    cubic_phase(st, k, layer_params[lay.nl + k], *basis);
                else
                    cubic_phase(st, k, layer_params[lay.nl + k]);
            }
            break;
        case Nonlinearity::CrossKerr:
            for (std::size_t k = 0; k < pairs.size(); ++k)
                cross_kerr(st, pairs[k].first, pairs[k].second, layer_params[lay.nl + k]);
            break;
    }
}

template <class S>
struct CvForwardResult {
    std::vector<Jet<S>> outputs;
    double norm_sq_value = 1.0;  // truncation telemetry at measurement time
};

/// Encode, run all layers, measure.
template <class S>
CvForwardResult<S> cv_forward(const CvOptions& opt, const CvParamLayout& lay,
                              std::span<const S> qparams, std::span<const Jet<S>> features,
                              int jet_dim, const CubicBasis* basis = nullptr) {
    if (static_cast<int>(qparams.size()) != lay.total)
        throw std::invalid_argument("cv parameter vector has the wrong length");
    FockState<S> st = encode_displacement(features, opt.n_qumodes, opt.cutoff, jet_dim);
    for (int layer = 0; layer < opt.n_layers; ++layer) {
        cv_layer(st, opt, lay, qparams.subspan(static_cast<std::size_t>(layer) * lay.per_layer,
                                               lay.per_layer),
                 basis);
    }
    CvForwardResult<S> out;
    out.norm_sq_value = norm_sq(st).value();
    out.outputs = measure(st, opt.measurement);
    return out;
}

// ---------------------------------------------------------------------------
// Name parsing

inline Measurement measurement_from_string(const std::string& s) {
    if (s == "number") return Measurement::Number;
    if (s == "quadrature") return Measurement::Quadrature;
    throw std::invalid_argument("unknown measurement scheme: " + s);
}
inline std::string to_string(Measurement m) {
    return m == Measurement::Number ? "number" : "quadrature";
}

inline Nonlinearity nonlinearity_from_string(const std::string& s) {
    if (s == "kerr") return Nonlinearity::Kerr;
    if (s == "cubic") return Nonlinearity::CubicPhase;
    if (s == "cross-kerr") return Nonlinearity::CrossKerr;
    throw std::invalid_argument("unknown nonlinearity: " + s);
}
inline std::string to_string(Nonlinearity n) {
    switch (n) {
        case Nonlinearity::Kerr: return "kerr";
        case Nonlinearity::CubicPhase: return "cubic";
        case Nonlinearity::CrossKerr: return "cross-kerr";
    }
    return {};
}

inline Parameterization parameterization_from_string(const std::string& s) {
    if (s == "full") return Parameterization::Full;
    if (s == "phase-free") return Parameterization::PhaseFree;
    throw std::invalid_argument("unknown parameterization: " + s);
}
inline std::string to_string(Parameterization p) {
    return p == Parameterization::Full ? "full" : "phase-free";
}

}  // namespace qpinn::cv
