#pragma once

// The five benchmark problems: residual operators over jets, loss-term
// structure with fixed weights, closed-form solutions and source terms,
// domain geometry for the samplers, and the relative-L2 metric.
//
// A loss is a weighted sum of terms; a term is a sum of mean-square
// "streams" (e.g. the Cavity residual term = MSE(r_u)+MSE(r_v)+MSE(r_c)).
// Streams declare which point population feeds them so batch counts and
// gradients normalize consistently.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpinn/jet.hpp"
#include "qpinn/sampling.hpp"

namespace qpinn::pde {

using ad::Jet;

enum class PdeId { Helmholtz, Cavity, Wave, KleinGordon, ConvectionDiffusion };

enum class PointRole { Interior, Boundary, Initial };

struct LossTerm {
    std::string name;
    double weight = 1.0;
};

struct StreamSpec {
    int term = 0;
    std::string name;
    PointRole role = PointRole::Interior;
    std::vector<int> segments;  // empty = every segment (Boundary role only)

    bool covers_segment(int seg) const {
        if (segments.empty()) return true;
        for (int s : segments)
            if (s == seg) return true;
        return false;
    }
};

struct PdeProblem {
    PdeId id{};
    std::string name;
    int d_in = 0;
    int d_out = 0;
    std::vector<double> lo, hi;
    std::vector<Segment> segments;
    bool has_initial = false;
    bool initial_needs_derivatives = false;  // streams read u_t on the t=0 plane
    Strategy sampling = Strategy::UniformRandom;
    std::vector<LossTerm> terms;
    std::vector<StreamSpec> streams;
    std::vector<std::string> fields;  // reported fields, e.g. {"u", "f"}
    bool closed_form = true;          // false: needs an external reference grid
};

namespace constants {
inline constexpr double kPi = std::numbers::pi;
// Helmholtz: wavenumber 1 and mode numbers (1, 4)
inline constexpr double kHelmholtzAlpha = 17.0 * kPi * kPi;  // (a1 pi)^2 + (a2 pi)^2
// Cavity
inline constexpr double kCavityDensity = 1056.0;
inline constexpr double kCavityViscosity = 0.01;
}  // namespace constants

inline PdeProblem make_problem(PdeId id) {
    using namespace constants;
    PdeProblem p;
    p.id = id;
    switch (id) {
        case PdeId::Helmholtz:
            p.name = "helmholtz";
            p.d_in = 2;
            p.d_out = 1;
            p.lo = {-1, -1};
            p.hi = {1, 1};
            p.segments = {{0, -1.0}, {0, 1.0}, {1, -1.0}, {1, 1.0}};
            p.terms = {{"residual", 1.0}, {"boundary", 10.0}};
            p.streams = {{0, "residual", PointRole::Interior, {}},
                         {1, "boundary", PointRole::Boundary, {}}};
            p.fields = {"u", "f"};
            break;
        case PdeId::Cavity:
            p.name = "cavity";
            p.d_in = 3;
            p.d_out = 3;
            p.lo = {0, 0, 0};
            p.hi = {10, 1, 1};
            // bottom, left, right walls; the moving lid is segment 3
            p.segments = {{2, 0.0}, {1, 0.0}, {1, 1.0}, {2, 1.0}};
            p.has_initial = true;
            p.sampling = Strategy::Sobol;
            p.terms = {{"residual", 0.1}, {"boundary", 2.0}, {"initial", 4.0}};
            p.streams = {{0, "r_u", PointRole::Interior, {}},
                         {0, "r_v", PointRole::Interior, {}},
                         {0, "r_c", PointRole::Interior, {}},
                         {1, "lid_u", PointRole::Boundary, {3}},
                         {1, "lid_v", PointRole::Boundary, {3}},
                         {1, "wall_u", PointRole::Boundary, {0, 1, 2}},
                         {1, "wall_v", PointRole::Boundary, {0, 1, 2}},
                         {2, "ic_u", PointRole::Initial, {}},
                         {2, "ic_v", PointRole::Initial, {}},
                         {2, "ic_p", PointRole::Initial, {}}};
            p.fields = {"u", "v", "p"};
            p.closed_form = false;
            break;
        case PdeId::Wave:
            p.name = "wave";
            p.d_in = 2;  // (t, x)
            p.d_out = 1;
            p.lo = {0, 0};
            p.hi = {1, 1};
            p.segments = {{1, 0.0}, {1, 1.0}};
            p.has_initial = true;
            p.initial_needs_derivatives = true;
            p.terms = {{"residual", 0.1}, {"constraints", 10.0}, {"initial-velocity", 0.1}};
            p.streams = {{0, "residual", PointRole::Interior, {}},
                         {1, "bc_x0", PointRole::Boundary, {0}},
                         {1, "bc_x1", PointRole::Boundary, {1}},
                         {1, "ic_u", PointRole::Initial, {}},
                         {2, "ic_ut", PointRole::Initial, {}}};
            p.fields = {"u"};
            break;
        case PdeId::KleinGordon:
            p.name = "klein-gordon";
            p.d_in = 2;  // (t, x)
            p.d_out = 1;
            p.lo = {0, 0};
            p.hi = {1, 1};
            p.segments = {{1, 0.0}, {1, 1.0}};
            p.has_initial = true;
            p.initial_needs_derivatives = true;
            p.terms = {{"residual", 1.0}, {"constraints", 10.0}, {"initial-velocity", 1.0}};
            p.streams = {{0, "residual", PointRole::Interior, {}},
                         {1, "bc_x0", PointRole::Boundary, {0}},
                         {1, "bc_x1", PointRole::Boundary, {1}},
                         {1, "ic_u", PointRole::Initial, {}},
                         {2, "ic_ut", PointRole::Initial, {}}};
            p.fields = {"u", "f"};
            break;
        case PdeId::ConvectionDiffusion:
            p.name = "convection-diffusion";
            p.d_in = 3;  // (t, x, y)
            p.d_out = 1;
            p.lo = {0, 0, 0};
            p.hi = {1, 1, 1};
            p.segments = {{1, 0.0}, {1, 1.0}};
            p.has_initial = true;
            p.terms = {{"residual", 1.0}, {"boundary", 10.0}, {"initial", 10.0}};
            p.streams = {{0, "residual", PointRole::Interior, {}},
                         {1, "bc_x0", PointRole::Boundary, {0}},
                         {1, "bc_x1", PointRole::Boundary, {1}},
                         {2, "initial", PointRole::Initial, {}}};
            p.fields = {"u", "f"};
            break;
    }
    return p;
}

inline PdeProblem problem_from_string(const std::string& s) {
    if (s == "helmholtz") return make_problem(PdeId::Helmholtz);
    if (s == "cavity") return make_problem(PdeId::Cavity);
    if (s == "wave") return make_problem(PdeId::Wave);
    if (s == "klein-gordon") return make_problem(PdeId::KleinGordon);
    if (s == "convection-diffusion") return make_problem(PdeId::ConvectionDiffusion);
    throw std::invalid_argument("unknown problem: " + s);
}

inline BatchSampler make_sampler(const PdeProblem& p, uint64_t seed) {
    return BatchSampler(p.sampling, p.lo, p.hi, p.segments, p.has_initial, seed);
}

// ---------------------------------------------------------------------------
// Closed forms

/// u(x, y) = sin(pi x) sin(4 pi y)
template <class S>
Jet<S> helmholtz_exact(const Jet<S>& x, const Jet<S>& y) {
    using constants::kPi;
    return ad::sin(x * S(kPi)) * ad::sin(y * S(4.0 * kPi));
}

/// u(t, x) = sin(pi x) cos(2 pi t) + 0.5 sin(4 pi x) cos(8 pi t)
template <class S>
Jet<S> wave_exact(const Jet<S>& t, const Jet<S>& x) {
    using constants::kPi;
    return ad::sin(x * S(kPi)) * ad::cos(t * S(2.0 * kPi)) +
           scale(ad::sin(x * S(4.0 * kPi)) * ad::cos(t * S(8.0 * kPi)), 0.5);
}

/// u(t, x) = x cos(5 pi t) + (t x)^3
template <class S>
Jet<S> klein_gordon_exact(const Jet<S>& t, const Jet<S>& x) {
    using constants::kPi;
    return x * ad::cos(t * S(5.0 * kPi)) + ad::powi(t * x, 3);
}

/// u(t, x, y) = exp(-100((x-1/2)^2 + (y-1/2)^2) - t)
template <class S>
Jet<S> convection_diffusion_exact(const Jet<S>& t, const Jet<S>& x, const Jet<S>& y) {
    const Jet<S> dx = x - S(0.5);
    const Jet<S> dy = y - S(0.5);
    return ad::exp(scale(dx * dx + dy * dy, -100.0) - t);
}

inline double helmholtz_exact_value(double x, double y) {
    using constants::kPi;
    return std::sin(kPi * x) * std::sin(4.0 * kPi * y);
}

/// f = u (k^2 - (a1 pi)^2 - (a2 pi)^2) = (1 - 17 pi^2) u
inline double helmholtz_source(double x, double y) {
    using constants::kPi;
    return helmholtz_exact_value(x, y) * (1.0 - constants::kHelmholtzAlpha);
}

inline double wave_exact_value(double t, double x) {
    using constants::kPi;
    return std::sin(kPi * x) * std::cos(2.0 * kPi * t) +
           0.5 * std::sin(4.0 * kPi * x) * std::cos(8.0 * kPi * t);
}

inline double klein_gordon_exact_value(double t, double x) {
    using constants::kPi;
    return x * std::cos(5.0 * kPi * t) + std::pow(t * x, 3);
}

/// f(t,x) = x(-25 pi^2 cos(5 pi t) - 6 t^3) + 6 t x^3
///        + x^3 (cos(5 pi t) + t^3 x^2)^3
inline double klein_gordon_source(double t, double x) {
    using constants::kPi;
    const double c = std::cos(5.0 * kPi * t);
    const double inner = c + t * t * t * x * x;
    return x * (-25.0 * kPi * kPi * c - 6.0 * t * t * t) + 6.0 * t * x * x * x +
           x * x * x * inner * inner * inner;
}

inline double convection_diffusion_exact_value(double t, double x, double y) {
    const double dx = x - 0.5, dy = y - 0.5;
    return std::exp(-100.0 * (dx * dx + dy * dy) - t);
}

/// f = u [3 - 200(x-1/2) - 200(y-1/2) - 400((x-1/2)^2 + (y-1/2)^2)]
inline double convection_diffusion_source(double t, double x, double y) {
    const double dx = x - 0.5, dy = y - 0.5;
    return convection_diffusion_exact_value(t, x, y) *
           (3.0 - 200.0 * dx - 200.0 * dy - 400.0 * (dx * dx + dy * dy));
}

/// Boundary trace u(t, {0,1}, y) = exp(-25 - 100(y-1/2)^2 - t)
inline double convection_diffusion_trace(double t, double y) {
    const double dy = y - 0.5;
    return std::exp(-25.0 - 100.0 * dy * dy - t);
}

/// Closed-form solution jets for problems that have one (everything but the
/// Cavity). Coordinates must already be seeded.
template <class S>
std::vector<Jet<S>> exact_solution_jets(const PdeProblem& p, std::span<const Jet<S>> x) {
    switch (p.id) {
        case PdeId::Helmholtz: return {helmholtz_exact(x[0], x[1])};
        case PdeId::Wave: return {wave_exact(x[0], x[1])};
        case PdeId::KleinGordon: return {klein_gordon_exact(x[0], x[1])};
        case PdeId::ConvectionDiffusion:
            return {convection_diffusion_exact(x[0], x[1], x[2])};
        case PdeId::Cavity: break;
    }
    throw std::invalid_argument("no closed-form solution for " + p.name);
}

// ---------------------------------------------------------------------------
// Residual streams

/// Append (stream index, residual) contributions of one evaluated point.
/// `u` are the model output jets, `x` the raw coordinates of the point.
template <class S>
void collect_residuals(const PdeProblem& p, PointRole role, int segment,
                       std::span<const Jet<S>> u, std::span<const double> x,
                       std::vector<std::pair<int, S>>& out) {
    using constants::kPi;
    const int txx = ad::tri_index(0, 0);
    switch (p.id) {
        case PdeId::Helmholtz: {
            if (role == PointRole::Interior) {
                // Inhomogeneous residual u_xx + u_yy + k^2 u - f with k = 1.
                // The homogeneous alpha-form is degenerate here: 17 pi^2 is a
                // Dirichlet eigenvalue of this square and the solution
                // vanishes on the whole boundary, so u = 0 (or any multiple
                // of the eigenfunction) would minimize that loss exactly.
                const int tyy = ad::tri_index(1, 1);
                out.emplace_back(0, u[0].h[txx] + u[0].h[tyy] + u[0].v -
                                        S(helmholtz_source(x[0], x[1])));
            } else if (role == PointRole::Boundary) {
                out.emplace_back(1, u[0].v - S(helmholtz_exact_value(x[0], x[1])));
            }
            break;
        }
        case PdeId::Cavity: {
            const double inv_rho = 1.0 / constants::kCavityDensity;
            const double mu = constants::kCavityViscosity;
            if (role == PointRole::Interior) {
                const auto& U = u[0];
                const auto& V = u[1];
                const auto& P = u[2];
                const int xx = ad::tri_index(1, 1);
                const int yy = ad::tri_index(2, 2);
                // u_t + u u_x + v u_y + (1/rho) p_x - mu (u_xx + u_yy)
                out.emplace_back(0, U.g[0] + U.v * U.g[1] + V.v * U.g[2] +
                                        P.g[1] * S(inv_rho) -
                                        (U.h[xx] + U.h[yy]) * S(mu));
                out.emplace_back(1, V.g[0] + U.v * V.g[1] + V.v * V.g[2] +
                                        P.g[2] * S(inv_rho) -
                                        (V.h[xx] + V.h[yy]) * S(mu));
                out.emplace_back(2, U.g[1] + V.g[2]);
            } else if (role == PointRole::Boundary) {
                if (segment == 3) {  // moving lid: u = 1, v = 0
                    out.emplace_back(3, u[0].v - S(1.0));
                    out.emplace_back(4, u[1].v);
                } else {  // no-slip walls
                    out.emplace_back(5, u[0].v);
                    out.emplace_back(6, u[1].v);
                }
            } else {  // t = 0: u = v = 0 and the p = 0 gauge
                out.emplace_back(7, u[0].v);
                out.emplace_back(8, u[1].v);
                out.emplace_back(9, u[2].v);
            }
            break;
        }
        case PdeId::Wave: {
            if (role == PointRole::Interior) {
                const int tt = ad::tri_index(0, 0);
                const int xx = ad::tri_index(1, 1);
                out.emplace_back(0, u[0].h[tt] - u[0].h[xx] * S(4.0));
            } else if (role == PointRole::Boundary) {
                out.emplace_back(segment == 0 ? 1 : 2, u[0].v);
            } else {
                const double x1 = x[1];
                out.emplace_back(3, u[0].v - S(std::sin(kPi * x1) +
                                               0.5 * std::sin(4.0 * kPi * x1)));
                out.emplace_back(4, u[0].g[0]);
            }
            break;
        }
        case PdeId::KleinGordon: {
            if (role == PointRole::Interior) {
                const int tt = ad::tri_index(0, 0);
                const int xx = ad::tri_index(1, 1);
                const S cube = u[0].v * u[0].v * u[0].v;
                out.emplace_back(0, u[0].h[tt] - u[0].h[xx] + cube -
                                        S(klein_gordon_source(x[0], x[1])));
            } else if (role == PointRole::Boundary) {
                if (segment == 0) {
                    out.emplace_back(1, u[0].v);
                } else {
                    const double t = x[0];
                    out.emplace_back(2, u[0].v - S(std::cos(5.0 * kPi * t) + t * t * t));
                }
            } else {
                out.emplace_back(3, u[0].v - S(x[1]));
                out.emplace_back(4, u[0].g[0]);
            }
            break;
        }
        case PdeId::ConvectionDiffusion: {
            if (role == PointRole::Interior) {
                const int xx = ad::tri_index(1, 1);
                const int yy = ad::tri_index(2, 2);
                out.emplace_back(0, u[0].g[0] + u[0].g[1] + u[0].g[2] -
                                        (u[0].h[xx] + u[0].h[yy]) * S(0.01) -
                                        S(convection_diffusion_source(x[0], x[1], x[2])));
            } else if (role == PointRole::Boundary) {
                out.emplace_back(segment == 0 ? 1 : 2,
                                 u[0].v - S(convection_diffusion_trace(x[0], x[2])));
            } else {
                out.emplace_back(3, u[0].v - S(convection_diffusion_exact_value(0.0, x[1], x[2])));
            }
            break;
        }
    }
}

/// Reported fields computed from the model outputs of one point: the solution
/// value(s) and, where defined, the source reconstructed by applying the
/// differential operator to the network.
template <class S>
std::vector<S> predicted_fields(const PdeProblem& p, std::span<const Jet<S>> u) {
    switch (p.id) {
        case PdeId::Helmholtz: {
            const int xx = ad::tri_index(0, 0), yy = ad::tri_index(1, 1);
            // f = laplacian(u) + k^2 u with k = 1
            return {u[0].v, u[0].h[xx] + u[0].h[yy] + u[0].v};
        }
        case PdeId::Cavity: return {u[0].v, u[1].v, u[2].v};
        case PdeId::Wave: return {u[0].v};
        case PdeId::KleinGordon: {
            const int tt = ad::tri_index(0, 0), xx = ad::tri_index(1, 1);
            return {u[0].v, u[0].h[tt] - u[0].h[xx] + u[0].v * u[0].v * u[0].v};
        }
        case PdeId::ConvectionDiffusion: {
            const int xx = ad::tri_index(1, 1), yy = ad::tri_index(2, 2);
            return {u[0].v, u[0].g[0] + u[0].g[1] + u[0].g[2] -
                            (u[0].h[xx] + u[0].h[yy]) * S(0.01)};
        }
    }
    return {};
}

/// Closed-form values of the reported fields at one point.
inline std::vector<double> reference_fields(const PdeProblem& p, std::span<const double> x) {
    switch (p.id) {
        case PdeId::Helmholtz:
            return {helmholtz_exact_value(x[0], x[1]), helmholtz_source(x[0], x[1])};
        case PdeId::Wave: return {wave_exact_value(x[0], x[1])};
        case PdeId::KleinGordon:
            return {klein_gordon_exact_value(x[0], x[1]), klein_gordon_source(x[0], x[1])};
        case PdeId::ConvectionDiffusion:
            return {convection_diffusion_exact_value(x[0], x[1], x[2]),
                    convection_diffusion_source(x[0], x[1], x[2])};
        case PdeId::Cavity: break;
    }
    throw std::invalid_argument("no closed-form reference for " + p.name);
}

// ---------------------------------------------------------------------------
// Error metric

/// 100 * ||pred - ref||_2 / ||ref||_2.
inline double relative_l2(std::span<const double> pred, std::span<const double> ref) {
    if (pred.size() != ref.size()) throw std::invalid_argument("relative_l2 length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - ref[i];
        num += d * d;
        den += ref[i] * ref[i];
    }
    if (den == 0.0) throw std::domain_error("relative_l2 against a zero reference");
    return 100.0 * std::sqrt(num / den);
}

}  // namespace qpinn::pde
