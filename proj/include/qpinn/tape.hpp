#pragma once

// Reverse-mode scalar tape.
//
// A Tape records elementary double-valued operations as nodes; each node
// stores its parents together with the local partial derivative evaluated at
// record time. A single backward sweep then accumulates adjoints for every
// node, which is how loss gradients with respect to trainable parameters are
// obtained: parameters are bound as the first `n` leaves, so after the sweep
// the gradient is adjoint[0..n).
//
// Var is a lightweight handle (value + node id). Vars with id < 0 are
// constants: they never touch the tape, and arithmetic folds them eagerly
// (x + 0, x * 0, x * 1, const op const). Because of that folding, structural
// zeros — e.g. derivative slots of parameters that carry no input
// dependence — cost nothing, which matters a lot in the quantum-state hot
// paths.
//
// A tape is confined to one thread; the active tape is a thread_local set by
// TapeScope. Constant-only arithmetic works with no active tape.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qpinn::ad {

class Tape {
  public:
    /// Node id of a fresh leaf (an independent input, typically a parameter).
    int32_t leaf() {
        bounds_.push_back(static_cast<uint32_t>(parents_.size()));
        return static_cast<int32_t>(bounds_.size()) - 1;
    }

    /// Append one (parent, partial) pair of the node currently being built.
    void push_pair(int32_t parent, double partial) {
        parents_.push_back(parent);
        partials_.push_back(partial);
    }

    /// Seal all pairs pushed since the last seal/leaf into a new node.
    int32_t seal_node() {
        bounds_.push_back(static_cast<uint32_t>(parents_.size()));
        return static_cast<int32_t>(bounds_.size()) - 1;
    }

    std::size_t node_count() const { return bounds_.size(); }
    std::size_t pair_count() const { return parents_.size(); }
    std::size_t pending_pairs() const {
        const uint32_t sealed = bounds_.empty() ? 0 : bounds_.back();
        return parents_.size() - sealed;
    }

    /// Drop every node but keep the allocated storage for reuse.
    void clear() {
        parents_.clear();
        partials_.clear();
        bounds_.clear();
    }

    /// Reverse sweep. `seeds` are (node, weight) pairs defining the adjoint
    /// of the output; `adjoint` is resized to node_count() and filled with
    /// d(seeded combination)/d(node) for every node.
    void backward(std::span<const std::pair<int32_t, double>> seeds,
                  std::vector<double>& adjoint) const {
        adjoint.assign(node_count(), 0.0);
        for (const auto& [node, w] : seeds) {
            if (node >= 0) adjoint[static_cast<std::size_t>(node)] += w;
        }
        for (int32_t i = static_cast<int32_t>(node_count()) - 1; i >= 0; --i) {
            const double a = adjoint[static_cast<std::size_t>(i)];
            if (a == 0.0) continue;
            const uint32_t begin = (i == 0) ? 0 : bounds_[static_cast<std::size_t>(i) - 1];
            const uint32_t end = bounds_[static_cast<std::size_t>(i)];
            for (uint32_t k = begin; k < end; ++k) {
                adjoint[static_cast<std::size_t>(parents_[k])] += a * partials_[k];
            }
        }
    }

  private:
    // Structure-of-arrays pair storage; node i owns pairs
    // [bounds_[i-1], bounds_[i]).
    std::vector<int32_t> parents_;
    std::vector<double> partials_;
    std::vector<uint32_t> bounds_;
};

namespace detail {
inline thread_local Tape* g_tape = nullptr;
}

inline Tape& active_tape() {
    assert(detail::g_tape != nullptr && "no active tape on this thread");
    return *detail::g_tape;
}

/// RAII binding of the thread's active tape.
class TapeScope {
  public:
    explicit TapeScope(Tape& tape) : previous_(detail::g_tape) { detail::g_tape = &tape; }
    ~TapeScope() { detail::g_tape = previous_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

/// Recorded scalar. id < 0 marks a constant that lives off-tape.
struct Var {
    double v = 0.0;
    int32_t id = -1;

    Var() = default;
    Var(double value) : v(value) {}  // NOLINT: implicit constants are the point
    Var(double value, int32_t node) : v(value), id(node) {}

    bool is_const() const { return id < 0; }
};

/// A fresh independent variable on the active tape.
inline Var make_leaf(double value) { return Var(value, active_tape().leaf()); }

inline constexpr bool is_constant(double) { return true; }
inline bool is_constant(const Var& v) { return v.is_const(); }

/// Fused sum-of-products accumulator. Emits at most one tape node no matter
/// how many terms are added, which keeps statevector contractions cheap.
/// While an Acc is open no other node may be created on the same tape.
template <class S>
struct Acc;

template <>
struct Acc<double> {
    double value = 0.0;
    void add(double a) { value += a; }
    void add(double a, double b) { value += a * b; }
    void add(double a, double b, double c) { value += a * b * c; }
    double done() { return value; }
};

template <>
struct Acc<Var> {
    double value = 0.0;
    Tape* tape;
    std::size_t mark;

    Acc() : tape(&active_tape()), mark(tape->pair_count()) {}

    void add(double a) { value += a; }

    void add(Var a, double c) {
        if (c == 0.0) return;
        value += a.v * c;
        if (!a.is_const()) tape->push_pair(a.id, c);
    }
    void add(double c, Var a) { add(a, c); }

    void add(Var a, Var b) {
        value += a.v * b.v;
        // Zero partials are exact no-ops in the sweep and may be skipped.
        if (!a.is_const() && b.v != 0.0) tape->push_pair(a.id, b.v);
        if (!b.is_const() && a.v != 0.0) tape->push_pair(b.id, a.v);
    }

    /// value += c * a * b with c a plain coefficient.
    void add(double c, Var a, Var b) {
        if (c == 0.0) return;
        value += c * a.v * b.v;
        if (!a.is_const() && b.v != 0.0) tape->push_pair(a.id, c * b.v);
        if (!b.is_const() && a.v != 0.0) tape->push_pair(b.id, c * a.v);
    }

    /// value += a * b * c, all three recorded.
    void add(Var a, Var b, Var c) {
        value += a.v * b.v * c.v;
        if (!a.is_const()) tape->push_pair(a.id, b.v * c.v);
        if (!b.is_const()) tape->push_pair(b.id, a.v * c.v);
        if (!c.is_const()) tape->push_pair(c.id, a.v * b.v);
    }

    Var done() {
        if (tape->pair_count() == mark) return Var(value);
        return Var(value, tape->seal_node());
    }
};

namespace detail {
inline Var unary(Var a, double value, double partial) {
    if (a.is_const()) return Var(value);
    Tape& t = active_tape();
    t.push_pair(a.id, partial);
    return Var(value, t.seal_node());
}
}  // namespace detail

inline Var operator+(Var a, Var b) {
    if (a.is_const() && b.is_const()) return Var(a.v + b.v);
    if (a.is_const() && a.v == 0.0) return b;
    if (b.is_const() && b.v == 0.0) return a;
    Tape& t = active_tape();
    if (!a.is_const()) t.push_pair(a.id, 1.0);
    if (!b.is_const()) t.push_pair(b.id, 1.0);
    return Var(a.v + b.v, t.seal_node());
}

inline Var operator-(Var a) {
    return detail::unary(a, -a.v, -1.0);
}

inline Var operator-(Var a, Var b) {
    if (a.is_const() && b.is_const()) return Var(a.v - b.v);
    if (b.is_const() && b.v == 0.0) return a;
    Tape& t = active_tape();
    if (!a.is_const()) t.push_pair(a.id, 1.0);
    if (!b.is_const()) t.push_pair(b.id, -1.0);
    return Var(a.v - b.v, t.seal_node());
}

inline Var operator*(Var a, Var b) {
    if (a.is_const() && b.is_const()) return Var(a.v * b.v);
    if (a.is_const()) {
        if (a.v == 0.0) return Var(0.0);
        if (a.v == 1.0) return b;
        return detail::unary(b, a.v * b.v, a.v);
    }
    if (b.is_const()) {
        if (b.v == 0.0) return Var(0.0);
        if (b.v == 1.0) return a;
        return detail::unary(a, a.v * b.v, b.v);
    }
    Tape& t = active_tape();
    t.push_pair(a.id, b.v);
    t.push_pair(b.id, a.v);
    return Var(a.v * b.v, t.seal_node());
}

inline Var operator/(Var a, Var b) {
    if (b.is_const()) return a * Var(1.0 / b.v);
    if (a.is_const() && a.v == 0.0) return Var(0.0);
    const double inv = 1.0 / b.v;
    const double q = a.v * inv;
    Tape& t = active_tape();
    if (!a.is_const()) t.push_pair(a.id, inv);
    t.push_pair(b.id, -q * inv);
    return Var(q, t.seal_node());
}

inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator-=(Var& a, Var b) { return a = a - b; }
inline Var& operator*=(Var& a, Var b) { return a = a * b; }

inline Var sin(Var a) { return detail::unary(a, std::sin(a.v), std::cos(a.v)); }
inline Var cos(Var a) { return detail::unary(a, std::cos(a.v), -std::sin(a.v)); }
inline Var exp(Var a) {
    const double e = std::exp(a.v);
    return detail::unary(a, e, e);
}
inline Var tanh(Var a) {
    const double th = std::tanh(a.v);
    return detail::unary(a, th, 1.0 - th * th);
}
inline Var sinh(Var a) { return detail::unary(a, std::sinh(a.v), std::cosh(a.v)); }
inline Var cosh(Var a) { return detail::unary(a, std::cosh(a.v), std::sinh(a.v)); }
inline Var sqrt(Var a) {
    const double r = std::sqrt(a.v);
    return detail::unary(a, r, 0.5 / r);
}

/// Gradient of a recorded scalar with respect to the first `n_params` leaves.
/// A loss that never touched a parameter yields the zero vector.
inline std::vector<double> param_gradient(const Tape& tape, Var loss, std::size_t n_params) {
    std::vector<double> grad(n_params, 0.0);
    if (loss.is_const()) return grad;
    std::vector<double> adjoint;
    const std::pair<int32_t, double> seed{loss.id, 1.0};
    tape.backward({&seed, 1}, adjoint);
    for (std::size_t i = 0; i < n_params && i < adjoint.size(); ++i) grad[i] = adjoint[i];
    return grad;
}

}  // namespace qpinn::ad
