#pragma once

// Discrete-variable (qubit) statevector simulation, differentiable through
// both input jets and the parameter tape.
//
// Conventions:
//   * qubit 0 is the most significant bit of the basis index, so for n = 2
//     the amplitudes are ordered |00>, |01>, |10>, |11>.
//   * rotation gates use the standard half-angle forms, e.g.
//     RX(t) = [[cos t/2, -i sin t/2], [-i sin t/2, cos t/2]].
//   * gate angles are jets; ansatz parameters enter as constant jets whose
//     derivative slots fold away on the tape, embedding angles carry full
//     input derivatives.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpinn/jet.hpp"

namespace qpinn::dv {

using ad::Acc;
using ad::CJet;
using ad::Jet;
using ad::comp_count;
using ad::jet_comp;
using ad::mac_product;

template <class S>
struct StateVector {
    std::vector<CJet<S>> amp;
    int n_qubits = 0;
    int jet_dim = 0;

    static StateVector zero_state(int n_qubits, int jet_dim = 0) {
        if (n_qubits < 1 || n_qubits > 20) throw std::invalid_argument("unsupported qubit count");
        StateVector st;
        st.n_qubits = n_qubits;
        st.jet_dim = jet_dim;
        st.amp.assign(std::size_t{1} << n_qubits, CJet<S>::constant(0.0, 0.0, jet_dim));
        st.amp[0] = CJet<S>::constant(1.0, 0.0, jet_dim);
        return st;
    }

    std::size_t size() const { return amp.size(); }
};

enum class Gate { RX, RY, RZ, CRX, CRZ, CNOT };

inline bool is_rotation(Gate g) { return g != Gate::CNOT; }
inline bool is_controlled(Gate g) { return g == Gate::CRX || g == Gate::CRZ || g == Gate::CNOT; }

namespace detail {

// Accumulate the real/imaginary part of m * a into acc, one component at a
// time (Leibniz products; constant-zero slots fold away).
template <class S>
void mac_cmul_re(Acc<S>& acc, const CJet<S>& m, const CJet<S>& a, int comp, int dim) {
    mac_product(acc, m.re, a.re, comp, dim, 1.0);
    mac_product(acc, m.im, a.im, comp, dim, -1.0);
}

template <class S>
void mac_cmul_im(Acc<S>& acc, const CJet<S>& m, const CJet<S>& a, int comp, int dim) {
    mac_product(acc, m.re, a.im, comp, dim, 1.0);
    mac_product(acc, m.im, a.re, comp, dim, 1.0);
}

// st[pair] <- [[m00, m01], [m10, m11]] acting on the target bit, restricted
// to control bit set when control >= 0.
template <class S>
void apply_2x2(StateVector<S>& st, const CJet<S>& m00, const CJet<S>& m01, const CJet<S>& m10,
               const CJet<S>& m11, int target, int control) {
    const int n = st.n_qubits;
    const std::size_t tmask = std::size_t{1} << (n - 1 - target);
    const std::size_t cmask = control >= 0 ? std::size_t{1} << (n - 1 - control) : 0;
    const int dim = st.jet_dim;
    const int nc = comp_count(dim);
    for (std::size_t i = 0; i < st.size(); ++i) {
        if (i & tmask) continue;
        if (control >= 0 && !(i & cmask)) continue;
        const std::size_t j = i | tmask;
        const CJet<S> a0 = st.amp[i];
        const CJet<S> a1 = st.amp[j];
        CJet<S>& o0 = st.amp[i];
        CJet<S>& o1 = st.amp[j];
        o0.re.dim = o0.im.dim = o1.re.dim = o1.im.dim = dim;
        for (int c = 0; c < nc; ++c) {
            {
                Acc<S> acc;
                mac_cmul_re(acc, m00, a0, c, dim);
                mac_cmul_re(acc, m01, a1, c, dim);
                jet_comp(o0.re, c, dim) = acc.done();
            }
            {
                Acc<S> acc;
                mac_cmul_im(acc, m00, a0, c, dim);
                mac_cmul_im(acc, m01, a1, c, dim);
                jet_comp(o0.im, c, dim) = acc.done();
            }
            {
                Acc<S> acc;
                mac_cmul_re(acc, m10, a0, c, dim);
                mac_cmul_re(acc, m11, a1, c, dim);
                jet_comp(o1.re, c, dim) = acc.done();
            }
            {
                Acc<S> acc;
                mac_cmul_im(acc, m10, a0, c, dim);
                mac_cmul_im(acc, m11, a1, c, dim);
                jet_comp(o1.im, c, dim) = acc.done();
            }
        }
    }
}

}  // namespace detail

/// Apply one gate. `control` is -1 for single-qubit gates; rotation gates
/// take their angle as a jet, CNOT takes none.
template <class S>
void apply_gate(StateVector<S>& st, Gate gate, int target, int control = -1,
                const Jet<S>* theta = nullptr) {
    const int n = st.n_qubits;
    if (target < 0 || target >= n) throw std::invalid_argument("gate target out of range");
    if (is_controlled(gate) && control < 0)
        throw std::invalid_argument("controlled gate needs a control qubit");
    if (control >= 0) {
        if (control >= n) throw std::invalid_argument("gate control out of range");
        if (control == target) throw std::invalid_argument("control and target must differ");
    }
    if (is_rotation(gate) && theta == nullptr)
        throw std::invalid_argument("rotation gate needs an angle");

    if (gate == Gate::CNOT) {
        const std::size_t tmask = std::size_t{1} << (n - 1 - target);
        const std::size_t cmask = std::size_t{1} << (n - 1 - control);
        for (std::size_t i = 0; i < st.size(); ++i) {
            if ((i & cmask) && !(i & tmask)) std::swap(st.amp[i], st.amp[i | tmask]);
        }
        return;
    }

    const Jet<S> half = *theta * S(0.5);
    const Jet<S> c = ad::cos(half);
    const Jet<S> s = ad::sin(half);
    const Jet<S> zero = Jet<S>::constant(S(0.0), st.jet_dim);
    const int ctl = (gate == Gate::CRX || gate == Gate::CRZ) ? control : -1;

    switch (gate) {
        case Gate::RX:
        case Gate::CRX:
            detail::apply_2x2(st, CJet<S>{c, zero}, CJet<S>{zero, -s}, CJet<S>{zero, -s},
                              CJet<S>{c, zero}, target, ctl);
            break;
        case Gate::RY:
            detail::apply_2x2(st, CJet<S>{c, zero}, CJet<S>{-s, zero}, CJet<S>{s, zero},
                              CJet<S>{c, zero}, target, ctl);
            break;
        case Gate::RZ:
        case Gate::CRZ:
            detail::apply_2x2(st, CJet<S>{c, -s}, CJet<S>{zero, zero}, CJet<S>{zero, zero},
                              CJet<S>{c, s}, target, ctl);
            break;
        default:
            break;
    }
}

/// Squared norm of the state as a jet.
template <class S>
Jet<S> norm_sq(const StateVector<S>& st) {
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

/// Pauli-Z expectation on every qubit; output i lies in [-1, 1] and carries
/// input derivatives through the amplitudes.
template <class S>
std::vector<Jet<S>> measure_pauli_z(const StateVector<S>& st) {
    const int n = st.n_qubits;
    const int dim = st.jet_dim;
    std::vector<Jet<S>> probs;
    probs.reserve(st.size());
    for (const auto& a : st.amp) probs.push_back(ad::abs2(a));

    std::vector<Jet<S>> z(n);
    for (int q = 0; q < n; ++q) {
        const std::size_t mask = std::size_t{1} << (n - 1 - q);
        Jet<S> e;
        e.dim = dim;
        for (int c = 0; c < comp_count(dim); ++c) {
            Acc<S> acc;
            for (std::size_t b = 0; b < st.size(); ++b) {
                acc.add(jet_comp(probs[b], c, dim), (b & mask) ? -1.0 : 1.0);
            }
            jet_comp(e, c, dim) = acc.done();
        }
        z[q] = e;
    }
    return z;
}

// ---------------------------------------------------------------------------
// Embeddings

/// RX(features[i]) on qubit i of a fresh |0...0> register.
template <class S>
StateVector<S> angle_embed(std::span<const Jet<S>> features, int n_qubits, int jet_dim) {
    if (static_cast<int>(features.size()) != n_qubits)
        throw std::invalid_argument("angle embedding needs exactly one feature per qubit");
    StateVector<S> st = StateVector<S>::zero_state(n_qubits, jet_dim);
    for (int q = 0; q < n_qubits; ++q) {
        apply_gate(st, Gate::RX, q, -1, &features[q]);
    }
    return st;
}

/// Zero-padded, norm-1 amplitude encoding of up to 2^n real features.
template <class S>
StateVector<S> amplitude_embed(std::span<const Jet<S>> features, int n_qubits, int jet_dim) {
    const std::size_t space = std::size_t{1} << n_qubits;
    if (features.empty() || features.size() > space)
        throw std::invalid_argument("amplitude embedding feature count must be in [1, 2^n]");

    Jet<S> nsq;
    nsq.dim = jet_dim;
    for (int c = 0; c < comp_count(jet_dim); ++c) {
        Acc<S> acc;
        for (const auto& f : features) mac_product(acc, f, f, c, jet_dim);
        jet_comp(nsq, c, jet_dim) = acc.done();
    }
    if (nsq.value() == 0.0) throw std::domain_error("amplitude embedding of an all-zero vector");

    const Jet<S> norm = ad::sqrt(nsq);
    StateVector<S> st = StateVector<S>::zero_state(n_qubits, jet_dim);
    for (std::size_t k = 0; k < space; ++k) {
        if (k < features.size()) {
            st.amp[k].re = features[k] / norm;
        } else {
            st.amp[k].re = Jet<S>::constant(S(0.0), jet_dim);
        }
        st.amp[k].im = Jet<S>::constant(S(0.0), jet_dim);
    }
    return st;
}

enum class Embedding { Angle, Amplitude };

// ---------------------------------------------------------------------------
// Ansatz topologies

enum class Topology { Alternate, Cascade, CrossMesh, Layered };

struct GateOp {
    Gate kind;
    int16_t control;  // -1 when absent
    int16_t target;
    int16_t param;  // index into the flat parameter slice, -1 for CNOT
};

inline int topology_param_count(Topology t, int n, int layers) {
    switch (t) {
        case Topology::Alternate: return 4 * (n - 1) * layers;
        case Topology::Cascade: return 3 * n * layers;
        case Topology::CrossMesh: return (n * n + 3 * n) * layers;
        case Topology::Layered: return 4 * n * layers;
    }
    return 0;
}

inline int topology_depth(Topology t, int n, int layers) {
    switch (t) {
        case Topology::Alternate: return 6 * layers;
        case Topology::Cascade: return (n + 2) * layers;
        case Topology::CrossMesh: return (n * n - n + 4) * layers;
        case Topology::Layered: return 6 * layers;
    }
    return 0;
}

inline int topology_two_qubit_count(Topology t, int n, int layers) {
    switch (t) {
        case Topology::Alternate: return (n - 1) * layers;
        case Topology::Cascade: return n * layers;
        case Topology::CrossMesh: return (n * n - n) * layers;
        case Topology::Layered: return (n - 1) * layers;
    }
    return 0;
}

/// Gate schedule of one ansatz. `stages` are the layout's columns: gates in
/// one stage act on disjoint qubits and count as one unit of depth. Brickwork
/// blocks always occupy their full stage template, so the depth of the
/// nearest-neighbor layouts stays at 6 per layer for every qubit count.
struct AnsatzLayout {
    Topology topology{};
    int n_qubits = 0;
    int n_layers = 0;
    int n_params = 0;
    std::vector<std::vector<GateOp>> stages;

    int depth() const { return static_cast<int>(stages.size()); }

    int two_qubit_gates() const {
        int count = 0;
        for (const auto& st : stages)
            for (const auto& g : st)
                if (is_controlled(g.kind)) ++count;
        return count;
    }
};

inline AnsatzLayout make_ansatz(Topology topology, int n_qubits, int n_layers) {
    if (n_qubits < 2) throw std::invalid_argument("ansatz needs at least 2 qubits");
    if (n_layers < 1) throw std::invalid_argument("ansatz needs at least 1 layer");

    AnsatzLayout layout;
    layout.topology = topology;
    layout.n_qubits = n_qubits;
    layout.n_layers = n_layers;
    const int n = n_qubits;
    int p = 0;

    auto stage = [&layout]() -> std::vector<GateOp>& {
        layout.stages.emplace_back();
        return layout.stages.back();
    };
    auto rot_column = [&](Gate kind, const std::vector<int>& qubits) {
        auto& s = stage();
        for (int q : qubits) s.push_back({kind, -1, static_cast<int16_t>(q), static_cast<int16_t>(p++)});
    };
    auto all_qubits = [n]() {
        std::vector<int> qs(n);
        for (int i = 0; i < n; ++i) qs[i] = i;
        return qs;
    };

    for (int layer = 0; layer < n_layers; ++layer) {
        switch (topology) {
            case Topology::Alternate: {
                for (int parity = 0; parity < 2; ++parity) {
                    std::vector<int> qubits;
                    std::vector<std::pair<int, int>> pairs;
                    for (int i = parity; i + 1 < n; i += 2) {
                        pairs.emplace_back(i, i + 1);
                        qubits.push_back(i);
                        qubits.push_back(i + 1);
                    }
                    rot_column(Gate::RY, qubits);
                    rot_column(Gate::RZ, qubits);
                    auto& ent = stage();
                    for (auto [a, b] : pairs)
                        ent.push_back({Gate::CNOT, static_cast<int16_t>(a), static_cast<int16_t>(b), -1});
                }
                break;
            }
            case Topology::Cascade: {
                rot_column(Gate::RY, all_qubits());
                rot_column(Gate::RZ, all_qubits());
                for (int i = 0; i < n; ++i) {
                    auto& s = stage();
                    s.push_back({Gate::CRX, static_cast<int16_t>(i),
                                 static_cast<int16_t>((i + 1) % n), static_cast<int16_t>(p++)});
                }
                break;
            }
            case Topology::CrossMesh: {
                rot_column(Gate::RY, all_qubits());
                rot_column(Gate::RZ, all_qubits());
                rot_column(Gate::RY, all_qubits());
                rot_column(Gate::RZ, all_qubits());
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < n; ++j) {
                        if (j == i) continue;
                        auto& s = stage();
                        s.push_back({Gate::CRZ, static_cast<int16_t>(i), static_cast<int16_t>(j),
                                     static_cast<int16_t>(p++)});
                    }
                }
                break;
            }
            case Topology::Layered: {
                rot_column(Gate::RX, all_qubits());
                rot_column(Gate::RZ, all_qubits());
                for (int parity = 0; parity < 2; ++parity) {
                    auto& ent = stage();
                    for (int i = parity; i + 1 < n; i += 2)
                        ent.push_back({Gate::CNOT, static_cast<int16_t>(i),
                                       static_cast<int16_t>(i + 1), -1});
                }
                rot_column(Gate::RX, all_qubits());
                rot_column(Gate::RZ, all_qubits());
                break;
            }
        }
    }
    layout.n_params = p;

    // The layout must reproduce the structural formulas exactly.
    if (layout.n_params != topology_param_count(topology, n, n_layers))
        throw std::logic_error("ansatz parameter count does not match its formula");
    if (layout.depth() != topology_depth(topology, n, n_layers))
        throw std::logic_error("ansatz depth does not match its formula");
    if (layout.two_qubit_gates() != topology_two_qubit_count(topology, n, n_layers))
        throw std::logic_error("ansatz two-qubit gate count does not match its formula");
    return layout;
}

/// Run the ansatz over a flat parameter slice (lifted to constant jets).
template <class S>
void apply_ansatz(StateVector<S>& st, const AnsatzLayout& layout, std::span<const S> params) {
    if (static_cast<int>(params.size()) != layout.n_params)
        throw std::invalid_argument("ansatz parameter slice has the wrong length");
    for (const auto& stage : layout.stages) {
        for (const auto& g : stage) {
            if (g.kind == Gate::CNOT) {
                apply_gate<S>(st, Gate::CNOT, g.target, g.control, nullptr);
            } else {
                const Jet<S> theta = Jet<S>::constant(params[g.param], st.jet_dim);
                apply_gate(st, g.kind, g.target, g.control, &theta);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Name parsing (experiment configs select by string)

inline Topology topology_from_string(const std::string& s) {
    if (s == "alternate") return Topology::Alternate;
    if (s == "cascade") return Topology::Cascade;
    if (s == "cross-mesh") return Topology::CrossMesh;
    if (s == "layered") return Topology::Layered;
    throw std::invalid_argument("unknown topology: " + s);
}

inline std::string to_string(Topology t) {
    switch (t) {
        case Topology::Alternate: return "alternate";
        case Topology::Cascade: return "cascade";
        case Topology::CrossMesh: return "cross-mesh";
        case Topology::Layered: return "layered";
    }
    return {};
}

inline Embedding embedding_from_string(const std::string& s) {
    if (s == "angle") return Embedding::Angle;
    if (s == "amplitude") return Embedding::Amplitude;
    throw std::invalid_argument("unknown embedding: " + s);
}

inline std::string to_string(Embedding e) {
    return e == Embedding::Angle ? "angle" : "amplitude";
}

}  // namespace qpinn::dv
