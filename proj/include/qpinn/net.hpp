#pragma once

// Dense layers and the hybrid models: a classical preprocessor feeding a
// quantum core (DV or CV) whose measurements are decoded by a classical
// postprocessor, plus the two purely classical baselines.
//
// All trainable state lives in one flat 64-bit parameter vector. Layout:
//   hybrid:    [pre W1 | pre b1 | pre W2 | pre b2 | quantum slots |
//               post W1 | post b1 | post W2 | post b2]
//   classical: [W1 | b1 | W2 | b2 | ...]
// with weight matrices stored row-major (out x in). Phase-free CV models
// keep their frozen phase slots in the vector; only `trainable` indices are
// optimized.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpinn/cv.hpp"
#include "qpinn/dv.hpp"
#include "qpinn/jet.hpp"
#include "qpinn/rng.hpp"

namespace qpinn::net {

using ad::Acc;
using ad::Jet;
using ad::jet_comp;

enum class ModelKind { DvHybrid, CvHybrid, Classical1, Classical2 };

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "dv") return ModelKind::DvHybrid;
    if (s == "cv") return ModelKind::CvHybrid;
    if (s == "classical-1") return ModelKind::Classical1;
    if (s == "classical-2") return ModelKind::Classical2;
    throw std::invalid_argument("unknown model kind: " + s);
}

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::DvHybrid: return "dv";
        case ModelKind::CvHybrid: return "cv";
        case ModelKind::Classical1: return "classical-1";
        case ModelKind::Classical2: return "classical-2";
    }
    return {};
}

struct DenseShape {
    int in = 0;
    int out = 0;
    bool tanh_act = false;

    int param_count() const { return (in + 1) * out; }
};

inline constexpr int kHiddenWidth = 50;

struct ModelSpec {
    ModelKind kind = ModelKind::Classical2;
    int d_in = 2;
    int d_out = 1;
    // DV core
    dv::Embedding embedding = dv::Embedding::Angle;
    dv::Topology topology = dv::Topology::Cascade;
    int n_qubits = 5;
    int n_layers = 1;
    // CV core
    cv::CvOptions cv;
};

/// Width of the quantum-facing interface (preprocessor output count).
inline int core_width(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::DvHybrid: return spec.n_qubits;
        case ModelKind::CvHybrid: return spec.cv.n_qumodes;
        default: return kHiddenWidth;
    }
}

inline std::vector<DenseShape> dense_stack(const ModelSpec& spec) {
    std::vector<DenseShape> layers;
    switch (spec.kind) {
        case ModelKind::Classical2:
            layers = {{spec.d_in, kHiddenWidth, true},
                      {kHiddenWidth, kHiddenWidth, true},
                      {kHiddenWidth, spec.d_out, false}};
            break;
        case ModelKind::Classical1:
            layers = {{spec.d_in, kHiddenWidth, true},
                      {kHiddenWidth, kHiddenWidth, true},
                      {kHiddenWidth, kHiddenWidth, true},
                      {kHiddenWidth, kHiddenWidth, true},
                      {kHiddenWidth, spec.d_out, false}};
            break;
        default: {
            const int q = core_width(spec);
            layers = {{spec.d_in, kHiddenWidth, true},
                      {kHiddenWidth, q, false},
                      {q, kHiddenWidth, true},
                      {kHiddenWidth, spec.d_out, false}};
            break;
        }
    }
    return layers;
}

inline int quantum_param_count(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::DvHybrid:
            return dv::topology_param_count(spec.topology, spec.n_qubits, spec.n_layers);
        case ModelKind::CvHybrid: return cv::make_cv_layout(spec.cv).total;
        default: return 0;
    }
}

/// Total parameter slots (frozen phase slots included).
inline int count_param_slots(const ModelSpec& spec) {
    int total = quantum_param_count(spec);
    for (const auto& l : dense_stack(spec)) total += l.param_count();
    return total;
}

class HybridModel {
  public:
    explicit HybridModel(const ModelSpec& spec) : spec_(spec), layers_(dense_stack(spec)) {
        if (spec.kind == ModelKind::DvHybrid) {
            ansatz_ = dv::make_ansatz(spec.topology, spec.n_qubits, spec.n_layers);
            if (spec.embedding == dv::Embedding::Amplitude &&
                core_width(spec) > (1 << spec.n_qubits))
                throw std::invalid_argument("amplitude embedding overflows the register");
        }
        if (spec.kind == ModelKind::CvHybrid) {
            cv_layout_ = cv::make_cv_layout(spec.cv);
            if (spec.cv.nonlinearity == cv::Nonlinearity::CubicPhase)
                cubic_ = cv::make_cubic_basis(spec.cv.cutoff);
        }

        // Flat layout: dense layers with the quantum block spliced in after
        // the preprocessor (index 2 of the dense stack for hybrids).
        int offset = 0;
        const int quantum_after = is_hybrid() ? 2 : static_cast<int>(layers_.size());
        layer_offsets_.resize(layers_.size());
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (static_cast<int>(i) == quantum_after) {
                quantum_offset_ = offset;
                offset += quantum_param_count(spec_);
            }
            layer_offsets_[i] = offset;
            offset += layers_[i].param_count();
        }
        if (static_cast<int>(layers_.size()) == quantum_after) {
            quantum_offset_ = offset;
            offset += quantum_param_count(spec_);
        }
        params_.assign(static_cast<std::size_t>(offset), 0.0);

        frozen_.assign(params_.size(), 0);
        if (spec.kind == ModelKind::CvHybrid) {
            for (int i = 0; i < cv_layout_.total; ++i)
                frozen_[quantum_offset_ + i] = cv_layout_.frozen[i];
        }
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (!frozen_[i]) trainable_.push_back(static_cast<int32_t>(i));
    }

    const ModelSpec& spec() const { return spec_; }
    bool is_hybrid() const {
        return spec_.kind == ModelKind::DvHybrid || spec_.kind == ModelKind::CvHybrid;
    }
    const dv::AnsatzLayout& ansatz() const { return ansatz_; }
    const cv::CvParamLayout& cv_layout() const { return cv_layout_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t total_slots() const { return params_.size(); }
    const std::vector<int32_t>& trainable() const { return trainable_; }
    std::size_t trainable_count() const { return trainable_.size(); }
    int quantum_offset() const { return quantum_offset_; }
    const std::vector<DenseShape>& layers() const { return layers_; }
    int layer_offset(std::size_t i) const { return layer_offsets_[i]; }

    /// Xavier-uniform weights, zero biases; quantum parameters per their
    /// published initialization scales.
    void init_params(uint64_t seed) {
        Rng rng(seed);
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            const double bound = std::sqrt(6.0 / (l.in + l.out));
            double* w = params_.data() + layer_offsets_[i];
            for (int k = 0; k < l.in * l.out; ++k) w[k] = rng.uniform(-bound, bound);
            for (int k = 0; k < l.out; ++k) w[l.in * l.out + k] = 0.0;
        }
        if (spec_.kind == ModelKind::DvHybrid) {
            double* q = params_.data() + quantum_offset_;
            for (int k = 0; k < ansatz_.n_params; ++k)
                q[k] = rng.uniform(-std::numbers::pi, std::numbers::pi);
        } else if (spec_.kind == ModelKind::CvHybrid) {
            double* q = params_.data() + quantum_offset_;
            const auto& lay = cv_layout_;
            for (int layer = 0; layer < lay.n_layers; ++layer) {
                const int base = layer * lay.per_layer;
                auto fill = [&](int off, int count, double stddev) {
                    for (int k = 0; k < count; ++k) q[base + off + k] = rng.normal(stddev);
                };
                const double phase_scale = 0.01 * std::numbers::pi;
                fill(lay.int1_psi, lay.pairs, phase_scale);
                fill(lay.int1_phi, lay.pairs, phase_scale);
                fill(lay.int1_rot, lay.rotations, phase_scale);
                fill(lay.sq_r, lay.n_modes, 0.001);
                fill(lay.sq_phi, lay.n_modes, phase_scale);
                fill(lay.int2_psi, lay.pairs, phase_scale);
                fill(lay.int2_phi, lay.pairs, phase_scale);
                fill(lay.int2_rot, lay.rotations, phase_scale);
                fill(lay.disp_alpha, lay.n_modes, 0.001);
                fill(lay.disp_phi, lay.n_modes, phase_scale);
                fill(lay.nl, lay.nl_count, 0.001);
            }
            for (std::size_t i = 0; i < params_.size(); ++i)
                if (frozen_[i]) params_[i] = 0.0;
        }
    }

    const cv::CubicBasis* cubic_basis() const {
        return spec_.cv.nonlinearity == cv::Nonlinearity::CubicPhase ? &cubic_ : nullptr;
    }

  private:
    ModelSpec spec_;
    std::vector<DenseShape> layers_;
    std::vector<int> layer_offsets_;
    int quantum_offset_ = 0;
    dv::AnsatzLayout ansatz_;
    cv::CvParamLayout cv_layout_;
    cv::CubicBasis cubic_;
    std::vector<double> params_;
    std::vector<uint8_t> frozen_;
    std::vector<int32_t> trainable_;
};

/// Human-readable architecture label used in result tables.
inline std::string display_name(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::Classical1: return "Model-1";
        case ModelKind::Classical2: return "Model-2";
        case ModelKind::DvHybrid: {
            std::string e = spec.embedding == dv::Embedding::Angle ? "Angle" : "Amplitude";
            std::string t;
            switch (spec.topology) {
                case dv::Topology::Alternate: t = "Alternate"; break;
                case dv::Topology::Cascade: t = "Cascade"; break;
                case dv::Topology::CrossMesh: t = "Cross-mesh"; break;
                case dv::Topology::Layered: t = "Layered"; break;
            }
            return e + "-" + t;
        }
        case ModelKind::CvHybrid:
            return "CV-" + cv::to_string(spec.cv.measurement) + "-" +
                   cv::to_string(spec.cv.nonlinearity) + "-" +
                   cv::to_string(spec.cv.parameterization);
    }
    return {};
}

namespace detail {

template <class S>
std::vector<Jet<S>> dense_forward(std::span<const S> slots, int offset, const DenseShape& shape,
                                  std::span<const Jet<S>> x, int jet_dim) {
    const int nc = ad::comp_count(jet_dim);
    const S* w = slots.data() + offset;
    const S* b = w + static_cast<std::size_t>(shape.in) * shape.out;
    std::vector<Jet<S>> y(static_cast<std::size_t>(shape.out));
    for (int j = 0; j < shape.out; ++j) {
        Jet<S> pre;
        pre.dim = jet_dim;
        const S* row = w + static_cast<std::size_t>(j) * shape.in;
        for (int c = 0; c < nc; ++c) {
            Acc<S> acc;
            for (int i = 0; i < shape.in; ++i) acc.add(row[i], jet_comp(x[i], c, jet_dim));
            if (c == 0) acc.add(b[j], 1.0);
            jet_comp(pre, c, jet_dim) = acc.done();
        }
        y[j] = shape.tanh_act ? ad::tanh(pre) : pre;
    }
    return y;
}

}  // namespace detail

/// Forward pass through preprocessor, core and postprocessor. `slots` is the
/// full flat parameter vector as S (leaves for Var, raw values for double);
/// coords are seeded jets. When `norm_telemetry` is given it receives the CV
/// state norm of this pass.
template <class S>
std::vector<Jet<S>> forward(const HybridModel& model, std::span<const S> slots,
                            std::span<const Jet<S>> coords, double* norm_telemetry = nullptr) {
    const auto& spec = model.spec();
    if (static_cast<int>(coords.size()) != spec.d_in)
        throw std::invalid_argument("coordinate count does not match the model input dimension");
    if (slots.size() != model.total_slots())
        throw std::invalid_argument("parameter slot count mismatch");
    const int jet_dim = coords.empty() ? 0 : coords[0].dim;

    std::vector<Jet<S>> h(coords.begin(), coords.end());
    const auto& layers = model.layers();
    const int quantum_after = model.is_hybrid() ? 2 : static_cast<int>(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (static_cast<int>(i) == quantum_after) {
            const std::span<const S> q =
                slots.subspan(static_cast<std::size_t>(model.quantum_offset()),
                              static_cast<std::size_t>(quantum_param_count(spec)));
            if (spec.kind == ModelKind::DvHybrid) {
                dv::StateVector<S> st =
                    spec.embedding == dv::Embedding::Angle
                        ? dv::angle_embed<S>(h, spec.n_qubits, jet_dim)
                        : dv::amplitude_embed<S>(h, spec.n_qubits, jet_dim);
                dv::apply_ansatz(st, model.ansatz(), q);
                h = dv::measure_pauli_z(st);
            } else {
                auto res = cv::cv_forward<S>(spec.cv, model.cv_layout(), q, h, jet_dim,
                                             model.cubic_basis());
                if (norm_telemetry != nullptr) *norm_telemetry = res.norm_sq_value;
                h = std::move(res.outputs);
            }
        }
        h = detail::dense_forward<S>(slots, model.layer_offset(i), layers[i], h, jet_dim);
    }
    return h;
}

/// Plain-double forward over raw coordinates (inference / rendering).
inline std::vector<Jet<double>> forward_values(const HybridModel& model,
                                               std::span<const double> coords, int jet_dim = 0) {
    std::vector<Jet<double>> seeds;
    if (jet_dim > 0) {
        seeds = ad::seed_inputs<double>(coords);
    } else {
        for (double c : coords) seeds.push_back(Jet<double>::constant(c, 0));
    }
    return forward<double>(model, model.params(), seeds);
}

/// The published baselines: Model-2 keeps only the pre/postprocessing stack,
/// Model-1 inserts two more hidden layers.
inline HybridModel build_baseline(ModelKind kind, int d_in, int d_out) {
    if (kind != ModelKind::Classical1 && kind != ModelKind::Classical2)
        throw std::invalid_argument("baseline kind must be classical");
    ModelSpec spec;
    spec.kind = kind;
    spec.d_in = d_in;
    spec.d_out = d_out;
    return HybridModel(spec);
}

}  // namespace qpinn::net
