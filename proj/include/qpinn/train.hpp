#pragma once

// The optimization loop: Adam with global-norm gradient clipping, a
// reduce-on-plateau learning-rate schedule, per-run telemetry, and multi-seed
// statistics.
//
// One "epoch" is one optimizer step on one freshly sampled batch. Loss
// gradients come from reverse accumulation over a per-point tape: each
// collocation point is recorded, seeded with d(total)/d(residual) =
// 2 w r / N, swept backward, and its contribution added to the batch
// gradient in point order, which keeps runs bit-identical for a fixed seed.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpinn/net.hpp"
#include "qpinn/pde.hpp"

namespace qpinn::trainer {

using net::HybridModel;
using pde::CollocationBatch;
using pde::PdeProblem;
using pde::PointRole;

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    int64_t step = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update, in place.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      double lr, const AdamConfig& cfg = {}) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam buffers disagree in length");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i]))
            throw std::runtime_error("non-finite gradient component at index " +
                                     std::to_string(i));
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

/// Scale the gradient to `max_norm` when it exceeds it; returns the pre-clip
/// norm.
inline double clip_gradients(std::span<double> grads, double max_norm) {
    if (max_norm <= 0.0) throw std::invalid_argument("clip norm must be positive");
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (double& g : grads) g *= s;
    }
    return norm;
}

struct SchedulerConfig {
    double factor = 0.9;
    int patience = 1000;
    double min_lr = 1e-6;
};

/// Reduce-on-plateau: when the loss has not strictly improved for `patience`
/// consecutive steps, multiply the rate by `factor` (clamped at min_lr).
class PlateauScheduler {
  public:
    PlateauScheduler(double lr, SchedulerConfig cfg) : lr_(lr), cfg_(cfg) {}

    double step(double loss) {
        if (loss < best_) {
            best_ = loss;
            stale_ = 0;
        } else if (++stale_ >= cfg_.patience) {
            lr_ = std::max(cfg_.min_lr, lr_ * cfg_.factor);
            stale_ = 0;
        }
        return lr_;
    }

    double lr() const { return lr_; }

  private:
    double lr_;
    SchedulerConfig cfg_;
    double best_ = std::numeric_limits<double>::infinity();
    int stale_ = 0;
};

// ---------------------------------------------------------------------------
// Loss evaluation

struct LossBreakdown {
    double total = 0.0;
    std::vector<double> per_term;
};

namespace detail {

inline int stream_count(const PdeProblem& p, const pde::StreamSpec& s,
                        const CollocationBatch& batch) {
    switch (s.role) {
        case PointRole::Interior: return batch.interior_count();
        case PointRole::Initial: return batch.initial_count();
        case PointRole::Boundary: {
            int n = 0;
            for (std::size_t seg = 0; seg < p.segments.size(); ++seg)
                if (s.covers_segment(static_cast<int>(seg)))
                    n += batch.boundary_count(static_cast<int>(seg));
            return n;
        }
    }
    return 0;
}

inline int role_jet_dim(const PdeProblem& p, PointRole role) {
    switch (role) {
        case PointRole::Interior: return p.d_in;
        case PointRole::Boundary: return 0;  // boundary streams read values only
        case PointRole::Initial: return p.initial_needs_derivatives ? p.d_in : 0;
    }
    return 0;
}

template <class F>
void for_each_point(const PdeProblem& p, const CollocationBatch& batch, F&& visit) {
    const int d = batch.d;
    for (int i = 0; i < batch.interior_count(); ++i)
        visit(PointRole::Interior, -1,
              std::span<const double>(batch.interior.data() + static_cast<std::size_t>(i) * d, d));
    for (std::size_t seg = 0; seg < batch.boundary.size(); ++seg)
        for (int i = 0; i < batch.boundary_count(static_cast<int>(seg)); ++i)
            visit(PointRole::Boundary, static_cast<int>(seg),
                  std::span<const double>(batch.boundary[seg].data() +
                                              static_cast<std::size_t>(i) * d,
                                          d));
    for (int i = 0; i < batch.initial_count(); ++i)
        visit(PointRole::Initial, -1,
              std::span<const double>(batch.initial.data() + static_cast<std::size_t>(i) * d, d));
}

inline LossBreakdown assemble(const PdeProblem& p, std::span<const double> stream_sums,
                              std::span<const int> counts) {
    LossBreakdown out;
    out.per_term.assign(p.terms.size(), 0.0);
    for (std::size_t s = 0; s < p.streams.size(); ++s) {
        if (counts[s] == 0) continue;
        out.per_term[p.streams[s].term] += stream_sums[s] / counts[s];
    }
    for (std::size_t t = 0; t < p.terms.size(); ++t)
        out.total += p.terms[t].weight * out.per_term[t];
    return out;
}

}  // namespace detail

/// Loss of the model over one batch, values only (used by oracles and
/// finite-difference checks). `slots` overrides the model's own parameters.
inline LossBreakdown loss_value(const PdeProblem& p, const HybridModel& model,
                                std::span<const double> slots, const CollocationBatch& batch) {
    std::vector<double> sums(p.streams.size(), 0.0);
    std::vector<int> counts(p.streams.size(), 0);
    for (std::size_t s = 0; s < p.streams.size(); ++s)
        counts[s] = detail::stream_count(p, p.streams[s], batch);

    std::vector<std::pair<int, double>> res;
    detail::for_each_point(p, batch, [&](PointRole role, int seg, std::span<const double> x) {
        const int jd = detail::role_jet_dim(p, role);
        std::vector<ad::Jet<double>> coords;
        if (jd > 0) {
            coords = ad::seed_inputs<double>(x);
        } else {
            for (double c : x) coords.push_back(ad::Jet<double>::constant(c, 0));
        }
        const auto u = net::forward<double>(model, slots, coords);
        res.clear();
        pde::collect_residuals<double>(p, role, seg, u, x, res);
        for (const auto& [stream, r] : res) sums[stream] += r * r;
    });
    return detail::assemble(p, sums, counts);
}

inline LossBreakdown loss_value(const PdeProblem& p, const HybridModel& model,
                                const CollocationBatch& batch) {
    return loss_value(p, model, model.params(), batch);
}

/// Loss and its gradient with respect to the trainable parameters. Every
/// point gets its own tape pass; `min_norm` (when given) receives the
/// smallest CV state norm seen in this batch.
inline LossBreakdown loss_and_gradient(const PdeProblem& p, const HybridModel& model,
                                       const CollocationBatch& batch, ad::Tape& tape,
                                       std::vector<double>& grad, double* min_norm = nullptr) {
    const auto& trainable = model.trainable();
    grad.assign(trainable.size(), 0.0);
    std::vector<double> sums(p.streams.size(), 0.0);
    std::vector<int> counts(p.streams.size(), 0);
    for (std::size_t s = 0; s < p.streams.size(); ++s)
        counts[s] = detail::stream_count(p, p.streams[s], batch);
    if (min_norm != nullptr) *min_norm = 1.0;

    ad::TapeScope scope(tape);
    std::vector<ad::Var> slots(model.total_slots());
    std::vector<std::pair<int, ad::Var>> res;
    std::vector<std::pair<int32_t, double>> seeds;
    std::vector<double> adjoint;

    detail::for_each_point(p, batch, [&](PointRole role, int seg, std::span<const double> x) {
        tape.clear();
        for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = ad::Var(model.params()[i]);
        for (std::size_t i = 0; i < trainable.size(); ++i)
            slots[trainable[i]] = ad::make_leaf(model.params()[trainable[i]]);

        const int jd = detail::role_jet_dim(p, role);
        std::vector<ad::Jet<ad::Var>> coords;
        for (int k = 0; k < static_cast<int>(x.size()); ++k) {
            coords.push_back(jd > 0 ? ad::Jet<ad::Var>::seed(ad::Var(x[k]), k, jd)
                                    : ad::Jet<ad::Var>::constant(ad::Var(x[k]), 0));
        }
        double point_norm = 1.0;
        const auto u = net::forward<ad::Var>(model, slots, coords,
                                             min_norm != nullptr ? &point_norm : nullptr);
        if (min_norm != nullptr && point_norm < *min_norm) *min_norm = point_norm;

        res.clear();
        seeds.clear();
        pde::collect_residuals<ad::Var>(p, role, seg, u, x, res);
        for (const auto& [stream, r] : res) {
            sums[stream] += r.v * r.v;
            if (r.is_const() || counts[stream] == 0) continue;
            const double w = p.terms[p.streams[stream].term].weight;
            seeds.emplace_back(r.id, 2.0 * w * r.v / counts[stream]);
        }
        if (seeds.empty()) return;
        tape.backward(seeds, adjoint);
        for (std::size_t i = 0; i < trainable.size(); ++i) grad[i] += adjoint[i];
    });
    return detail::assemble(p, sums, counts);
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
    int epochs = 2000;
    int batch = 64;
    double lr = 0.005;
    double clip = 1.0;
    SchedulerConfig scheduler{};
    uint64_t seed = 0;
    double min_cv_norm = 0.5;  // abort when the CV state escapes the cutoff
    int log_every = 0;         // 0: silent
};

/// Published defaults: DV runs use lr 5e-3, unit clipping and a 0.9/1000
/// plateau schedule; CV runs use lr 1e-4, 0.1 clipping and a 0.5/20 schedule.
inline TrainConfig default_train_config(net::ModelKind kind) {
    TrainConfig cfg;
    if (kind == net::ModelKind::CvHybrid) {
        cfg.lr = 1e-4;
        cfg.clip = 0.1;
        cfg.scheduler = {0.5, 20, 1e-6};
    } else {
        cfg.lr = 0.005;
        cfg.clip = 1.0;
        cfg.scheduler = {0.9, 1000, 1e-6};
    }
    return cfg;
}

struct RunRecord {
    std::vector<double> total_history;
    std::vector<std::vector<double>> term_history;  // [term][epoch]
    std::vector<std::string> term_names;
    std::vector<double> lr_history;
    double time_per_iter = 0.0;  // mean seconds
    std::size_t peak_memory_bytes = 0;
    std::vector<double> final_params;
    uint64_t seed = 0;
    bool aborted = false;
    std::string abort_reason;
};

/// Resident-set high-water mark of this process, from /proc.
inline std::size_t peak_memory_bytes() {
    std::ifstream status("/proc/self/status");
    std::string key;
    while (status >> key) {
        if (key == "VmHWM:") {
            std::size_t kb = 0;
            status >> kb;
            return kb * 1024;
        }
        status.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    }
    return 0;
}

/// Optimize the model in place. The model must already be initialized; the
/// batch stream is seeded from cfg.seed, so (initialization seed, config)
/// determines the record bit for bit.
inline RunRecord train(HybridModel& model, const PdeProblem& problem, const TrainConfig& cfg) {
    RunRecord rec;
    rec.seed = cfg.seed;
    for (const auto& t : problem.terms) rec.term_names.push_back(t.name);
    rec.term_history.resize(problem.terms.size());

    pde::BatchSampler sampler = pde::make_sampler(problem, cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
    AdamState adam(model.trainable_count());
    PlateauScheduler scheduler(cfg.lr, cfg.scheduler);
    ad::Tape tape;
    std::vector<double> grad;
    std::vector<double> theta(model.trainable_count());
    const bool is_cv = model.spec().kind == net::ModelKind::CvHybrid;

    double elapsed = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const CollocationBatch batch = sampler.next(cfg.batch);

        double min_norm = 1.0;
        LossBreakdown loss;
        try {
            loss = loss_and_gradient(problem, model, batch, tape, grad,
                                     is_cv ? &min_norm : nullptr);
        } catch (const std::exception& e) {
            rec.aborted = true;
            rec.abort_reason = e.what();
            break;
        }
        if (!std::isfinite(loss.total)) {
            rec.aborted = true;
            rec.abort_reason = "non-finite loss at epoch " + std::to_string(epoch);
            break;
        }
        if (is_cv && min_norm < cfg.min_cv_norm) {
            rec.aborted = true;
            rec.abort_reason = "cv state norm " + std::to_string(min_norm) +
                               " fell below " + std::to_string(cfg.min_cv_norm) +
                               " (state escaped the cutoff) at epoch " + std::to_string(epoch);
            break;
        }

        rec.total_history.push_back(loss.total);
        for (std::size_t t = 0; t < loss.per_term.size(); ++t)
            rec.term_history[t].push_back(loss.per_term[t]);
        rec.lr_history.push_back(scheduler.lr());

        clip_gradients(grad, cfg.clip);
        const auto& idx = model.trainable();
        for (std::size_t i = 0; i < idx.size(); ++i) theta[i] = model.params()[idx[i]];
        try {
            adam_step(theta, grad, adam, scheduler.lr());
        } catch (const std::exception& e) {
            rec.aborted = true;
            rec.abort_reason = e.what();
            break;
        }
        for (std::size_t i = 0; i < idx.size(); ++i) model.params()[idx[i]] = theta[i];

        scheduler.step(loss.total);
        elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (cfg.log_every > 0 && (epoch % cfg.log_every == 0 || epoch + 1 == cfg.epochs)) {
            std::fprintf(stderr, "epoch %6d  loss %.6e  lr %.3e\n", epoch, loss.total,
                         scheduler.lr());
        }
    }
    const std::size_t steps = rec.total_history.size();
    rec.time_per_iter = steps > 0 ? elapsed / static_cast<double>(steps) : 0.0;
    rec.peak_memory_bytes = peak_memory_bytes();
    rec.final_params = model.params();
    return rec;
}

// ---------------------------------------------------------------------------
// Multi-run statistics

struct Stat {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Mean and sample standard deviation (n-1 denominator, 0 for n = 1).
inline Stat mean_std(std::span<const double> xs) {
    Stat s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double acc = 0.0;
        for (double x : xs) acc += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    }
    return s;
}

/// Train `n_runs` independently initialized copies with consecutive seeds.
template <class ModelFactory>
std::vector<RunRecord> multi_run(ModelFactory&& make_model, const PdeProblem& problem,
                                 const TrainConfig& base, int n_runs,
                                 std::vector<HybridModel>* models_out = nullptr) {
    if (n_runs < 1) throw std::invalid_argument("multi_run needs at least one run");
    std::vector<RunRecord> runs;
    for (int i = 0; i < n_runs; ++i) {
        HybridModel model = make_model();
        TrainConfig cfg = base;
        cfg.seed = base.seed + static_cast<uint64_t>(i);
        model.init_params(cfg.seed);
        runs.push_back(train(model, problem, cfg));
        if (models_out != nullptr) models_out->push_back(std::move(model));
    }
    return runs;
}

}  // namespace qpinn::trainer
