#pragma once

// Collocation-point sampling: a Sobol low-discrepancy stream for the Cavity
// problem, plain uniform draws elsewhere. Streams are deterministic; the
// Sobol construction uses the standard direction numbers for dimensions <= 3
// and never emits the all-zeros point.

#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "qpinn/rng.hpp"

namespace qpinn::pde {

enum class Strategy { UniformRandom, Sobol };

class SobolSequence {
  public:
    explicit SobolSequence(int dim) : dim_(dim) {
        if (dim < 1 || dim > 3) throw std::invalid_argument("sobol dimension must be 1..3");
        // Primitive polynomials and initial direction numbers:
        //   dim 0: van der Corput (m_j = 1)
        //   dim 1: x + 1,        m = 1
        //   dim 2: x^2 + x + 1,  m = 1, 3
        for (int j = 0; j < kBits; ++j) v_[0][j] = 1u << (31 - j);
        {
            std::array<uint32_t, kBits> m{};
            m[0] = 1;
            for (int j = 1; j < kBits; ++j) m[j] = (m[j - 1] << 1) ^ m[j - 1];
            for (int j = 0; j < kBits; ++j) v_[1][j] = m[j] << (31 - j);
        }
        {
            std::array<uint32_t, kBits> m{};
            m[0] = 1;
            m[1] = 3;
            for (int j = 2; j < kBits; ++j) m[j] = (m[j - 1] << 1) ^ (m[j - 2] << 2) ^ m[j - 2];
            for (int j = 0; j < kBits; ++j) v_[2][j] = m[j] << (31 - j);
        }
    }

    /// Next point in [0,1)^dim (Gray-code order, origin skipped).
    void next(std::span<double> out) {
        if (static_cast<int>(out.size()) != dim_)
            throw std::invalid_argument("sobol output span size mismatch");
        ++index_;
        const int j = std::countr_zero(index_);
        for (int d = 0; d < dim_; ++d) {
            x_[d] ^= v_[d][j];
            out[d] = static_cast<double>(x_[d]) * 0x1.0p-32;
        }
    }

  private:
    static constexpr int kBits = 32;
    int dim_;
    uint32_t index_ = 0;
    std::array<uint32_t, 3> x_{};
    std::array<std::array<uint32_t, kBits>, 3> v_{};
};

/// One stream of unit-cube points of a fixed dimension.
class PointSource {
  public:
    PointSource(Strategy strategy, int dim, uint64_t seed)
        : strategy_(strategy), dim_(dim), sobol_(strategy == Strategy::Sobol ? dim : 1), rng_(seed) {}

    void next(std::span<double> out) {
        if (strategy_ == Strategy::Sobol) {
            sobol_.next(out);
        } else {
            for (auto& x : out) x = rng_.uniform();
        }
    }

    int dim() const { return dim_; }

  private:
    Strategy strategy_;
    int dim_;
    SobolSequence sobol_;
    Rng rng_;
};

struct Segment {
    int fixed_dim = 0;
    double value = 0.0;
};

struct CollocationBatch {
    int d = 0;
    std::vector<double> interior;               // row-major, n x d
    std::vector<std::vector<double>> boundary;  // per segment
    std::vector<double> initial;

    int interior_count() const { return d == 0 ? 0 : static_cast<int>(interior.size()) / d; }
    int boundary_count(int seg) const {
        return d == 0 ? 0 : static_cast<int>(boundary[seg].size()) / d;
    }
    int initial_count() const { return d == 0 ? 0 : static_cast<int>(initial.size()) / d; }
};

/// Draws interior/boundary/initial batches for a box domain. Boundary points
/// cycle round-robin over the segments so every wall receives the same share.
class BatchSampler {
  public:
    BatchSampler(Strategy strategy, std::vector<double> lo, std::vector<double> hi,
                 std::vector<Segment> segments, bool has_initial, uint64_t seed)
        : lo_(std::move(lo)),
          hi_(std::move(hi)),
          segments_(std::move(segments)),
          has_initial_(has_initial),
          d_(static_cast<int>(lo_.size())),
          interior_src_(strategy, d_, seed),
          face_src_(strategy, d_ > 1 ? d_ - 1 : 1, seed + 1),
          initial_src_(strategy, d_ > 1 ? d_ - 1 : 1, seed + 2) {}

    CollocationBatch next(int batch_size) {
        CollocationBatch b;
        b.d = d_;
        std::vector<double> u(static_cast<std::size_t>(d_));

        b.interior.reserve(static_cast<std::size_t>(batch_size) * d_);
        for (int i = 0; i < batch_size; ++i) {
            interior_src_.next(u);
            for (int k = 0; k < d_; ++k) b.interior.push_back(scale(k, u[k]));
        }

        b.boundary.resize(segments_.size());
        std::vector<double> f(static_cast<std::size_t>(d_ > 1 ? d_ - 1 : 1));
        for (int i = 0; i < batch_size; ++i) {
            const auto seg = static_cast<std::size_t>(i % segments_.size());
            face_src_.next(f);
            int fi = 0;
            for (int k = 0; k < d_; ++k) {
                if (k == segments_[seg].fixed_dim) {
                    b.boundary[seg].push_back(segments_[seg].value);
                } else {
                    b.boundary[seg].push_back(scale(k, f[fi++]));
                }
            }
        }

        if (has_initial_) {
            b.initial.reserve(static_cast<std::size_t>(batch_size) * d_);
            for (int i = 0; i < batch_size; ++i) {
                initial_src_.next(f);
                int fi = 0;
                for (int k = 0; k < d_; ++k) {
                    b.initial.push_back(k == 0 ? lo_[0] : scale(k, f[fi++]));
                }
            }
        }
        return b;
    }

  private:
    double scale(int k, double u) const { return lo_[k] + (hi_[k] - lo_[k]) * u; }

    std::vector<double> lo_, hi_;
    std::vector<Segment> segments_;
    bool has_initial_;
    int d_;
    PointSource interior_src_, face_src_, initial_src_;
};

}  // namespace qpinn::pde
