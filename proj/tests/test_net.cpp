#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qpinn/net.hpp"

using namespace qpinn;
using namespace qpinn::net;
using ad::Jet;
using ad::Var;
using Catch::Approx;

namespace {

ModelSpec dv_spec(int d_in, int d_out, dv::Embedding e, dv::Topology t) {
    ModelSpec s;
    s.kind = ModelKind::DvHybrid;
    s.d_in = d_in;
    s.d_out = d_out;
    s.embedding = e;
    s.topology = t;
    return s;
}

ModelSpec cv_spec(int d_in, int d_out, cv::Parameterization par = cv::Parameterization::Full) {
    ModelSpec s;
    s.kind = ModelKind::CvHybrid;
    s.d_in = d_in;
    s.d_out = d_out;
    s.cv.parameterization = par;
    return s;
}

}  // namespace

TEST_CASE("published trainable-parameter totals") {
    struct Row {
        dv::Topology topo;
        int in, out, expect;
    };
    // one row per (topology, problem-shape) cell of the result tables
    const std::vector<Row> rows = {
        {dv::Topology::Alternate, 2, 1, 772},  {dv::Topology::Cascade, 2, 1, 771},
        {dv::Topology::CrossMesh, 2, 1, 796},  {dv::Topology::Layered, 2, 1, 776},
        {dv::Topology::Alternate, 3, 3, 924},  {dv::Topology::Cascade, 3, 3, 923},
        {dv::Topology::CrossMesh, 3, 3, 948},  {dv::Topology::Layered, 3, 3, 928},
        {dv::Topology::Alternate, 3, 1, 822},  {dv::Topology::Cascade, 3, 1, 821},
        {dv::Topology::CrossMesh, 3, 1, 846},  {dv::Topology::Layered, 3, 1, 826},
    };
    for (const auto& row : rows) {
        for (auto emb : {dv::Embedding::Angle, dv::Embedding::Amplitude}) {
            HybridModel m(dv_spec(row.in, row.out, emb, row.topo));
            INFO(display_name(m.spec()) << " in=" << row.in << " out=" << row.out);
            REQUIRE(static_cast<int>(m.trainable_count()) == row.expect);
            REQUIRE(static_cast<int>(m.total_slots()) == row.expect);
        }
    }

    REQUIRE(build_baseline(ModelKind::Classical2, 2, 1).trainable_count() == 2751);
    REQUIRE(build_baseline(ModelKind::Classical2, 3, 1).trainable_count() == 2801);
    REQUIRE(build_baseline(ModelKind::Classical2, 3, 3).trainable_count() == 2903);
    REQUIRE(build_baseline(ModelKind::Classical1, 2, 1).trainable_count() == 7851);
    REQUIRE(build_baseline(ModelKind::Classical1, 3, 1).trainable_count() == 7901);
    REQUIRE(build_baseline(ModelKind::Classical1, 3, 3).trainable_count() == 8003);

    // CV hybrids under full parameterization (quadrature/Kerr defaults)
    REQUIRE(HybridModel(cv_spec(2, 1)).trainable_count() == 469);
    REQUIRE(HybridModel(cv_spec(3, 3)).trainable_count() == 621);
}

TEST_CASE("phase-free CV keeps slots but freezes phases") {
    HybridModel full(cv_spec(2, 1, cv::Parameterization::Full));
    HybridModel pf(cv_spec(2, 1, cv::Parameterization::PhaseFree));
    REQUIRE(full.total_slots() == pf.total_slots());
    REQUIRE(pf.trainable_count() == full.trainable_count() - 6);

    pf.init_params(3);
    const auto& lay = pf.cv_layout();
    const double* q = pf.params().data() + pf.quantum_offset();
    for (int k = 0; k < lay.pairs; ++k) {
        REQUIRE(q[lay.int1_phi + k] == 0.0);
        REQUIRE(q[lay.int2_phi + k] == 0.0);
    }
    for (int k = 0; k < lay.n_modes; ++k) {
        REQUIRE(q[lay.sq_phi + k] == 0.0);
        REQUIRE(q[lay.disp_phi + k] == 0.0);
    }
}

TEST_CASE("Xavier initialization bounds") {
    HybridModel m(dv_spec(2, 1, dv::Embedding::Angle, dv::Topology::Cascade));
    m.init_params(42);
    for (std::size_t i = 0; i < m.layers().size(); ++i) {
        const auto& l = m.layers()[i];
        const double bound = std::sqrt(6.0 / (l.in + l.out));
        const double* w = m.params().data() + m.layer_offset(i);
        bool nonzero = false;
        for (int k = 0; k < l.in * l.out; ++k) {
            REQUIRE(std::abs(w[k]) <= bound);
            nonzero = nonzero || w[k] != 0.0;
        }
        REQUIRE(nonzero);
        for (int k = 0; k < l.out; ++k) REQUIRE(w[l.in * l.out + k] == 0.0);
    }
}

TEST_CASE("all-zero parameters collapse the DV hybrid to zero output") {
    // zero weights -> zero quantum inputs -> <Z> = 1 -> tanh(0 * 1 + 0) = 0
    // -> output equals the final bias, which is zero.
    HybridModel m(dv_spec(2, 1, dv::Embedding::Angle, dv::Topology::Cascade));
    auto out = forward_values(m, std::vector<double>{0.3, -0.7});
    REQUIRE(out.size() == 1);
    REQUIRE(out[0].value() == 0.0);
}

TEST_CASE("hybrid forward jets match finite differences of the value") {
    for (auto spec :
         {dv_spec(2, 1, dv::Embedding::Angle, dv::Topology::Cascade),
          dv_spec(2, 1, dv::Embedding::Amplitude, dv::Topology::Layered),
          ModelSpec{ModelKind::Classical2, 2, 1}}) {
        HybridModel m(spec);
        m.init_params(7);
        const std::vector<double> x0 = {0.4, -0.2};

        auto value_at = [&](double x, double y) {
            return forward_values(m, std::vector<double>{x, y})[0].value();
        };
        auto out = forward_values(m, x0, 2);
        const double h = 1e-4;
        const double fx = (value_at(x0[0] + h, x0[1]) - value_at(x0[0] - h, x0[1])) / (2 * h);
        const double fy = (value_at(x0[0], x0[1] + h) - value_at(x0[0], x0[1] - h)) / (2 * h);
        const double fxx = (value_at(x0[0] + h, x0[1]) - 2 * value_at(x0[0], x0[1]) +
                            value_at(x0[0] - h, x0[1])) /
                           (h * h);
        const double fxy = (value_at(x0[0] + h, x0[1] + h) - value_at(x0[0] + h, x0[1] - h) -
                            value_at(x0[0] - h, x0[1] + h) + value_at(x0[0] - h, x0[1] - h)) /
                           (4 * h * h);
        INFO(display_name(spec));
        REQUIRE(out[0].g[0] == Approx(fx).margin(1e-6));
        REQUIRE(out[0].g[1] == Approx(fy).margin(1e-6));
        REQUIRE(out[0].hess(0, 0) == Approx(fxx).margin(1e-5));
        REQUIRE(out[0].hess(0, 1) == Approx(fxy).margin(1e-5));
        REQUIRE(out[0].hess(0, 1) == out[0].hess(1, 0));
    }
}

TEST_CASE("parameter gradients of a hybrid output match finite differences") {
    HybridModel m(dv_spec(2, 1, dv::Embedding::Angle, dv::Topology::Cascade));
    m.init_params(11);
    const std::vector<double> x0 = {0.25, 0.6};

    ad::Tape tape;
    ad::TapeScope scope(tape);
    std::vector<Var> slots;
    for (double p : m.params()) slots.push_back(ad::make_leaf(p));
    std::vector<Jet<Var>> coords;
    for (double c : x0) coords.push_back(Jet<Var>::constant(Var(c), 0));
    auto out = forward<Var>(m, slots, coords);
    auto grad = ad::param_gradient(tape, out[0].v, m.total_slots());

    Rng pick(99);
    const double h = 1e-6;
    for (int t = 0; t < 20; ++t) {
        const auto i = static_cast<std::size_t>(pick.next_u64() % m.total_slots());
        const double keep = m.params()[i];
        m.params()[i] = keep + h;
        const double up = forward_values(m, x0)[0].value();
        m.params()[i] = keep - h;
        const double dn = forward_values(m, x0)[0].value();
        m.params()[i] = keep;
        const double fd = (up - dn) / (2 * h);
        REQUIRE(grad[i] == Approx(fd).margin(1e-6));
    }
}

TEST_CASE("model display names") {
    REQUIRE(display_name(dv_spec(2, 1, dv::Embedding::Angle, dv::Topology::Cascade)) ==
            "Angle-Cascade");
    REQUIRE(display_name(dv_spec(2, 1, dv::Embedding::Amplitude, dv::Topology::CrossMesh)) ==
            "Amplitude-Cross-mesh");
    ModelSpec m1;
    m1.kind = ModelKind::Classical1;
    REQUIRE(display_name(m1) == "Model-1");
    REQUIRE(display_name(cv_spec(2, 1)) == "CV-quadrature-kerr-full");
}

TEST_CASE("input dimension is validated") {
    HybridModel m(dv_spec(2, 1, dv::Embedding::Angle, dv::Topology::Cascade));
    REQUIRE_THROWS_AS(forward_values(m, std::vector<double>{1.0, 2.0, 3.0}),
                      std::invalid_argument);
}
