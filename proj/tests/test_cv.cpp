#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qpinn/cv.hpp"

using namespace qpinn;
using namespace qpinn::cv;
using ad::Jet;
using ad::Tape;
using ad::TapeScope;
using ad::Var;
using Catch::Approx;

namespace {

using C = std::complex<double>;
using CMat = std::vector<C>;  // n x n row-major

CMat matmul(const CMat& a, const CMat& b, int n) {
    CMat r(static_cast<std::size_t>(n) * n, C(0));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const C aik = a[i * n + k];
            if (aik == C(0)) continue;
            for (int j = 0; j < n; ++j) r[i * n + j] += aik * b[k * n + j];
        }
    return r;
}

/// Dense matrix exponential by scaling-and-squaring with a Taylor series;
/// test oracle only.
CMat expm(CMat a, int n) {
    double norm = 0;
    for (int i = 0; i < n; ++i) {
        double row = 0;
        for (int j = 0; j < n; ++j) row += std::abs(a[i * n + j]);
        norm = std::max(norm, row);
    }
    int squarings = 0;
    while (norm > 0.25) {
        norm /= 2;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    for (auto& x : a) x *= scale;

    CMat result(static_cast<std::size_t>(n) * n, C(0));
    CMat term(static_cast<std::size_t>(n) * n, C(0));
    for (int i = 0; i < n; ++i) result[i * n + i] = term[i * n + i] = C(1);
    for (int k = 1; k < 60; ++k) {
        term = matmul(term, a, n);
        for (auto& x : term) x /= static_cast<double>(k);
        double maxt = 0;
        for (std::size_t i = 0; i < term.size(); ++i) {
            result[i] += term[i];
            maxt = std::max(maxt, std::abs(term[i]));
        }
        if (maxt < 1e-20) break;
    }
    for (int s = 0; s < squarings; ++s) result = matmul(result, result, n);
    return result;
}

CMat annihilation(int c) {
    CMat a(static_cast<std::size_t>(c) * c, C(0));
    for (int n = 0; n + 1 < c; ++n) a[n * c + (n + 1)] = std::sqrt(static_cast<double>(n + 1));
    return a;
}

CMat dagger(const CMat& a, int n) {
    CMat r(a.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r[i * n + j] = std::conj(a[j * n + i]);
    return r;
}

FockState<double> from_dense(const std::vector<C>& amps, int modes, int c) {
    FockState<double> st = FockState<double>::vacuum(modes, c, 0);
    for (std::size_t i = 0; i < amps.size(); ++i)
        st.amp[i] = ad::CJet<double>::constant(amps[i].real(), amps[i].imag(), 0);
    return st;
}

std::vector<C> to_dense(const FockState<double>& st) {
    std::vector<C> out(st.size());
    for (std::size_t i = 0; i < st.size(); ++i)
        out[i] = {st.amp[i].re.value(), st.amp[i].im.value()};
    return out;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

constexpr int kCut = 20;

}  // namespace

// The recurrences produce exact infinite-space matrix elements, so the dense
// oracle exponentiates the generator in a double-size space and truncates;
// exponentiating the already-truncated generator would distort rows near the
// cutoff boundary.
TEST_CASE("displacement matrix matches the dense exponential oracle") {
    const int big = 2 * kCut;
    for (auto [alpha, phi] : {std::pair{0.5, 0.0}, {0.3, 0.7}, {-0.4, 1.9}}) {
        const auto rec = displacement_matrix<double>(kCut, alpha, phi);
        CMat a = annihilation(big), ad_ = dagger(a, big);
        const C beta = alpha * std::exp(C(0, 1) * phi);
        CMat gen(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) gen[i] = beta * ad_[i] - std::conj(beta) * a[i];
        const CMat oracle = expm(gen, big);
        double worst = 0;
        for (int m = 0; m < kCut; ++m)
            for (int n = 0; n < kCut; ++n)
                worst = std::max(worst,
                                 std::abs(C(rec[m * kCut + n].re, rec[m * kCut + n].im) -
                                          oracle[static_cast<std::size_t>(m) * big + n]));
        REQUIRE(worst < 1e-10);
    }
}

TEST_CASE("squeezing matrix matches the dense exponential oracle") {
    const int big = 3 * kCut;  // squeezed columns spread further than displaced ones
    for (auto [r, phi] : {std::pair{0.3, 0.0}, {0.4, 1.1}, {0.2, -0.6}}) {
        const auto rec = squeezing_matrix<double>(kCut, r, phi);
        CMat a = annihilation(big), ad_ = dagger(a, big);
        const C z = r * std::exp(C(0, 1) * phi);
        CMat a2 = matmul(a, a, big), ad2 = matmul(ad_, ad_, big);
        CMat gen(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) gen[i] = (std::conj(z) * a2[i] - z * ad2[i]) / 2.0;
        const CMat oracle = expm(gen, big);
        double worst = 0;
        for (int m = 0; m < kCut; ++m)
            for (int n = 0; n < kCut; ++n)
                worst = std::max(worst,
                                 std::abs(C(rec[m * kCut + n].re, rec[m * kCut + n].im) -
                                          oracle[static_cast<std::size_t>(m) * big + n]));
        REQUIRE(worst < 1e-10);
    }
}

TEST_CASE("displacement on vacuum") {
    SECTION("alpha = 0 is the identity") {
        auto st = FockState<double>::vacuum(1, kCut, 0);
        displace(st, 0, 0.0, 0.0);
        REQUIRE(st.amp[0].re.value() == Approx(1.0).margin(1e-14));
        REQUIRE(norm_sq(st).value() == Approx(1.0).margin(1e-14));
    }
    SECTION("coherent state photon number and quadrature") {
        auto st = FockState<double>::vacuum(1, kCut, 0);
        displace(st, 0, 0.5, 0.0);
        REQUIRE(measure(st, Measurement::Number)[0].value() == Approx(0.25).margin(1e-6));
        // q = a + a^dag, so <q> = 2 alpha
        REQUIRE(measure(st, Measurement::Quadrature)[0].value() == Approx(1.0).margin(1e-6));
        // Poisson amplitudes e^{-a^2/2} a^n / sqrt(n!)
        double fact = 1.0;
        for (int n = 0; n < 6; ++n) {
            if (n > 0) fact *= n;
            const double expect = std::exp(-0.125) * std::pow(0.5, n) / std::sqrt(fact);
            REQUIRE(st.amp[n].re.value() == Approx(expect).margin(1e-12));
        }
    }
}

TEST_CASE("squeezing on vacuum") {
    SECTION("r = 0 is the identity") {
        auto st = FockState<double>::vacuum(1, kCut, 0);
        squeeze(st, 0, 0.0, 0.0);
        REQUIRE(st.amp[0].re.value() == Approx(1.0).margin(1e-14));
    }
    SECTION("photon number sinh^2 r and even support") {
        auto st = FockState<double>::vacuum(1, kCut, 0);
        squeeze(st, 0, 0.3, 0.0);
        const double expect = std::sinh(0.3) * std::sinh(0.3);
        REQUIRE(measure(st, Measurement::Number)[0].value() == Approx(expect).margin(1e-6));
        for (int n = 1; n < kCut; n += 2) {
            REQUIRE(std::abs(st.amp[n].re.value()) == 0.0);
            REQUIRE(std::abs(st.amp[n].im.value()) == 0.0);
        }
    }
    SECTION("closed-form squeezed-vacuum amplitudes") {
        auto st = FockState<double>::vacuum(1, kCut, 0);
        const double r = 0.5, phi = 0.3;
        squeeze(st, 0, r, phi);
        double fact2k = 1.0, factk = 1.0;
        for (int k = 0; k < 5; ++k) {
            if (k > 0) {
                fact2k *= (2 * k - 1) * (2 * k);
                factk *= k;
            }
            const C cf = std::pow(-std::exp(C(0, 1) * phi) * std::tanh(r), k) *
                         std::sqrt(fact2k) / (std::pow(2.0, k) * factk) / std::sqrt(std::cosh(r));
            REQUIRE(std::abs(C(st.amp[2 * k].re.value(), st.amp[2 * k].im.value()) - cf) < 1e-12);
        }
    }
}

TEST_CASE("beamsplitter") {
    SECTION("psi = 0 is the identity") {
        std::mt19937_64 rng(3);
        std::vector<C> amps(kCut * kCut);
        double nrm = 0;
        for (auto& x : amps) {
            x = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
            nrm += std::norm(x);
        }
        for (auto& x : amps) x /= std::sqrt(nrm);
        auto st = from_dense(amps, 2, kCut);
        beamsplitter(st, 0, 1, 0.0, 0.4);
        auto out = to_dense(st);
        for (std::size_t i = 0; i < amps.size(); ++i) REQUIRE(std::abs(out[i] - amps[i]) < 1e-13);
    }
    SECTION("50:50 splitting of a single photon") {
        auto st = FockState<double>::vacuum(2, kCut, 0);
        st.amp[0] = ad::CJet<double>::constant(0.0, 0.0, 0);
        st.amp[st.stride(0)] = ad::CJet<double>::constant(1.0, 0.0, 0);  // |1,0>
        beamsplitter(st, 0, 1, std::numbers::pi / 4, 0.0);
        const double p10 = st.amp[st.stride(0)].re.value() * st.amp[st.stride(0)].re.value() +
                           st.amp[st.stride(0)].im.value() * st.amp[st.stride(0)].im.value();
        const double p01 = st.amp[1].re.value() * st.amp[1].re.value() +
                           st.amp[1].im.value() * st.amp[1].im.value();
        REQUIRE(p10 == Approx(0.5).margin(1e-12));
        REQUIRE(p01 == Approx(0.5).margin(1e-12));
    }
    SECTION("photon number is conserved") {
        std::mt19937_64 rng(17);
        for (int trial = 0; trial < 20; ++trial) {
            const int c = 10;
            // support only below the anti-diagonal so the truncated operator
            // acts unitarily
            std::vector<C> amps(c * c, C(0));
            double nrm = 0;
            for (int na = 0; na < c; ++na)
                for (int nb = 0; na + nb < c; ++nb) {
                    amps[na * c + nb] = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
                    nrm += std::norm(amps[na * c + nb]);
                }
            for (auto& x : amps) x /= std::sqrt(nrm);
            auto st = from_dense(amps, 2, c);
            auto before = measure(st, Measurement::Number);
            const double total_before = before[0].value() + before[1].value();
            beamsplitter(st, 0, 1, uniform(rng, -1.5, 1.5), uniform(rng, -3, 3));
            auto after = measure(st, Measurement::Number);
            REQUIRE(after[0].value() + after[1].value() ==
                    Approx(total_before).margin(1e-10));
            REQUIRE(norm_sq(st).value() == Approx(1.0).margin(1e-12));
        }
    }
    SECTION("matches the dense two-mode exponential oracle") {
        const int c = 6;
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 5; ++trial) {
            const double psi = uniform(rng, -1.2, 1.2), phi = uniform(rng, -3, 3);
            // dense generator psi (e^{i phi} ad b - e^{-i phi} a bd) on c^2 space
            const int n2 = c * c;
            CMat gen(static_cast<std::size_t>(n2) * n2, C(0));
            const C ephi = std::exp(C(0, 1) * phi);
            for (int ma = 0; ma < c; ++ma)
                for (int mb = 0; mb < c; ++mb) {
                    // <ma, mb| gen |na, nb> contributions
                    if (ma >= 1 && mb + 1 < c) {
                        // ad b term: |na=ma-1, nb=mb+1>
                        const int row = ma * c + mb, col = (ma - 1) * c + (mb + 1);
                        gen[static_cast<std::size_t>(row) * n2 + col] +=
                            psi * ephi * std::sqrt(static_cast<double>(ma) * (mb + 1));
                    }
                    if (mb >= 1 && ma + 1 < c) {
                        const int row = ma * c + mb, col = (ma + 1) * c + (mb - 1);
                        gen[static_cast<std::size_t>(row) * n2 + col] -=
                            psi * std::conj(ephi) * std::sqrt(static_cast<double>(mb) * (ma + 1));
                    }
                }
            const CMat u = expm(gen, n2);

            // support restricted to blocks na+nb <= c-1, which the truncated
            // generator preserves exactly
            std::vector<C> amps(n2, C(0));
            double nrm = 0;
            for (int na = 0; na < c; ++na)
                for (int nb = 0; na + nb < c; ++nb) {
                    amps[na * c + nb] = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
                    nrm += std::norm(amps[na * c + nb]);
                }
            for (auto& x : amps) x /= std::sqrt(nrm);

            std::vector<C> expect(n2, C(0));
            for (int i = 0; i < n2; ++i)
                for (int j = 0; j < n2; ++j) expect[i] += u[static_cast<std::size_t>(i) * n2 + j] * amps[j];

            auto st = from_dense(amps, 2, c);
            beamsplitter(st, 0, 1, psi, phi);
            auto got = to_dense(st);
            for (int i = 0; i < n2; ++i) REQUIRE(std::abs(got[i] - expect[i]) < 1e-10);
        }
    }
    SECTION("identical modes are rejected") {
        auto st = FockState<double>::vacuum(2, 8, 0);
        REQUIRE_THROWS_AS(beamsplitter(st, 1, 1, 0.3, 0.0), std::invalid_argument);
    }
}

TEST_CASE("Kerr-family gates are number-diagonal") {
    std::mt19937_64 rng(4);
    std::vector<C> amps(kCut * kCut);
    double nrm = 0;
    for (auto& x : amps) {
        x = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
        nrm += std::norm(x);
    }
    for (auto& x : amps) x /= std::sqrt(nrm);

    SECTION("Kerr leaves <n> exactly unchanged") {
        auto st = from_dense(amps, 2, kCut);
        auto before = measure(st, Measurement::Number);
        kerr(st, 0, 0.37);
        kerr(st, 1, -0.8);
        auto after = measure(st, Measurement::Number);
        // diagonal in the number basis; only phase-rotation rounding remains
        REQUIRE(after[0].value() == Approx(before[0].value()).margin(1e-12));
        REQUIRE(after[1].value() == Approx(before[1].value()).margin(1e-12));
    }
    SECTION("kappa = 0 is the identity") {
        auto st = from_dense(amps, 2, kCut);
        kerr(st, 0, 0.0);
        auto out = to_dense(st);
        for (std::size_t i = 0; i < amps.size(); ++i) REQUIRE(out[i] == amps[i]);
    }
    SECTION("cross-Kerr conserves <n> and needs two modes") {
        auto st = from_dense(amps, 2, kCut);
        auto before = measure(st, Measurement::Number);
        cross_kerr(st, 0, 1, 0.21);
        auto after = measure(st, Measurement::Number);
        REQUIRE(after[0].value() == Approx(before[0].value()).margin(1e-12));
        REQUIRE(after[1].value() == Approx(before[1].value()).margin(1e-12));

        auto single = FockState<double>::vacuum(1, 8, 0);
        REQUIRE_THROWS_AS(cross_kerr(single, 0, 0, 0.1), std::invalid_argument);
    }
}

TEST_CASE("cubic phase gate matches the dense exponential at cutoff 20") {
    const double gamma = 0.01;
    // oracle: expm(i gamma q^3 / 3) applied to a displaced vacuum
    CMat a = annihilation(kCut), ad_ = dagger(a, kCut);
    CMat q(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) q[i] = a[i] + ad_[i];
    CMat q3 = matmul(matmul(q, q, kCut), q, kCut);
    CMat gen(q3.size());
    for (std::size_t i = 0; i < q3.size(); ++i) gen[i] = C(0, 1) * gamma * q3[i] / 3.0;
    const CMat u = expm(gen, kCut);

    auto st = FockState<double>::vacuum(1, kCut, 0);
    displace(st, 0, 0.3, 0.0);
    const auto in = to_dense(st);
    std::vector<C> expect(kCut, C(0));
    for (int i = 0; i < kCut; ++i)
        for (int j = 0; j < kCut; ++j) expect[i] += u[static_cast<std::size_t>(i) * kCut + j] * in[j];

    cubic_phase(st, 0, gamma);
    const auto got = to_dense(st);
    double worst = 0, got_norm = 0, want_norm = 0;
    for (int i = 0; i < kCut; ++i) {
        worst = std::max(worst, std::abs(got[i] - expect[i]));
        got_norm += std::norm(got[i]);
        want_norm += std::norm(expect[i]);
    }
    REQUIRE(worst < 1e-6);
    REQUIRE(got_norm == Approx(want_norm).margin(1e-6));
}

TEST_CASE("truncated operators stay unitary on low-lying basis states") {
    // Squeezing spreads fastest: at cutoff 20 the leak from |10> already
    // exceeds 1e-6 for r = 0.1, so its magnitude is scoped tighter than the
    // displacement/beamsplitter checks.
    for (int n = 0; n <= kCut / 2; ++n) {
        auto st = FockState<double>::vacuum(1, kCut, 0);
        st.amp[0] = ad::CJet<double>::constant(0.0, 0.0, 0);
        st.amp[n] = ad::CJet<double>::constant(1.0, 0.0, 0);
        auto st2 = st;
        displace(st, 0, 0.5, 0.9);
        REQUIRE(norm_sq(st).value() == Approx(1.0).margin(1e-6));
        squeeze(st2, 0, 0.05, 0.4);
        REQUIRE(norm_sq(st2).value() == Approx(1.0).margin(1e-6));
    }
    for (int n = 0; n + 1 <= kCut / 2; ++n) {
        auto st = FockState<double>::vacuum(2, 12, 0);
        st.amp[0] = ad::CJet<double>::constant(0.0, 0.0, 0);
        st.amp[n * st.stride(0) + 1] = ad::CJet<double>::constant(1.0, 0.0, 0);
        beamsplitter(st, 0, 1, 0.7, 1.3);
        REQUIRE(norm_sq(st).value() == Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("displacement encoding") {
    SECTION("zeros give the vacuum") {
        std::vector<Jet<double>> f(2, Jet<double>::constant(0.0, 0));
        auto st = encode_displacement<double>(f, 2, kCut, 0);
        REQUIRE(st.amp[0].re.value() == 1.0);
        REQUIRE(norm_sq(st).value() == Approx(1.0).margin(1e-14));
    }
    SECTION("coherent occupation of mode 0") {
        std::vector<Jet<double>> f = {Jet<double>::constant(0.2, 0), Jet<double>::constant(0.0, 0)};
        auto st = encode_displacement<double>(f, 2, kCut, 0);
        auto n = measure(st, Measurement::Number);
        REQUIRE(n[0].value() == Approx(0.04).margin(1e-9));
        REQUIRE(n[1].value() == Approx(0.0).margin(1e-12));
    }
    SECTION("input derivatives propagate: d<n>/df = 2 f") {
        auto seeds = ad::seed_inputs<double>(std::vector<double>{0.2, -0.1});
        auto st = encode_displacement<double>(seeds, 2, kCut, 2);
        auto n = measure(st, Measurement::Number);
        REQUIRE(n[0].g[0] == Approx(0.4).margin(1e-6));
        REQUIRE(n[0].g[1] == Approx(0.0).margin(1e-9));
        REQUIRE(n[1].g[1] == Approx(-0.2).margin(1e-6));
        REQUIRE(n[0].hess(0, 0) == Approx(2.0).margin(1e-6));
    }
    SECTION("feature count mismatch") {
        std::vector<Jet<double>> f(3, Jet<double>::constant(0.0, 0));
        REQUIRE_THROWS_AS(encode_displacement<double>(f, 2, kCut, 0), std::invalid_argument);
    }
}

TEST_CASE("cv layer") {
    CvOptions opt;  // 2 qumodes, cutoff 20, quadrature, Kerr, full
    const auto lay = make_cv_layout(opt);

    SECTION("full parameterization with 2 qumodes has 16 parameters per layer") {
        REQUIRE(lay.per_layer == 16);
        REQUIRE(lay.total == 16);
        int frozen = 0;
        for (auto f : lay.frozen) frozen += f;
        REQUIRE(frozen == 0);
    }
    SECTION("phase-free freezes bs/squeeze/displacement phases") {
        CvOptions pf = opt;
        pf.parameterization = Parameterization::PhaseFree;
        const auto pl = make_cv_layout(pf);
        REQUIRE(pl.total == 16);
        int frozen = 0;
        for (auto f : pl.frozen) frozen += f;
        REQUIRE(frozen == 6);  // 2 bs phases + 2 squeeze phases + 2 displacement phases
    }
    SECTION("cross-Kerr layout uses one strength per pair") {
        CvOptions ck = opt;
        ck.nonlinearity = Nonlinearity::CrossKerr;
        REQUIRE(make_cv_layout(ck).per_layer == 15);
    }
    SECTION("all-zero parameters are the identity layer") {
        auto st = FockState<double>::vacuum(2, kCut, 0);
        std::vector<double> params(lay.per_layer, 0.0);
        cv_layer<double>(st, opt, lay, params);
        REQUIRE(st.amp[0].re.value() == Approx(1.0).margin(1e-13));
        REQUIRE(norm_sq(st).value() == Approx(1.0).margin(1e-13));
    }
    SECTION("norm stays near 1 at initialization scale") {
        std::mt19937_64 rng(42);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<double> params(lay.per_layer);
            for (int i = 0; i < lay.per_layer; ++i) {
                const bool phase = (i >= lay.int1_phi && i < lay.int1_phi + lay.pairs) ||
                                   (i >= lay.sq_phi && i < lay.sq_phi + 2) ||
                                   (i >= lay.int2_phi && i < lay.int2_phi + lay.pairs) ||
                                   (i >= lay.disp_phi && i < lay.disp_phi + 2);
                params[i] = uniform(rng, -1, 1) * (phase ? 0.01 * std::numbers::pi : 0.001);
            }
            std::vector<Jet<double>> f = {Jet<double>::constant(0.3, 0),
                                          Jet<double>::constant(-0.2, 0)};
            auto res = cv_forward<double>(opt, lay, params, f, 0);
            REQUIRE(res.norm_sq_value <= 1.0 + 1e-12);
            REQUIRE(res.norm_sq_value >= 0.99);
        }
    }
}

TEST_CASE("cv layer parameter gradients match finite differences") {
    std::mt19937_64 rng(77);
    for (auto nl : {Nonlinearity::Kerr, Nonlinearity::CubicPhase, Nonlinearity::CrossKerr}) {
        for (auto meas : {Measurement::Quadrature, Measurement::Number}) {
            CvOptions opt;
            opt.cutoff = 10;  // keep the FD sweep cheap
            opt.nonlinearity = nl;
            opt.measurement = meas;
            const auto lay = make_cv_layout(opt);
            const auto basis = make_cubic_basis(opt.cutoff);

            std::vector<double> params(lay.total);
            for (auto& p : params) p = uniform(rng, -0.05, 0.05);
            const std::vector<double> feats = {0.25, -0.15};

            auto loss_at = [&](const std::vector<double>& p) {
                std::vector<Jet<double>> f = {Jet<double>::constant(feats[0], 0),
                                              Jet<double>::constant(feats[1], 0)};
                auto res = cv_forward<double>(opt, lay, p, f, 0, &basis);
                return res.outputs[0].value() + 2.0 * res.outputs[1].value();
            };

            Tape tape;
            TapeScope scope(tape);
            std::vector<Var> pv;
            for (double p : params) pv.push_back(ad::make_leaf(p));
            std::vector<Jet<Var>> f = {Jet<Var>::constant(Var(feats[0]), 0),
                                       Jet<Var>::constant(Var(feats[1]), 0)};
            auto res = cv_forward<Var>(opt, lay, pv, f, 0, &basis);
            Var loss = res.outputs[0].v + Var(2.0) * res.outputs[1].v;
            auto grad = ad::param_gradient(tape, loss, params.size());

            const double h = 1e-6;
            for (std::size_t i = 0; i < params.size(); i += 3) {
                auto lo = params, hi = params;
                lo[i] -= h;
                hi[i] += h;
                const double fd = (loss_at(hi) - loss_at(lo)) / (2 * h);
                const double tol = 1e-4 * std::max(1.0, std::abs(fd));
                REQUIRE(std::abs(grad[i] - fd) < tol);
            }
        }
    }
}

TEST_CASE("measurement of a zero-norm state is rejected") {
    auto st = FockState<double>::vacuum(1, 8, 0);
    st.amp[0] = ad::CJet<double>::constant(0.0, 0.0, 0);
    REQUIRE_THROWS_AS(measure(st, Measurement::Number), std::domain_error);
}
