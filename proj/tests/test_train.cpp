#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qpinn/train.hpp"

using namespace qpinn;
using namespace qpinn::trainer;
using Catch::Approx;

namespace {

net::ModelSpec helmholtz_cascade_spec() {
    net::ModelSpec s;
    s.kind = net::ModelKind::DvHybrid;
    s.d_in = 2;
    s.d_out = 1;
    s.embedding = dv::Embedding::Angle;
    s.topology = dv::Topology::Cascade;
    return s;
}

}  // namespace

TEST_CASE("adam") {
    SECTION("zero gradient leaves parameters untouched") {
        std::vector<double> p = {1.0, -2.0, 0.5};
        std::vector<double> g(3, 0.0);
        AdamState st(3);
        adam_step(p, g, st, 0.01);
        REQUIRE(p == std::vector<double>{1.0, -2.0, 0.5});
    }
    SECTION("first step moves by about lr in the sign direction") {
        std::vector<double> p = {0.0, 0.0};
        std::vector<double> g = {0.3, -4.0};
        AdamState st(2);
        adam_step(p, g, st, 0.01);
        REQUIRE(p[0] == Approx(-0.01).epsilon(1e-4));
        REQUIRE(p[1] == Approx(0.01).epsilon(1e-5));
    }
    SECTION("identical coordinates stay identical") {
        std::vector<double> p = {1.0, 1.0};
        AdamState st(2);
        for (int i = 0; i < 2; ++i) {
            std::vector<double> g = {0.7, 0.7};
            adam_step(p, g, st, 0.05);
        }
        REQUIRE(p[0] == p[1]);
        REQUIRE(st.m[0] == st.m[1]);
        REQUIRE(st.v[0] == st.v[1]);
    }
    SECTION("non-finite gradients abort with a diagnostic") {
        std::vector<double> p = {0.0};
        std::vector<double> g = {std::nan("")};
        AdamState st(1);
        REQUIRE_THROWS_AS(adam_step(p, g, st, 0.01), std::runtime_error);
    }
}

TEST_CASE("gradient clipping") {
    std::vector<double> g = {2.0, 0.0};
    REQUIRE(clip_gradients(g, 1.0) == Approx(2.0));
    REQUIRE(g[0] == Approx(1.0));

    std::vector<double> g2 = {0.3, 0.4};
    clip_gradients(g2, 1.0);
    REQUIRE(g2 == std::vector<double>{0.3, 0.4});

    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> g3(10);
        for (auto& x : g3) x = rng.uniform(-3, 3);
        double before = 0;
        for (double x : g3) before += x * x;
        before = std::sqrt(before);
        const double max_norm = rng.uniform(0.1, 3.0);
        clip_gradients(g3, max_norm);
        double after = 0;
        for (double x : g3) after += x * x;
        after = std::sqrt(after);
        REQUIRE(after == Approx(std::min(before, max_norm)).margin(1e-12));
    }
}

TEST_CASE("plateau scheduler") {
    SECTION("the DV recipe: factor 0.9 after 1000 stagnant epochs") {
        PlateauScheduler s(0.005, {0.9, 1000, 1e-6});
        s.step(1.0);  // becomes best
        for (int i = 0; i < 999; ++i) REQUIRE(s.step(1.0) == 0.005);
        REQUIRE(s.step(1.0) == Approx(0.0045));
    }
    SECTION("the CV recipe: factor 0.5 after 20 stagnant epochs") {
        PlateauScheduler s(1e-4, {0.5, 20, 1e-6});
        s.step(2.0);
        for (int i = 0; i < 19; ++i) s.step(2.0);
        REQUIRE(s.step(2.0) == Approx(5e-5));
    }
    SECTION("improvement resets the stagnation counter") {
        PlateauScheduler s(0.1, {0.5, 3, 1e-6});
        s.step(1.0);
        s.step(1.0);
        s.step(0.9);  // strict improvement
        s.step(0.9);
        s.step(0.9);
        REQUIRE(s.lr() == 0.1);
        s.step(0.9);
        REQUIRE(s.lr() == Approx(0.05));
    }
    SECTION("clamped at min_lr") {
        PlateauScheduler s(2e-6, {0.5, 1, 1e-6});
        s.step(1.0);
        s.step(1.0);
        REQUIRE(s.lr() == Approx(1e-6));
        s.step(1.0);
        REQUIRE(s.lr() == Approx(1e-6));
    }
}

TEST_CASE("full hybrid loss gradient matches finite differences") {
    const auto problem = pde::make_problem(pde::PdeId::Helmholtz);
    net::HybridModel model(helmholtz_cascade_spec());
    model.init_params(123);
    auto sampler = pde::make_sampler(problem, 5);
    const auto batch = sampler.next(16);

    ad::Tape tape;
    std::vector<double> grad;
    const auto loss = loss_and_gradient(problem, model, batch, tape, grad);

    // the two evaluation paths agree
    const auto check = loss_value(problem, model, batch);
    REQUIRE(loss.total == Approx(check.total).epsilon(1e-12));
    for (std::size_t t = 0; t < loss.per_term.size(); ++t)
        REQUIRE(loss.per_term[t] == Approx(check.per_term[t]).epsilon(1e-12));

    // weighted-sum decomposition is exact
    double total = 0;
    for (std::size_t t = 0; t < problem.terms.size(); ++t)
        total += problem.terms[t].weight * loss.per_term[t];
    REQUIRE(loss.total == total);

    Rng pick(7);
    std::vector<double> slots = model.params();
    const double h = 1e-5;
    for (int t = 0; t < 20; ++t) {
        const auto i = static_cast<std::size_t>(pick.next_u64() % slots.size());
        const double keep = slots[i];
        slots[i] = keep + h;
        const double up = loss_value(problem, model, slots, batch).total;
        slots[i] = keep - h;
        const double dn = loss_value(problem, model, slots, batch).total;
        slots[i] = keep;
        const double fd = (up - dn) / (2 * h);
        REQUIRE(std::abs(grad[i] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
    }
}

TEST_CASE("training loop") {
    const auto problem = pde::make_problem(pde::PdeId::Helmholtz);

    SECTION("zero epochs leaves everything in place") {
        net::HybridModel model(helmholtz_cascade_spec());
        model.init_params(1);
        const auto before = model.params();
        TrainConfig cfg = default_train_config(net::ModelKind::DvHybrid);
        cfg.epochs = 0;
        const auto rec = train(model, problem, cfg);
        REQUIRE(model.params() == before);
        REQUIRE(rec.total_history.empty());
        REQUIRE_FALSE(rec.aborted);
    }

    SECTION("zero learning rate freezes the parameters") {
        net::HybridModel model(helmholtz_cascade_spec());
        model.init_params(2);
        const auto before = model.params();
        TrainConfig cfg = default_train_config(net::ModelKind::DvHybrid);
        cfg.epochs = 5;
        cfg.lr = 0.0;
        cfg.scheduler = {0.9, 1 << 30, 0.0};
        const auto rec = train(model, problem, cfg);
        REQUIRE(model.params() == before);
        REQUIRE(rec.total_history.size() == 5);
    }

    SECTION("fixed seed reproduces the loss history bit for bit") {
        TrainConfig cfg = default_train_config(net::ModelKind::DvHybrid);
        cfg.epochs = 8;
        cfg.seed = 77;
        std::vector<std::vector<double>> histories;
        for (int rep = 0; rep < 2; ++rep) {
            net::HybridModel model(helmholtz_cascade_spec());
            model.init_params(cfg.seed);
            histories.push_back(train(model, problem, cfg).total_history);
        }
        REQUIRE(histories[0] == histories[1]);
    }

    SECTION("a short classical run decreases the loss and keeps records consistent") {
        net::ModelSpec spec;
        spec.kind = net::ModelKind::Classical2;
        spec.d_in = 2;
        spec.d_out = 1;
        net::HybridModel model(spec);
        model.init_params(3);
        TrainConfig cfg = default_train_config(spec.kind);
        cfg.epochs = 60;
        cfg.lr = 0.01;
        const auto rec = train(model, problem, cfg);
        REQUIRE_FALSE(rec.aborted);
        REQUIRE(rec.total_history.size() == 60);
        for (double l : rec.total_history) REQUIRE(std::isfinite(l));
        REQUIRE(rec.total_history.back() < rec.total_history.front());
        REQUIRE(rec.term_history.size() == problem.terms.size());
        for (const auto& th : rec.term_history) REQUIRE(th.size() == 60);
        // scheduler never raises the rate
        for (std::size_t i = 1; i < rec.lr_history.size(); ++i)
            REQUIRE(rec.lr_history[i] <= rec.lr_history[i - 1]);
        REQUIRE(rec.peak_memory_bytes > 0);
        REQUIRE(rec.time_per_iter > 0.0);
    }
}

TEST_CASE("multi-run statistics") {
    REQUIRE(mean_std(std::vector<double>{1.0, 3.0}).mean == Approx(2.0));
    REQUIRE(mean_std(std::vector<double>{1.0, 3.0}).stddev == Approx(std::sqrt(2.0)));
    REQUIRE(mean_std(std::vector<double>{5.0}).stddev == 0.0);

    const auto problem = pde::make_problem(pde::PdeId::Helmholtz);
    TrainConfig cfg = default_train_config(net::ModelKind::DvHybrid);
    cfg.epochs = 4;
    cfg.seed = 10;
    auto runs = multi_run([] { return net::HybridModel(helmholtz_cascade_spec()); }, problem,
                          cfg, 3);
    REQUIRE(runs.size() == 3);
    REQUIRE(runs[0].total_history != runs[1].total_history);  // distinct seeds
    REQUIRE(runs[0].seed == 10);
    REQUIRE(runs[2].seed == 12);

    REQUIRE_THROWS_AS(
        multi_run([] { return net::HybridModel(helmholtz_cascade_spec()); }, problem, cfg, 0),
        std::invalid_argument);
}
