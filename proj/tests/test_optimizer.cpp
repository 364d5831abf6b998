#include <doctest.h>

#include <cmath>

#include "zest/optimizer.hpp"

using namespace zest;

namespace
{
    ParamVector vec2(double a, double b)
    {
        ParamVector v(2);
        v << a, b;
        return v;
    }

    OptimizerConfig zest_config(Method m, double eta, int iters, double t, int k, double rho, std::uint64_t seed)
    {
        OptimizerConfig c;
        c.method = m;
        c.learning_rate = eta;
        c.max_iterations = iters;
        c.tilt.t = t;
        c.tilt.k = k;
        c.tilt.estimator = m == Method::zest_bias_corrected ? EstimatorKind::bias_corrected
                           : m == Method::vanilla           ? EstimatorKind::vanilla
                                                            : EstimatorKind::naive;
        c.tilt.perturbation = {PerturbationKind::gaussian, rho, seed};
        return c;
    }

    double average_visited_slope(const PiecewiseLinearObjective &pl, const RunResult &r)
    {
        double acc = 0.0;
        int n = 0;
        for (const auto &rec : r.trajectory)
            if (rec.iteration > 0)
            {
                acc += pl.slope_of(pl.active_plane(rec.iterate[0], rec.iterate[1]));
                ++n;
            }
        return acc / n;
    }
}

TEST_CASE("constant objective leaves x untouched")
{
    ConstantObjective c(4, -2.0);
    const ParamVector x = ParamVector::LinSpaced(4, 0.1, 0.4);
    for (Method m : {Method::zest_naive, Method::zest_bias_corrected, Method::vanilla})
    {
        const auto step = zest_step(c, x, zest_config(m, 0.5, 1, m == Method::vanilla ? 0.0 : 1.0, 8, 0.2, 3));
        CHECK((step.x_next.array() == x.array()).all());
    }
}

TEST_CASE("fused update equals the assembled gradient step")
{
    TwoMinimaObjective tm;
    const ParamVector x = vec2(0.2, 0.9);
    for (Method m : {Method::zest_naive, Method::zest_bias_corrected, Method::vanilla})
    {
        auto cfg = zest_config(m, 0.07, 1, m == Method::vanilla ? 0.0 : 1.5, 50, 0.3, 21);
        const auto step = zest_step(tm, x, cfg, 4);
        TiltConfig tilt = cfg.tilt;
        tilt.perturbation = cfg.perturbation_at(4);
        const ParamVector assembled = x - cfg.learning_rate * estimate_gradient(tm, x, tilt);
        CHECK((step.x_next - assembled).norm() <= 1e-10 * assembled.norm());
        CHECK(step.record.weights.size() == 50);
        CHECK(step.record.query_seed == tilt.perturbation.seed);
    }
}

TEST_CASE("identical seeds give bitwise identical trajectories")
{
    TwoMinimaObjective tm;
    auto cfg = zest_config(Method::zest_bias_corrected, 0.1, 20, 1.0, 30, 0.5, 8);
    const auto a = run(tm, vec2(0, 1), cfg);
    const auto b = run(tm, vec2(0, 1), cfg);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i)
    {
        CHECK((a.trajectory[i].iterate.array() == b.trajectory[i].iterate.array()).all());
        CHECK(a.trajectory[i].loss == b.trajectory[i].loss);
        CHECK(a.trajectory[i].query_seed == b.trajectory[i].query_seed);
    }

    // Replay a single iteration from its recorded seed.
    const auto &rec = a.trajectory[7];
    const auto replay = zest_step(tm, a.trajectory[6].iterate, cfg, 6);
    CHECK(replay.record.query_seed == rec.query_seed);
    CHECK((replay.x_next.array() == rec.iterate.array()).all());

    cfg.tilt.perturbation.seed = 9;
    const auto c = run(tm, vec2(0, 1), cfg);
    CHECK((c.x_final.array() != a.x_final.array()).any());
}

TEST_CASE("gradient descent step")
{
    ParamVector h(1), b(1);
    h << 1;
    b << 0;
    const QuadraticObjective q = QuadraticObjective::diagonal(h, b);
    ParamVector one(1);
    one << 1;
    CHECK(gd_step(q, one, 1.0)[0] == 0.0);
    CHECK(gd_step(q, ParamVector::Zero(1), 0.3)[0] == 0.0);

    TwoMinimaObjective tm;
    CHECK((gd_step(tm, vec2(1, 0), 0.2) - vec2(1, 0)).norm() < 1e-15);

    struct NoGradient final : Objective
    {
        std::string name() const override { return "opaque"; }
        Index dimension() const override { return 1; }
        double evaluate(ConstVectorRef x, BatchId) const override { return x[0] * x[0]; }
    } opaque;
    CHECK_THROWS_AS(gd_step(opaque, one, 0.1), ConfigError);
}

TEST_CASE("gradient descent from (0, 1) reaches the sharp minimum")
{
    TwoMinimaObjective tm;
    OptimizerConfig cfg;
    cfg.method = Method::gd;
    cfg.learning_rate = 0.2;
    cfg.max_iterations = 50;
    const auto r = run(tm, vec2(0, 1), cfg);
    CHECK((r.x_final - vec2(1, 0)).norm() < 0.05);
    CHECK(r.trajectory.size() == 51u);
}

TEST_CASE("run logs at the configured cadence and keeps the last iteration")
{
    TwoMinimaObjective tm;
    auto cfg = zest_config(Method::zest_naive, 0.05, 23, 1.0, 10, 0.3, 0);
    cfg.log_every = 5;
    const auto r = run(tm, vec2(0.5, 0.5), cfg);
    std::vector<int> iters;
    for (const auto &rec : r.trajectory)
        iters.push_back(rec.iteration);
    CHECK(iters == std::vector<int>{0, 5, 10, 15, 20, 23});
    CHECK(r.iterations == 23);
}

TEST_CASE("plateau stopping")
{
    ConstantObjective c(2, 1.0);
    auto cfg = zest_config(Method::zest_naive, 0.1, 100, 1.0, 4, 0.1, 0);
    const auto r = run(c, vec2(0, 0), cfg, StoppingRule{3, 0.0});
    CHECK(r.stopped_early);
    CHECK(r.iterations == 3);
}

TEST_CASE("run validation and error context")
{
    TwoMinimaObjective tm;
    auto cfg = zest_config(Method::zest_naive, 0.1, 5, 1.0, 4, 0.1, 0);
    CHECK_THROWS_AS(run(tm, ParamVector::Zero(3), cfg), DimensionError);
    CHECK_THROWS_AS(run(tm, vec2(NAN, 0), cfg), ConfigError);
    auto bad = cfg;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(run(tm, vec2(0, 0), bad), ConfigError);
    bad = cfg;
    bad.max_iterations = 0;
    CHECK_THROWS_AS(run(tm, vec2(0, 0), bad), ConfigError);
    bad = zest_config(Method::zest_bias_corrected, 0.1, 5, 1.0, 1, 0.1, 0);
    CHECK_THROWS_AS(run(tm, vec2(0, 0), bad), ConfigError);

    struct Cliff final : Objective
    {
        std::string name() const override { return "cliff"; }
        Index dimension() const override { return 1; }
        double evaluate(ConstVectorRef x, BatchId) const override { return x[0] < 5.0 ? -x[0] : INFINITY; }
    } cliff;
    auto walk = zest_config(Method::zest_naive, 1.0, 50, 1.0, 4, 0.5, 0);
    try
    {
        run(cliff, ParamVector::Zero(1), walk);
        FAIL("expected an evaluation error");
    }
    catch (const EvaluationError &e)
    {
        CHECK(std::string(e.what()).find("iteration") != std::string::npos);
        CHECK(e.query_index() >= 0);
    }
}

TEST_CASE("minibatch schedule is seeded")
{
    BatchSchedule s;
    s.full_batch = false;
    s.seed = 5;
    CHECK(s.at(3) == s.at(3));
    CHECK(!(s.at(3) == s.at(4)));
    CHECK(!s.at(0).is_full());
    s.full_batch = true;
    CHECK(s.at(7).is_full());
}

TEST_CASE("linear-regime toy: flatter route than the two-point estimator")
{
    const PiecewiseLinearObjective pl = build_piecewise_linear();
    int flatter = 0;
    double zest_slope = 0.0, vanilla_slope = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
    {
        const auto z = run(pl, vec2(1.8, 1.8), zest_config(Method::zest_naive, 0.2, 40, 1.0, 500, 0.5, seed));
        const auto v = run(pl, vec2(1.8, 1.8), zest_config(Method::vanilla, 0.2, 40, 0.0, 500, 0.5, seed));
        // Minimum of h is 0.14 at the origin, a mesh vertex.
        CHECK(pl(z.x_final) < 0.14 + 1e-2);
        CHECK(pl(z.x_final) < z.trajectory.front().loss);
        const double sz = average_visited_slope(pl, z), sv = average_visited_slope(pl, v);
        zest_slope += sz;
        vanilla_slope += sv;
        flatter += sz < sv;
    }
    CHECK(flatter == 5);
    CHECK(zest_slope < vanilla_slope);
}

TEST_CASE("method names round-trip")
{
    for (Method m : {Method::zest_naive, Method::zest_bias_corrected, Method::vanilla, Method::gd})
        CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("adam"), ConfigError);
}
