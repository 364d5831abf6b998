#include <doctest.h>

#include <cmath>

#include "zest/core.hpp"
#include "zest/random.hpp"

using namespace zest;

TEST_CASE("sphere draws sit on the radius sqrt(d)")
{
    const PerturbationSpec spec{PerturbationKind::sphere, 1.0, 7};
    const ParamVector v = sample_perturbation(spec, 0, 4);
    CHECK(v.norm() == doctest::Approx(2.0).epsilon(1e-12));

    for (std::uint64_t i = 0; i < 200; ++i)
    {
        const ParamVector w = sample_perturbation(spec.with_seed(i), i, 37);
        CHECK(std::abs(w.squaredNorm() / 37.0 - 1.0) < 1e-10);
    }
}

TEST_CASE("regeneration is bitwise")
{
    const PerturbationSpec spec{PerturbationKind::gaussian, 1.0, 42};
    const ParamVector a = sample_perturbation(spec, 3, 100);
    const ParamVector b = sample_perturbation(spec, 3, 100);
    CHECK((a.array() == b.array()).all());

    // Order of evaluation does not matter: draw index 5 before and after others.
    const ParamVector c = sample_perturbation(spec, 5, 100);
    for (std::uint64_t i = 0; i < 10; ++i)
        sample_perturbation(spec, i, 100);
    CHECK((sample_perturbation(spec, 5, 100).array() == c.array()).all());

    for (auto kind : {PerturbationKind::sphere, PerturbationKind::ball})
    {
        const PerturbationSpec s{kind, 1.0, 9};
        CHECK((sample_perturbation(s, 2, 13).array() == sample_perturbation(s, 2, 13).array()).all());
    }
}

TEST_CASE("different indices and seeds give different draws")
{
    const PerturbationSpec spec{PerturbationKind::gaussian, 1.0, 1};
    CHECK((sample_perturbation(spec, 0, 8).array() != sample_perturbation(spec, 1, 8).array()).any());
    CHECK((sample_perturbation(spec, 0, 8).array() != sample_perturbation(spec.with_seed(2), 0, 8).array()).any());
}

TEST_CASE("ball draws stay inside and share the sphere's direction")
{
    const PerturbationSpec ball{PerturbationKind::ball, 1.0, 5};
    const PerturbationSpec sphere{PerturbationKind::sphere, 1.0, 5};
    for (std::uint64_t i = 0; i < 500; ++i)
    {
        const ParamVector b = sample_perturbation(ball, i, 6);
        const ParamVector s = sample_perturbation(sphere, i, 6);
        CHECK(b.norm() <= std::sqrt(6.0) * (1 + 1e-15));
        CHECK((b.normalized() - s.normalized()).norm() < 1e-12);
    }
}

TEST_CASE("zero dimension is rejected")
{
    CHECK_THROWS_AS(sample_perturbation({}, 0, 0), DimensionError);
    CHECK_THROWS_AS(perturbation_norm_moments(0), DimensionError);
}

TEST_CASE("ball norm moments closed forms")
{
    // E|v| = sqrt(d) d/(d+1), Var = d^2 / ((d+2)(d+1)^2), integrating r^d over [0, sqrt(d)].
    auto oracle = [](double d) {
        const double R = std::sqrt(d);
        const double m1 = d / (d + 1) * R;
        const double m2 = d / (d + 2) * R * R;
        return std::pair{m1, m2 - m1 * m1};
    };
    for (Index d : {1, 2, 3, 7, 50})
    {
        const auto [mean, var] = oracle(static_cast<double>(d));
        const NormMoments m = perturbation_norm_moments(d);
        CHECK(m.mean == doctest::Approx(mean).epsilon(1e-14));
        CHECK(m.variance == doctest::Approx(var).epsilon(1e-12));
    }
    CHECK(perturbation_norm_moments(3).mean == doctest::Approx(1.299038).epsilon(1e-6));
    CHECK(perturbation_norm_moments(3).variance == doctest::Approx(0.1125).epsilon(1e-14));
    CHECK(perturbation_norm_moments(1).mean == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(perturbation_norm_moments(1).variance == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
    // The exact variance is d^2 / ((d + 2)(d + 1)^2), which behaves like 1/d.
    for (Index d : {100, 1000, 10000})
        CHECK(std::abs(perturbation_norm_moments(d).variance * static_cast<double>(d) - 1.0) < 0.05);
}

TEST_CASE("ball norm empirical mean at d = 3")
{
    const PerturbationSpec spec{PerturbationKind::ball, 1.0, 2024};
    ParamVector v(3);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i)
    {
        sample_perturbation_into(spec, static_cast<std::uint64_t>(i), v);
        const double r = v.norm();
        sum += r;
        sum_sq += r * r;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean - std::sqrt(3.0) * 0.75) < 0.002);
    const NormMoments m = perturbation_norm_moments(3);
    CHECK(std::abs(mean - m.mean) < 3.0 * std::sqrt(m.variance / n));
    CHECK(std::abs(var - m.variance) < 0.002);
}

TEST_CASE("gaussian coordinates are standard normal")
{
    const PerturbationSpec spec{PerturbationKind::gaussian, 1.0, 77};
    const int n = 1000000;
    const Index d = 10;
    ParamVector v(d), sum = ParamVector::Zero(d), sum_sq = ParamVector::Zero(d);
    for (int i = 0; i < n; ++i)
    {
        sample_perturbation_into(spec, static_cast<std::uint64_t>(i), v);
        sum += v;
        sum_sq += v.cwiseProduct(v);
    }
    for (Index j = 0; j < d; ++j)
    {
        const double mean = sum[j] / n;
        const double var = sum_sq[j] / n - mean * mean;
        CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
        CHECK(std::abs(var - 1.0) < 0.01);
    }
}

TEST_CASE("axpy")
{
    ParamVector x(2), v(2);
    x << 1, 2;
    v << 5, 5;
    CHECK(axpy(x, 0.0, v) == x);
    x << 0, 0;
    v << 1, -1;
    ParamVector expected(2);
    expected << 2, -2;
    CHECK(axpy(x, 2.0, v) == expected);
    ParamVector one(1);
    one << 1;
    CHECK(axpy(one, -1.0, one)[0] == 0.0);

    ParamVector in_place = ParamVector::Ones(3);
    axpy_update(in_place, 2.0, ParamVector::Ones(3));
    CHECK(in_place == ParamVector::Constant(3, 3.0));

    ParamVector bad(3);
    CHECK_THROWS_AS(axpy_update(bad, 1.0, ParamVector(2)), DimensionError);

    // Works on other scalar types.
    Vector<float> xf = Vector<float>::Ones(2);
    axpy_update(xf, 0.5f, Vector<float>::Ones(2));
    CHECK(xf[0] == 1.5f);
}

TEST_CASE("perturbation kind names round-trip")
{
    for (auto k : {PerturbationKind::gaussian, PerturbationKind::sphere, PerturbationKind::ball})
        CHECK(parse_perturbation_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_perturbation_kind("cube"), ConfigError);
}

TEST_CASE("counter rng is a pure function of its key")
{
    CounterRng a(123), b(123);
    for (int i = 0; i < 100; ++i)
        CHECK(a() == b());
    CHECK(derive_seed(1, 2) != derive_seed(2, 1));
    CHECK(derive_seed(0, 0) != derive_seed(0, 1));
}
