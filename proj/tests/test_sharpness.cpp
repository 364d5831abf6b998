#include <doctest.h>

#include <cmath>
#include <random>

#include "zest/sharpness.hpp"

using namespace zest;

namespace
{
    SpectralModel model(std::initializer_list<double> lambda, std::initializer_list<double> g, double rho)
    {
        Vector<double> l(static_cast<Index>(lambda.size())), gg(static_cast<Index>(g.size()));
        Index i = 0;
        for (double v : lambda)
            l[i++] = v;
        i = 0;
        for (double v : g)
            gg[i++] = v;
        return SpectralModel::from_unsorted(l, gg, rho);
    }

    SpectralModel random_model(std::mt19937_64 &rng, Index d, double rho)
    {
        std::normal_distribution<double> n(0, 1);
        Vector<double> l(d), g(d);
        for (Index i = 0; i < d; ++i)
        {
            l[i] = n(rng);
            g[i] = n(rng);
        }
        return SpectralModel::from_unsorted(l, g, rho);
    }

    // log E exp(t (f(x + rho v) - f(x))) for one eigen-coordinate, by trapezoidal quadrature over v.
    double log_mgf_1d(double lambda, double g, double rho, double t)
    {
        const double h = 1e-3;
        double acc = 0.0;
        for (double v = -14; v <= 14; v += h)
        {
            const double df = rho * g * v + 0.5 * lambda * rho * rho * v * v;
            acc += std::exp(t * df - 0.5 * v * v);
        }
        return std::log(acc * h / std::sqrt(2 * M_PI));
    }

    double phi(const SpectralModel &m, const Vector<double> &u)
    {
        return m.rho * m.g.dot(u) + 0.5 * m.rho * m.rho * (m.lambda.array() * u.array().square()).sum();
    }

    // Best of many uniform ball samples, then projected gradient ascent.
    double brute_force_r_infinity(const SpectralModel &m, Index d, std::mt19937_64 &rng, int samples)
    {
        const Index n = m.dimension();
        const double R = std::sqrt(static_cast<double>(d));
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> unif;
        Vector<double> best = Vector<double>::Zero(n), u(n);
        double best_val = phi(m, best);
        for (int s = 0; s < samples; ++s)
        {
            for (Index i = 0; i < n; ++i)
                u[i] = normal(rng);
            u *= R * std::pow(unif(rng), 1.0 / static_cast<double>(n)) / u.norm();
            const double v = phi(m, u);
            if (v > best_val)
            {
                best_val = v;
                best = u;
            }
        }
        const double r2 = m.rho * m.rho;
        const double step = 0.2 / (r2 * m.lambda.cwiseAbs().maxCoeff() + m.rho * m.g.norm() + 1e-12);
        for (int it = 0; it < 20000; ++it)
        {
            Vector<double> next = best + step * (m.rho * m.g + r2 * m.lambda.cwiseProduct(best));
            if (next.norm() > R)
                next *= R / next.norm();
            const double v = phi(m, next);
            if (v >= best_val)
            {
                best_val = v;
                best = next;
            }
        }
        return best_val;
    }
}

TEST_CASE("gaussian R_t closed form")
{
    CHECK(gaussian_rt(model({0, 0}, {0, 0}, 0.7), 0.8) == 0.0);
    CHECK(gaussian_rt(model({2, 1}, {0.3, -1}, 0.1), 0.0) == doctest::Approx(0.015).epsilon(1e-15));
    const double hand = 5.0 * (0.01 / 0.95 - std::log(0.95));
    CHECK(gaussian_rt(model({0.5}, {1}, 1.0), 0.1) == doctest::Approx(hand).epsilon(1e-14));
    CHECK(std::abs(gaussian_rt(model({0.5}, {1}, 1.0), 0.1) - 0.309098) < 1e-6);

    // Against direct quadrature of the moment generating function, one coordinate at a time.
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial)
    {
        const SpectralModel m = random_model(rng, 2, 0.6);
        const double t = 0.4 / std::max(1.0, m.lambda[0] * 0.36 * 2);
        double mgf = 0.0;
        for (Index i = 0; i < 2; ++i)
            mgf += log_mgf_1d(m.lambda[i], m.g[i], m.rho, t);
        CHECK(gaussian_rt(m, t) == doctest::Approx(mgf / t).epsilon(1e-7));
    }
}

TEST_CASE("inadmissible tilt names the eigenvalue")
{
    const SpectralModel m = model({4, 1}, {1, 1}, 1.0);
    try
    {
        gaussian_rt(m, 0.25);
        FAIL("expected a domain error");
    }
    catch (const DomainError &e)
    {
        CHECK(std::string(e.what()).find("lambda[0]") != std::string::npos);
    }
    CHECK_THROWS_AS(gaussian_sensitivity(m, 0.3, 1), DomainError);
    CHECK_NOTHROW(gaussian_rt(m, 0.2));
}

TEST_CASE("R_t limits and monotonicity")
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial)
    {
        const SpectralModel m = random_model(rng, 4, 0.5);
        const double limit = 0.5 * 0.25 * m.lambda.sum();
        CHECK(std::abs(gaussian_rt(m, 1e-9) - limit) <= 1e-6 * std::max(std::abs(limit), 1e-3));
        const double t_max = m.lambda[0] > 0 ? 0.99 / (0.25 * m.lambda[0]) : 5.0;
        double previous = gaussian_rt(m, 0.0);
        for (int s = 1; s <= 20; ++s)
        {
            const double r = gaussian_rt(m, t_max * s / 20.0);
            CHECK(r >= previous - 1e-12);
            previous = r;
        }
    }
}

TEST_CASE("gaussian sensitivity is the derivative of R_t")
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial)
    {
        const SpectralModel m = random_model(rng, 3, 0.8);
        const double t = 0.5 / (0.64 * std::max(std::abs(m.lambda[0]), 0.5));
        for (Index i = 0; i < 3; ++i)
        {
            const double h = 1e-5;
            SpectralModel up = m, down = m;
            up.lambda[i] += h;
            down.lambda[i] -= h;
            up = SpectralModel::from_unsorted(up.lambda, up.g, up.rho);
            down = SpectralModel::from_unsorted(down.lambda, down.g, down.rho);
            const double fd = (gaussian_rt(up, t) - gaussian_rt(down, t)) / (2 * h);
            CHECK(std::abs(gaussian_sensitivity(m, t, i) - fd) < 1e-6);
            CHECK(gaussian_sensitivity(m, t, i) > 0.0);
        }
    }

    const SpectralModel m = model({1.5, 0.2, -1}, {0.4, 0, 2}, 0.3);
    for (Index i = 0; i < 3; ++i)
        CHECK(gaussian_sensitivity(m, 1e-12, i) == doctest::Approx(0.045).epsilon(1e-9));
    CHECK(gaussian_sensitivity(m, 0.0, 2) == doctest::Approx(0.045).epsilon(1e-15));

    // g = 0: rho^2 / (2 (1 - t rho^2 lambda)), increasing in lambda.
    double previous = 0.0;
    for (double lambda = -2; lambda <= 2; lambda += 0.25)
    {
        const SpectralModel z = model({lambda}, {0}, 0.5);
        const double s = gaussian_sensitivity(z, 1.0, 0);
        CHECK(s == doctest::Approx(0.25 / (2 * (1 - 0.25 * lambda))).epsilon(1e-14));
        CHECK(s > previous);
        previous = s;
    }

    // With g != 0, sensitivity grows with t.
    const SpectralModel w = model({1}, {1}, 0.5);
    previous = gaussian_sensitivity(w, 0.0, 0);
    for (double t = 0.2; t < 3.9; t += 0.2)
    {
        const double s = gaussian_sensitivity(w, t, 0);
        CHECK(s > previous);
        previous = s;
    }
}

TEST_CASE("spectral model from a quadratic")
{
    Matrix<double> H(3, 3);
    H << 2, 0.5, 0, 0.5, 1, -0.3, 0, -0.3, -0.5;
    ParamVector b(3), x(3);
    b << 0.2, -0.4, 1;
    x << 0.1, 0.3, -0.2;
    const QuadraticObjective q(H, b);
    const SpectralModel m = spectral_model(q, x, 0.7);
    const ParamVector grad = H * x + b;
    CHECK(m.lambda.sum() == doctest::Approx(H.trace()).epsilon(1e-13));
    CHECK(m.g.squaredNorm() == doctest::Approx(grad.squaredNorm()).epsilon(1e-13));
    CHECK(m.lambda[0] >= m.lambda[1]);
    CHECK(m.lambda[1] >= m.lambda[2]);

    // Matrix form of R_t: (1/2t) [t^2 rho^2 grad' (I - A)^{-1} grad - log det(I - A)], A = t rho^2 H.
    const double t = 0.4, rho = 0.7;
    const Matrix<double> I_A = Matrix<double>::Identity(3, 3) - t * rho * rho * H;
    const double matrix_form =
        (t * t * rho * rho * grad.dot(I_A.inverse() * grad) - std::log(I_A.determinant())) / (2 * t);
    CHECK(gaussian_rt(m, t) == doctest::Approx(matrix_form).epsilon(1e-12));

    // grad F_t = (I - A)^{-1} grad f, checked against differences of the matrix form in x.
    auto F = [&](const ParamVector &p) {
        const ParamVector gp = H * p + b;
        return q(p) + (t * t * rho * rho * gp.dot(I_A.inverse() * gp) - std::log(I_A.determinant())) / (2 * t);
    };
    const ParamVector analytic = gaussian_tilted_gradient(q, x, t, rho);
    for (Index i = 0; i < 3; ++i)
    {
        ParamVector up = x, down = x;
        up[i] += 1e-5;
        down[i] -= 1e-5;
        CHECK(analytic[i] == doctest::Approx((F(up) - F(down)) / 2e-5).epsilon(1e-7));
    }
}

TEST_CASE("ball limit at t -> 0")
{
    CHECK(ball_rt_limit_zero(model({1, 1}, {0, 0}, 1.0), 2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ball_rt_limit_zero(model({0, 0, 0}, {1, 1, 1}, 2.0), 3) == 0.0);
    const SpectralModel m = model({1.5, 0.5}, {1, 0}, 0.4);
    const double gaussian_limit = 0.5 * 0.16 * 2.0;
    CHECK(ball_rt_limit_zero(m, 100000) / gaussian_limit == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("R_infinity special regimes")
{
    // Linear: rho sqrt(d) |g|.
    const SpectralModel lin = model({0, 0, 0}, {1, -2, 2}, 0.5);
    const KktSolution s = r_infinity(lin, 3);
    CHECK(s.r_infinity == 0.5 * std::sqrt(3.0) * 3.0);
    CHECK(s.kkt_case == KktCase::boundary);
    CHECK(s.u_star.norm() == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));

    // Interior: d = 1, lambda = -2, g = 1.
    const KktSolution in = r_infinity(model({-2}, {1}, 1.0), 1);
    CHECK(in.kkt_case == KktCase::interior);
    CHECK(in.u_star[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(in.r_infinity == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(in.omega_star == 0.0);

    // Pure curvature: (rho^2/2) d lambda_1.
    const KktSolution pc = r_infinity(model({3, 1, -1}, {0, 0, 0}, 0.2), 3);
    CHECK(pc.r_infinity == doctest::Approx(0.5 * 0.04 * 3 * 3).epsilon(1e-14));
    CHECK(pc.u_star.norm() == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    CHECK(r_infinity(model({-1, -2}, {0, 0}, 1.0), 2).r_infinity == 0.0);

    // Hard case: no gradient along the top eigenvector.
    const SpectralModel hard = model({2, 0.5}, {0, 0.1}, 1.0);
    const KktSolution h = r_infinity(hard, 2);
    CHECK(h.hard_case);
    CHECK(h.u_star.norm() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    std::mt19937_64 rng(1);
    CHECK(h.r_infinity == doctest::Approx(brute_force_r_infinity(hard, 2, rng, 20000)).epsilon(1e-6));

    // Interior candidate too large: falls back to the boundary.
    const KktSolution big = r_infinity(model({-0.1}, {1}, 1.0), 1);
    CHECK(big.kkt_case == KktCase::boundary);
    CHECK(big.r_infinity == doctest::Approx(1.0 - 0.05).epsilon(1e-12));
}

TEST_CASE("R_infinity matches brute force on random models")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Index d = 1 + trial % 3;
        const SpectralModel m = random_model(rng, d, 0.5 + 0.1 * (trial % 5));
        const KktSolution s = r_infinity(m, d);
        const double brute = brute_force_r_infinity(m, d, rng, 50000);
        CHECK(std::abs(s.r_infinity - brute) <= 1e-3 * std::max(1.0, std::abs(brute)));
        CHECK(s.r_infinity >= brute - 1e-9 * std::max(1.0, std::abs(brute)));
        if (s.kkt_case == KktCase::boundary)
        {
            CHECK(std::abs(secular_psi(m, s.omega_star) - static_cast<double>(d)) < 1e-10);
            CHECK(s.secular_residual < 1e-10);
            CHECK(std::abs(s.u_star.norm() - std::sqrt(static_cast<double>(d))) < 1e-8);
            CHECK(s.omega_star > std::max(0.5 * m.rho * m.rho * m.lambda[0], 0.0));
        }
        else
        {
            CHECK(s.u_star.norm() <= std::sqrt(static_cast<double>(d)));
            CHECK((m.lambda.array() < 0).all());
        }
    }
}

TEST_CASE("R_infinity sensitivities")
{
    std::mt19937_64 rng(31);
    int boundary = 0, interior = 0;
    for (int trial = 0; trial < 40; ++trial)
    {
        const Index d = 1 + trial % 3;
        SpectralModel m = random_model(rng, d, 0.7);
        if (trial % 4 == 0)
        {
            // Concave with a small gradient: interior solutions.
            m.lambda = (-m.lambda.cwiseAbs() - Vector<double>::Constant(d, 1.0)).eval();
            m.g *= 0.2;
        }
        m = SpectralModel::from_unsorted(m.lambda, m.g, m.rho);
        const KktSolution s = r_infinity(m, d);
        (s.kkt_case == KktCase::boundary ? boundary : interior)++;
        for (Index i = 0; i < d; ++i)
        {
            const double closed = r_infinity_sensitivity(s, m, i);
            CHECK(std::abs(closed - 0.5 * m.rho * m.rho * s.u_star[i] * s.u_star[i]) < 1e-10);

            // Envelope theorem: dR/dlambda_i by differences of the solver.
            const double h = 1e-6;
            SpectralModel up = m, down = m;
            up.lambda[i] += h;
            down.lambda[i] -= h;
            bool ordered = true;
            for (Index j = 1; j < d; ++j)
                ordered = ordered && up.lambda[j] <= up.lambda[j - 1] && down.lambda[j] <= down.lambda[j - 1];
            if (!ordered)
                continue;
            const double fd = (r_infinity(up, d).r_infinity - r_infinity(down, d).r_infinity) / (2 * h);
            CHECK(std::abs(closed - fd) < 1e-4);
        }
    }
    CHECK(boundary > 0);
    CHECK(interior > 0);

    // Boundary, zero gradient component off the top direction: no influence.
    const SpectralModel m = model({1, 0.5, -1}, {1, 0, 0.5}, 1.0);
    const KktSolution s = r_infinity(m, 3);
    REQUIRE(s.kkt_case == KktCase::boundary);
    CHECK(r_infinity_sensitivity(s, m, 1) == 0.0);
}

TEST_CASE("admissible tilt bound")
{
    const SpectralModel m = model({1}, {1}, 1.0);
    CHECK(admissible_t_bound(m, 1, 1.0) == doctest::Approx(1.28).epsilon(1e-15));
    CHECK(admissible_t_bound(m, 1, 2.0) == doctest::Approx(2.56).epsilon(1e-15));
    double previous = 0.0;
    for (double rho : {1.0, 0.1, 0.01, 0.001})
    {
        const double b = admissible_t_bound(model({1}, {1}, rho), 1, 1.0);
        CHECK(b > previous);
        previous = b;
    }
    CHECK(std::isinf(admissible_t_bound(model({0, 0}, {0, 0}, 1.0), 2, 1.0)));
    CHECK_THROWS_AS(admissible_t_bound(m, 1, 0.0), DomainError);
}

TEST_CASE("neighborhood probe")
{
    ParamVector h(1), b(1), x(1);
    h << 0.8;
    b << 0.3;
    x << 0.5;
    const QuadraticObjective q = QuadraticObjective::diagonal(h, b);
    const auto rows = neighborhood_loss_probe(q, x, {0.0, 0.5, 1.0}, 200000, {PerturbationKind::gaussian, 1.0, 4});
    REQUIRE(rows.size() == 3u);
    CHECK(rows[0].mean == q(x));
    CHECK(rows[0].std_dev == 0.0);
    for (std::size_t i = 1; i < 3; ++i)
    {
        const double r = rows[i].radius;
        const double expected = q(x) + 0.8 * r * r / 2;
        CHECK(std::abs(rows[i].mean - expected) < 4 * rows[i].std_dev / std::sqrt(200000.0));
    }
    CHECK(neighborhood_loss_probe(q, x, {0.1})[0].samples == 500);
    CHECK_THROWS_AS(neighborhood_loss_probe(q, x, {0.1}, 1), ConfigError);
}

TEST_CASE("top eigenvalues")
{
    TwoMinimaObjective tm;
    ParamVector p(2);
    p << 1, 0;
    const Vector<double> sharp = top_eigenvalues(tm, p, 2);
    CHECK(std::abs(sharp[0] - 2.4) < 1e-4);
    CHECK(std::abs(sharp[1] - 0.4) < 1e-4);
    p << -1, 0;
    const Vector<double> flat = top_eigenvalues(tm, p, 2);
    CHECK(std::abs(flat[0] - 2.0) < 1e-4);
    CHECK(std::abs(flat[1] - 0.8) < 1e-4);

    Matrix<double> H(3, 3);
    H << 4, 1, 0, 1, 3, 0, 0, 0, -2;
    const QuadraticObjective q(H, ParamVector::Zero(3));
    const Vector<double> top = top_eigenvalues(q, ParamVector::Ones(3), 3);
    // Eigenvalues of [[4,1],[1,3]] are (7 +- sqrt 5)/2.
    CHECK(std::abs(top[0] - (7 + std::sqrt(5.0)) / 2) < 1e-8);
    CHECK(std::abs(top[1] - (7 - std::sqrt(5.0)) / 2) < 1e-8);
    CHECK(std::abs(top[2] + 2) < 1e-8);

    CHECK_THROWS_AS(top_eigenvalues(q, ParamVector::Ones(3), 4), ConfigError);
    ConstantObjective huge(max_dense_hessian_dimension + 1, 0.0);
    CHECK_THROWS_AS(top_eigenvalues(huge, ParamVector::Zero(max_dense_hessian_dimension + 1), 1), ConfigError);
}

TEST_CASE("Monte-Carlo R_t")
{
    ParamVector h(1), b(1);
    h << 0.5;
    b << 1;
    const QuadraticObjective q = QuadraticObjective::diagonal(h, b);
    const ParamVector x = ParamVector::Zero(1);
    const PerturbationSpec spec{PerturbationKind::gaussian, 1.0, 10};
    const ValueEstimate est = monte_carlo_rt(q, x, 0.1, 400000, spec);
    CHECK(std::abs(est.value - 0.309098) < 4 * est.std_error);
    const ValueEstimate at0 = monte_carlo_rt(q, x, 0.0, 400000, spec);
    CHECK(std::abs(at0.value - 0.25) < 4 * at0.std_error);

    ConstantObjective c(2, 5.0);
    CHECK(std::abs(monte_carlo_rt(c, ParamVector::Zero(2), 0.7, 1000, spec).value) < 1e-12);

    // Standard error halves when n quadruples.
    const ValueEstimate small = monte_carlo_rt(q, x, 0.1, 50000, spec);
    const ValueEstimate large = monte_carlo_rt(q, x, 0.1, 200000, spec);
    CHECK(small.std_error / large.std_error == doctest::Approx(2.0).epsilon(0.05));
}
