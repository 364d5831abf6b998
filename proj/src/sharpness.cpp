#include "zest/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace zest
{
    namespace
    {
        void require_admissible(const SpectralModel &model, double t)
        {
            if (t < 0.0 || !std::isfinite(t))
                throw DomainError("tilt must be finite and non-negative, got " + std::to_string(t));
            const double r2 = model.rho * model.rho;
            for (Index i = 0; i < model.dimension(); ++i)
                if (!(1.0 - t * r2 * model.lambda[i] > 0.0))
                    throw DomainError("1 - t rho^2 lambda <= 0 for eigenvalue lambda[" + std::to_string(i) +
                                      "] = " + std::to_string(model.lambda[i]) + " at t = " + std::to_string(t));
        }

        // psi written in terms of the gap s = 2 omega - rho^2 lambda_1 to the leading pole, so
        // every denominator s + rho^2 (lambda_1 - lambda_j) is formed without cancellation.
        struct SecularGap
        {
            const SpectralModel &m;
            double r2;

            double denom(Index j, double s) const { return s + r2 * (m.lambda[0] - m.lambda[j]); }

            double psi(double s) const
            {
                double acc = 0.0;
                for (Index j = 0; j < m.dimension(); ++j)
                {
                    if (m.g[j] == 0.0)
                        continue;
                    const double D = denom(j, s);
                    acc += r2 * m.g[j] * m.g[j] / (D * D);
                }
                return acc;
            }

            double dpsi(double s) const
            {
                double acc = 0.0;
                for (Index j = 0; j < m.dimension(); ++j)
                {
                    if (m.g[j] == 0.0)
                        continue;
                    const double D = denom(j, s);
                    acc -= 2.0 * r2 * m.g[j] * m.g[j] / (D * D * D);
                }
                return acc;
            }
        };

        double phi(const SpectralModel &m, const Vector<double> &u)
        {
            const double r2 = m.rho * m.rho;
            return m.rho * m.g.dot(u) + 0.5 * r2 * (m.lambda.array() * u.array().square()).sum();
        }
    }

    void SpectralModel::validate() const
    {
        if (lambda.size() == 0 || lambda.size() != g.size())
            throw DimensionError("spectral model: lambda and g must be non-empty and of equal length");
        if (!(rho > 0.0) || !std::isfinite(rho))
            throw DomainError("spectral model: rho must be positive");
        if (!all_finite(lambda) || !all_finite(g))
            throw DomainError("spectral model: non-finite entries");
        for (Index i = 1; i < lambda.size(); ++i)
            if (lambda[i] > lambda[i - 1])
                throw DomainError("spectral model: eigenvalues must be sorted descending");
    }

    SpectralModel SpectralModel::from_unsorted(Vector<double> lambda, Vector<double> g, double rho)
    {
        if (lambda.size() != g.size())
            throw DimensionError("spectral model: lambda and g must have equal length");
        std::vector<Index> order(static_cast<std::size_t>(lambda.size()));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return lambda[a] > lambda[b]; });
        SpectralModel m;
        m.lambda.resize(lambda.size());
        m.g.resize(g.size());
        for (Index i = 0; i < lambda.size(); ++i)
        {
            m.lambda[i] = lambda[order[static_cast<std::size_t>(i)]];
            m.g[i] = g[order[static_cast<std::size_t>(i)]];
        }
        m.rho = rho;
        m.validate();
        return m;
    }

    SpectralModel spectral_model(const Objective &obj, ConstVectorRef x, double rho, double fd_step)
    {
        Matrix<double> H;
        if (auto exact = obj.hessian(x))
            H = 0.5 * (*exact + exact->transpose());
        else
            H = finite_difference_hessian(obj, x, fd_step);

        ParamVector grad;
        if (auto exact = obj.gradient(x, BatchId::full()))
            grad = *exact;
        else
            grad = finite_difference_gradient(obj, x, 1e-6);

        Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(H);
        if (eig.info() != Eigen::Success)
            throw NumericError("spectral_model: eigendecomposition failed");
        // Ascending from Eigen; reverse for lambda_1 >= ... >= lambda_d.
        SpectralModel m;
        m.lambda = eig.eigenvalues().reverse();
        m.g = (eig.eigenvectors().transpose() * grad).reverse();
        m.rho = rho;
        m.validate();
        return m;
    }

    double gaussian_rt(const SpectralModel &model, double t)
    {
        model.validate();
        const double r2 = model.rho * model.rho;
        if (t == 0.0)
            return 0.5 * r2 * model.lambda.sum();
        require_admissible(model, t);
        double acc = 0.0;
        for (Index i = 0; i < model.dimension(); ++i)
        {
            const double a = t * r2 * model.lambda[i];
            const double tg = t * model.rho * model.g[i];
            acc += tg * tg / (1.0 - a) - std::log1p(-a);
        }
        return acc / (2.0 * t);
    }

    double gaussian_sensitivity(const SpectralModel &model, double t, Index i)
    {
        model.validate();
        if (i < 0 || i >= model.dimension())
            throw DimensionError("gaussian_sensitivity: index out of range");
        require_admissible(model, t);
        const double r2 = model.rho * model.rho;
        const double one_minus_a = 1.0 - t * r2 * model.lambda[i];
        const double g = model.g[i];
        return r2 / (2.0 * one_minus_a) * (t * t * r2 * g * g / one_minus_a + 1.0);
    }

    ParamVector gaussian_tilted_gradient(const QuadraticObjective &q, ConstVectorRef x, double t, double rho)
    {
        const Index d = q.dimension();
        if (x.size() != d)
            throw DimensionError("gaussian_tilted_gradient: dimension mismatch");
        const Matrix<double> A = Matrix<double>::Identity(d, d) - t * rho * rho * q.H();
        Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(A, Eigen::EigenvaluesOnly);
        if (!(eig.eigenvalues().minCoeff() > 0.0))
            throw DomainError("gaussian_tilted_gradient: I - t rho^2 H is not positive definite");
        const ParamVector grad = q.H() * x + q.b();
        return A.llt().solve(grad);
    }

    double ball_rt_limit_zero(const SpectralModel &model, Index d)
    {
        model.validate();
        if (d < 1)
            throw DimensionError("ball_rt_limit_zero: d must be >= 1");
        const double dd = static_cast<double>(d);
        return model.rho * model.rho * dd / (2.0 * (dd + 2.0)) * model.lambda.sum();
    }

    double secular_psi(const SpectralModel &model, double omega)
    {
        const double r2 = model.rho * model.rho;
        double acc = 0.0;
        for (Index j = 0; j < model.dimension(); ++j)
        {
            if (model.g[j] == 0.0)
                continue;
            const double D = 2.0 * omega - r2 * model.lambda[j];
            acc += r2 * model.g[j] * model.g[j] / (D * D);
        }
        return acc;
    }

    KktSolution r_infinity(const SpectralModel &model, Index d)
    {
        model.validate();
        if (d < 1)
            throw DimensionError("r_infinity: d must be >= 1");
        const Index n = model.dimension();
        const double rho = model.rho;
        const double r2 = rho * rho;
        const double dd = static_cast<double>(d);
        const double radius = std::sqrt(dd);
        const double lambda1 = model.lambda[0];
        const double gnorm = model.g.norm();

        KktSolution sol;
        sol.u_star = Vector<double>::Zero(n);

        // Pure curvature: all mass goes on the top eigendirection, or u = 0 if nothing curves up.
        if (gnorm == 0.0)
        {
            if (lambda1 > 0.0)
            {
                sol.u_star[0] = radius;
                sol.omega_star = 0.5 * r2 * lambda1;
                sol.r_infinity = 0.5 * r2 * dd * lambda1;
                sol.kkt_case = KktCase::boundary;
                sol.hard_case = true;
            }
            else
            {
                sol.kkt_case = KktCase::interior;
            }
            return sol;
        }

        // Linear regime.
        if ((model.lambda.array() == 0.0).all())
        {
            sol.u_star = (radius / gnorm) * model.g;
            sol.omega_star = rho * gnorm / (2.0 * radius);
            sol.r_infinity = rho * radius * gnorm;
            sol.kkt_case = KktCase::boundary;
            sol.secular_residual = std::abs(secular_psi(model, sol.omega_star) - dd);
            return sol;
        }

        // Interior: concave on the gradient's support and the unconstrained maximizer fits.
        bool concave = lambda1 <= 0.0;
        for (Index j = 0; j < n && concave; ++j)
            if (model.g[j] != 0.0 && !(model.lambda[j] < 0.0))
                concave = false;
        if (concave)
        {
            Vector<double> u = Vector<double>::Zero(n);
            double value = 0.0;
            for (Index j = 0; j < n; ++j)
                if (model.g[j] != 0.0)
                {
                    u[j] = -model.g[j] / (rho * model.lambda[j]);
                    value -= 0.5 * model.g[j] * model.g[j] / model.lambda[j];
                }
            if (u.squaredNorm() <= dd)
            {
                sol.u_star = u;
                sol.r_infinity = value;
                sol.kkt_case = KktCase::interior;
                return sol;
            }
        }

        sol.kkt_case = KktCase::boundary;
        const SecularGap sec{model, r2};
        const double s_min = std::max(0.0, -r2 * lambda1); // omega >= 0

        // Hard case: no gradient on the top eigenspace and the other directions do not fill the ball.
        bool top_gradient_zero = true;
        for (Index j = 0; j < n && model.lambda[j] == lambda1; ++j)
            if (model.g[j] != 0.0)
                top_gradient_zero = false;
        if (top_gradient_zero && s_min == 0.0 && sec.psi(0.0) <= dd)
        {
            for (Index j = 0; j < n; ++j)
                if (model.g[j] != 0.0)
                    sol.u_star[j] = rho * model.g[j] / sec.denom(j, 0.0);
            sol.u_star[0] = std::sqrt(std::max(0.0, dd - sol.u_star.squaredNorm()));
            sol.omega_star = 0.5 * r2 * lambda1;
            sol.r_infinity = phi(model, sol.u_star);
            sol.hard_case = true;
            sol.secular_residual = 0.0;
            return sol;
        }

        // Bracket the root of psi(s) = d; psi is strictly decreasing in s.
        const double scale = std::max({r2 * std::abs(lambda1), rho * gnorm / radius, 1e-300});
        double delta = scale;
        int guard = 0;
        while (!(sec.psi(s_min + delta) > dd))
        {
            delta *= 0.5;
            if (s_min + delta == s_min || ++guard > 4000)
                throw NumericError("r_infinity: could not bracket the secular root from below (psi = " +
                                   std::to_string(sec.psi(s_min + delta)) + ", d = " + std::to_string(dd) + ")");
        }
        double lo = s_min + delta;
        double hi = s_min + scale;
        guard = 0;
        while (!(sec.psi(hi) < dd))
        {
            hi = s_min + 2.0 * (hi - s_min);
            if (!std::isfinite(hi) || ++guard > 4000)
                throw NumericError("r_infinity: could not bracket the secular root from above");
        }
        if (!(sec.psi(lo) > dd && sec.psi(hi) < dd))
            throw NumericError("r_infinity: no sign change of psi - d on the bracket");

        int iterations = 0;
        while (hi - lo > 1e-12 && iterations < 2000)
        {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi)
                break;
            (sec.psi(mid) > dd ? lo : hi) = mid;
            ++iterations;
        }

        // Newton polish inside the final bracket.
        double s = 0.5 * (lo + hi);
        double best = s, best_res = std::abs(sec.psi(s) - dd);
        for (int it = 0; it < 50 && best_res > 0.0; ++it)
        {
            const double step = (sec.psi(s) - dd) / sec.dpsi(s);
            double next = s - step;
            if (!(next > lo && next < hi))
                next = 0.5 * (lo + hi);
            (sec.psi(next) > dd ? lo : hi) = next;
            s = next;
            ++iterations;
            const double res = std::abs(sec.psi(s) - dd);
            if (res < best_res)
            {
                best_res = res;
                best = s;
            }
            else if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * s)
                break;
        }
        s = best;
        if (!(best_res <= 1e-8 * std::max(1.0, dd)))
            throw NumericError("r_infinity: secular solve did not converge, residual " + std::to_string(best_res));

        for (Index j = 0; j < n; ++j)
            sol.u_star[j] = rho * model.g[j] / sec.denom(j, s);
        sol.omega_star = 0.5 * (s + r2 * lambda1);
        sol.r_infinity = phi(model, sol.u_star);
        sol.secular_residual = best_res;
        sol.iterations = iterations;
        return sol;
    }

    double r_infinity_sensitivity(const KktSolution &sol, const SpectralModel &model, Index i)
    {
        model.validate();
        if (i < 0 || i >= model.dimension() || sol.u_star.size() != model.dimension())
            throw DimensionError("r_infinity_sensitivity: index or solution size mismatch");
        const double r2 = model.rho * model.rho;
        const double g = model.g[i];
        if (sol.kkt_case == KktCase::interior)
        {
            if (g == 0.0)
                return 0.0;
            return 0.5 * g * g / (model.lambda[i] * model.lambda[i]);
        }
        const double D = 2.0 * sol.omega_star - r2 * model.lambda[i];
        if (D > 0.0 && !(sol.hard_case && model.lambda[i] == model.lambda[0]))
            return r2 * r2 * g * g / (2.0 * D * D);
        return 0.5 * r2 * sol.u_star[i] * sol.u_star[i];
    }

    double admissible_t_bound(const SpectralModel &model, Index d, double epsilon)
    {
        model.validate();
        if (d < 1)
            throw DimensionError("admissible_t_bound: d must be >= 1");
        if (!(epsilon > 0.0))
            throw DomainError("admissible_t_bound: epsilon must be positive");
        const double dd = static_cast<double>(d);
        const double lam = std::max(std::abs(model.lambda[0]), std::abs(model.lambda[model.dimension() - 1]));
        const double inner = model.rho * std::sqrt(dd) * lam + 4.0 * model.g.norm();
        const double denom = model.rho * model.rho * dd * inner * inner;
        if (denom == 0.0)
            return std::numeric_limits<double>::infinity();
        return 32.0 * epsilon / denom;
    }

    std::vector<ProbeRow> neighborhood_loss_probe(const Objective &obj, ConstVectorRef x,
                                                  const std::vector<double> &radii, Index n_samples,
                                                  const PerturbationSpec &spec, BatchId batch)
    {
        if (n_samples < 2)
            throw ConfigError("neighborhood_loss_probe: need at least 2 samples");
        if (x.size() != obj.dimension())
            throw DimensionError("neighborhood_loss_probe: dimension mismatch");
        std::vector<ProbeRow> rows;
        rows.reserve(radii.size());
        ParamVector v(x.size());
        ParamVector probe(x.size());
        Vector<double> losses(n_samples);
        for (double r : radii)
        {
            if (!(r >= 0.0) || !std::isfinite(r))
                throw ConfigError("neighborhood_loss_probe: radii must be finite and non-negative");
            ProbeRow row;
            row.radius = r;
            row.samples = n_samples;
            if (r == 0.0)
            {
                row.mean = obj.evaluate(x, batch);
                rows.push_back(row);
                continue;
            }
            for (Index j = 0; j < n_samples; ++j)
            {
                sample_perturbation_into(spec, static_cast<std::uint64_t>(j), v);
                probe = x + r * v;
                losses[j] = obj.evaluate(probe, batch);
                if (!std::isfinite(losses[j]))
                    throw EvaluationError("neighborhood_loss_probe: non-finite loss", j);
            }
            row.mean = losses.mean();
            row.std_dev = std::sqrt((losses.array() - row.mean).square().sum() / static_cast<double>(n_samples - 1));
            rows.push_back(row);
        }
        return rows;
    }

    Vector<double> top_eigenvalues(const Objective &obj, ConstVectorRef x, Index count, double fd_step)
    {
        const Index d = obj.dimension();
        if (d > max_dense_hessian_dimension)
            throw ConfigError("top_eigenvalues: dimension " + std::to_string(d) + " exceeds the dense Hessian limit of " +
                              std::to_string(max_dense_hessian_dimension) + "; use the neighborhood probe instead");
        if (count < 1 || count > d)
            throw ConfigError("top_eigenvalues: count must be in [1, " + std::to_string(d) + "]");
        const Matrix<double> H = finite_difference_hessian(obj, x, fd_step);
        Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(H, Eigen::EigenvaluesOnly);
        if (eig.info() != Eigen::Success)
            throw NumericError("top_eigenvalues: eigendecomposition failed");
        return eig.eigenvalues().reverse().head(count);
    }

    ValueEstimate monte_carlo_rt(const Objective &obj, ConstVectorRef x, double t, Index n_samples,
                                 const PerturbationSpec &spec, BatchId batch)
    {
        ValueEstimate est = estimate_tilted_value(obj, x, t, n_samples, spec, batch);
        est.value -= obj.evaluate(x, batch);
        return est;
    }
}
