#pragma once

#include <cstdint>
#include <vector>

#include "zest/estimators.hpp"
#include "zest/objectives.hpp"

namespace zest
{
    /// Hessian eigenvalues (descending) and the gradient expressed in the same eigenbasis.
    struct SpectralModel
    {
        Vector<double> lambda;
        Vector<double> g;
        double rho = 1.0;

        Index dimension() const { return lambda.size(); }

        /// Throws on size mismatch, non-finite entries, unsorted eigenvalues or rho <= 0.
        void validate() const;

        /// Sorts (lambda, g) pairs by descending lambda.
        static SpectralModel from_unsorted(Vector<double> lambda, Vector<double> g, double rho);
    };

    /// Eigendecomposes the Hessian at x (exact when the objective has one,
    /// central differences otherwise) and projects the gradient onto it.
    SpectralModel spectral_model(const Objective &obj, ConstVectorRef x, double rho, double fd_step = 1e-4);

    /// Closed-form R_t under Gaussian perturbation:
    ///   (1/2t) sum_i [ (t rho g_i)^2 / (1 - t rho^2 lambda_i) - log(1 - t rho^2 lambda_i) ].
    /// t = 0 returns the limit (rho^2/2) sum_i lambda_i.
    double gaussian_rt(const SpectralModel &model, double t);

    /// dR_t/dlambda_i.
    double gaussian_sensitivity(const SpectralModel &model, double t, Index i);

    /// Gradient of F_t for a quadratic under Gaussian perturbation, (I - t rho^2 H)^{-1} grad f(x).
    ParamVector gaussian_tilted_gradient(const QuadraticObjective &q, ConstVectorRef x, double t, double rho);

    /// lim_{t->0} R_t under ball perturbation, rho^2 d / (2(d+2)) sum_i lambda_i.
    double ball_rt_limit_zero(const SpectralModel &model, Index d);

    enum class KktCase
    {
        interior,
        boundary
    };

    struct KktSolution
    {
        double omega_star = 0.0;
        Vector<double> u_star;
        double r_infinity = 0.0;
        KktCase kkt_case = KktCase::boundary;
        double secular_residual = 0.0; ///< |psi(omega*) - d|, zero when no root was solved for
        bool hard_case = false;        ///< omega* sits on the pole rho^2 lambda_1 / 2
        int iterations = 0;
    };

    /// psi(omega) = sum_j rho^2 g_j^2 / (2 omega - rho^2 lambda_j)^2.
    double secular_psi(const SpectralModel &model, double omega);

    /// max over |u| <= sqrt(d) of rho g.u + (rho^2/2) u' Lambda u.
    KktSolution r_infinity(const SpectralModel &model, Index d);

    /// dR_inf/dlambda_i at the solution.
    double r_infinity_sensitivity(const KktSolution &sol, const SpectralModel &model, Index i);

    /// Largest tilt for which the second-order expansion stays within epsilon.
    /// +infinity when g = 0 and all lambda = 0.
    double admissible_t_bound(const SpectralModel &model, Index d, double epsilon);

    struct ProbeRow
    {
        double radius = 0.0;
        double mean = 0.0;
        double std_dev = 0.0;
        Index samples = 0;
    };

    /// Mean and standard deviation of f(x + r v) over n draws of v, for each radius r.
    /// The same draws are reused across radii. spec.rho is ignored.
    std::vector<ProbeRow> neighborhood_loss_probe(const Objective &obj, ConstVectorRef x,
                                                  const std::vector<double> &radii, Index n_samples = 500,
                                                  const PerturbationSpec &spec = {},
                                                  BatchId batch = BatchId::full());

    inline constexpr Index max_dense_hessian_dimension = 2000;

    /// Largest `count` eigenvalues of the central-difference Hessian, descending.
    Vector<double> top_eigenvalues(const Objective &obj, ConstVectorRef x, Index count, double fd_step = 1e-3);

    /// Monte-Carlo F_t(x) - f(x).
    ValueEstimate monte_carlo_rt(const Objective &obj, ConstVectorRef x, double t, Index n_samples,
                                 const PerturbationSpec &spec, BatchId batch = BatchId::full());
}
