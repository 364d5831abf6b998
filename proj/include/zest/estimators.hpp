#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

#include "zest/core.hpp"
#include "zest/objectives.hpp"

namespace zest
{
    enum class EstimatorKind
    {
        naive,          ///< plug-in ratio of sample means, O(1/k) bias
        bias_corrected, ///< second-order corrected ratio, O(1/k^2) bias
        vanilla         ///< two-point estimator of the smoothed (t -> 0) objective
    };

    std::string_view to_string(EstimatorKind kind);
    EstimatorKind parse_estimator_kind(std::string_view name);

    struct TiltConfig
    {
        double t = 1.0;
        int k = 1;
        EstimatorKind estimator = EstimatorKind::naive;
        PerturbationSpec perturbation;

        /// Throws ConfigError on an invalid combination.
        void validate() const;

        /// t = 0 routes every estimator to the two-point form, its t -> 0 limit.
        EstimatorKind effective_estimator() const { return t == 0.0 ? EstimatorKind::vanilla : estimator; }
    };

    /// Raw losses f(x + rho v_i; D) and f(x - rho v_i; D). Query i uses the
    /// perturbation stream (seed, i), so v_i never needs to be stored.
    struct LossPairBatch
    {
        Vector<double> fplus;
        Vector<double> fminus;
        std::uint64_t seed = 0;

        Index size() const { return fplus.size(); }
    };

    /// Normalized tilted masses abar_i^{+/-} = exp(t f_i^{+/-}) / Z, with log Z kept for reference.
    template <typename Scalar>
    struct TiltedMasses
    {
        Vector<Scalar> plus;
        Vector<Scalar> minus;
        Scalar log_normalizer = 0; ///< log sum_i (e^{t f_i^+} + e^{t f_i^-})
    };

    /// Softmax over the 2k values t*f, shifted by their maximum so no finite input overflows.
    template <typename DerivedP, typename DerivedM>
    TiltedMasses<typename DerivedP::Scalar> tilted_normalize(const Eigen::MatrixBase<DerivedP> &fplus,
                                                             const Eigen::MatrixBase<DerivedM> &fminus,
                                                             typename DerivedP::Scalar t)
    {
        using Scalar = typename DerivedP::Scalar;
        if (fplus.size() != fminus.size() || fplus.size() == 0)
            throw DimensionError("tilted_normalize: loss vectors must be non-empty and of equal length");
        if (!(t > 0))
            throw ConfigError("tilted_normalize: tilt must be positive");

        const Scalar shift = t * std::max(fplus.maxCoeff(), fminus.maxCoeff());
        TiltedMasses<Scalar> out;
        out.plus = (t * fplus.array() - shift).exp().matrix();
        out.minus = (t * fminus.array() - shift).exp().matrix();
        const Scalar z = out.plus.sum() + out.minus.sum();
        if (!(z > 0) || !std::isfinite(z))
            throw NumericError("tilted_normalize: degenerate normalizer");
        out.plus /= z;
        out.minus /= z;
        out.log_normalizer = shift + std::log(z);
        return out;
    }

    inline TiltedMasses<double> tilted_normalize(const LossPairBatch &pairs, double t)
    {
        return tilted_normalize(pairs.fplus, pairs.fminus, t);
    }

    /// w_i = abar_i^+ - abar_i^-.
    template <typename Scalar>
    Vector<Scalar> weights_naive(const TiltedMasses<Scalar> &masses)
    {
        return masses.plus - masses.minus;
    }

    /// w_i = {1 + k/(k-1) [B_i - sum_j B_j^2]} (abar_i^+ - abar_i^-) with B_i = abar_i^+ + abar_i^-.
    ///
    /// Since sum_j B_j = 1 the bracket equals sum_j B_j (B_i - B_j); that form is
    /// used because it vanishes exactly when all B_i coincide.
    template <typename Scalar>
    Vector<Scalar> weights_bias_corrected(const TiltedMasses<Scalar> &masses)
    {
        const Index k = masses.plus.size();
        if (k < 2)
            throw ConfigError("bias-corrected weights need k >= 2 queries");
        const Vector<Scalar> B = masses.plus + masses.minus;
        const Scalar scale = static_cast<Scalar>(k) / static_cast<Scalar>(k - 1);
        Vector<Scalar> w(k);
        for (Index i = 0; i < k; ++i)
        {
            Scalar bracket = 0;
            for (Index j = 0; j < k; ++j)
                bracket += B[j] * (B[i] - B[j]);
            w[i] = (1 + scale * bracket) * (masses.plus[i] - masses.minus[i]);
        }
        return w;
    }

    /// Evaluates all 2k losses. `scratch` (size d) is the only d-vector touched besides x.
    LossPairBatch evaluate_loss_pairs(const Objective &obj, ConstVectorRef x, const PerturbationSpec &spec, int k,
                                      BatchId batch, Eigen::Ref<ParamVector> scratch);

    LossPairBatch evaluate_loss_pairs(const Objective &obj, ConstVectorRef x, const PerturbationSpec &spec, int k,
                                      BatchId batch = BatchId::full());

    /// Per-query coefficients c_i such that the gradient estimate is sum_i c_i v_i.
    /// Tilted estimators give c_i = w_i / (t rho); vanilla gives (f_i^+ - f_i^-) / (2 rho k).
    /// `weights_out`, when given, receives the raw w_i (or the vanilla finite differences).
    Vector<double> query_coefficients(const LossPairBatch &pairs, const TiltConfig &cfg,
                                      Vector<double> *weights_out = nullptr);

    /// Tilted zeroth-order gradient estimate of F_t at x.
    ParamVector estimate_gradient(const Objective &obj, ConstVectorRef x, const TiltConfig &cfg,
                                  BatchId batch = BatchId::full());

    struct ValueEstimate
    {
        double value = 0.0;
        double std_error = 0.0; ///< delta-method standard error
        Index samples = 0;
    };

    /// Monte-Carlo estimate of F_t(x) = (1/t) log E[exp(t f(x + rho v))]; t = 0 gives E[f(x + rho v)].
    ValueEstimate estimate_tilted_value(const Objective &obj, ConstVectorRef x, double t, Index n_samples,
                                        const PerturbationSpec &spec, BatchId batch = BatchId::full());

    double estimate_objective_value(const Objective &obj, ConstVectorRef x, double t, Index n_samples,
                                    const PerturbationSpec &spec);

    /// log sum_i exp(values_i), shifted by the maximum.
    template <typename Derived>
    typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived> &values)
    {
        using Scalar = typename Derived::Scalar;
        if (values.size() == 0)
            return -std::numeric_limits<Scalar>::infinity();
        const Scalar m = values.maxCoeff();
        if (!std::isfinite(m))
            return m;
        return m + std::log((values.derived().array() - m).exp().sum());
    }
}
