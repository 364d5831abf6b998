#include "zest/estimators.hpp"

#include <string>

namespace zest
{
    std::string_view to_string(EstimatorKind kind)
    {
        switch (kind)
        {
        case EstimatorKind::naive:
            return "naive";
        case EstimatorKind::bias_corrected:
            return "bias-corrected";
        case EstimatorKind::vanilla:
            return "vanilla";
        }
        return "unknown";
    }

    EstimatorKind parse_estimator_kind(std::string_view name)
    {
        if (name == "naive")
            return EstimatorKind::naive;
        if (name == "bias-corrected" || name == "bias_corrected" || name == "bc")
            return EstimatorKind::bias_corrected;
        if (name == "vanilla")
            return EstimatorKind::vanilla;
        throw ConfigError("unknown estimator '" + std::string(name) + "' (expected naive, bias-corrected or vanilla)");
    }

    void TiltConfig::validate() const
    {
        if (!(t >= 0.0) || !std::isfinite(t))
            throw ConfigError("tilt t must be finite and >= 0");
        if (k < 1)
            throw ConfigError("query count k must be >= 1");
        if (!(perturbation.rho > 0.0) || !std::isfinite(perturbation.rho))
            throw ConfigError("perturbation scale rho must be positive");
        if (perturbation.kind == PerturbationKind::ball)
            throw ConfigError("gradient estimation needs gaussian or sphere perturbations; ball is for value estimates");
        if (effective_estimator() == EstimatorKind::bias_corrected && k < 2)
            throw ConfigError("bias-corrected estimator needs k >= 2");
    }

    LossPairBatch evaluate_loss_pairs(const Objective &obj, ConstVectorRef x, const PerturbationSpec &spec, int k,
                                      BatchId batch, Eigen::Ref<ParamVector> scratch)
    {
        if (x.size() != obj.dimension() || scratch.size() != x.size())
            throw DimensionError("evaluate_loss_pairs: dimension mismatch");
        if (k < 1)
            throw ConfigError("evaluate_loss_pairs: k must be >= 1");

        LossPairBatch pairs;
        pairs.seed = spec.seed;
        pairs.fplus.resize(k);
        pairs.fminus.resize(k);
        const double rho = spec.rho;
        for (int i = 0; i < k; ++i)
        {
            const auto q = static_cast<std::uint64_t>(i);
            // The perturbation is regenerated for each sign instead of being kept alongside x + rho v.
            sample_perturbation_into(spec, q, scratch);
            scratch = x + rho * scratch;
            pairs.fplus[i] = obj.evaluate(scratch, batch);

            sample_perturbation_into(spec, q, scratch);
            scratch = x - rho * scratch;
            pairs.fminus[i] = obj.evaluate(scratch, batch);

            if (!std::isfinite(pairs.fplus[i]) || !std::isfinite(pairs.fminus[i]))
                throw EvaluationError("non-finite loss at query " + std::to_string(i), i);
        }
        return pairs;
    }

    LossPairBatch evaluate_loss_pairs(const Objective &obj, ConstVectorRef x, const PerturbationSpec &spec, int k,
                                      BatchId batch)
    {
        ParamVector scratch(x.size());
        return evaluate_loss_pairs(obj, x, spec, k, batch, scratch);
    }

    Vector<double> query_coefficients(const LossPairBatch &pairs, const TiltConfig &cfg, Vector<double> *weights_out)
    {
        const double rho = cfg.perturbation.rho;
        const Index k = pairs.size();
        Vector<double> w;
        double scale = 0.0;
        switch (cfg.effective_estimator())
        {
        case EstimatorKind::vanilla:
            w = (pairs.fplus - pairs.fminus) / (2.0 * rho);
            scale = 1.0 / static_cast<double>(k);
            break;
        case EstimatorKind::naive:
            w = weights_naive(tilted_normalize(pairs, cfg.t));
            scale = 1.0 / (cfg.t * rho);
            break;
        case EstimatorKind::bias_corrected:
            w = weights_bias_corrected(tilted_normalize(pairs, cfg.t));
            scale = 1.0 / (cfg.t * rho);
            break;
        }
        if (weights_out)
            *weights_out = w;
        return w * scale;
    }

    ParamVector estimate_gradient(const Objective &obj, ConstVectorRef x, const TiltConfig &cfg, BatchId batch)
    {
        cfg.validate();
        if (x.size() != obj.dimension())
            throw DimensionError("estimate_gradient: dimension mismatch");

        ParamVector v(x.size());
        const LossPairBatch pairs = evaluate_loss_pairs(obj, x, cfg.perturbation, cfg.k, batch, v);
        const Vector<double> coeff = query_coefficients(pairs, cfg);

        ParamVector grad = ParamVector::Zero(x.size());
        for (Index i = 0; i < coeff.size(); ++i)
        {
            sample_perturbation_into(cfg.perturbation, static_cast<std::uint64_t>(i), v);
            axpy_update(grad, coeff[i], v);
        }
        return grad;
    }

    ValueEstimate estimate_tilted_value(const Objective &obj, ConstVectorRef x, double t, Index n_samples,
                                        const PerturbationSpec &spec, BatchId batch)
    {
        if (x.size() != obj.dimension())
            throw DimensionError("estimate_tilted_value: dimension mismatch");
        if (n_samples < 1)
            throw ConfigError("estimate_tilted_value: need at least one sample");
        if (!(t >= 0.0) || !std::isfinite(t))
            throw ConfigError("estimate_tilted_value: tilt must be finite and >= 0");

        Vector<double> values(n_samples);
        ParamVector probe(x.size());
        for (Index j = 0; j < n_samples; ++j)
        {
            sample_perturbation_into(spec, static_cast<std::uint64_t>(j), probe);
            probe = x + spec.rho * probe;
            values[j] = obj.evaluate(probe, batch);
            if (!std::isfinite(values[j]))
                throw EvaluationError("non-finite loss at sample " + std::to_string(j), j);
        }

        const double n = static_cast<double>(n_samples);
        ValueEstimate out;
        out.samples = n_samples;
        if (t == 0.0)
        {
            out.value = values.mean();
            if (n_samples > 1)
                out.std_error = std::sqrt((values.array() - out.value).square().sum() / (n - 1.0) / n);
            return out;
        }

        const Vector<double> scaled = t * values;
        out.value = (log_sum_exp(scaled) - std::log(n)) / t;
        if (n_samples > 1)
        {
            // Relative spread of exp(t f): SE(log mean) ~ sd / (sqrt(n) mean).
            const Vector<double> e = (scaled.array() - scaled.maxCoeff()).exp().matrix();
            const double mean = e.mean();
            const double var = (e.array() - mean).square().sum() / (n - 1.0);
            out.std_error = std::sqrt(var / n) / (mean * t);
        }
        return out;
    }

    double estimate_objective_value(const Objective &obj, ConstVectorRef x, double t, Index n_samples,
                                    const PerturbationSpec &spec)
    {
        return estimate_tilted_value(obj, x, t, n_samples, spec).value;
    }
}
