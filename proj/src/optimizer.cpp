#include "zest/optimizer.hpp"

#include <cmath>
#include <string>

#include "zest/random.hpp"

namespace zest
{
    std::string_view to_string(Method method)
    {
        switch (method)
        {
        case Method::zest_naive:
            return "zest-naive";
        case Method::zest_bias_corrected:
            return "zest-bc";
        case Method::vanilla:
            return "vanilla";
        case Method::gd:
            return "gd";
        }
        return "unknown";
    }

    Method parse_method(std::string_view name)
    {
        if (name == "zest-naive")
            return Method::zest_naive;
        if (name == "zest-bc")
            return Method::zest_bias_corrected;
        if (name == "vanilla")
            return Method::vanilla;
        if (name == "gd")
            return Method::gd;
        throw ConfigError("unknown method '" + std::string(name) + "' (expected zest-naive, zest-bc, vanilla or gd)");
    }

    void OptimizerConfig::validate() const
    {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw ConfigError("learning rate must be positive");
        if (max_iterations < 1)
            throw ConfigError("max_iterations must be >= 1");
        if (log_every < 1)
            throw ConfigError("log_every must be >= 1");
        if (method == Method::gd)
            return;
        tilt.validate();
        const bool tilted = method == Method::zest_naive || method == Method::zest_bias_corrected;
        if (tilted && tilt.t == 0.0 && tilt.estimator != EstimatorKind::vanilla)
            return; // dispatched to the two-point estimator
        if (method == Method::zest_naive && tilt.estimator != EstimatorKind::naive)
            throw ConfigError("zest-naive needs the naive estimator");
        if (method == Method::zest_bias_corrected && tilt.estimator != EstimatorKind::bias_corrected)
            throw ConfigError("zest-bc needs the bias-corrected estimator");
        if (method == Method::vanilla && tilt.estimator != EstimatorKind::vanilla)
            throw ConfigError("vanilla method needs the vanilla estimator");
    }

    PerturbationSpec OptimizerConfig::perturbation_at(std::uint64_t iteration) const
    {
        return tilt.perturbation.with_seed(derive_seed(tilt.perturbation.seed, iteration));
    }

    TrajectoryRecord zest_step_in_place(const Objective &obj, ParamVector &x, const OptimizerConfig &cfg,
                                        std::uint64_t iteration)
    {
        if (x.size() != obj.dimension())
            throw DimensionError("zest_step: dimension mismatch");

        TiltConfig tilt = cfg.tilt;
        tilt.perturbation = cfg.perturbation_at(iteration);
        const BatchId batch = cfg.batches.at(iteration);

        TrajectoryRecord record;
        record.iteration = static_cast<int>(iteration) + 1;
        record.query_seed = tilt.perturbation.seed;

        ParamVector v(x.size());
        const LossPairBatch pairs = evaluate_loss_pairs(obj, x, tilt.perturbation, tilt.k, batch, v);
        const Vector<double> coeff = query_coefficients(pairs, tilt, &record.weights);

        double update_sq = 0.0;
        for (Index i = 0; i < coeff.size(); ++i)
        {
            sample_perturbation_into(tilt.perturbation, static_cast<std::uint64_t>(i), v);
            axpy_update(x, -cfg.learning_rate * coeff[i], v);
            update_sq += coeff[i] * coeff[i] * v.squaredNorm();
        }
        if (!all_finite(x))
            throw NumericError("zest_step: iterate became non-finite at iteration " + std::to_string(iteration));
        record.update_norm = cfg.learning_rate * std::sqrt(update_sq);
        return record;
    }

    StepResult zest_step(const Objective &obj, const ParamVector &x, const OptimizerConfig &cfg,
                         std::uint64_t iteration)
    {
        cfg.validate();
        StepResult out{x, {}};
        out.record = zest_step_in_place(obj, out.x_next, cfg, iteration);
        out.record.iterate = out.x_next;
        out.record.loss = obj(out.x_next);
        return out;
    }

    ParamVector gd_step(const Objective &obj, const ParamVector &x, double eta, BatchId batch)
    {
        auto grad = obj.gradient(x, batch);
        if (!grad)
            throw ConfigError(obj.name() + " has no exact gradient; gradient descent is unavailable");
        ParamVector next = x;
        axpy_update(next, -eta, *grad);
        return next;
    }

    RunResult run(const Objective &obj, const ParamVector &x0, const OptimizerConfig &cfg, const StoppingRule &stopping)
    {
        cfg.validate();
        if (x0.size() != obj.dimension())
            throw DimensionError("run: x0 has dimension " + std::to_string(x0.size()) + ", objective expects " +
                                 std::to_string(obj.dimension()));
        if (!all_finite(x0))
            throw ConfigError("run: x0 must be finite");

        RunResult result;
        ParamVector x = x0;

        TrajectoryRecord initial;
        initial.iteration = 0;
        initial.iterate = x;
        initial.loss = obj(x);
        result.trajectory.push_back(initial);

        double best_loss = initial.loss;
        int stale_checks = 0;

        for (int it = 0; it < cfg.max_iterations; ++it)
        {
            const auto iteration = static_cast<std::uint64_t>(it);
            TrajectoryRecord record;
            try
            {
                if (cfg.method == Method::gd)
                {
                    ParamVector next = gd_step(obj, x, cfg.learning_rate, cfg.batches.at(iteration));
                    record.iteration = it + 1;
                    record.update_norm = (next - x).norm();
                    x = std::move(next);
                    if (!all_finite(x))
                        throw NumericError("gd_step: iterate became non-finite");
                }
                else
                {
                    record = zest_step_in_place(obj, x, cfg, iteration);
                }
            }
            catch (const EvaluationError &e)
            {
                throw EvaluationError("iteration " + std::to_string(it + 1) + ": " + e.what(), e.query_index());
            }
            catch (const NumericError &e)
            {
                throw NumericError("iteration " + std::to_string(it + 1) + ": " + e.what());
            }

            result.iterations = it + 1;
            const bool last = it + 1 == cfg.max_iterations;
            if ((it + 1) % cfg.log_every != 0 && !last)
                continue;

            record.iterate = x;
            record.loss = obj(x);
            result.trajectory.push_back(std::move(record));

            if (stopping.patience > 0)
            {
                const double loss = result.trajectory.back().loss;
                if (loss < best_loss - stopping.min_delta)
                {
                    best_loss = loss;
                    stale_checks = 0;
                }
                else if (++stale_checks >= stopping.patience)
                {
                    result.stopped_early = !last;
                    break;
                }
            }
        }
        result.x_final = x;
        return result;
    }
}
