#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "zest/estimators.hpp"
#include "zest/objectives.hpp"
#include "zest/random.hpp"

namespace zest
{
    enum class Method
    {
        zest_naive,
        zest_bias_corrected,
        vanilla,
        gd
    };

    std::string_view to_string(Method method);
    Method parse_method(std::string_view name);

    /// Seeded sequence of minibatches. `full_batch` keeps every iteration on the whole dataset.
    struct BatchSchedule
    {
        bool full_batch = true;
        std::uint64_t seed = 0;

        BatchId at(std::uint64_t iteration) const
        {
            return full_batch ? BatchId::full() : BatchId{derive_seed(seed, iteration)};
        }
    };

    struct OptimizerConfig
    {
        Method method = Method::zest_naive;
        double learning_rate = 0.1;
        int max_iterations = 100;
        TiltConfig tilt;              ///< perturbation.seed is the base seed of the run
        BatchSchedule batches;
        int log_every = 1;

        void validate() const;

        /// Perturbation family used at `iteration` (query i draws stream (seed, i)).
        PerturbationSpec perturbation_at(std::uint64_t iteration) const;
    };

    struct TrajectoryRecord
    {
        int iteration = 0;
        ParamVector iterate;            ///< x after this iteration (x0 for iteration 0)
        double loss = 0.0;              ///< full-batch f(iterate)
        std::optional<double> tilted_value;
        Vector<double> weights;         ///< per-query w_i of the step that produced `iterate`
        std::uint64_t query_seed = 0;   ///< queries of that step used streams (query_seed, i)
        double update_norm = 0.0;
    };

    struct StepResult
    {
        ParamVector x_next;
        TrajectoryRecord record;
    };

    /// One zeroth-order step, updating `x` in place. Pass 1 evaluates the 2k
    /// losses, regenerating each v_i from its seed; pass 2 regenerates v_i again
    /// and applies x <- x - eta c_i v_i in index order. Besides x, only one
    /// d-vector is live at a time.
    TrajectoryRecord zest_step_in_place(const Objective &obj, ParamVector &x, const OptimizerConfig &cfg,
                                        std::uint64_t iteration = 0);

    StepResult zest_step(const Objective &obj, const ParamVector &x, const OptimizerConfig &cfg,
                         std::uint64_t iteration = 0);

    /// x - eta grad f(x). Needs an exact gradient.
    ParamVector gd_step(const Objective &obj, const ParamVector &x, double eta, BatchId batch = BatchId::full());

    struct StoppingRule
    {
        /// Stop once the logged loss has not improved by `min_delta` for `patience` checks. 0 disables.
        int patience = 0;
        double min_delta = 0.0;
    };

    struct RunResult
    {
        ParamVector x_final;
        std::vector<TrajectoryRecord> trajectory;
        int iterations = 0;
        bool stopped_early = false;
    };

    /// Iterates the configured step. Records iteration 0, every log_every-th
    /// iteration, and the last one.
    RunResult run(const Objective &obj, const ParamVector &x0, const OptimizerConfig &cfg,
                  const StoppingRule &stopping = {});
}
