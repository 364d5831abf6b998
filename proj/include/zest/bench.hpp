#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "zest/estimators.hpp"
#include "zest/objectives.hpp"

namespace zest
{
    struct Statistic
    {
        double mean = 0.0;
        double std_error = 0.0;
        Index n = 0;
    };

    /// One cell of a report: a statistic for (group, key, metric), e.g. ("naive", k = 8, "bias").
    struct BenchCell
    {
        std::string group;
        double key = 0.0;
        std::string metric;
        Statistic stat;
    };

    /// OLS fit of log(y) on log(x).
    struct SlopeFit
    {
        std::string group;
        std::string metric;
        double slope = 0.0;
        double intercept = 0.0;
        double slope_std_error = 0.0;
        std::vector<double> x;
        std::vector<double> y;
        std::vector<double> residuals;
    };

    struct BenchReport
    {
        std::string name;
        std::uint64_t seed = 0;
        nlohmann::ordered_json params = nlohmann::ordered_json::object();
        std::vector<BenchCell> cells;
        std::vector<SlopeFit> fits;

        const BenchCell *find(const std::string &group, double key, const std::string &metric) const;
        const SlopeFit *fit(const std::string &group, const std::string &metric) const;
    };

    SlopeFit fit_log_log(const std::vector<double> &x, const std::vector<double> &y);

    struct BiasRateOptions
    {
        double t = 0.1;
        double rho = 1.0;
        std::vector<int> k_grid{2, 4, 8, 16, 32};
        Index replicates = 100000;
        std::uint64_t seed = 0;
    };

    /// Bias of the naive and bias-corrected estimators against the closed-form
    /// gradient of F_t on a quadratic at a fixed point, Gaussian perturbation.
    ///
    /// Two bias measurements are reported per (estimator, k):
    ///   "bias_raw"  |mean(G) - grad F_t|
    ///   "bias"      |mean(G - L)| where L = grad F_t + (A - t rho grad F_t B) / (t rho E[B])
    ///               has mean exactly grad F_t. Same quantity, much lower variance.
    /// Slopes are fitted for both.
    BenchReport bias_rate_experiment(const QuadraticObjective &obj, const ParamVector &x,
                                     const BiasRateOptions &options);

    struct SphereBallOptions
    {
        double t = 1.0;
        double rho = 0.5;
        std::vector<Index> d_grid{2, 10, 100};
        Index n_samples = 100000;
        std::uint64_t seed = 0;
    };

    /// Relative gap between the denominators E[e^{t f(x+rho v)} + e^{t f(x-rho v)}]
    /// under ball and sphere sampling. `obj` is embedded into each d of the grid
    /// and evaluated at the origin. Ball and sphere draws share directions.
    BenchReport sphere_ball_gap_experiment(const QuadraticObjective &obj, const SphereBallOptions &options);

    struct ConcentrationOptions
    {
        std::vector<Index> d_grid{2, 10, 100, 1000};
        Index n_samples = 100000;
        std::uint64_t seed = 0;
    };

    /// Empirical mean and variance of |v| for ball draws against the closed forms, with z-scores.
    BenchReport concentration_experiment(const ConcentrationOptions &options);

    nlohmann::ordered_json to_json(const BenchReport &report);

    /// Flat table: group,key,metric,mean,std_error,n.
    std::string to_csv(const BenchReport &report);
}
