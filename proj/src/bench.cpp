#include "zest/bench.hpp"

#include <cmath>
#include <string>

#include "zest/io.hpp"
#include "zest/random.hpp"
#include "zest/sharpness.hpp"

namespace zest
{
    namespace
    {
        // Running mean and covariance of d-vectors.
        struct VectorMoments
        {
            Vector<double> sum;
            Matrix<double> outer;
            Index n = 0;

            explicit VectorMoments(Index d) : sum(Vector<double>::Zero(d)), outer(Matrix<double>::Zero(d, d)) {}

            void add(const Vector<double> &v)
            {
                sum += v;
                outer.noalias() += v * v.transpose();
                ++n;
            }

            Vector<double> mean() const { return sum / static_cast<double>(n); }

            Matrix<double> covariance() const
            {
                const Vector<double> m = mean();
                return (outer - static_cast<double>(n) * m * m.transpose()) / static_cast<double>(n - 1);
            }

            // |mean| with its delta-method standard error.
            Statistic norm_of_mean() const
            {
                const Vector<double> m = mean();
                const double norm = m.norm();
                Statistic s;
                s.mean = norm;
                s.n = n;
                if (norm > 0.0)
                    s.std_error = std::sqrt(std::max(0.0, m.dot(covariance() * m)) / static_cast<double>(n)) / norm;
                return s;
            }
        };

        struct ScalarMoments
        {
            double sum = 0.0;
            double sum_sq = 0.0;
            Index n = 0;

            void add(double v)
            {
                sum += v;
                sum_sq += v * v;
                ++n;
            }

            double mean() const { return sum / static_cast<double>(n); }

            double variance() const
            {
                const double m = mean();
                return std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
            }

            Statistic stat() const { return {mean(), std::sqrt(variance() / static_cast<double>(n)), n}; }
        };

        void add_cell(BenchReport &r, std::string group, double key, std::string metric, Statistic s)
        {
            r.cells.push_back({std::move(group), key, std::move(metric), s});
        }

        Statistic exact(double value) { return {value, 0.0, 1}; }
    }

    const BenchCell *BenchReport::find(const std::string &group, double key, const std::string &metric) const
    {
        for (const auto &c : cells)
            if (c.group == group && c.key == key && c.metric == metric)
                return &c;
        return nullptr;
    }

    const SlopeFit *BenchReport::fit(const std::string &group, const std::string &metric) const
    {
        for (const auto &f : fits)
            if (f.group == group && f.metric == metric)
                return &f;
        return nullptr;
    }

    SlopeFit fit_log_log(const std::vector<double> &x, const std::vector<double> &y)
    {
        if (x.size() != y.size() || x.size() < 2)
            throw ConfigError("fit_log_log: need at least two (x, y) pairs of equal count");
        const auto n = static_cast<Index>(x.size());
        Vector<double> lx(n), ly(n);
        for (Index i = 0; i < n; ++i)
        {
            if (!(x[static_cast<std::size_t>(i)] > 0.0) || !(y[static_cast<std::size_t>(i)] > 0.0))
                throw DomainError("fit_log_log: values must be positive");
            lx[i] = std::log(x[static_cast<std::size_t>(i)]);
            ly[i] = std::log(y[static_cast<std::size_t>(i)]);
        }
        const double mx = lx.mean(), my = ly.mean();
        const double sxx = (lx.array() - mx).square().sum();
        const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
        SlopeFit fit;
        fit.slope = sxy / sxx;
        fit.intercept = my - fit.slope * mx;
        fit.x = x;
        fit.y = y;
        double ssr = 0.0;
        for (Index i = 0; i < n; ++i)
        {
            const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
            fit.residuals.push_back(r);
            ssr += r * r;
        }
        fit.slope_std_error = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : 0.0;
        return fit;
    }

    BenchReport bias_rate_experiment(const QuadraticObjective &obj, const ParamVector &x,
                                     const BiasRateOptions &options)
    {
        if (!(options.t > 0.0) || !(options.rho > 0.0))
            throw ConfigError("bias_rate_experiment: t and rho must be positive");
        if (options.replicates < 2)
            throw ConfigError("bias_rate_experiment: need at least 2 replicates");
        for (int k : options.k_grid)
            if (k < 2)
                throw ConfigError("bias_rate_experiment: every k must be >= 2 for the bias-corrected estimator");

        const double t = options.t, rho = options.rho;
        const Index d = obj.dimension();
        const ParamVector target = gaussian_tilted_gradient(obj, x, t, rho);
        const SpectralModel model = spectral_model(obj, x, rho);
        const double rt = gaussian_rt(model, t);
        const double mu_b = 2.0 * std::exp(t * rt);
        const double f0 = obj(x);

        BenchReport report;
        report.name = "bias-rate";
        report.seed = options.seed;
        report.params["t"] = t;
        report.params["rho"] = rho;
        report.params["replicates"] = options.replicates;
        report.params["k_grid"] = options.k_grid;
        report.params["dimension"] = d;
        report.params["point"] = std::vector<double>(x.data(), x.data() + d);
        report.params["target_gradient"] = std::vector<double>(target.data(), target.data() + d);
        report.params["perturbation"] = "gaussian";

        const char *groups[2] = {"naive", "bias-corrected"};
        std::vector<double> ks, bias_cv[2], bias_raw[2];

        ParamVector v(d), g_naive(d), g_bc(d), a_bar(d), diff(d);
        for (int k : options.k_grid)
        {
            const std::uint64_t k_seed = derive_seed(options.seed, static_cast<std::uint64_t>(k));
            VectorMoments raw[2] = {VectorMoments(d), VectorMoments(d)};
            VectorMoments cv[2] = {VectorMoments(d), VectorMoments(d)};
            for (Index r = 0; r < options.replicates; ++r)
            {
                PerturbationSpec spec{PerturbationKind::gaussian, rho, derive_seed(k_seed, static_cast<std::uint64_t>(r))};
                const LossPairBatch pairs = evaluate_loss_pairs(obj, x, spec, k, BatchId::full(), v);
                const TiltedMasses<double> masses = tilted_normalize(pairs, t);
                const Vector<double> w_naive = weights_naive(masses);
                const Vector<double> w_bc = weights_bias_corrected(masses);

                g_naive.setZero();
                g_bc.setZero();
                a_bar.setZero();
                double b_bar = 0.0;
                for (int i = 0; i < k; ++i)
                {
                    sample_perturbation_into(spec, static_cast<std::uint64_t>(i), v);
                    const double ap = std::exp(t * (pairs.fplus[i] - f0));
                    const double am = std::exp(t * (pairs.fminus[i] - f0));
                    g_naive.noalias() += w_naive[i] * v;
                    g_bc.noalias() += w_bc[i] * v;
                    a_bar.noalias() += (ap - am) * v;
                    b_bar += ap + am;
                }
                const double scale = 1.0 / (t * rho);
                g_naive *= scale;
                g_bc *= scale;
                a_bar /= static_cast<double>(k);
                b_bar /= static_cast<double>(k);

                // L has expectation exactly equal to target.
                const ParamVector L = target + (a_bar - t * rho * b_bar * target) / (t * rho * mu_b);
                raw[0].add(g_naive - target);
                raw[1].add(g_bc - target);
                cv[0].add(g_naive - L);
                cv[1].add(g_bc - L);
            }
            ks.push_back(k);
            for (int e = 0; e < 2; ++e)
            {
                const Statistic s_cv = cv[e].norm_of_mean();
                const Statistic s_raw = raw[e].norm_of_mean();
                add_cell(report, groups[e], k, "bias", s_cv);
                add_cell(report, groups[e], k, "bias_raw", s_raw);
                bias_cv[e].push_back(s_cv.mean);
                bias_raw[e].push_back(s_raw.mean);
            }
        }
        for (int e = 0; e < 2; ++e)
        {
            SlopeFit f = fit_log_log(ks, bias_cv[e]);
            f.group = groups[e];
            f.metric = "bias";
            report.fits.push_back(std::move(f));
            SlopeFit fr = fit_log_log(ks, bias_raw[e]);
            fr.group = groups[e];
            fr.metric = "bias_raw";
            report.fits.push_back(std::move(fr));
        }
        return report;
    }

    BenchReport sphere_ball_gap_experiment(const QuadraticObjective &obj, const SphereBallOptions &options)
    {
        if (!(options.t >= 0.0) || !(options.rho > 0.0))
            throw ConfigError("sphere_ball_gap_experiment: need t >= 0 and rho > 0");
        if (options.n_samples < 2)
            throw ConfigError("sphere_ball_gap_experiment: need at least 2 samples");

        BenchReport report;
        report.name = "sphere-ball";
        report.seed = options.seed;
        report.params["t"] = options.t;
        report.params["rho"] = options.rho;
        report.params["n_samples"] = options.n_samples;
        report.params["d_grid"] = options.d_grid;
        report.params["base_dimension"] = obj.dimension();

        const double t = options.t, rho = options.rho;
        for (Index d : options.d_grid)
        {
            if (d < obj.dimension())
                throw DimensionError("sphere_ball_gap_experiment: d = " + std::to_string(d) +
                                     " is below the objective dimension");
            const QuadraticObjective q = obj.embedded(d);
            const ParamVector x = ParamVector::Zero(d);
            const double f0 = q(x);
            const std::uint64_t seed = derive_seed(options.seed, static_cast<std::uint64_t>(d));
            const PerturbationSpec sphere{PerturbationKind::sphere, rho, seed};
            const PerturbationSpec ball{PerturbationKind::ball, rho, seed};

            ParamVector v(d), probe(d);
            auto denominator_term = [&](const PerturbationSpec &spec, Index j) {
                sample_perturbation_into(spec, static_cast<std::uint64_t>(j), v);
                probe = x + rho * v;
                const double fp = q(probe);
                probe = x - rho * v;
                const double fm = q(probe);
                return std::exp(t * (fp - f0)) + std::exp(t * (fm - f0));
            };

            ScalarMoments s_mom, b_mom;
            double cross = 0.0;
            for (Index j = 0; j < options.n_samples; ++j)
            {
                const double bs = denominator_term(sphere, j);
                const double bb = denominator_term(ball, j);
                s_mom.add(bs);
                b_mom.add(bb);
                cross += bs * bb;
            }
            const double n = static_cast<double>(options.n_samples);
            const double ms = s_mom.mean(), mb = b_mom.mean();
            const double cov = (cross - n * ms * mb) / (n - 1.0);
            const double ratio = mb / ms;
            const double var_ratio = (b_mom.variance() - 2.0 * ratio * cov + ratio * ratio * s_mom.variance()) /
                                     (ms * ms * n);
            const double gap = ratio - 1.0;
            const double gap_se = std::sqrt(std::max(0.0, var_ratio));

            const double key = static_cast<double>(d);
            add_cell(report, "sphere", key, "denominator", s_mom.stat());
            add_cell(report, "ball", key, "denominator", b_mom.stat());
            add_cell(report, "gap", key, "signed_gap", {gap, gap_se, options.n_samples});
            add_cell(report, "gap", key, "relative_gap", {std::abs(gap), gap_se, options.n_samples});
        }
        return report;
    }

    BenchReport concentration_experiment(const ConcentrationOptions &options)
    {
        if (options.n_samples < 2)
            throw ConfigError("concentration_experiment: need at least 2 samples");
        BenchReport report;
        report.name = "concentration";
        report.seed = options.seed;
        report.params["n_samples"] = options.n_samples;
        report.params["d_grid"] = options.d_grid;
        report.params["perturbation"] = "ball";

        for (Index d : options.d_grid)
        {
            const NormMoments expected = perturbation_norm_moments(d);
            const PerturbationSpec spec{PerturbationKind::ball, 1.0, derive_seed(options.seed, static_cast<std::uint64_t>(d))};
            ParamVector v(d);
            Vector<double> norms(options.n_samples);
            for (Index j = 0; j < options.n_samples; ++j)
            {
                sample_perturbation_into(spec, static_cast<std::uint64_t>(j), v);
                norms[j] = v.norm();
            }
            const double n = static_cast<double>(options.n_samples);
            const double mean = norms.mean();
            const Vector<double> centered = norms.array() - mean;
            const double var = centered.squaredNorm() / (n - 1.0);
            const double m4 = centered.array().pow(4).sum() / n;

            const double se_mean = std::sqrt(expected.variance / n);
            const double se_var = std::sqrt(std::max(0.0, m4 - expected.variance * expected.variance) / n);
            const double z_mean = (mean - expected.mean) / se_mean;
            const double z_var = (var - expected.variance) / se_var;

            const double key = static_cast<double>(d);
            add_cell(report, "ball", key, "norm_mean", {mean, std::sqrt(var / n), options.n_samples});
            add_cell(report, "ball", key, "norm_variance", {var, se_var, options.n_samples});
            add_cell(report, "ball", key, "expected_mean", exact(expected.mean));
            add_cell(report, "ball", key, "expected_variance", exact(expected.variance));
            add_cell(report, "ball", key, "z_mean", exact(z_mean));
            add_cell(report, "ball", key, "z_variance", exact(z_var));
            add_cell(report, "ball", key, "variance_times_3d", {3.0 * key * var, 3.0 * key * se_var, options.n_samples});
        }
        return report;
    }

    nlohmann::ordered_json to_json(const BenchReport &report)
    {
        nlohmann::ordered_json j;
        j["schema_version"] = 1;
        j["name"] = report.name;
        j["seed"] = report.seed;
        j["params"] = report.params;
        auto cells = nlohmann::ordered_json::array();
        for (const auto &c : report.cells)
            cells.push_back({{"group", c.group},
                             {"key", c.key},
                             {"metric", c.metric},
                             {"mean", c.stat.mean},
                             {"std_error", c.stat.std_error},
                             {"n", c.stat.n}});
        j["cells"] = std::move(cells);
        auto fits = nlohmann::ordered_json::array();
        for (const auto &f : report.fits)
            fits.push_back({{"group", f.group},
                            {"metric", f.metric},
                            {"slope", f.slope},
                            {"intercept", f.intercept},
                            {"slope_std_error", f.slope_std_error},
                            {"x", f.x},
                            {"y", f.y},
                            {"residuals", f.residuals}});
        j["fits"] = std::move(fits);
        return j;
    }

    std::string to_csv(const BenchReport &report)
    {
        std::string out = io::csv_row({"group", "key", "metric", "mean", "std_error", "n"});
        for (const auto &c : report.cells)
            out += io::csv_row({c.group, io::format_number(c.key), c.metric, io::format_number(c.stat.mean),
                                io::format_number(c.stat.std_error), std::to_string(c.stat.n)});
        return out;
    }
}
