#include "zest/cli.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "zest/bench.hpp"
#include "zest/io.hpp"
#include "zest/sharpness.hpp"

namespace zest::cli
{
    namespace
    {
        // Strict view over a JSON object: typed getters, and finish() rejects keys nobody asked for.
        class Fields
        {
        public:
            Fields(const Json &j, std::string where) : j_(j), where_(std::move(where))
            {
                if (!j_.is_object())
                    throw SchemaError(where_ + ": expected a JSON object");
            }

            bool has(const std::string &key)
            {
                used_.insert(key);
                return j_.contains(key);
            }

            const Json &raw(const std::string &key)
            {
                if (!has(key))
                    throw SchemaError(where_ + ": missing required field '" + key + "'");
                return j_.at(key);
            }

            double number(const std::string &key, std::optional<double> fallback = std::nullopt)
            {
                if (!has(key))
                    return require_default(key, fallback);
                const Json &v = j_.at(key);
                if (!v.is_number())
                    throw SchemaError(path(key) + " must be a number");
                const double out = v.get<double>();
                if (!std::isfinite(out))
                    throw SchemaError(path(key) + " must be finite");
                return out;
            }

            std::int64_t integer(const std::string &key, std::optional<std::int64_t> fallback = std::nullopt)
            {
                if (!has(key))
                    return require_default(key, fallback);
                const Json &v = j_.at(key);
                if (!v.is_number_integer())
                    throw SchemaError(path(key) + " must be an integer");
                return v.get<std::int64_t>();
            }

            std::uint64_t unsigned_integer(const std::string &key, std::optional<std::uint64_t> fallback = std::nullopt)
            {
                if (!has(key))
                    return require_default(key, fallback);
                const Json &v = j_.at(key);
                if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                    throw SchemaError(path(key) + " must be a non-negative integer");
                return v.get<std::uint64_t>();
            }

            std::string string(const std::string &key, std::optional<std::string> fallback = std::nullopt)
            {
                if (!has(key))
                    return require_default(key, fallback);
                const Json &v = j_.at(key);
                if (!v.is_string())
                    throw SchemaError(path(key) + " must be a string");
                return v.get<std::string>();
            }

            bool boolean(const std::string &key, std::optional<bool> fallback = std::nullopt)
            {
                if (!has(key))
                    return require_default(key, fallback);
                const Json &v = j_.at(key);
                if (!v.is_boolean())
                    throw SchemaError(path(key) + " must be true or false");
                return v.get<bool>();
            }

            std::vector<double> numbers(const std::string &key, std::optional<std::vector<double>> fallback = std::nullopt)
            {
                if (!has(key))
                    return require_default(key, fallback);
                return as_numbers(j_.at(key), path(key));
            }

            std::vector<std::int64_t> integers(const std::string &key,
                                               std::optional<std::vector<std::int64_t>> fallback = std::nullopt)
            {
                if (!has(key))
                    return require_default(key, fallback);
                const Json &v = j_.at(key);
                if (!v.is_array() || v.empty())
                    throw SchemaError(path(key) + " must be a non-empty array of integers");
                std::vector<std::int64_t> out;
                for (const auto &e : v)
                {
                    if (!e.is_number_integer())
                        throw SchemaError(path(key) + " must contain only integers");
                    out.push_back(e.get<std::int64_t>());
                }
                return out;
            }

            void finish() const
            {
                for (auto it = j_.begin(); it != j_.end(); ++it)
                    if (!used_.count(it.key()))
                    {
                        std::string allowed;
                        for (const auto &k : used_)
                            allowed += (allowed.empty() ? "" : ", ") + k;
                        throw SchemaError(where_ + ": unknown field '" + it.key() + "' (allowed: " + allowed + ")");
                    }
            }

            std::string path(const std::string &key) const { return where_ + "." + key; }

            static std::vector<double> as_numbers(const Json &v, const std::string &where)
            {
                if (!v.is_array() || v.empty())
                    throw SchemaError(where + " must be a non-empty array of numbers");
                std::vector<double> out;
                for (const auto &e : v)
                {
                    if (!e.is_number())
                        throw SchemaError(where + " must contain only numbers");
                    out.push_back(e.get<double>());
                    if (!std::isfinite(out.back()))
                        throw SchemaError(where + " must contain only finite numbers");
                }
                return out;
            }

        private:
            template <typename T>
            T require_default(const std::string &key, const std::optional<T> &fallback) const
            {
                if (!fallback)
                    throw SchemaError(where_ + ": missing required field '" + key + "'");
                return *fallback;
            }

            const Json &j_;
            std::string where_;
            std::set<std::string> used_;
        };

        ParamVector to_vector(const std::vector<double> &v)
        {
            return Eigen::Map<const ParamVector>(v.data(), static_cast<Index>(v.size()));
        }

        std::vector<double> to_std(const Eigen::Ref<const Vector<double>> &v)
        {
            return std::vector<double>(v.data(), v.data() + v.size());
        }

        void check_version(Fields &f)
        {
            const auto v = f.integer("schema_version");
            if (v != schema_version)
                throw SchemaError("unsupported schema_version " + std::to_string(v) + " (expected " +
                                  std::to_string(schema_version) + ")");
        }

        Json load_json(const std::filesystem::path &path)
        {
            if (!std::filesystem::exists(path))
                throw IoError("config file not found: " + path.string());
            const std::string text = io::read_file(path);
            try
            {
                return Json::parse(text);
            }
            catch (const nlohmann::json::parse_error &e)
            {
                throw SchemaError(path.string() + ": invalid JSON: " + e.what());
            }
        }

        std::string utc_timestamp()
        {
            const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
            std::tm tm{};
            gmtime_r(&now, &tm);
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
            return buf;
        }

        void prepare_output_dir(const std::filesystem::path &dir)
        {
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            if (ec)
                throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
        }

        struct Options
        {
            std::string config;
            std::string out = "out";
            std::optional<std::uint64_t> seed;
            bool quiet = false;
        };

        // --------------------------------------------------------------- run

        int cmd_run(const Options &opt, std::ostream &out)
        {
            const Json doc = load_json(opt.config);
            const RunConfig cfg = parse_run_config(doc, opt.seed);
            const auto objective = make_objective(cfg.objective);
            if (cfg.x0.size() != objective->dimension())
                throw SchemaError("x0 has " + std::to_string(cfg.x0.size()) + " entries but the objective has dimension " +
                                  std::to_string(objective->dimension()));
            if (cfg.optimizer.method == Method::gd && !objective->gradient(cfg.x0, BatchId::full()))
                throw SchemaError("method gd needs an objective with an exact gradient");

            const auto start = std::chrono::steady_clock::now();
            const RunResult result = run(*objective, cfg.x0, cfg.optimizer, cfg.stopping);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            Json resolved = doc;
            resolved["seed"] = cfg.seed;

            Json manifest;
            manifest["schema_version"] = schema_version;
            manifest["command"] = "run";
            manifest["config"] = resolved;
            manifest["seed"] = cfg.seed;
            manifest["objective"] = objective->name();
            manifest["dimension"] = objective->dimension();
            manifest["iterations"] = result.iterations;
            manifest["stopped_early"] = result.stopped_early;
            manifest["initial_loss"] = result.trajectory.front().loss;
            manifest["final_loss"] = (*objective)(result.x_final);
            manifest["final_iterate"] = to_std(result.x_final);
            if (const auto *logistic = dynamic_cast<const SyntheticLogisticObjective *>(objective.get()))
            {
                manifest["final_accuracy"] = logistic->accuracy(result.x_final);
                manifest["final_clean_accuracy"] = logistic->clean_accuracy(result.x_final);
            }
            auto seeds = Json::array();
            for (const auto &r : result.trajectory)
                if (r.iteration > 0)
                    seeds.push_back({{"iter", r.iteration}, {"query_seed", r.query_seed}});
            manifest["logged_query_seeds"] = std::move(seeds);
            manifest["outputs"] = {"trajectory.csv", "manifest.json"};
            manifest["timing"] = {{"wall_seconds", wall}, {"finished_at", utc_timestamp()}};

            const std::filesystem::path dir = opt.out;
            prepare_output_dir(dir);
            io::write_file(dir / "trajectory.csv", trajectory_csv(result));
            io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
            if (!opt.quiet)
            {
                out << "run: " << to_string(cfg.optimizer.method) << " on " << objective->name() << ", "
                    << result.iterations << " iterations\n";
                out << "  loss " << io::format_number(result.trajectory.front().loss) << " -> "
                    << io::format_number((*objective)(result.x_final)) << "\n";
                if (result.x_final.size() <= 8)
                {
                    out << "  final iterate";
                    for (Index i = 0; i < result.x_final.size(); ++i)
                        out << ' ' << io::format_number(result.x_final[i]);
                    out << "\n";
                }
                out << "  wrote " << (dir / "trajectory.csv").string() << ", " << (dir / "manifest.json").string()
                    << "\n";
            }
            return exit_ok;
        }

        // --------------------------------------------------------- sharpness

        int cmd_sharpness(const Options &opt, std::ostream &out)
        {
            const Json doc = load_json(opt.config);
            Fields f(doc, "config");
            check_version(f);
            const std::uint64_t seed = opt.seed.value_or(f.unsigned_integer("seed", 0));
            const Json objective_spec = f.raw("objective");
            const auto objective = make_objective(objective_spec);
            const Index d = objective->dimension();

            ParamVector point;
            std::string point_source = "point";
            if (f.has("point") && f.has("trajectory"))
                throw SchemaError("config: give either 'point' or 'trajectory', not both");
            if (f.has("point"))
                point = to_vector(f.numbers("point"));
            else if (f.has("trajectory"))
            {
                std::filesystem::path p = f.string("trajectory");
                if (p.is_relative() && !std::filesystem::exists(p))
                    p = std::filesystem::path(opt.config).parent_path() / p;
                point = read_final_iterate(p);
                point_source = "trajectory:" + p.string();
            }
            else
                throw SchemaError("config: one of 'point' or 'trajectory' is required");
            if (point.size() != d)
                throw SchemaError("point has " + std::to_string(point.size()) + " entries, objective dimension is " +
                                  std::to_string(d));

            const double rho = f.number("rho", 0.5);
            if (!(rho > 0.0))
                throw SchemaError("config.rho must be positive");
            const PerturbationKind kind = parse_perturbation_kind(f.string("perturbation", "gaussian"));
            const std::vector<double> radii = f.numbers("radii", std::vector<double>{0.0, 0.05, 0.1, 0.2, 0.5});
            for (double r : radii)
                if (r < 0.0)
                    throw SchemaError("config.radii must be non-negative");
            const auto probe_samples = f.integer("probe_samples", 500);
            if (probe_samples < 2)
                throw SchemaError("config.probe_samples must be >= 2");
            const auto top_k = f.integer("top_k", std::min<std::int64_t>(5, d));
            if (top_k < 1 || top_k > d)
                throw SchemaError("config.top_k must be in [1, " + std::to_string(d) + "]");
            const std::vector<double> t_grid = f.numbers("t_grid", std::vector<double>{0.0, 0.1, 0.5, 1.0});
            for (double t : t_grid)
                if (t < 0.0)
                    throw SchemaError("config.t_grid must be non-negative");
            const auto mc_samples = f.integer("mc_samples", 20000);
            if (mc_samples < 2)
                throw SchemaError("config.mc_samples must be >= 2");
            const double epsilon = f.number("epsilon", 0.01);
            if (!(epsilon > 0.0))
                throw SchemaError("config.epsilon must be positive");
            f.finish();
            if (d > max_dense_hessian_dimension)
                throw SchemaError("objective dimension exceeds the dense Hessian limit; reduce the problem size");

            const PerturbationSpec probe_spec{kind, 1.0, derive_seed(seed, 1)};
            const PerturbationSpec mc_spec{kind, rho, derive_seed(seed, 2)};

            const auto probes = neighborhood_loss_probe(*objective, point, radii, probe_samples, probe_spec);
            const Vector<double> top = top_eigenvalues(*objective, point, top_k);
            const SpectralModel model = spectral_model(*objective, point, rho);

            Json report;
            report["schema_version"] = schema_version;
            report["command"] = "sharpness";
            Json resolved = doc;
            resolved["seed"] = seed;
            report["config"] = resolved;
            report["objective"] = objective->name();
            report["point_source"] = point_source;
            report["point"] = to_std(point);
            report["f"] = (*objective)(point);
            auto probe_rows = Json::array();
            for (const auto &r : probes)
                probe_rows.push_back({{"radius", r.radius}, {"mean", r.mean}, {"std", r.std_dev}, {"n", r.samples}});
            report["probes"] = std::move(probe_rows);
            report["top_eigenvalues"] = to_std(top);
            report["hessian_trace"] = model.lambda.sum();
            report["spectrum"] = {{"lambda", to_std(model.lambda)}, {"g", to_std(model.g)}, {"rho", rho}};

            auto grid = Json::array();
            auto phi_rows = Json::array();
            for (double t : t_grid)
            {
                Json row{{"t", t}};
                try
                {
                    row["analytic_gaussian"] = gaussian_rt(model, t);
                    std::vector<double> phi;
                    for (Index i = 0; i < model.dimension(); ++i)
                        phi.push_back(gaussian_sensitivity(model, t, i));
                    phi_rows.push_back({{"t", t}, {"phi", phi}});
                }
                catch (const DomainError &e)
                {
                    row["analytic_gaussian"] = nullptr;
                    row["analytic_note"] = e.what();
                }
                const ValueEstimate mc = monte_carlo_rt(*objective, point, t, mc_samples, mc_spec);
                row["monte_carlo"] = mc.value;
                row["std_error"] = mc.std_error;
                row["n"] = mc.samples;
                grid.push_back(std::move(row));
            }
            report["rt_grid"] = std::move(grid);
            report["ball_rt_limit_zero"] = ball_rt_limit_zero(model, d);

            const KktSolution kkt = r_infinity(model, d);
            std::vector<double> r_inf_sens;
            for (Index i = 0; i < model.dimension(); ++i)
                r_inf_sens.push_back(r_infinity_sensitivity(kkt, model, i));
            report["r_infinity"] = {{"value", kkt.r_infinity},
                                    {"case", kkt.kkt_case == KktCase::interior ? "interior" : "boundary"},
                                    {"hard_case", kkt.hard_case},
                                    {"omega_star", kkt.omega_star},
                                    {"u_star", to_std(kkt.u_star)},
                                    {"secular_residual", kkt.secular_residual}};
            report["sensitivities"] = {{"gaussian", std::move(phi_rows)}, {"r_infinity", r_inf_sens}};
            report["admissible_t_bound"] = {{"epsilon", epsilon}};
            const double bound = admissible_t_bound(model, d, epsilon);
            if (std::isfinite(bound))
                report["admissible_t_bound"]["t_max"] = bound;
            else
                report["admissible_t_bound"]["t_max"] = "inf";

            const std::filesystem::path dir = opt.out;
            prepare_output_dir(dir);
            io::write_file(dir / "sharpness.json", report.dump(2) + "\n");
            if (!opt.quiet)
            {
                out << "sharpness: " << objective->name() << ", f = " << io::format_number((*objective)(point))
                    << ", trace = " << io::format_number(model.lambda.sum()) << "\n  top eigenvalues";
                for (Index i = 0; i < top.size(); ++i)
                    out << ' ' << io::format_number(top[i]);
                out << "\n  R_inf = " << io::format_number(kkt.r_infinity) << "\n  wrote "
                    << (dir / "sharpness.json").string() << "\n";
            }
            return exit_ok;
        }

        // ------------------------------------------------------------- bench

        QuadraticObjective bench_quadratic(Fields &f)
        {
            const std::vector<double> diag = f.numbers("diagonal", std::vector<double>{1.0, 0.5});
            const std::vector<double> b = f.numbers("b", std::vector<double>{1.0, 0.5});
            if (diag.size() != b.size())
                throw SchemaError("config: 'diagonal' and 'b' must have equal length");
            return QuadraticObjective::diagonal(to_vector(diag), to_vector(b));
        }

        int cmd_bench(const std::string &name, const Options &opt, std::ostream &out)
        {
            Json doc = Json::object();
            if (!opt.config.empty())
                doc = load_json(opt.config);
            else
                doc["schema_version"] = schema_version;
            Fields f(doc, "config");
            check_version(f);
            const std::uint64_t seed = opt.seed.value_or(f.unsigned_integer("seed", 0));

            BenchReport report;
            if (name == "bias-rate")
            {
                const QuadraticObjective q = bench_quadratic(f);
                const ParamVector x = to_vector(f.numbers("point", std::vector<double>(static_cast<std::size_t>(q.dimension()), 0.0)));
                if (x.size() != q.dimension())
                    throw SchemaError("config.point must match the quadratic's dimension");
                BiasRateOptions o;
                o.t = f.number("t", o.t);
                o.rho = f.number("rho", o.rho);
                o.k_grid.clear();
                for (auto k : f.integers("k_grid", std::vector<std::int64_t>{2, 4, 8, 16, 32}))
                    o.k_grid.push_back(static_cast<int>(k));
                o.replicates = f.integer("replicates", o.replicates);
                o.seed = seed;
                f.finish();
                if (!(o.t > 0.0) || !(o.rho > 0.0) || o.replicates < 2)
                    throw SchemaError("config: need t > 0, rho > 0 and replicates >= 2");
                for (int k : o.k_grid)
                    if (k < 2)
                        throw SchemaError("config.k_grid: bias-corrected estimator needs every k >= 2");
                report = bias_rate_experiment(q, x, o);
            }
            else if (name == "sphere-ball")
            {
                const QuadraticObjective q = bench_quadratic(f);
                SphereBallOptions o;
                o.t = f.number("t", o.t);
                o.rho = f.number("rho", o.rho);
                o.d_grid.clear();
                for (auto d : f.integers("d_grid", std::vector<std::int64_t>{2, 10, 100}))
                    o.d_grid.push_back(d);
                o.n_samples = f.integer("n_samples", o.n_samples);
                o.seed = seed;
                f.finish();
                if (o.t < 0.0 || !(o.rho > 0.0) || o.n_samples < 2)
                    throw SchemaError("config: need t >= 0, rho > 0 and n_samples >= 2");
                for (Index d : o.d_grid)
                    if (d < q.dimension())
                        throw SchemaError("config.d_grid entries must be at least the quadratic's dimension");
                report = sphere_ball_gap_experiment(q, o);
            }
            else if (name == "concentration")
            {
                ConcentrationOptions o;
                o.d_grid.clear();
                for (auto d : f.integers("d_grid", std::vector<std::int64_t>{2, 10, 100, 1000}))
                    o.d_grid.push_back(d);
                o.n_samples = f.integer("n_samples", o.n_samples);
                o.seed = seed;
                f.finish();
                if (o.n_samples < 2)
                    throw SchemaError("config.n_samples must be >= 2");
                for (Index d : o.d_grid)
                    if (d < 1)
                        throw SchemaError("config.d_grid entries must be >= 1");
                report = concentration_experiment(o);
            }
            else
            {
                throw CLI::ValidationError("bench", "unknown benchmark '" + name + "'");
            }

            const std::filesystem::path dir = opt.out;
            prepare_output_dir(dir);
            const std::string stem = "bench_" + name + "_" + std::to_string(seed);
            io::write_file(dir / (stem + ".json"), to_json(report).dump(2) + "\n");
            io::write_file(dir / (stem + ".csv"), to_csv(report));
            if (!opt.quiet)
            {
                out << "bench " << name << " (seed " << seed << ")\n";
                for (const auto &fit : report.fits)
                    out << "  " << fit.group << " " << fit.metric << " slope " << io::format_number(fit.slope) << " +- "
                        << io::format_number(fit.slope_std_error) << "\n";
                if (name == "concentration")
                    for (const auto &c : report.cells)
                        if (c.metric == "z_mean" || c.metric == "z_variance")
                            out << "  d=" << c.key << " " << c.metric << " " << io::format_number(c.stat.mean) << "\n";
                if (name == "sphere-ball")
                    for (const auto &c : report.cells)
                        if (c.metric == "relative_gap")
                            out << "  d=" << c.key << " gap " << io::format_number(c.stat.mean) << " +- "
                                << io::format_number(c.stat.std_error) << "\n";
                out << "  wrote " << (dir / (stem + ".json")).string() << ", " << (dir / (stem + ".csv")).string()
                    << "\n";
            }
            return exit_ok;
        }
    }

    std::unique_ptr<Objective> make_objective(const Json &spec)
    {
        Fields f(spec, "objective");
        const std::string name = f.string("name");
        std::unique_ptr<Objective> obj;
        if (name == "two-minima")
        {
            obj = std::make_unique<TwoMinimaObjective>();
        }
        else if (name == "quadratic")
        {
            const double c = f.number("c", 0.0);
            if (f.has("H") && f.has("diagonal"))
                throw SchemaError("objective: give either 'H' or 'diagonal', not both");
            Matrix<double> H;
            if (f.has("diagonal"))
            {
                const auto diag = f.numbers("diagonal");
                H = to_vector(diag).asDiagonal();
            }
            else
            {
                const Json &rows = f.raw("H");
                if (!rows.is_array() || rows.empty())
                    throw SchemaError("objective.H must be a non-empty array of rows");
                const auto n = static_cast<Index>(rows.size());
                H.resize(n, n);
                for (Index i = 0; i < n; ++i)
                {
                    const auto row = Fields::as_numbers(rows[static_cast<std::size_t>(i)], "objective.H");
                    if (static_cast<Index>(row.size()) != n)
                        throw SchemaError("objective.H must be square");
                    for (Index j = 0; j < n; ++j)
                        H(i, j) = row[static_cast<std::size_t>(j)];
                }
            }
            const auto b = f.numbers("b", std::vector<double>(static_cast<std::size_t>(H.rows()), 0.0));
            if (static_cast<Index>(b.size()) != H.rows())
                throw SchemaError("objective.b must match the size of H");
            obj = std::make_unique<QuadraticObjective>(H, to_vector(b), c);
        }
        else if (name == "piecewise-linear")
        {
            const auto res = f.integer("grid_resolution", 12);
            const double w = f.number("halfwidth", 2.0);
            if (res < 2)
                throw SchemaError("objective.grid_resolution must be >= 2");
            if (!(w > 0.0))
                throw SchemaError("objective.halfwidth must be positive");
            obj = std::make_unique<PiecewiseLinearObjective>(build_piecewise_linear(static_cast<int>(res), w));
        }
        else if (name == "logistic-synthetic")
        {
            LogisticDataConfig c;
            c.features = f.integer("features", c.features);
            c.samples = f.integer("samples", c.samples);
            c.label_noise = f.number("label_noise", c.label_noise);
            c.batch_size = f.integer("batch_size", c.batch_size);
            c.seed = f.unsigned_integer("seed", c.seed);
            if (c.features < 1 || c.samples < 1 || c.batch_size < 1)
                throw SchemaError("objective: features, samples and batch_size must be >= 1");
            if (!(c.label_noise >= 0.0 && c.label_noise < 1.0))
                throw SchemaError("objective.label_noise must be in [0, 1)");
            obj = std::make_unique<SyntheticLogisticObjective>(c);
        }
        else
        {
            throw SchemaError("objective.name '" + name +
                              "' is unknown (expected quadratic, piecewise-linear, two-minima or logistic-synthetic)");
        }
        f.finish();
        return obj;
    }

    RunConfig parse_run_config(const Json &doc, std::optional<std::uint64_t> seed_override)
    {
        Fields f(doc, "config");
        check_version(f);
        RunConfig cfg;
        cfg.seed = f.unsigned_integer("seed", 0);
        if (seed_override)
            cfg.seed = *seed_override;
        cfg.objective = f.raw("objective");
        const auto objective = make_objective(cfg.objective);

        if (f.has("x0"))
            cfg.x0 = to_vector(f.numbers("x0"));
        else if (objective->name() == "logistic-synthetic")
            cfg.x0 = ParamVector::Zero(objective->dimension());
        else
            throw SchemaError("config: missing required field 'x0'");

        Fields o(f.raw("optimizer"), "optimizer");
        OptimizerConfig &opt = cfg.optimizer;
        opt.method = parse_method(o.string("method"));
        opt.learning_rate = o.number("eta");
        opt.max_iterations = static_cast<int>(o.integer("iterations"));
        opt.log_every = static_cast<int>(o.integer("log_every", 1));
        opt.batches.full_batch = !o.boolean("minibatch", false);
        opt.batches.seed = derive_seed(cfg.seed, 1);
        cfg.stopping.patience = static_cast<int>(o.integer("patience", 0));
        cfg.stopping.min_delta = o.number("min_delta", 0.0);
        if (cfg.stopping.patience < 0 || cfg.stopping.min_delta < 0.0)
            throw SchemaError("optimizer.patience and optimizer.min_delta must be non-negative");

        if (opt.method == Method::gd)
        {
            for (const char *key : {"t", "k", "rho", "perturbation"})
                if (o.has(key))
                    throw SchemaError(std::string("optimizer.") + key +
                                      " has no effect with method gd (exact gradient); remove it");
        }
        else
        {
            TiltConfig &tilt = opt.tilt;
            tilt.k = static_cast<int>(o.integer("k"));
            tilt.perturbation.rho = o.number("rho");
            tilt.perturbation.kind = parse_perturbation_kind(o.string("perturbation", "gaussian"));
            tilt.perturbation.seed = cfg.seed;
            if (opt.method == Method::vanilla)
            {
                tilt.t = o.number("t", 0.0);
                if (tilt.t != 0.0)
                    throw SchemaError("optimizer.t = " + std::to_string(tilt.t) +
                                      " with method vanilla: the two-point estimator has no tilt; set t to 0 or use "
                                      "zest-naive / zest-bc");
                tilt.estimator = EstimatorKind::vanilla;
            }
            else
            {
                tilt.t = o.number("t");
                tilt.estimator = opt.method == Method::zest_naive ? EstimatorKind::naive : EstimatorKind::bias_corrected;
            }
        }
        o.finish();
        f.finish();
        opt.validate();
        return cfg;
    }

    std::string trajectory_csv(const RunResult &result)
    {
        if (result.trajectory.empty())
            return {};
        const Index d = result.trajectory.front().iterate.size();
        const bool coords = d <= 8;
        std::vector<std::string> header{"iter", "loss"};
        if (coords)
            for (Index i = 0; i < d; ++i)
                header.push_back("x" + std::to_string(i));
        else
        {
            header.push_back("x_norm");
            header.push_back("update_norm");
        }
        std::string out = io::csv_row(header);
        for (const auto &r : result.trajectory)
        {
            std::vector<std::string> row{std::to_string(r.iteration), io::format_number(r.loss)};
            if (coords)
                for (Index i = 0; i < d; ++i)
                    row.push_back(io::format_number(r.iterate[i]));
            else
            {
                row.push_back(io::format_number(r.iterate.norm()));
                row.push_back(io::format_number(r.update_norm));
            }
            out += io::csv_row(row);
        }
        return out;
    }

    ParamVector read_final_iterate(const std::filesystem::path &csv_path)
    {
        if (!std::filesystem::exists(csv_path))
            throw IoError("trajectory file not found: " + csv_path.string());
        std::istringstream in(io::read_file(csv_path));
        auto split = [](std::string line) {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
                cells.push_back(cell);
            return cells;
        };
        std::string line;
        if (!std::getline(in, line))
            throw SchemaError(csv_path.string() + ": empty trajectory file");
        const auto header = split(line);
        std::size_t first = 0, count = 0;
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == "x" + std::to_string(count))
            {
                if (count == 0)
                    first = i;
                ++count;
            }
        if (count == 0)
            throw SchemaError(csv_path.string() + ": no coordinate columns (x0, x1, ...) in trajectory header");
        std::string last;
        while (std::getline(in, line))
            if (!line.empty() && line != "\r")
                last = line;
        if (last.empty())
            throw SchemaError(csv_path.string() + ": trajectory has no rows");
        const auto cells = split(last);
        if (cells.size() < first + count)
            throw SchemaError(csv_path.string() + ": short final row");
        ParamVector x(static_cast<Index>(count));
        for (std::size_t i = 0; i < count; ++i)
        {
            const std::string &c = cells[first + i];
            double v = 0.0;
            const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc() || res.ptr != c.data() + c.size())
                throw SchemaError(csv_path.string() + ": cannot parse '" + c + "' as a number");
            x[static_cast<Index>(i)] = v;
        }
        return x;
    }

    int main(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
    {
        CLI::App app{"Zeroth-order tilted sharpness-aware optimization: training runs, sharpness reports, benchmarks."};
        app.require_subcommand(1, 1);
        Options opt;
        std::uint64_t seed_value = 0;

        auto add_common = [&](CLI::App *sub, bool config_required) {
            auto *c = sub->add_option("--config", opt.config, "JSON config file");
            if (config_required)
                c->required();
            sub->add_option("--out", opt.out, "output directory")->capture_default_str();
            sub->add_option("--seed", seed_value, "base seed, overrides the config");
            sub->add_flag("--quiet", opt.quiet, "suppress the summary");
        };

        auto *run_cmd = app.add_subcommand("run", "optimize an objective and write trajectory.csv + manifest.json");
        add_common(run_cmd, true);
        auto *sharp_cmd = app.add_subcommand("sharpness", "write sharpness.json for a point or a trajectory's end");
        add_common(sharp_cmd, true);
        auto *bench_cmd = app.add_subcommand("bench", "run a named benchmark: bias-rate, sphere-ball or concentration");
        std::string bench_name;
        bench_cmd->add_option("name", bench_name, "benchmark name")
            ->required()
            ->check(CLI::IsMember({"bias-rate", "sphere-ball", "concentration"}));
        add_common(bench_cmd, false);

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::ParseError &e)
        {
            const int code = app.exit(e, out, err);
            return code == 0 ? exit_ok : exit_usage;
        }

        CLI::App *active = app.get_subcommands().front();
        if (active->count("--seed") > 0)
            opt.seed = seed_value;

        try
        {
            if (active == run_cmd)
                return cmd_run(opt, out);
            if (active == sharp_cmd)
                return cmd_sharpness(opt, out);
            return cmd_bench(bench_name, opt, out);
        }
        catch (const CLI::Error &e)
        {
            err << "error: " << e.what() << "\n";
            return exit_usage;
        }
        catch (const IoError &e)
        {
            err << "error: " << e.what() << "\n";
            return exit_io;
        }
        catch (const ConfigError &e)
        {
            err << "config error: " << e.what() << "\n";
            return exit_schema;
        }
        catch (const DimensionError &e)
        {
            err << "config error: " << e.what() << "\n";
            return exit_schema;
        }
        catch (const nlohmann::json::exception &e)
        {
            err << "config error: " << e.what() << "\n";
            return exit_schema;
        }
        catch (const Error &e)
        {
            err << "numeric failure: " << e.what() << "\n";
            return exit_numeric;
        }
        catch (const std::exception &e)
        {
            err << "unexpected failure: " << e.what() << "\n";
            return exit_numeric;
        }
    }
}
