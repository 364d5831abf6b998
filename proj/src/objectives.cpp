#include "zest/objectives.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "zest/random.hpp"

namespace zest
{
    namespace
    {
        void check_dimension(const Objective &obj, ConstVectorRef x)
        {
            if (x.size() != obj.dimension())
                throw DimensionError(obj.name() + ": expected dimension " + std::to_string(obj.dimension()) +
                                     ", got " + std::to_string(x.size()));
        }

        double checked_eval(const Objective &obj, ConstVectorRef x, BatchId batch)
        {
            const double v = obj.evaluate(x, batch);
            if (!std::isfinite(v))
                throw EvaluationError(obj.name() + ": non-finite value during finite differencing");
            return v;
        }

        // log(1 + exp(z)) without overflow.
        double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

        double sigmoid(double z)
        {
            if (z >= 0.0)
                return 1.0 / (1.0 + std::exp(-z));
            const double e = std::exp(z);
            return e / (1.0 + e);
        }
    }

    std::optional<ParamVector> Objective::gradient(ConstVectorRef, BatchId) const { return std::nullopt; }

    std::optional<Matrix<double>> Objective::hessian(ConstVectorRef) const { return std::nullopt; }

    // ---------------------------------------------------------------- constant

    ConstantObjective::ConstantObjective(Index d, double value) : d_(d), value_(value)
    {
        if (d < 1)
            throw DimensionError("constant objective: dimension must be >= 1");
    }

    double ConstantObjective::evaluate(ConstVectorRef x, BatchId) const
    {
        check_dimension(*this, x);
        return value_;
    }

    std::optional<ParamVector> ConstantObjective::gradient(ConstVectorRef x, BatchId) const
    {
        check_dimension(*this, x);
        return ParamVector::Zero(d_);
    }

    std::optional<Matrix<double>> ConstantObjective::hessian(ConstVectorRef x) const
    {
        check_dimension(*this, x);
        return Matrix<double>::Zero(d_, d_);
    }

    // --------------------------------------------------------------- quadratic

    QuadraticObjective::QuadraticObjective(Matrix<double> H, ParamVector b, double c)
        : H_(std::move(H)), b_(std::move(b)), c_(c)
    {
        if (H_.rows() != H_.cols() || H_.rows() != b_.size())
            throw DimensionError("quadratic: H must be square and match b");
        if (b_.size() < 1)
            throw DimensionError("quadratic: dimension must be >= 1");
        if (!H_.isApprox(H_.transpose(), 1e-12) && !(H_ - H_.transpose()).isZero(1e-12))
            throw ConfigError("quadratic: H must be symmetric");
        if (!all_finite(H_) || !all_finite(b_) || !std::isfinite(c_))
            throw ConfigError("quadratic: coefficients must be finite");
    }

    QuadraticObjective QuadraticObjective::diagonal(const ParamVector &h, const ParamVector &b, double c)
    {
        return QuadraticObjective(h.asDiagonal().toDenseMatrix(), b, c);
    }

    QuadraticObjective QuadraticObjective::embedded(Index d) const
    {
        const Index n = dimension();
        if (d < n)
            throw DimensionError("quadratic: cannot embed into a smaller space");
        Matrix<double> H = Matrix<double>::Zero(d, d);
        H.topLeftCorner(n, n) = H_;
        ParamVector b = ParamVector::Zero(d);
        b.head(n) = b_;
        return QuadraticObjective(std::move(H), std::move(b), c_);
    }

    double QuadraticObjective::evaluate(ConstVectorRef x, BatchId) const
    {
        check_dimension(*this, x);
        // x^T H x without a temporary of size d.
        double quad = 0.0;
        for (Index j = 0; j < x.size(); ++j)
            quad += x[j] * H_.col(j).dot(x);
        return 0.5 * quad + b_.dot(x) + c_;
    }

    std::optional<ParamVector> QuadraticObjective::gradient(ConstVectorRef x, BatchId) const
    {
        check_dimension(*this, x);
        return ParamVector(H_ * x + b_);
    }

    std::optional<Matrix<double>> QuadraticObjective::hessian(ConstVectorRef x) const
    {
        check_dimension(*this, x);
        return H_;
    }

    // -------------------------------------------------------------- two minima

    double TwoMinimaObjective::evaluate(ConstVectorRef p, BatchId) const
    {
        check_dimension(*this, p);
        const double x = p[0], y = p[1];
        const double q = x * x - 1.0;
        return 0.2 * (q * q + 0.5 * x * q * q + (1.0 + 2.0 * (1.0 - x)) * y * y);
    }

    std::optional<ParamVector> TwoMinimaObjective::gradient(ConstVectorRef p, BatchId) const
    {
        check_dimension(*this, p);
        const double x = p[0], y = p[1];
        const double q = x * x - 1.0;
        ParamVector g(2);
        g[0] = 0.2 * (4.0 * x * q * (1.0 + 0.5 * x) + 0.5 * q * q - 2.0 * y * y);
        g[1] = 0.2 * 2.0 * (3.0 - 2.0 * x) * y;
        return g;
    }

    std::optional<Matrix<double>> TwoMinimaObjective::hessian(ConstVectorRef p) const
    {
        check_dimension(*this, p);
        return Matrix<double>(two_minima_hessian(p[0], p[1]));
    }

    Eigen::Matrix2d two_minima_hessian(double x, double y)
    {
        const double q = x * x - 1.0;
        Eigen::Matrix2d H;
        H(0, 0) = 0.2 * ((12.0 * x * x - 4.0) * (1.0 + 0.5 * x) + 4.0 * x * q);
        H(0, 1) = H(1, 0) = 0.2 * (-4.0 * y);
        H(1, 1) = 0.2 * 2.0 * (3.0 - 2.0 * x);
        return H;
    }

    // -------------------------------------------------------- piecewise linear

    double Plane::slope() const { return std::hypot(a, b); }

    double PiecewiseLinearObjective::surface(double x, double y) { return 0.07 * (8.0 * x * x + 10.0 * y * y) + 0.14; }

    PiecewiseLinearObjective::PiecewiseLinearObjective(std::vector<Plane> planes, int grid_resolution, double halfwidth)
        : planes_(std::move(planes)), grid_resolution_(grid_resolution), halfwidth_(halfwidth)
    {
        if (planes_.empty())
            throw ConfigError("piecewise-linear: no planes");
    }

    double PiecewiseLinearObjective::evaluate(ConstVectorRef p, BatchId) const
    {
        check_dimension(*this, p);
        return planes_[active_plane(p[0], p[1])](p[0], p[1]);
    }

    std::optional<ParamVector> PiecewiseLinearObjective::gradient(ConstVectorRef p, BatchId) const
    {
        check_dimension(*this, p);
        const Plane &plane = planes_[active_plane(p[0], p[1])];
        ParamVector g(2);
        g << plane.a, plane.b;
        return g;
    }

    std::size_t PiecewiseLinearObjective::active_plane(double x, double y) const
    {
        std::size_t best = 0;
        double best_value = planes_[0](x, y);
        for (std::size_t j = 1; j < planes_.size(); ++j)
        {
            const double v = planes_[j](x, y);
            if (v > best_value)
            {
                best_value = v;
                best = j;
            }
        }
        return best;
    }

    namespace
    {
        Plane plane_through(const Eigen::Vector3d &p0, const Eigen::Vector3d &p1, const Eigen::Vector3d &p2)
        {
            Eigen::Matrix3d A;
            A << p0.x(), p0.y(), 1.0, p1.x(), p1.y(), 1.0, p2.x(), p2.y(), 1.0;
            const Eigen::Vector3d z(p0.z(), p1.z(), p2.z());
            const Eigen::Vector3d abc = A.fullPivLu().solve(z);
            return {abc[0], abc[1], abc[2]};
        }
    }

    PiecewiseLinearObjective build_piecewise_linear(int grid_resolution, double domain_halfwidth)
    {
        if (grid_resolution < 2)
            throw ConfigError("piecewise-linear: grid_resolution must be >= 2");
        if (!(domain_halfwidth > 0.0))
            throw ConfigError("piecewise-linear: domain_halfwidth must be positive");

        const double step = 2.0 * domain_halfwidth / grid_resolution;
        auto vertex = [&](int i, int j) {
            const double x = -domain_halfwidth + step * i;
            const double y = -domain_halfwidth + step * j;
            return Eigen::Vector3d(x, y, PiecewiseLinearObjective::surface(x, y));
        };

        std::vector<Plane> planes;
        planes.reserve(2 * static_cast<std::size_t>(grid_resolution) * grid_resolution);
        for (int i = 0; i < grid_resolution; ++i)
        {
            for (int j = 0; j < grid_resolution; ++j)
            {
                const auto v00 = vertex(i, j), v10 = vertex(i + 1, j);
                const auto v01 = vertex(i, j + 1), v11 = vertex(i + 1, j + 1);
                planes.push_back(plane_through(v00, v10, v11));
                planes.push_back(plane_through(v00, v11, v01));
            }
        }
        return PiecewiseLinearObjective(std::move(planes), grid_resolution, domain_halfwidth);
    }

    // ---------------------------------------------------------------- logistic

    SyntheticLogisticObjective::SyntheticLogisticObjective(const LogisticDataConfig &config) : config_(config)
    {
        if (config.features < 1 || config.samples < 1)
            throw ConfigError("logistic-synthetic: features and samples must be >= 1");
        if (!(config.label_noise >= 0.0 && config.label_noise < 1.0))
            throw ConfigError("logistic-synthetic: label_noise must lie in [0, 1)");
        if (config.batch_size < 1 || config.batch_size > config.samples)
            throw ConfigError("logistic-synthetic: batch_size must lie in [1, samples]");

        std::normal_distribution<double> normal;
        auto feature_rng = CounterRng(derive_seed(config.seed, 1));
        features_.resize(config.samples, config.features);
        for (Index r = 0; r < config.samples; ++r)
            for (Index c = 0; c < config.features; ++c)
                features_(r, c) = normal(feature_rng);

        auto teacher_rng = CounterRng(derive_seed(config.seed, 2));
        ParamVector teacher(config.features);
        for (Index c = 0; c < config.features; ++c)
            teacher[c] = normal(teacher_rng);

        const ParamVector margins = features_ * teacher;
        clean_labels_ = margins.unaryExpr([](double m) { return m >= 0.0 ? 1.0 : -1.0; });
        labels_ = clean_labels_;

        auto flip_rng = CounterRng(derive_seed(config.seed, 3));
        std::bernoulli_distribution flip(config.label_noise);
        for (Index r = 0; r < config.samples; ++r)
            if (flip(flip_rng))
                labels_[r] = -labels_[r];
    }

    Index SyntheticLogisticObjective::flipped_labels() const { return (labels_.array() != clean_labels_.array()).count(); }

    std::vector<Index> SyntheticLogisticObjective::batch_indices(BatchId batch) const
    {
        std::vector<Index> idx(static_cast<std::size_t>(config_.samples));
        std::iota(idx.begin(), idx.end(), Index{0});
        if (batch.is_full())
            return idx;
        // Partial Fisher-Yates keyed on the batch id.
        auto rng = CounterRng(derive_seed(derive_seed(config_.seed, 4), batch.value));
        const auto m = static_cast<std::size_t>(config_.batch_size);
        for (std::size_t i = 0; i < m; ++i)
        {
            std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        idx.resize(m);
        return idx;
    }

    double SyntheticLogisticObjective::evaluate(ConstVectorRef x, BatchId batch) const
    {
        check_dimension(*this, x);
        double total = 0.0;
        std::size_t count = 0;
        for (Index r : batch_indices(batch))
        {
            total += softplus(-labels_[r] * features_.row(r).dot(x));
            ++count;
        }
        return total / static_cast<double>(count);
    }

    std::optional<ParamVector> SyntheticLogisticObjective::gradient(ConstVectorRef x, BatchId batch) const
    {
        check_dimension(*this, x);
        ParamVector g = ParamVector::Zero(dimension());
        std::size_t count = 0;
        for (Index r : batch_indices(batch))
        {
            const double y = labels_[r];
            g += (-y * sigmoid(-y * features_.row(r).dot(x))) * features_.row(r).transpose();
            ++count;
        }
        return ParamVector(g / static_cast<double>(count));
    }

    std::optional<Matrix<double>> SyntheticLogisticObjective::hessian(ConstVectorRef x) const
    {
        check_dimension(*this, x);
        const ParamVector z = features_ * x;
        const ParamVector w = z.unaryExpr([](double v) {
            const double s = sigmoid(v);
            return s * (1.0 - s);
        });
        return Matrix<double>(features_.transpose() * w.asDiagonal() * features_ / static_cast<double>(config_.samples));
    }

    double SyntheticLogisticObjective::accuracy(ConstVectorRef x) const
    {
        check_dimension(*this, x);
        const ParamVector z = features_ * x;
        return static_cast<double>((z.array() * labels_.array() > 0.0).count()) / static_cast<double>(config_.samples);
    }

    double SyntheticLogisticObjective::clean_accuracy(ConstVectorRef x) const
    {
        check_dimension(*this, x);
        const ParamVector z = features_ * x;
        return static_cast<double>((z.array() * clean_labels_.array() > 0.0).count()) /
               static_cast<double>(config_.samples);
    }

    // -------------------------------------------------------- finite differences

    ParamVector finite_difference_gradient(const Objective &obj, ConstVectorRef x, double h, BatchId batch)
    {
        check_dimension(obj, x);
        if (!(h > 0.0))
            throw ConfigError("finite_difference_gradient: step must be positive");
        ParamVector probe = x;
        ParamVector g(x.size());
        for (Index i = 0; i < x.size(); ++i)
        {
            probe[i] = x[i] + h;
            const double fp = checked_eval(obj, probe, batch);
            probe[i] = x[i] - h;
            const double fm = checked_eval(obj, probe, batch);
            probe[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        return g;
    }

    Matrix<double> finite_difference_hessian(const Objective &obj, ConstVectorRef x, double h, BatchId batch)
    {
        check_dimension(obj, x);
        if (!(h > 0.0))
            throw ConfigError("finite_difference_hessian: step must be positive");
        const Index d = x.size();
        ParamVector probe = x;
        const double f0 = checked_eval(obj, probe, batch);
        auto at = [&](Index i, double di, Index j, double dj) {
            probe[i] += di;
            probe[j] += dj;
            const double v = checked_eval(obj, probe, batch);
            probe[i] = x[i];
            probe[j] = x[j];
            return v;
        };

        Matrix<double> H(d, d);
        for (Index i = 0; i < d; ++i)
        {
            H(i, i) = (at(i, h, i, 0.0) - 2.0 * f0 + at(i, -h, i, 0.0)) / (h * h);
            for (Index j = i + 1; j < d; ++j)
            {
                const double pp = at(i, h, j, h), pm = at(i, h, j, -h);
                const double mp = at(i, -h, j, h), mm = at(i, -h, j, -h);
                H(i, j) = (pp - pm - mp + mm) / (4.0 * h * h);
                H(j, i) = (pp - mp - pm + mm) / (4.0 * h * h);
            }
        }
        return 0.5 * (H + H.transpose());
    }
}
