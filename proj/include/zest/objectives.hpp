#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zest/core.hpp"

namespace zest
{
    /// Identifies a minibatch. The same id always selects the same data subset;
    /// `full()` selects every sample.
    struct BatchId
    {
        std::uint64_t value = full_sentinel;

        static constexpr std::uint64_t full_sentinel = ~std::uint64_t{0};

        static constexpr BatchId full() noexcept { return BatchId{}; }
        constexpr bool is_full() const noexcept { return value == full_sentinel; }

        friend constexpr bool operator==(BatchId, BatchId) = default;
    };

    using ConstVectorRef = Eigen::Ref<const ParamVector>;

    /// f(x; batch). Implementations are immutable after construction, so
    /// `evaluate` may be called concurrently.
    class Objective
    {
    public:
        virtual ~Objective() = default;

        virtual std::string name() const = 0;
        virtual Index dimension() const = 0;
        virtual double evaluate(ConstVectorRef x, BatchId batch) const = 0;

        double operator()(ConstVectorRef x) const { return evaluate(x, BatchId::full()); }

        /// Exact gradient when available.
        virtual std::optional<ParamVector> gradient(ConstVectorRef x, BatchId batch) const;
        std::optional<ParamVector> gradient(ConstVectorRef x) const { return gradient(x, BatchId::full()); }

        /// Exact (full-batch) Hessian when available.
        virtual std::optional<Matrix<double>> hessian(ConstVectorRef x) const;
    };

    /// f(x) = c everywhere.
    class ConstantObjective final : public Objective
    {
    public:
        ConstantObjective(Index d, double value);

        std::string name() const override { return "constant"; }
        Index dimension() const override { return d_; }
        double evaluate(ConstVectorRef x, BatchId batch) const override;
        std::optional<ParamVector> gradient(ConstVectorRef x, BatchId batch) const override;
        std::optional<Matrix<double>> hessian(ConstVectorRef x) const override;

    private:
        Index d_;
        double value_;
    };

    /// f(x) = 1/2 x^T H x + b^T x + c with symmetric H.
    class QuadraticObjective final : public Objective
    {
    public:
        QuadraticObjective(Matrix<double> H, ParamVector b, double c = 0.0);

        /// Diagonal quadratic sum_i (1/2 h_i x_i^2 + b_i x_i) + c.
        static QuadraticObjective diagonal(const ParamVector &h, const ParamVector &b, double c = 0.0);

        /// The same quadratic acting on the first dimension() coordinates of R^d.
        QuadraticObjective embedded(Index d) const;

        std::string name() const override { return "quadratic"; }
        Index dimension() const override { return b_.size(); }
        double evaluate(ConstVectorRef x, BatchId batch) const override;
        std::optional<ParamVector> gradient(ConstVectorRef x, BatchId batch) const override;
        std::optional<Matrix<double>> hessian(ConstVectorRef x) const override;

        const Matrix<double> &H() const { return H_; }
        const ParamVector &b() const { return b_; }
        double c() const { return c_; }

    private:
        Matrix<double> H_;
        ParamVector b_;
        double c_;
    };

    /// f(x, y) = 1/5 [(x^2 - 1)^2 + 1/2 x (x^2 - 1)^2 + (1 + 2(1 - x)) y^2].
    /// Minima at (1, 0) and (-1, 0), both with f = 0 and equal Hessian trace.
    class TwoMinimaObjective final : public Objective
    {
    public:
        std::string name() const override { return "two-minima"; }
        Index dimension() const override { return 2; }
        double evaluate(ConstVectorRef x, BatchId batch) const override;
        std::optional<ParamVector> gradient(ConstVectorRef x, BatchId batch) const override;
        std::optional<Matrix<double>> hessian(ConstVectorRef x) const override;
    };

    /// Exact Hessian of TwoMinimaObjective at (x, y).
    Eigen::Matrix2d two_minima_hessian(double x, double y);

    /// Plane z = a x + b y + c through three vertices of the triangulated surface.
    struct Plane
    {
        double a = 0.0;
        double b = 0.0;
        double c = 0.0;

        double operator()(double x, double y) const { return a * x + b * y + c; }
        double slope() const;
    };

    /// Piecewise-linear surface built from triangle planes that interpolate
    /// h(x, y) = 0.07 (8 x^2 + 10 y^2) + 0.14 on a square grid.
    ///
    /// The interpolant of a convex h is convex, so it equals the pointwise
    /// maximum of its planes; f is evaluated that way, which also extends it
    /// continuously outside the meshed square.
    class PiecewiseLinearObjective final : public Objective
    {
    public:
        PiecewiseLinearObjective(std::vector<Plane> planes, int grid_resolution, double halfwidth);

        std::string name() const override { return "piecewise-linear"; }
        Index dimension() const override { return 2; }
        double evaluate(ConstVectorRef x, BatchId batch) const override;
        std::optional<ParamVector> gradient(ConstVectorRef x, BatchId batch) const override;

        /// Index of the plane attaining the maximum at (x, y). Ties go to the lowest index.
        std::size_t active_plane(double x, double y) const;
        double slope_of(std::size_t plane) const { return planes_.at(plane).slope(); }

        const std::vector<Plane> &planes() const { return planes_; }
        int grid_resolution() const { return grid_resolution_; }
        double halfwidth() const { return halfwidth_; }

        /// The smooth surface being discretized.
        static double surface(double x, double y);

    private:
        std::vector<Plane> planes_;
        int grid_resolution_;
        double halfwidth_;
    };

    /// Triangulates [-w, w]^2 with `grid_resolution` cells per side, two triangles per cell.
    PiecewiseLinearObjective build_piecewise_linear(int grid_resolution = 12, double domain_halfwidth = 2.0);

    struct LogisticDataConfig
    {
        Index features = 20;
        Index samples = 200;
        double label_noise = 0.0;  ///< probability of flipping each label, in [0, 1)
        Index batch_size = 32;     ///< samples drawn per non-full BatchId
        std::uint64_t seed = 0;
    };

    /// Mean logistic loss on a synthetic linearly-separable task with optional label noise.
    class SyntheticLogisticObjective final : public Objective
    {
    public:
        explicit SyntheticLogisticObjective(const LogisticDataConfig &config);

        std::string name() const override { return "logistic-synthetic"; }
        Index dimension() const override { return features_.cols(); }
        double evaluate(ConstVectorRef x, BatchId batch) const override;
        std::optional<ParamVector> gradient(ConstVectorRef x, BatchId batch) const override;
        std::optional<Matrix<double>> hessian(ConstVectorRef x) const override;

        /// Fraction of samples whose (possibly noisy) label matches sign(a^T x).
        double accuracy(ConstVectorRef x) const;
        /// Accuracy against the noise-free teacher labels.
        double clean_accuracy(ConstVectorRef x) const;

        std::vector<Index> batch_indices(BatchId batch) const;
        const LogisticDataConfig &config() const { return config_; }
        Index flipped_labels() const;

    private:
        LogisticDataConfig config_;
        Matrix<double> features_;
        ParamVector labels_;
        ParamVector clean_labels_;
    };

    /// Central-difference gradient.
    ParamVector finite_difference_gradient(const Objective &obj, ConstVectorRef x, double h = 1e-5,
                                           BatchId batch = BatchId::full());

    /// Central-difference Hessian, symmetrized as (H + H^T) / 2.
    Matrix<double> finite_difference_hessian(const Objective &obj, ConstVectorRef x, double h = 1e-4,
                                             BatchId batch = BatchId::full());
}
