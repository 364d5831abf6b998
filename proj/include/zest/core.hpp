#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "zest/errors.hpp"

namespace zest
{
    template <typename Scalar>
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    template <typename Scalar>
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    using Index = Eigen::Index;

    /// Model parameters x in R^d.
    using ParamVector = Vector<double>;

    enum class PerturbationKind
    {
        gaussian, ///< v ~ N(0, I_d)
        sphere,   ///< v uniform on { |v| = sqrt(d) }
        ball      ///< v uniform on { |v| <= sqrt(d) }
    };

    std::string_view to_string(PerturbationKind kind);
    PerturbationKind parse_perturbation_kind(std::string_view name);

    /// Distribution, scale and base seed of a perturbation family. Query i of
    /// the family is a pure function of (kind, seed, i, d).
    struct PerturbationSpec
    {
        PerturbationKind kind = PerturbationKind::gaussian;
        double rho = 1.0;
        std::uint64_t seed = 0;

        /// Same kind and scale, different base seed.
        PerturbationSpec with_seed(std::uint64_t new_seed) const
        {
            PerturbationSpec out = *this;
            out.seed = new_seed;
            return out;
        }
    };

    /// Writes perturbation `index` of `spec` into `out`; out.size() is the dimension.
    /// The scale rho is NOT applied. Does not allocate.
    void sample_perturbation_into(const PerturbationSpec &spec, std::uint64_t index,
                                  Eigen::Ref<ParamVector> out);

    ParamVector sample_perturbation(const PerturbationSpec &spec, std::uint64_t index, Index d);

    struct NormMoments
    {
        double mean;
        double variance;
    };

    /// E|v| and Var|v| for v uniform on the ball of radius sqrt(d).
    NormMoments perturbation_norm_moments(Index d);

    /// x + coeff * v, in place. Works for any Eigen dense expression of matching size.
    template <typename DerivedX, typename DerivedV>
    void axpy_update(Eigen::MatrixBase<DerivedX> &x, typename DerivedX::Scalar coeff,
                     const Eigen::MatrixBase<DerivedV> &v)
    {
        if (x.size() != v.size())
            throw DimensionError("axpy_update: size " + std::to_string(x.size()) + " vs " +
                                 std::to_string(v.size()));
        x.noalias() += coeff * v;
    }

    /// Value-returning form of axpy_update.
    template <typename Scalar>
    Vector<Scalar> axpy(Vector<Scalar> x, Scalar coeff, const Vector<Scalar> &v)
    {
        axpy_update(x, coeff, v);
        return x;
    }

    /// True when every entry is finite.
    template <typename Derived>
    bool all_finite(const Eigen::DenseBase<Derived> &x)
    {
        return x.derived().array().isFinite().all();
    }
}
