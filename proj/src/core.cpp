#include "zest/core.hpp"

#include <cmath>
#include <random>

#include "zest/random.hpp"

namespace zest
{
    std::string_view to_string(PerturbationKind kind)
    {
        switch (kind)
        {
        case PerturbationKind::gaussian:
            return "gaussian";
        case PerturbationKind::sphere:
            return "sphere";
        case PerturbationKind::ball:
            return "ball";
        }
        return "unknown";
    }

    PerturbationKind parse_perturbation_kind(std::string_view name)
    {
        if (name == "gaussian")
            return PerturbationKind::gaussian;
        if (name == "sphere")
            return PerturbationKind::sphere;
        if (name == "ball")
            return PerturbationKind::ball;
        throw ConfigError("unknown perturbation kind '" + std::string(name) +
                          "' (expected gaussian, sphere or ball)");
    }

    void sample_perturbation_into(const PerturbationSpec &spec, std::uint64_t index,
                                  Eigen::Ref<ParamVector> out)
    {
        const Index d = out.size();
        if (d < 1)
            throw DimensionError("sample_perturbation: dimension must be >= 1");

        auto rng = CounterRng::for_query(spec.seed, index);
        std::normal_distribution<double> normal;
        for (Index j = 0; j < d; ++j)
            out[j] = normal(rng);

        if (spec.kind == PerturbationKind::gaussian)
            return;

        // A zero Gaussian draw has probability zero; redraw from the same stream if it happens.
        double norm = out.norm();
        while (norm == 0.0)
        {
            for (Index j = 0; j < d; ++j)
                out[j] = normal(rng);
            norm = out.norm();
        }
        double radius = std::sqrt(static_cast<double>(d));
        if (spec.kind == PerturbationKind::ball)
        {
            std::uniform_real_distribution<double> uniform(0.0, 1.0);
            radius *= std::pow(uniform(rng), 1.0 / static_cast<double>(d));
        }
        out *= radius / norm;
    }

    ParamVector sample_perturbation(const PerturbationSpec &spec, std::uint64_t index, Index d)
    {
        if (d < 1)
            throw DimensionError("sample_perturbation: dimension must be >= 1");
        ParamVector v(d);
        sample_perturbation_into(spec, index, v);
        return v;
    }

    NormMoments perturbation_norm_moments(Index d)
    {
        if (d < 1)
            throw DimensionError("perturbation_norm_moments: dimension must be >= 1");
        const double n = static_cast<double>(d);
        return {std::sqrt(n) * (1.0 - 1.0 / (n + 1.0)), n * n / ((n + 2.0) * (n + 1.0) * (n + 1.0))};
    }
}
