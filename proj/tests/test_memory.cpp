// Interposes malloc (glibc) and counts blocks of at least one parameter
// vector's size while a step runs: only one perturbation vector may be live.
#include <malloc.h>

#include <cstdio>
#include <cstdlib>

#include "zest/optimizer.hpp"

extern "C"
{
    void *__libc_malloc(std::size_t);
    void *__libc_calloc(std::size_t, std::size_t);
    void *__libc_realloc(void *, std::size_t);
    void __libc_free(void *);
}

namespace
{
    bool counting = false;
    std::size_t threshold = 0;
    long large_allocations = 0;
    long live_large = 0;
    long peak_large = 0;

    void note_alloc(std::size_t size)
    {
        if (counting && size >= threshold)
        {
            ++large_allocations;
            if (++live_large > peak_large)
                peak_large = live_large;
        }
    }

    void note_free(void *p)
    {
        if (counting && p && malloc_usable_size(p) >= threshold && live_large > 0)
            --live_large;
    }
}

extern "C"
{
    void *malloc(std::size_t size)
    {
        note_alloc(size);
        return __libc_malloc(size);
    }

    void *calloc(std::size_t n, std::size_t size)
    {
        note_alloc(n * size);
        return __libc_calloc(n, size);
    }

    void *realloc(void *p, std::size_t size)
    {
        note_free(p);
        note_alloc(size);
        return __libc_realloc(p, size);
    }

    void free(void *p)
    {
        note_free(p);
        __libc_free(p);
    }
}

namespace
{
    // Sum of squares; evaluate never allocates.
    class Bowl final : public zest::Objective
    {
    public:
        explicit Bowl(zest::Index d) : d_(d) {}
        std::string name() const override { return "bowl"; }
        zest::Index dimension() const override { return d_; }
        double evaluate(zest::ConstVectorRef x, zest::BatchId) const override { return 0.5 * x.squaredNorm(); }

    private:
        zest::Index d_;
    };
}

int main()
{
    using namespace zest;
    const Index d = 100000;
    Bowl bowl(d);
    ParamVector x = ParamVector::Constant(d, 0.01);
    int failures = 0;

    for (Method m : {Method::zest_naive, Method::zest_bias_corrected, Method::vanilla})
    {
        OptimizerConfig cfg;
        cfg.method = m;
        cfg.learning_rate = 0.1;
        cfg.tilt.t = m == Method::vanilla ? 0.0 : 1.0;
        cfg.tilt.k = 16;
        cfg.tilt.estimator = m == Method::zest_naive            ? EstimatorKind::naive
                             : m == Method::zest_bias_corrected ? EstimatorKind::bias_corrected
                                                                : EstimatorKind::vanilla;
        cfg.tilt.perturbation = {PerturbationKind::gaussian, 0.01, 1};
        cfg.validate();

        // A d-vector is 8d bytes; flag anything of at least d bytes.
        threshold = static_cast<std::size_t>(d);
        large_allocations = live_large = peak_large = 0;
        counting = true;
        zest_step_in_place(bowl, x, cfg, 0);
        counting = false;

        const bool ok = peak_large <= 1 && large_allocations <= 1;
        std::printf("%-10s large allocations %ld, peak live %ld (limit 1) %s\n", std::string(to_string(m)).c_str(),
                    large_allocations, peak_large, ok ? "ok" : "FAIL");
        failures += !ok;
    }
    return failures == 0 ? 0 : 1;
}
