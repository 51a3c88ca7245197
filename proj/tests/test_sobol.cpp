#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "jcdi/sobol.hpp"

using namespace jcdi;

namespace {

ParamSpace unit_box(int k) {
    std::vector<std::string> names;
    std::vector<double> lo(static_cast<size_t>(k), 0.0), hi(static_cast<size_t>(k), 1.0),
        def(static_cast<size_t>(k), 0.5);
    for (int i = 0; i < k; ++i) names.push_back("u" + std::to_string(i));
    return {names, lo, hi, def};
}

ParamSpace ishigami_box() {
    const double pi = std::numbers::pi;
    return {{"x1", "x2", "x3"}, {-pi, -pi, -pi}, {pi, pi, pi}, {0, 0, 0}};
}

std::vector<double> evaluate(const SaltelliDesign& d, const std::function<double(const double*)>& f) {
    std::vector<double> out(static_cast<size_t>(d.n_rows()));
    for (int64_t r = 0; r < d.n_rows(); ++r) out[static_cast<size_t>(r)] = f(d.row(r));
    return out;
}

}  // namespace

TEST_CASE("saltelli design") {
    SUBCASE("row count is N(2k + 2)") {
        const SaltelliDesign d = saltelli_sample(ParamSpace::clm30(), 256, 11);
        CHECK(d.n_rows() == 15872);
        CHECK(d.k == 30);
    }

    SUBCASE("all rows inside the box") {
        const ParamSpace& space = ParamSpace::clm30();
        const SaltelliDesign d = saltelli_sample(space, 32, 5);
        for (int64_t r = 0; r < d.n_rows(); ++r)
            for (int i = 0; i < d.k; ++i) {
                CHECK(d.row(r)[i] >= space.lower(i));
                CHECK(d.row(r)[i] <= space.upper(i));
            }
    }

    SUBCASE("matches an independently scripted construction (k=2, N=4)") {
        const ParamSpace space = unit_box(2);
        const SaltelliDesign d = saltelli_sample(space, 4, 33);

        Rng rng(33);
        double a[4][2], b[4][2];
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 2; ++i) a[j][i] = rng.uniform01();
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 2; ++i) b[j][i] = rng.uniform01();

        // layout: A, B, AB_0, AB_1, BA_0, BA_1
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 2; ++i) {
                CHECK(d.row(j)[i] == a[j][i]);
                CHECK(d.row(4 + j)[i] == b[j][i]);
            }
        for (int col = 0; col < 2; ++col)
            for (int j = 0; j < 4; ++j)
                for (int i = 0; i < 2; ++i) {
                    const double ab = (i == col) ? b[j][i] : a[j][i];
                    const double ba = (i == col) ? a[j][i] : b[j][i];
                    CHECK(d.row(8 + 4 * col + j)[i] == ab);
                    CHECK(d.row(16 + 4 * col + j)[i] == ba);
                }
    }
}

TEST_CASE("jansen estimators") {
    SUBCASE("additive linear model: S1 = ST proportional to coefficient squared") {
        const int k = 3;
        const ParamSpace space = unit_box(k);
        const double coef[3] = {1.0, 2.0, 0.5};
        const SaltelliDesign d = saltelli_sample(space, 2048, 101);
        const auto f = evaluate(d, [&](const double* x) {
            double s = 0;
            for (int i = 0; i < k; ++i) s += coef[i] * x[i];
            return s;
        });
        const SobolIndices si = sobol_indices(f, 2048, k, 100, 5);
        double csum = 0;
        for (double c : coef) csum += c * c;
        for (int i = 0; i < k; ++i) {
            const double expect = coef[i] * coef[i] / csum;
            CHECK(si.s1[static_cast<size_t>(i)] == doctest::Approx(expect).epsilon(0.08));
            CHECK(si.st[static_cast<size_t>(i)] == doctest::Approx(expect).epsilon(0.08));
        }
    }

    SUBCASE("Ishigami indices match the analytic values within 0.05 at N=1024") {
        const double a = 7.0, b = 0.1;
        const double pi = std::numbers::pi;
        const SaltelliDesign d = saltelli_sample(ishigami_box(), 1024, 2023);
        const auto f = evaluate(d, [&](const double* x) {
            return std::sin(x[0]) + a * std::sin(x[1]) * std::sin(x[1]) +
                   b * std::pow(x[2], 4.0) * std::sin(x[0]);
        });
        const SobolIndices si = sobol_indices(f, 1024, 3, 100, 7);

        const double v1 = 0.5 * std::pow(1.0 + b * std::pow(pi, 4.0) / 5.0, 2.0);
        const double v2 = a * a / 8.0;
        const double v13 = 8.0 * b * b * std::pow(pi, 8.0) / 225.0;
        const double v = v1 + v2 + v13;
        const double s1_expect[3] = {v1 / v, v2 / v, 0.0};
        const double st_expect[3] = {(v1 + v13) / v, v2 / v, v13 / v};
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(si.s1[static_cast<size_t>(i)] - s1_expect[i]) <= 0.05);
            CHECK(std::abs(si.st[static_cast<size_t>(i)] - st_expect[i]) <= 0.05);
        }

        SUBCASE("total includes first order; first orders sum below one") {
            double s1_sum = 0;
            for (int i = 0; i < 3; ++i) {
                CHECK(si.st[static_cast<size_t>(i)] + 0.05 >= si.s1[static_cast<size_t>(i)]);
                s1_sum += si.s1[static_cast<size_t>(i)];
            }
            CHECK(s1_sum <= 1.1);
        }
    }

    SUBCASE("doubling N shrinks the bootstrap half-widths") {
        const double a = 7.0, b = 0.1;
        auto run = [&](int n_base) {
            const SaltelliDesign d = saltelli_sample(ishigami_box(), n_base, 77);
            const auto f = evaluate(d, [&](const double* x) {
                return std::sin(x[0]) + a * std::sin(x[1]) * std::sin(x[1]) +
                       b * std::pow(x[2], 4.0) * std::sin(x[0]);
            });
            const SobolIndices si = sobol_indices(f, n_base, 3, 100, 13);
            double mean_ci = 0;
            for (int i = 0; i < 3; ++i) mean_ci += si.st_ci[static_cast<size_t>(i)] + si.s1_ci[static_cast<size_t>(i)];
            return mean_ci / 6.0;
        };
        CHECK(run(1024) < run(256));
    }

    SUBCASE("constant output returns zeros with the zero-variance flag") {
        const int k = 2, n = 16;
        std::vector<double> f(static_cast<size_t>(n * (2 * k + 2)), 3.25);
        const SobolIndices si = sobol_indices(f, n, k, 50, 3);
        CHECK(si.zero_variance);
        for (int i = 0; i < k; ++i) {
            CHECK(si.s1[static_cast<size_t>(i)] == 0.0);
            CHECK(si.st[static_cast<size_t>(i)] == 0.0);
        }
    }
}

TEST_CASE("parameter ranking") {
    const ParamSpace space = unit_box(4);  // names u0..u3

    SUBCASE("zero total index ranks last, descending otherwise") {
        const std::vector<double> st{0.2, 0.0, 0.5, 0.1};
        const auto order = rank_parameters(st, space);
        CHECK(order == std::vector<int>{2, 0, 3, 1});
    }

    SUBCASE("ties break by parameter name order") {
        const std::vector<double> st{0.3, 0.3, 0.6, 0.3};
        const auto order = rank_parameters(st, space);
        CHECK(order == std::vector<int>{2, 0, 1, 3});
    }
}

TEST_CASE("simulator sensitivity: inert parameters under the ordinary fault") {
    // Parameters that only act through stall or trip machinery leave the
    // ordinary-fault output untouched, so their Jansen totals vanish exactly.
    const TimeGrid grid;
    const SobolRunResult res = run_sobol(ParamSpace::clm30(), {ordinary_fault()}, grid, 24, 555, 20);
    const ParamSpace& space = ParamSpace::clm30();
    for (const char* name : {"Rstall", "Xstall", "frcel", "Frst", "Np2", "Nq2"}) {
        const int i = space.index(name);
        CHECK(res.indices[0][0].st[static_cast<size_t>(i)] == 0.0);
        CHECK(res.indices[0][1].st[static_cast<size_t>(i)] == 0.0);
    }
    // and a trivially influential one is not zero
    CHECK(res.st_max(0)[static_cast<size_t>(space.index("LsA"))] > 0.0);
}
