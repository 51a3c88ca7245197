#include "jcdi/sobol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace jcdi {

SaltelliDesign saltelli_sample(const ParamSpace& space, int n_base, uint64_t seed) {
    if (n_base < 2) throw contract_error("saltelli_sample: n_base must be >= 2");
    const int k = space.size();
    const int64_t n = n_base;
    SaltelliDesign d;
    d.n_base = n_base;
    d.k = k;
    d.rows.resize(static_cast<size_t>(n * (2 * k + 2)) * k);

    Rng rng(seed);
    auto fill_box = [&](int64_t row0, int64_t count) {
        for (int64_t j = 0; j < count; ++j)
            for (int i = 0; i < k; ++i)
                d.rows[static_cast<size_t>((row0 + j) * k + i)] =
                    space.lower(i) + rng.uniform01() * space.range(i);
    };
    fill_box(0, n);      // A
    fill_box(n, n);      // B
    const double* a = d.rows.data();
    const double* b = d.rows.data() + n * k;
    // AB_i: A with column i from B; BA_i: B with column i from A.
    for (int i = 0; i < k; ++i) {
        double* ab = d.rows.data() + (2 + i) * n * k;
        for (int64_t j = 0; j < n; ++j) {
            std::copy_n(a + j * k, k, ab + j * k);
            ab[j * k + i] = b[j * k + i];
        }
    }
    for (int i = 0; i < k; ++i) {
        double* ba = d.rows.data() + (2 + k + i) * n * k;
        for (int64_t j = 0; j < n; ++j) {
            std::copy_n(b + j * k, k, ba + j * k);
            ba[j * k + i] = a[j * k + i];
        }
    }
    return d;
}

namespace {

struct JansenView {
    const double* fa;
    const double* fb;
    const double* fab;  // k blocks of n
    const double* fba;
    int64_t n;
    int k;
};

// Symmetric Jansen estimators over a subset of row indices (for bootstrap).
void jansen(const JansenView& v, std::span<const int64_t> idx, std::vector<double>& s1,
            std::vector<double>& st, bool& zero_var) {
    const int64_t n = static_cast<int64_t>(idx.size());
    double mean = 0.0;
    for (int64_t j : idx) mean += v.fa[j] + v.fb[j];
    mean /= static_cast<double>(2 * n);
    double var = 0.0;
    for (int64_t j : idx) {
        var += (v.fa[j] - mean) * (v.fa[j] - mean);
        var += (v.fb[j] - mean) * (v.fb[j] - mean);
    }
    var /= static_cast<double>(2 * n);

    s1.assign(static_cast<size_t>(v.k), 0.0);
    st.assign(static_cast<size_t>(v.k), 0.0);
    if (var <= 1e-300) {
        zero_var = true;
        return;
    }
    zero_var = false;
    for (int i = 0; i < v.k; ++i) {
        const double* fab = v.fab + static_cast<int64_t>(i) * v.n;
        const double* fba = v.fba + static_cast<int64_t>(i) * v.n;
        double d_first = 0.0;  // (fB - fAB_i)^2 and (fA - fBA_i)^2
        double d_total = 0.0;  // (fA - fAB_i)^2 and (fB - fBA_i)^2
        for (int64_t j : idx) {
            const double u1 = v.fb[j] - fab[j];
            const double u2 = v.fa[j] - fba[j];
            d_first += u1 * u1 + u2 * u2;
            const double w1 = v.fa[j] - fab[j];
            const double w2 = v.fb[j] - fba[j];
            d_total += w1 * w1 + w2 * w2;
        }
        d_first /= static_cast<double>(4 * n);
        d_total /= static_cast<double>(4 * n);
        s1[static_cast<size_t>(i)] = 1.0 - d_first / var;
        st[static_cast<size_t>(i)] = d_total / var;
    }
}

}  // namespace

SobolIndices sobol_indices(std::span<const double> f, int n_base, int k, int n_boot, uint64_t boot_seed) {
    const int64_t n = n_base;
    if (static_cast<int64_t>(f.size()) != n * (2 * k + 2))
        throw contract_error("sobol_indices: output length does not match the design");

    JansenView v;
    v.fa = f.data();
    v.fb = f.data() + n;
    v.fab = f.data() + 2 * n;
    v.fba = f.data() + (2 + k) * n;
    v.n = n;
    v.k = k;

    std::vector<int64_t> all(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) all[static_cast<size_t>(j)] = j;

    SobolIndices out;
    jansen(v, all, out.s1, out.st, out.zero_variance);
    out.s1_ci.assign(static_cast<size_t>(k), 0.0);
    out.st_ci.assign(static_cast<size_t>(k), 0.0);
    if (out.zero_variance || n_boot < 2) return out;

    Rng rng(boot_seed);
    std::vector<double> acc_s1(static_cast<size_t>(k)), acc_s1sq(static_cast<size_t>(k));
    std::vector<double> acc_st(static_cast<size_t>(k)), acc_stsq(static_cast<size_t>(k));
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::vector<double> bs1, bst;
    bool bz = false;
    for (int r = 0; r < n_boot; ++r) {
        for (int64_t j = 0; j < n; ++j) idx[static_cast<size_t>(j)] = rng.uniform_int(0, n - 1);
        jansen(v, idx, bs1, bst, bz);
        for (int i = 0; i < k; ++i) {
            acc_s1[static_cast<size_t>(i)] += bs1[static_cast<size_t>(i)];
            acc_s1sq[static_cast<size_t>(i)] += bs1[static_cast<size_t>(i)] * bs1[static_cast<size_t>(i)];
            acc_st[static_cast<size_t>(i)] += bst[static_cast<size_t>(i)];
            acc_stsq[static_cast<size_t>(i)] += bst[static_cast<size_t>(i)] * bst[static_cast<size_t>(i)];
        }
    }
    for (int i = 0; i < k; ++i) {
        const double m1 = acc_s1[static_cast<size_t>(i)] / n_boot;
        const double mt = acc_st[static_cast<size_t>(i)] / n_boot;
        const double v1 = std::max(0.0, acc_s1sq[static_cast<size_t>(i)] / n_boot - m1 * m1);
        const double vt = std::max(0.0, acc_stsq[static_cast<size_t>(i)] / n_boot - mt * mt);
        out.s1_ci[static_cast<size_t>(i)] = 1.96 * std::sqrt(v1);
        out.st_ci[static_cast<size_t>(i)] = 1.96 * std::sqrt(vt);
    }
    return out;
}

std::vector<int> rank_parameters(std::span<const double> st, const ParamSpace& space) {
    if (static_cast<int>(st.size()) != space.size())
        throw contract_error("rank_parameters: size mismatch");
    std::vector<int> order(st.size());
    for (size_t i = 0; i < st.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (st[static_cast<size_t>(a)] != st[static_cast<size_t>(b)])
            return st[static_cast<size_t>(a)] > st[static_cast<size_t>(b)];
        return space.name(a) < space.name(b);
    });
    return order;
}

std::vector<double> SobolRunResult::st_max(int event) const {
    const auto& pq = indices[static_cast<size_t>(event)];
    std::vector<double> out(pq[0].st.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(pq[0].st[i], pq[1].st[i]);
    return out;
}

SobolRunResult run_sobol(const ParamSpace& space, const std::vector<FaultSpec>& events,
                         const TimeGrid& grid, int n_base, uint64_t seed, int n_boot) {
    const SaltelliDesign design = saltelli_sample(space, n_base, seed);
    const int64_t rows = design.n_rows();
    const int k = design.k;

    SobolRunResult res;
    for (const FaultSpec& ev : events) {
        const VoltageProfile profile = voltage_profile(ev, grid);
        std::vector<double> fp(static_cast<size_t>(rows)), fq(static_cast<size_t>(rows));
        bool failed = false;
        std::string fail_msg;
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) {
            try {
                ParamVector pv;
                for (int i = 0; i < k; ++i) pv[i] = design.row(r)[i];
                const Trajectory tr = simulate(pv, profile, grid);
                double gp = 0.0, gq = 0.0;
                const double p0 = tr.p[0], q0 = tr.q[0];
                for (int t = 0; t < tr.size(); ++t) {
                    gp += (tr.p[static_cast<size_t>(t)] - p0) * (tr.p[static_cast<size_t>(t)] - p0);
                    gq += (tr.q[static_cast<size_t>(t)] - q0) * (tr.q[static_cast<size_t>(t)] - q0);
                }
                fp[static_cast<size_t>(r)] = gp / tr.size();
                fq[static_cast<size_t>(r)] = gq / tr.size();
            } catch (const std::exception& e) {
#pragma omp critical
                {
                    failed = true;
                    fail_msg = e.what();
                }
            }
        }
        if (failed) throw numerical_error("sobol evaluation failed: " + fail_msg);
        res.event_labels.push_back(to_string(ev.label));
        res.indices.push_back({sobol_indices(fp, n_base, k, n_boot, Rng::derive(seed, 1)),
                               sobol_indices(fq, n_base, k, n_boot, Rng::derive(seed, 2))});
    }
    return res;
}

void write_sobol_csv(const std::filesystem::path& path, const SobolRunResult& res, const ParamSpace& space) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot open " + path.string());
    os << "parameter,event,channel,s1,s1_ci,st,st_ci\n";
    const char* chan[2] = {"p", "q"};
    for (size_t e = 0; e < res.event_labels.size(); ++e)
        for (int ch = 0; ch < 2; ++ch) {
            const SobolIndices& si = res.indices[e][static_cast<size_t>(ch)];
            for (int i = 0; i < space.size(); ++i)
                os << space.name(i) << ',' << res.event_labels[e] << ',' << chan[ch] << ','
                   << si.s1[static_cast<size_t>(i)] << ',' << si.s1_ci[static_cast<size_t>(i)] << ','
                   << si.st[static_cast<size_t>(i)] << ',' << si.st_ci[static_cast<size_t>(i)] << '\n';
        }
}

}  // namespace jcdi
