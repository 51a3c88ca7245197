#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "jcdi/nn.hpp"
#include "support/gradcheck.hpp"

using namespace jcdi;
using jcdi::testing::gradcheck;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor<double> t = Tensor<double>::zeros(std::move(shape));
    for (auto& x : t.data) x = rng.uniform(-scale, scale);
    return t;
}

// independent double-loop attention (one head)
template <typename Vec>
std::vector<double> naive_attention(const Vec& q, const Vec& k, const Vec& v, int n, int dk) {
    std::vector<double> out(static_cast<size_t>(n) * dk, 0.0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> s(static_cast<size_t>(n));
        double mx = -1e300;
        for (int j = 0; j < n; ++j) {
            double dot = 0;
            for (int p = 0; p < dk; ++p)
                dot += q[static_cast<size_t>(i) * dk + p] * k[static_cast<size_t>(j) * dk + p];
            s[static_cast<size_t>(j)] = dot / std::sqrt(static_cast<double>(dk));
            mx = std::max(mx, s[static_cast<size_t>(j)]);
        }
        double z = 0;
        for (int j = 0; j < n; ++j) {
            s[static_cast<size_t>(j)] = std::exp(s[static_cast<size_t>(j)] - mx);
            z += s[static_cast<size_t>(j)];
        }
        for (int j = 0; j < n; ++j)
            for (int p = 0; p < dk; ++p)
                out[static_cast<size_t>(i) * dk + p] += s[static_cast<size_t>(j)] / z * v[static_cast<size_t>(j) * dk + p];
    }
    return out;
}

int attention_graph(Tape<double>& tp, int q, int k, int v, int dk) {
    const int scores = tp.scale(tp.bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dk)));
    return tp.bmm(tp.softmax(scores), v);
}

}  // namespace

TEST_CASE("sinusoidal embedding") {
    const auto e0 = sinusoidal_embed(0, 256);
    for (int i = 0; i < 128; ++i) {
        CHECK(e0[static_cast<size_t>(2 * i)] == 0.0);
        CHECK(e0[static_cast<size_t>(2 * i + 1)] == 1.0);
    }
    const auto e1 = sinusoidal_embed(1, 256);
    CHECK(e1[0] == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
    CHECK(e1[1] == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
    for (const int t : {1, 57, 200, 4096}) {
        const auto e = sinusoidal_embed(t, 256);
        for (double x : e) {
            CHECK(x >= -1.0);
            CHECK(x <= 1.0);
        }
    }
}

TEST_CASE("attention agrees with the double-loop oracle") {
    Rng rng(77);
    const int n = 3, dk = 64;
    Tensor<double> q = random_tensor({1, n, dk}, rng);
    Tensor<double> k = random_tensor({1, n, dk}, rng);
    Tensor<double> v = random_tensor({1, n, dk}, rng);
    Tape<double> tp;
    const int out = attention_graph(tp, tp.constant(q), tp.constant(k), tp.constant(v), dk);
    const auto naive = naive_attention(q.data, k.data, v.data, n, dk);
    for (size_t i = 0; i < naive.size(); ++i)
        CHECK(tp.val(out).data[i] == doctest::Approx(naive[i]).epsilon(1e-12));
}

TEST_CASE("attention degenerate cases") {
    Rng rng(3);
    const int dk = 8;

    SUBCASE("single token: output equals its value row") {
        Tensor<double> q = random_tensor({1, 1, dk}, rng);
        Tensor<double> k = random_tensor({1, 1, dk}, rng);
        Tensor<double> v = random_tensor({1, 1, dk}, rng);
        Tape<double> tp;
        const int out = attention_graph(tp, tp.constant(q), tp.constant(k), tp.constant(v), dk);
        for (int p = 0; p < dk; ++p)
            CHECK(tp.val(out).data[static_cast<size_t>(p)] == doctest::Approx(v.data[static_cast<size_t>(p)]).epsilon(1e-14));
    }

    SUBCASE("identical keys: output is the mean of value rows") {
        Tensor<double> q = random_tensor({1, 2, dk}, rng);
        Tensor<double> k = Tensor<double>::zeros({1, 2, dk});
        for (int p = 0; p < dk; ++p) {
            const double x = rng.uniform(-1, 1);
            k.data[static_cast<size_t>(p)] = x;
            k.data[static_cast<size_t>(dk + p)] = x;
        }
        Tensor<double> v = random_tensor({1, 2, dk}, rng);
        Tape<double> tp;
        const int out = attention_graph(tp, tp.constant(q), tp.constant(k), tp.constant(v), dk);
        for (int i = 0; i < 2; ++i)
            for (int p = 0; p < dk; ++p)
                CHECK(tp.val(out).data[static_cast<size_t>(i * dk + p)] ==
                      doctest::Approx(0.5 * (v.data[static_cast<size_t>(p)] + v.data[static_cast<size_t>(dk + p)])).epsilon(1e-12));
    }

    SUBCASE("softmax rows sum to one; output stays in the value hull") {
        Tensor<double> q = random_tensor({1, 5, dk}, rng, 2.0);
        Tensor<double> k = random_tensor({1, 5, dk}, rng, 2.0);
        Tensor<double> v = random_tensor({1, 5, dk}, rng, 2.0);
        Tape<double> tp2;
        const int sm = tp2.softmax(tp2.scale(tp2.bmm_nt(tp2.constant(q), tp2.constant(k)),
                                             1.0 / std::sqrt(static_cast<double>(dk))));
        for (int r = 0; r < 5; ++r) {
            double s = 0;
            for (int j = 0; j < 5; ++j) s += tp2.val(sm).data[static_cast<size_t>(r * 5 + j)];
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
        const int out = tp2.bmm(sm, tp2.constant(v));
        for (int p = 0; p < dk; ++p) {
            double lo = 1e300, hi = -1e300;
            for (int j = 0; j < 5; ++j) {
                lo = std::min(lo, v.data[static_cast<size_t>(j * dk + p)]);
                hi = std::max(hi, v.data[static_cast<size_t>(j * dk + p)]);
            }
            for (int i = 0; i < 5; ++i) {
                const double x = tp2.val(out).data[static_cast<size_t>(i * dk + p)];
                CHECK(x >= lo - 1e-12);
                CHECK(x <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("multi-head attention") {
    Rng rng(15);
    NetConfig cfg = NetConfig::tiny(1);
    EncoderLayer<double> layer;
    nn_detail::init_layer(layer, cfg, rng);
    const int n = 5, d = cfg.d_model;
    Tensor<double> x = random_tensor({1, n, d}, rng);

    struct LayerHolder {
        EncoderLayer<double>* l;
        std::vector<std::pair<std::string, Tensor<double>*>> named_params() {
            return {{"wq.w", &l->wq.w}, {"wq.b", &l->wq.b}, {"wk.w", &l->wk.w}, {"wk.b", &l->wk.b},
                    {"wv.w", &l->wv.w}, {"wv.b", &l->wv.b}, {"wo.w", &l->wo.w}, {"wo.b", &l->wo.b},
                    {"ln1.g", &l->ln1_g}, {"ln1.b", &l->ln1_b}, {"ln2.g", &l->ln2_g}, {"ln2.b", &l->ln2_b},
                    {"ff1.w", &l->ff1.w}, {"ff1.b", &l->ff1.b}, {"ff2.w", &l->ff2.w}, {"ff2.b", &l->ff2.b}};
        }
    };

    SUBCASE("matches the per-head composition oracle") {
        LayerHolder holder{&layer};
        Tape<double> tp;
        const ParamMap<double> L = ParamMap<double>::lift(tp, holder, false);
        const int out = mha_node(tp, L, layer, tp.constant(x), cfg.n_heads);

        // oracle: slice projection outputs into heads, run naive attention
        // per head, concatenate, then apply the output projection
        const int hd = d / cfg.n_heads;
        auto project = [&](const Linear<double>& lin) {
            std::vector<double> out2(static_cast<size_t>(n) * d, 0.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) {
                    double acc = lin.b.data[static_cast<size_t>(j)];
                    for (int p = 0; p < d; ++p)
                        acc += x.data[static_cast<size_t>(i * d + p)] * lin.w.data[static_cast<size_t>(p * d + j)];
                    out2[static_cast<size_t>(i * d + j)] = acc;
                }
            return out2;
        };
        const auto q = project(layer.wq), k = project(layer.wk), v = project(layer.wv);
        std::vector<double> concat(static_cast<size_t>(n) * d);
        for (int h = 0; h < cfg.n_heads; ++h) {
            std::vector<double> qh(static_cast<size_t>(n) * hd), kh(qh.size()), vh(qh.size());
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < hd; ++p) {
                    qh[static_cast<size_t>(i * hd + p)] = q[static_cast<size_t>(i * d + h * hd + p)];
                    kh[static_cast<size_t>(i * hd + p)] = k[static_cast<size_t>(i * d + h * hd + p)];
                    vh[static_cast<size_t>(i * hd + p)] = v[static_cast<size_t>(i * d + h * hd + p)];
                }
            const auto oh = naive_attention(qh, kh, vh, n, hd);
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < hd; ++p)
                    concat[static_cast<size_t>(i * d + h * hd + p)] = oh[static_cast<size_t>(i * hd + p)];
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                double acc = layer.wo.b.data[static_cast<size_t>(j)];
                for (int p = 0; p < d; ++p)
                    acc += concat[static_cast<size_t>(i * d + p)] * layer.wo.w.data[static_cast<size_t>(p * d + j)];
                CHECK(tp.val(out).data[static_cast<size_t>(i * d + j)] == doctest::Approx(acc).epsilon(1e-11));
            }
    }

    SUBCASE("zero projections give zero output before the residual") {
        EncoderLayer<double> zl = layer;
        for (auto* t : {&zl.wq.w, &zl.wk.w, &zl.wv.w, &zl.wo.w, &zl.wq.b, &zl.wk.b, &zl.wv.b, &zl.wo.b})
            std::fill(t->data.begin(), t->data.end(), 0.0);
        LayerHolder holder{&zl};
        Tape<double> tp;
        const ParamMap<double> L = ParamMap<double>::lift(tp, holder, false);
        const int out = mha_node(tp, L, zl, tp.constant(x), cfg.n_heads);
        for (double y : tp.val(out).data) CHECK(y == 0.0);
    }

    SUBCASE("head count changes the result (split is structural)") {
        LayerHolder holder{&layer};
        Tape<double> tp1, tp2;
        const ParamMap<double> l1 = ParamMap<double>::lift(tp1, holder, false);
        const ParamMap<double> l2 = ParamMap<double>::lift(tp2, holder, false);
        const int o1 = mha_node(tp1, l1, layer, tp1.constant(x), 1);
        const int o2 = mha_node(tp2, l2, layer, tp2.constant(x), cfg.n_heads);
        double diff = 0;
        for (size_t i = 0; i < tp1.val(o1).data.size(); ++i)
            diff = std::max(diff, std::abs(tp1.val(o1).data[i] - tp2.val(o2).data[i]));
        CHECK(diff > 1e-6);
    }
}

TEST_CASE("trajectory encoder shapes and zero propagation") {
    Rng rng(23);

    SUBCASE("full profile maps (2, 512) to 8 tokens of width 256") {
        const NetConfig cfg = NetConfig::full(1);
        IgtModel<double> m = make_igt_model<double>(cfg, rng);
        Tape<double> tp;
        const ParamMap<double> L = ParamMap<double>::lift(tp, m, false);
        const int out = traj_encoder_node(tp, L, m.enc, tp.constant(Tensor<double>::zeros({2, 2, 512})));
        CHECK(tp.val(out).shape == std::vector<int>{2, 8, 256});
    }

    SUBCASE("zero input with zero biases stays zero") {
        const NetConfig cfg = NetConfig::tiny(1);
        IgtModel<double> m = make_igt_model<double>(cfg, rng);  // biases zero by construction
        Tape<double> tp;
        const ParamMap<double> L = ParamMap<double>::lift(tp, m, false);
        const int out = traj_encoder_node(tp, L, m.enc, tp.constant(Tensor<double>::zeros({1, 2, 512})));
        for (double y : tp.val(out).data) CHECK(y == 0.0);
    }
}

TEST_CASE("denoiser forward contract") {
    Rng rng(31);
    const NetConfig cfg = NetConfig::tiny(3);
    IgtModel<double> m = make_igt_model<double>(cfg, rng);
    const int B = 2;
    Tensor<double> x_t = random_tensor({B, kNumParams}, rng);
    const std::vector<int> ts{7, 133};
    Tensor<double> c0 = random_tensor({B, 2, 512}, rng);
    Tensor<double> c1 = random_tensor({B, 2, 512}, rng);
    Tensor<double> c2 = random_tensor({B, 2, 512}, rng);

    SUBCASE("output is always (B, 30)") {
        for (int nc = 1; nc <= 3; ++nc) {
            std::vector<std::tuple<int, Tensor<double>, bool>> conds;
            if (nc >= 1) conds.push_back({0, c0, false});
            if (nc >= 2) conds.push_back({1, c1, false});
            if (nc >= 3) conds.push_back({2, c2, false});
            const Tensor<double> out = igt_forward(m, x_t, ts, conds);
            CHECK(out.shape == std::vector<int>{B, kNumParams});
        }
    }

    SUBCASE("condition order does not change the prediction (exact)") {
        std::vector<std::tuple<int, Tensor<double>, bool>> fwd{{0, c0, false}, {1, c1, false}, {2, c2, false}};
        std::vector<std::tuple<int, Tensor<double>, bool>> rev{{2, c2, false}, {0, c0, false}, {1, c1, false}};
        const Tensor<double> a = igt_forward(m, x_t, ts, fwd);
        const Tensor<double> b = igt_forward(m, x_t, ts, rev);
        CHECK(a.data == b.data);
    }

    SUBCASE("repeated evaluation is bit-identical") {
        std::vector<std::tuple<int, Tensor<double>, bool>> conds{{0, c0, false}};
        const Tensor<double> a = igt_forward(m, x_t, ts, conds);
        const Tensor<double> b = igt_forward(m, x_t, ts, conds);
        CHECK(a.data == b.data);
    }

    SUBCASE("unknown or duplicate event ids are rejected") {
        std::vector<std::tuple<int, Tensor<double>, bool>> bad{{5, c0, false}};
        CHECK_THROWS_AS(igt_forward(m, x_t, ts, bad), contract_error);
        std::vector<std::tuple<int, Tensor<double>, bool>> dup{{0, c0, false}, {0, c1, false}};
        CHECK_THROWS_AS(igt_forward(m, x_t, ts, dup), contract_error);
    }

    SUBCASE("precomputed condition tokens match in-graph encoding") {
        const Tensor<double> tok_b0 = igt_condition_tokens(m, 0, c0);
        std::vector<std::tuple<int, Tensor<double>, bool>> pre{{0, tok_b0, true}};
        std::vector<std::tuple<int, Tensor<double>, bool>> raw{{0, c0, false}};
        const Tensor<double> a = igt_forward(m, x_t, ts, pre);
        const Tensor<double> b = igt_forward(m, x_t, ts, raw);
        CHECK(a.data == b.data);
    }
}

TEST_CASE("weight count is a pure function of (n_params, n_events)") {
    Rng rng(1);
    for (const int ne : {1, 3}) {
        const NetConfig c = NetConfig::desk(ne);
        IgtModel<double> m = make_igt_model<double>(c, rng);
        const int64_t d = c.d_model, f = c.d_ffn, c0 = c.stem_ch, c1 = c.mid_ch;
        int64_t expect = 0;
        expect += 2 * kNumParams * d;            // scalar tokenizers
        expect += c.time_dim * d + d;            // time tokenizer
        expect += c0 * 2 * 4 + c0;               // stem
        expect += 2 * (c0 * c0 * 3 + c0);        // res block 1
        expect += c1 * c0 * 4 + c1;              // down 1
        expect += 2 * (c1 * c1 * 3 + c1);        // res block 2
        expect += d * c1 * 4 + d;                // down 2
        expect += d * d + d;                     // encoder tokenizer
        expect += ne * d;                        // event embeddings
        expect += c.n_layers * (4 * d + 4 * (d * d + d) + d * f + f + f * d + d);
        expect += 2 * d;                         // final layer norm
        expect += d + 1;                         // readout
        CHECK(m.weight_count() == expect);
    }
}

TEST_CASE("backward basics") {
    Rng rng(5);

    SUBCASE("sum of weights has unit gradients") {
        Tensor<double> w = random_tensor({4, 3}, rng);
        Tape<double> tp;
        const int id = tp.leaf(w, true);
        tp.backward(tp.sum_all(id));
        for (double g : tp.grad(id).data) CHECK(g == 1.0);
    }

    SUBCASE("quadratic loss has gradient w") {
        Tensor<double> w = random_tensor({7}, rng);
        Tape<double> tp;
        const int id = tp.leaf(w, true);
        tp.backward(tp.scale(tp.sum_all(tp.mul(id, id)), 0.5));
        for (size_t i = 0; i < w.data.size(); ++i)
            CHECK(tp.grad(id).data[i] == doctest::Approx(w.data[i]).epsilon(1e-14));
    }

    SUBCASE("gradients of non-participating leaves stay empty") {
        Tensor<double> w = random_tensor({3}, rng);
        Tensor<double> unused = random_tensor({3}, rng);
        Tape<double> tp;
        const int a = tp.leaf(w, true);
        const int b = tp.leaf(unused, true);
        tp.backward(tp.sum_all(a));
        CHECK(tp.grad(b).empty());
    }
}

TEST_CASE("gradient checks per operation") {
    Rng rng(99);

    SUBCASE("matmul + bias") {
        const auto r = gradcheck({random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)},
                                 [](Tape<double>& tp, const std::vector<int>& ids) {
                                     return tp.sum_all(tp.gelu(tp.add_bias(tp.matmul(ids[0], ids[1]), ids[2])));
                                 });
        CHECK(r.max_rel_err <= 1e-4);
    }

    SUBCASE("conv1d stride 2 with padding") {
        const auto r = gradcheck({random_tensor({2, 3, 10}, rng), random_tensor({4, 3, 3}, rng), random_tensor({4}, rng)},
                                 [](Tape<double>& tp, const std::vector<int>& ids) {
                                     return tp.sum_all(tp.gelu(tp.conv1d(ids[0], ids[1], ids[2], 2, 1)));
                                 });
        CHECK(r.max_rel_err <= 1e-4);
    }

    SUBCASE("layer norm") {
        const auto r = gradcheck({random_tensor({4, 6}, rng), random_tensor({6}, rng, 0.5), random_tensor({6}, rng)},
                                 [](Tape<double>& tp, const std::vector<int>& ids) {
                                     return tp.sum_all(tp.mul(tp.layer_norm(ids[0], ids[1], ids[2]),
                                                              tp.constant(Tensor<double>::full({4, 6}, 0.3))));
                                 },
                                 8);
        CHECK(r.max_rel_err <= 1e-4);
    }

    SUBCASE("softmax") {
        Tensor<double> w = random_tensor({5, 7}, rng);
        Tensor<double> target = random_tensor({5, 7}, rng);
        const auto r = gradcheck({w}, [target](Tape<double>& tp, const std::vector<int>& ids) {
            return tp.mse(tp.softmax(ids[0]), tp.constant(target));
        });
        CHECK(r.max_rel_err <= 1e-4);
    }

    SUBCASE("grouped attention block") {
        const int g = 2, n = 4, dk = 6;
        const auto r = gradcheck(
            {random_tensor({g, n, dk}, rng), random_tensor({g, n, dk}, rng), random_tensor({g, n, dk}, rng)},
            [dk](Tape<double>& tp, const std::vector<int>& ids) {
                const int sm = tp.softmax(tp.scale(tp.bmm_nt(ids[0], ids[1]), 1.0 / std::sqrt(static_cast<double>(dk))));
                return tp.sum_all(tp.gelu(tp.bmm(sm, ids[2])));
            },
            8);
        CHECK(r.max_rel_err <= 1e-4);
    }

    SUBCASE("scalar tokenizers and embeddings") {
        const auto r = gradcheck(
            {random_tensor({3, 5}, rng), random_tensor({5, 4}, rng), random_tensor({5, 4}, rng), random_tensor({4}, rng)},
            [](Tape<double>& tp, const std::vector<int>& ids) {
                return tp.sum_all(tp.gelu(tp.add_vec(tp.scalar_tokens(ids[0], ids[1], ids[2]), ids[3])));
            },
            8);
        CHECK(r.max_rel_err <= 1e-4);
    }

    SUBCASE("shape plumbing: permute, slice, concat, pooling") {
        const auto r = gradcheck(
            {random_tensor({2, 3, 4}, rng), random_tensor({2, 2, 4}, rng)},
            [](Tape<double>& tp, const std::vector<int>& ids) {
                const int cat = tp.concat_dim1({ids[0], ids[1]});           // [2,5,4]
                const int perm = tp.permute_0213(tp.reshape(cat, {2, 5, 2, 2}));
                const int back = tp.reshape(perm, {2, 5, 4});
                const int sl = tp.slice_dim1(back, 1, 3);
                return tp.sum_all(tp.gelu(tp.mean_dim1(sl)));
            },
            8);
        CHECK(r.max_rel_err <= 1e-4);
    }
}

TEST_CASE("full graph gradient checks (tiny profile)") {
    Rng rng(414);

    SUBCASE("denoiser") {
        const NetConfig cfg = NetConfig::tiny(2);
        IgtModel<double> m = make_igt_model<double>(cfg, rng);
        const int B = 2;
        const Tensor<double> x_t = random_tensor({B, kNumParams}, rng);
        const Tensor<double> temb = sinusoidal_embed_batch<double>({3, 9}, cfg.time_dim);
        const Tensor<double> cond0 = random_tensor({B, 2, 512}, rng, 0.7);
        const Tensor<double> cond1 = random_tensor({B, 2, 512}, rng, 0.7);
        const Tensor<double> target = random_tensor({B, kNumParams}, rng);

        std::vector<Tensor<double>> leaves;
        auto named = m.named_params();
        for (auto& [name, t] : named) leaves.push_back(*t);

        auto build = [&](Tape<double>& tp, const std::vector<int>& ids) {
            std::unordered_map<const Tensor<double>*, int> raw;
            for (size_t i = 0; i < named.size(); ++i) raw[named[i].second] = ids[i];
            const ParamMap<double> L = ParamMap<double>::from_ids(raw);
            std::vector<IgtCond> conds{{0, tp.constant(cond0), false}, {1, tp.constant(cond1), false}};
            const int out = igt_graph(tp, L, m, tp.constant(x_t), tp.constant(temb), conds);
            return tp.mse(out, tp.constant(target));
        };
        const auto r = gradcheck(leaves, build, 3, 777);
        INFO(r.worst);
        CHECK(r.max_rel_err <= 1e-4);
    }

    SUBCASE("baseline") {
        const NetConfig cfg = NetConfig::tiny(1);
        ResTfrModel<double> m = make_res_tfr_model<double>(cfg, rng);
        const Tensor<double> x = random_tensor({2, 2, 512}, rng, 0.7);
        const Tensor<double> target = random_tensor({2, kNumParams}, rng);
        auto named = m.named_params();
        std::vector<Tensor<double>> leaves;
        for (auto& [name, t] : named) leaves.push_back(*t);
        auto build = [&](Tape<double>& tp, const std::vector<int>& ids) {
            std::unordered_map<const Tensor<double>*, int> raw;
            for (size_t i = 0; i < named.size(); ++i) raw[named[i].second] = ids[i];
            const ParamMap<double> L = ParamMap<double>::from_ids(raw);
            return tp.mse(res_tfr_graph(tp, L, m, tp.constant(x)), tp.constant(target));
        };
        const auto r = gradcheck(leaves, build, 3, 778);
        INFO(r.worst);
        CHECK(r.max_rel_err <= 1e-4);
    }
}

TEST_CASE("adam optimizer") {
    SUBCASE("zero gradient leaves weights unchanged") {
        Tensor<double> w = Tensor<double>::full({4}, 1.5);
        Tensor<double> g = Tensor<double>::zeros({4});
        AdamState<double> adam;
        adam.init({&w});
        adam.update({&w}, {&g});
        for (double x : w.data) CHECK(x == 1.5);
    }

    SUBCASE("first step moves by about lr for a constant gradient") {
        Tensor<double> w = Tensor<double>::zeros({3});
        Tensor<double> g = Tensor<double>::full({3}, 0.37);
        AdamState<double> adam;
        adam.lr = 1e-4;
        adam.init({&w});
        adam.update({&w}, {&g});
        for (double x : w.data) CHECK(x == doctest::Approx(-1e-4).epsilon(1e-3));
    }

    SUBCASE("converges monotonically on a quadratic after warmup") {
        Tensor<double> w = Tensor<double>::zeros({5});
        Tensor<double> target = Tensor<double>::zeros({5});
        Rng rng(8);
        for (auto& x : target.data) x = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.3, 0.5);
        AdamState<double> adam;
        adam.lr = 1e-3;
        adam.init({&w});
        double prev = 1e300;
        double final_dist = 1e300;
        for (int step = 0; step < 200; ++step) {
            Tensor<double> g = Tensor<double>::zeros({5});
            for (size_t i = 0; i < 5; ++i) g.data[i] = 2.0 * (w.data[i] - target.data[i]);
            adam.update({&w}, {&g});
            double dist = 0;
            for (size_t i = 0; i < 5; ++i) dist += (w.data[i] - target.data[i]) * (w.data[i] - target.data[i]);
            if (step >= 10) CHECK(dist < prev);
            prev = dist;
            final_dist = dist;
        }
        CHECK(final_dist < 0.25);  // moved meaningfully toward the optimum
    }
}

TEST_CASE("gradient clipping") {
    Tensor<double> a = Tensor<double>::full({3}, 2.0);
    Tensor<double> b = Tensor<double>::full({1}, 1.0);
    const double norm = clip_global_norm<double>({&a, &b}, 1.0);
    CHECK(norm == doctest::Approx(std::sqrt(13.0)).epsilon(1e-12));
    double after = 0;
    for (double x : a.data) after += x * x;
    for (double x : b.data) after += x * x;
    CHECK(std::sqrt(after) == doctest::Approx(1.0).epsilon(1e-12));
}
