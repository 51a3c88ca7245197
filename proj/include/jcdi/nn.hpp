#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "jcdi/clm.hpp"
#include "jcdi/rng.hpp"
#include "jcdi/tape.hpp"

namespace jcdi {

/// Width profile of the denoiser / baseline networks. The full profile is
/// the default configuration; the desk profile is the reduced one used for
/// end-to-end runs on a workstation.
struct NetConfig {
    int d_model = 256;
    int d_ffn = 512;
    int n_layers = 3;
    int n_heads = 4;
    int n_params = 30;
    int n_events = 1;
    int time_dim = 256;
    int stem_ch = 32;
    int mid_ch = 128;

    static NetConfig full(int n_events) { return NetConfig{256, 512, 3, 4, 30, n_events, 256, 32, 128}; }
    static NetConfig desk(int n_events) { return NetConfig{64, 128, 2, 2, 30, n_events, 256, 8, 32}; }
    static NetConfig tiny(int n_events) { return NetConfig{16, 32, 1, 2, 30, n_events, 256, 4, 8}; }

    int head_dim() const { return d_model / n_heads; }
    void validate() const {
        if (d_model % n_heads != 0) throw contract_error("d_model must be divisible by n_heads");
        if (n_events < 1) throw contract_error("model needs at least one conditioned event");
    }
};

template <typename T>
struct Linear {
    Tensor<T> w, b;  // w[in, out], b[out]
};

template <typename T>
struct Conv1d {
    Tensor<T> w, b;  // w[out_ch, in_ch, k]
    int stride = 1;
    int pad = 0;
};

template <typename T>
struct ResBlock {
    Conv1d<T> c1, c2;  // k = 3, stride 1, same channel count, identity skip
};

/// ResNet-style trajectory encoder: stem (k4 s4), two residual/downsample
/// pairs (k4 s4), then a linear tokenizer. Turns a standardized (2, 512)
/// trajectory into 8 tokens of width d_model.
template <typename T>
struct TrajEncoder {
    Conv1d<T> stem;
    ResBlock<T> r1;
    Conv1d<T> down1;
    ResBlock<T> r2;
    Conv1d<T> down2;
    Linear<T> tok;
};

template <typename T>
struct EncoderLayer {
    Tensor<T> ln1_g, ln1_b;
    Linear<T> wq, wk, wv, wo;
    Tensor<T> ln2_g, ln2_b;
    Linear<T> ff1, ff2;
};

/// Pre-LN transformer encoder, no positional encoding.
template <typename T>
struct Transformer {
    std::vector<EncoderLayer<T>> layers;
    Tensor<T> lnf_g, lnf_b;
};

using NamedParam = std::pair<std::string, void*>;

/// Denoiser: parameter-scalar tokenizers, sinusoidal time tokenizer, shared
/// trajectory encoder with learned per-event embeddings, transformer
/// encoder, and a per-parameter-token readout.
template <typename T>
struct IgtModel {
    NetConfig cfg;
    Tensor<T> param_tok_w, param_tok_b;     // [n_params, d]
    Linear<T> time_tok;                     // [time_dim, d]
    TrajEncoder<T> enc;
    std::vector<Tensor<T>> event_emb;       // n_events x [d]
    std::vector<EncoderLayer<T>> layers;
    Tensor<T> lnf_g, lnf_b;
    Linear<T> readout;                      // [d, 1]

    std::vector<std::pair<std::string, Tensor<T>*>> named_params();
    int64_t weight_count();
};

/// Supervised baseline: same encoder and transformer trunk, mean-pooled
/// tokens into a direct regression head.
template <typename T>
struct ResTfrModel {
    NetConfig cfg;
    TrajEncoder<T> enc;
    std::vector<EncoderLayer<T>> layers;
    Tensor<T> lnf_g, lnf_b;
    Linear<T> head;  // [d, n_params]

    std::vector<std::pair<std::string, Tensor<T>*>> named_params();
    int64_t weight_count();
};

// ---------------------------------------------------------------------------
// construction

namespace nn_detail {

template <typename T>
void trunc_normal(Tensor<T>& t, Rng& rng, double std_dev) {
    for (auto& x : t.data) {
        double z = rng.normal();
        while (std::abs(z) > 2.0) z = rng.normal();
        x = static_cast<T>(z * std_dev);
    }
}

template <typename T>
void init_linear(Linear<T>& l, int in, int out, Rng& rng) {
    l.w = Tensor<T>::zeros({in, out});
    trunc_normal(l.w, rng, 0.02);
    l.b = Tensor<T>::zeros({out});
}

template <typename T>
void init_conv(Conv1d<T>& c, int in_ch, int out_ch, int k, int stride, int pad, Rng& rng) {
    c.w = Tensor<T>::zeros({out_ch, in_ch, k});
    trunc_normal(c.w, rng, 0.02);
    c.b = Tensor<T>::zeros({out_ch});
    c.stride = stride;
    c.pad = pad;
}

template <typename T>
void init_encoder(TrajEncoder<T>& e, const NetConfig& cfg, Rng& rng) {
    init_conv(e.stem, 2, cfg.stem_ch, 4, 4, 0, rng);
    init_conv(e.r1.c1, cfg.stem_ch, cfg.stem_ch, 3, 1, 1, rng);
    init_conv(e.r1.c2, cfg.stem_ch, cfg.stem_ch, 3, 1, 1, rng);
    init_conv(e.down1, cfg.stem_ch, cfg.mid_ch, 4, 4, 0, rng);
    init_conv(e.r2.c1, cfg.mid_ch, cfg.mid_ch, 3, 1, 1, rng);
    init_conv(e.r2.c2, cfg.mid_ch, cfg.mid_ch, 3, 1, 1, rng);
    init_conv(e.down2, cfg.mid_ch, cfg.d_model, 4, 4, 0, rng);
    init_linear(e.tok, cfg.d_model, cfg.d_model, rng);
}

template <typename T>
void init_layer(EncoderLayer<T>& l, const NetConfig& cfg, Rng& rng) {
    l.ln1_g = Tensor<T>::full({cfg.d_model}, T(1));
    l.ln1_b = Tensor<T>::zeros({cfg.d_model});
    init_linear(l.wq, cfg.d_model, cfg.d_model, rng);
    init_linear(l.wk, cfg.d_model, cfg.d_model, rng);
    init_linear(l.wv, cfg.d_model, cfg.d_model, rng);
    init_linear(l.wo, cfg.d_model, cfg.d_model, rng);
    l.ln2_g = Tensor<T>::full({cfg.d_model}, T(1));
    l.ln2_b = Tensor<T>::zeros({cfg.d_model});
    init_linear(l.ff1, cfg.d_model, cfg.d_ffn, rng);
    init_linear(l.ff2, cfg.d_ffn, cfg.d_model, rng);
}

template <typename T>
void collect_encoder(const std::string& p, TrajEncoder<T>& e,
                     std::vector<std::pair<std::string, Tensor<T>*>>& out) {
    out.push_back({p + ".stem.w", &e.stem.w});
    out.push_back({p + ".stem.b", &e.stem.b});
    out.push_back({p + ".res1.c1.w", &e.r1.c1.w});
    out.push_back({p + ".res1.c1.b", &e.r1.c1.b});
    out.push_back({p + ".res1.c2.w", &e.r1.c2.w});
    out.push_back({p + ".res1.c2.b", &e.r1.c2.b});
    out.push_back({p + ".down1.w", &e.down1.w});
    out.push_back({p + ".down1.b", &e.down1.b});
    out.push_back({p + ".res2.c1.w", &e.r2.c1.w});
    out.push_back({p + ".res2.c1.b", &e.r2.c1.b});
    out.push_back({p + ".res2.c2.w", &e.r2.c2.w});
    out.push_back({p + ".res2.c2.b", &e.r2.c2.b});
    out.push_back({p + ".down2.w", &e.down2.w});
    out.push_back({p + ".down2.b", &e.down2.b});
    out.push_back({p + ".tok.w", &e.tok.w});
    out.push_back({p + ".tok.b", &e.tok.b});
}

template <typename T>
void collect_layers(std::vector<EncoderLayer<T>>& layers, Tensor<T>& lnf_g, Tensor<T>& lnf_b,
                    std::vector<std::pair<std::string, Tensor<T>*>>& out) {
    for (size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "tf." + std::to_string(i);
        auto& l = layers[i];
        out.push_back({p + ".ln1.g", &l.ln1_g});
        out.push_back({p + ".ln1.b", &l.ln1_b});
        out.push_back({p + ".wq.w", &l.wq.w});
        out.push_back({p + ".wq.b", &l.wq.b});
        out.push_back({p + ".wk.w", &l.wk.w});
        out.push_back({p + ".wk.b", &l.wk.b});
        out.push_back({p + ".wv.w", &l.wv.w});
        out.push_back({p + ".wv.b", &l.wv.b});
        out.push_back({p + ".wo.w", &l.wo.w});
        out.push_back({p + ".wo.b", &l.wo.b});
        out.push_back({p + ".ln2.g", &l.ln2_g});
        out.push_back({p + ".ln2.b", &l.ln2_b});
        out.push_back({p + ".ff1.w", &l.ff1.w});
        out.push_back({p + ".ff1.b", &l.ff1.b});
        out.push_back({p + ".ff2.w", &l.ff2.w});
        out.push_back({p + ".ff2.b", &l.ff2.b});
    }
    out.push_back({"tf.final_ln.g", &lnf_g});
    out.push_back({"tf.final_ln.b", &lnf_b});
}

}  // namespace nn_detail

template <typename T>
IgtModel<T> make_igt_model(const NetConfig& cfg, Rng& rng) {
    cfg.validate();
    IgtModel<T> m;
    m.cfg = cfg;
    m.param_tok_w = Tensor<T>::zeros({cfg.n_params, cfg.d_model});
    nn_detail::trunc_normal(m.param_tok_w, rng, 0.02);
    m.param_tok_b = Tensor<T>::zeros({cfg.n_params, cfg.d_model});
    nn_detail::init_linear(m.time_tok, cfg.time_dim, cfg.d_model, rng);
    nn_detail::init_encoder(m.enc, cfg, rng);
    m.event_emb.resize(static_cast<size_t>(cfg.n_events));
    for (auto& e : m.event_emb) {
        e = Tensor<T>::zeros({cfg.d_model});
        nn_detail::trunc_normal(e, rng, 0.02);
    }
    m.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& l : m.layers) nn_detail::init_layer(l, cfg, rng);
    m.lnf_g = Tensor<T>::full({cfg.d_model}, T(1));
    m.lnf_b = Tensor<T>::zeros({cfg.d_model});
    nn_detail::init_linear(m.readout, cfg.d_model, 1, rng);
    return m;
}

template <typename T>
ResTfrModel<T> make_res_tfr_model(const NetConfig& cfg, Rng& rng) {
    cfg.validate();
    ResTfrModel<T> m;
    m.cfg = cfg;
    nn_detail::init_encoder(m.enc, cfg, rng);
    m.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& l : m.layers) nn_detail::init_layer(l, cfg, rng);
    m.lnf_g = Tensor<T>::full({cfg.d_model}, T(1));
    m.lnf_b = Tensor<T>::zeros({cfg.d_model});
    nn_detail::init_linear(m.head, cfg.d_model, cfg.n_params, rng);
    return m;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> IgtModel<T>::named_params() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    out.push_back({"param_tok.w", &param_tok_w});
    out.push_back({"param_tok.b", &param_tok_b});
    out.push_back({"time_tok.w", &time_tok.w});
    out.push_back({"time_tok.b", &time_tok.b});
    nn_detail::collect_encoder("enc", enc, out);
    for (size_t i = 0; i < event_emb.size(); ++i)
        out.push_back({"event_emb." + std::to_string(i), &event_emb[i]});
    nn_detail::collect_layers(layers, lnf_g, lnf_b, out);
    out.push_back({"readout.w", &readout.w});
    out.push_back({"readout.b", &readout.b});
    return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ResTfrModel<T>::named_params() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    nn_detail::collect_encoder("enc", enc, out);
    nn_detail::collect_layers(layers, lnf_g, lnf_b, out);
    out.push_back({"head.w", &head.w});
    out.push_back({"head.b", &head.b});
    return out;
}

template <typename T>
int64_t IgtModel<T>::weight_count() {
    int64_t n = 0;
    for (auto& [name, t] : named_params()) n += t->numel();
    return n;
}

template <typename T>
int64_t ResTfrModel<T>::weight_count() {
    int64_t n = 0;
    for (auto& [name, t] : named_params()) n += t->numel();
    return n;
}

// ---------------------------------------------------------------------------
// graph building. The same builders serve training (leaves with gradients)
// and inference (constant leaves, no backward functions registered).

/// Maps model tensors to tape node ids.
template <typename T>
class ParamMap {
  public:
    template <typename Model>
    static ParamMap lift(Tape<T>& tape, Model& m, bool needs_grad) {
        ParamMap pm;
        for (auto& [name, t] : m.named_params()) {
            pm.ids_[t] = tape.leaf(*t, needs_grad);
            pm.order_.push_back(t);
        }
        return pm;
    }

    /// Builds a map from externally created leaf ids (tests, custom graphs).
    static ParamMap from_ids(std::unordered_map<const Tensor<T>*, int> ids) {
        ParamMap pm;
        pm.ids_ = std::move(ids);
        return pm;
    }

    int operator()(const Tensor<T>& t) const {
        auto it = ids_.find(&t);
        if (it == ids_.end()) throw contract_error("ParamMap: tensor not lifted");
        return it->second;
    }

    const std::vector<Tensor<T>*>& order() const { return order_; }

  private:
    std::unordered_map<const Tensor<T>*, int> ids_;
    std::vector<Tensor<T>*> order_;
};

/// Sinusoidal embedding of an integer step: interleaved
/// (sin(t / 10000^(2i/dim)), cos(t / 10000^(2i/dim))) pairs.
std::vector<double> sinusoidal_embed(int t, int dim);

template <typename T>
Tensor<T> sinusoidal_embed_batch(const std::vector<int>& ts, int dim) {
    Tensor<T> out = Tensor<T>::zeros({static_cast<int>(ts.size()), dim});
    for (size_t r = 0; r < ts.size(); ++r) {
        const auto e = sinusoidal_embed(ts[r], dim);
        for (int j = 0; j < dim; ++j) out.data[r * static_cast<size_t>(dim) + j] = static_cast<T>(e[static_cast<size_t>(j)]);
    }
    return out;
}

template <typename T>
int linear_node(Tape<T>& tp, const ParamMap<T>& L, const Linear<T>& l, int x) {
    return tp.linear(x, L(l.w), L(l.b));
}

template <typename T>
int conv_gelu_node(Tape<T>& tp, const ParamMap<T>& L, const Conv1d<T>& c, int x) {
    return tp.gelu(tp.conv1d(x, L(c.w), L(c.b), c.stride, c.pad));
}

template <typename T>
int res_block_node(Tape<T>& tp, const ParamMap<T>& L, const ResBlock<T>& r, int x) {
    const int h = tp.gelu(tp.conv1d(x, L(r.c1.w), L(r.c1.b), r.c1.stride, r.c1.pad));
    const int h2 = tp.conv1d(h, L(r.c2.w), L(r.c2.b), r.c2.stride, r.c2.pad);
    return tp.add(h2, x);
}

/// x: [B, 2, L] standardized trajectory -> [B, n_tokens, d] tokens.
template <typename T>
int traj_encoder_node(Tape<T>& tp, const ParamMap<T>& L, const TrajEncoder<T>& e, int x) {
    int h = conv_gelu_node(tp, L, e.stem, x);
    h = res_block_node(tp, L, e.r1, h);
    h = conv_gelu_node(tp, L, e.down1, h);
    h = res_block_node(tp, L, e.r2, h);
    h = conv_gelu_node(tp, L, e.down2, h);  // [B, d, n_tokens]
    const int B = tp.val(h).dim(0), d = tp.val(h).dim(1), nt = tp.val(h).dim(2);
    h = tp.reshape(h, {B, d, nt, 1});
    h = tp.permute_0213(h);  // [B, nt, d, 1]
    h = tp.reshape(h, {B, nt, d});
    return linear_node(tp, L, e.tok, h);
}

/// Multi-head attention over [B, n, d] tokens: per-head scaled dot-product
/// attention on linear projections, concatenated and output-projected.
template <typename T>
int mha_node(Tape<T>& tp, const ParamMap<T>& L, const EncoderLayer<T>& l, int x, int n_heads) {
    const int B = tp.val(x).dim(0), n = tp.val(x).dim(1), d = tp.val(x).dim(2);
    const int hd = d / n_heads;
    auto split_heads = [&](int v) {
        return tp.reshape(tp.permute_0213(tp.reshape(v, {B, n, n_heads, hd})), {B * n_heads, n, hd});
    };
    const int qh = split_heads(linear_node(tp, L, l.wq, x));
    const int kh = split_heads(linear_node(tp, L, l.wk, x));
    const int vh = split_heads(linear_node(tp, L, l.wv, x));
    const int attn = tp.softmax(tp.bmm_nt(qh, kh), static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd))));
    int ctx = tp.bmm(attn, vh);  // [B*H, n, hd]
    ctx = tp.reshape(tp.permute_0213(tp.reshape(ctx, {B, n_heads, n, hd})), {B, n, d});
    return linear_node(tp, L, l.wo, ctx);
}

/// Pre-LN encoder stack over [B, n, d] tokens; final layer norm included.
template <typename T>
int transformer_node(Tape<T>& tp, const ParamMap<T>& L, const std::vector<EncoderLayer<T>>& layers,
                     const Tensor<T>& lnf_g, const Tensor<T>& lnf_b, int h, int n_heads) {
    for (const auto& l : layers) {
        const int x1 = tp.layer_norm(h, L(l.ln1_g), L(l.ln1_b));
        h = tp.add(h, mha_node(tp, L, l, x1, n_heads));
        const int x2 = tp.layer_norm(h, L(l.ln2_g), L(l.ln2_b));
        const int f = linear_node(tp, L, l.ff2, tp.gelu(linear_node(tp, L, l.ff1, x2)));
        h = tp.add(h, f);
    }
    return tp.layer_norm(h, L(lnf_g), L(lnf_b));
}

/// Encodes one event's trajectories and adds the event embedding.
/// x: [B, 2, L] standardized; event_id selects the embedding.
template <typename T>
int condition_tokens_node(Tape<T>& tp, const ParamMap<T>& L, const IgtModel<T>& m, int event_id, int x) {
    if (event_id < 0 || event_id >= m.cfg.n_events)
        throw contract_error("unknown event id " + std::to_string(event_id));
    const int tokens = traj_encoder_node(tp, L, m.enc, x);
    return tp.add_vec(tokens, L(m.event_emb[static_cast<size_t>(event_id)]));
}

/// One conditioned event for the denoiser graph: a tape node holding either
/// a standardized [B, 2, L] trajectory batch (encoded in-graph) or, with
/// precomputed = true, ready [B, nt, d] condition tokens.
struct IgtCond {
    int event_id = 0;
    int node = -1;
    bool precomputed = false;
};

/// Full denoiser graph. x_t: [B, n_params] noised latents (constant),
/// time_emb: [B, time_dim] sinusoidal embeddings (constant). Conditions are
/// sorted by event id internally, so the output is exactly invariant to the
/// order the caller lists them in.
template <typename T>
int igt_graph(Tape<T>& tp, const ParamMap<T>& L, const IgtModel<T>& m, int x_t, int time_emb,
              std::vector<IgtCond> conds) {
    if (conds.empty() || static_cast<int>(conds.size()) > m.cfg.n_events)
        throw contract_error("igt_graph: need between 1 and n_events conditions");
    std::sort(conds.begin(), conds.end(), [](const IgtCond& a, const IgtCond& b) { return a.event_id < b.event_id; });
    for (size_t i = 1; i < conds.size(); ++i)
        if (conds[i].event_id == conds[i - 1].event_id) throw contract_error("igt_graph: duplicate event id");

    const int B = tp.val(x_t).dim(0);
    std::vector<int> parts;
    parts.push_back(tp.scalar_tokens(x_t, L(m.param_tok_w), L(m.param_tok_b)));
    parts.push_back(tp.reshape(linear_node(tp, L, m.time_tok, time_emb), {B, 1, m.cfg.d_model}));
    for (const IgtCond& c : conds)
        parts.push_back(c.precomputed ? c.node : condition_tokens_node(tp, L, m, c.event_id, c.node));
    int h = tp.concat_dim1(parts);
    h = transformer_node(tp, L, m.layers, m.lnf_g, m.lnf_b, h, m.cfg.n_heads);
    h = tp.slice_dim1(h, 0, m.cfg.n_params);
    h = linear_node(tp, L, m.readout, h);  // [B, n_params, 1]
    return tp.reshape(h, {B, m.cfg.n_params});
}

/// Baseline graph: trajectory tokens -> transformer -> mean pool -> head.
template <typename T>
int res_tfr_graph(Tape<T>& tp, const ParamMap<T>& L, const ResTfrModel<T>& m, int x) {
    int h = traj_encoder_node(tp, L, m.enc, x);
    h = transformer_node(tp, L, m.layers, m.lnf_g, m.lnf_b, h, m.cfg.n_heads);
    h = tp.mean_dim1(h);
    return linear_node(tp, L, m.head, h);
}

// ---------------------------------------------------------------------------
// inference entry points (throwaway tape with constant leaves)

struct TrajChannelStats {
    double mean_p = 0.0, std_p = 1.0;
    double mean_q = 0.0, std_q = 1.0;
};

/// Packs trajectories into a standardized [B, 2, L] input tensor.
template <typename T>
Tensor<T> pack_trajectories(const std::vector<const Trajectory*>& trajs, const TrajChannelStats& st) {
    const int B = static_cast<int>(trajs.size());
    const int L = trajs[0]->size();
    Tensor<T> x = Tensor<T>::zeros({B, 2, L});
    for (int b = 0; b < B; ++b) {
        const auto& tr = *trajs[static_cast<size_t>(b)];
        for (int i = 0; i < L; ++i) {
            x.data[(static_cast<size_t>(b) * 2 + 0) * static_cast<size_t>(L) + static_cast<size_t>(i)] =
                static_cast<T>((tr.p[static_cast<size_t>(i)] - st.mean_p) / st.std_p);
            x.data[(static_cast<size_t>(b) * 2 + 1) * static_cast<size_t>(L) + static_cast<size_t>(i)] =
                static_cast<T>((tr.q[static_cast<size_t>(i)] - st.mean_q) / st.std_q);
        }
    }
    return x;
}

/// One denoiser evaluation without gradients. conds pair event ids with
/// standardized [B, 2, L] trajectory batches (precomputed = false) or ready
/// condition tokens (precomputed = true).
template <typename T>
Tensor<T> igt_forward(const IgtModel<T>& m, const Tensor<T>& x_t, const std::vector<int>& ts,
                      const std::vector<std::tuple<int, Tensor<T>, bool>>& conds) {
    if (static_cast<int>(ts.size()) != x_t.dim(0)) throw contract_error("igt_forward: t batch mismatch");
    Tape<T> tp;
    auto& mm = const_cast<IgtModel<T>&>(m);
    const ParamMap<T> L = ParamMap<T>::template lift<IgtModel<T>>(tp, mm, false);
    const int xn = tp.constant(x_t);
    const int tn = tp.constant(sinusoidal_embed_batch<T>(ts, m.cfg.time_dim));
    std::vector<IgtCond> cnodes;
    for (const auto& [eid, x, pre] : conds) cnodes.push_back({eid, tp.constant(x), pre});
    const int out = igt_graph(tp, L, mm, xn, tn, cnodes);
    return tp.val(out);
}

/// Precomputes condition tokens (encoder output + event embedding) so a
/// reverse-diffusion loop does not re-encode static trajectories each step.
template <typename T>
Tensor<T> igt_condition_tokens(const IgtModel<T>& m, int event_id, const Tensor<T>& x) {
    Tape<T> tp;
    auto& mm = const_cast<IgtModel<T>&>(m);
    const ParamMap<T> L = ParamMap<T>::template lift<IgtModel<T>>(tp, mm, false);
    const int node = condition_tokens_node(tp, L, mm, event_id, tp.constant(x));
    return tp.val(node);
}

template <typename T>
Tensor<T> res_tfr_forward(const ResTfrModel<T>& m, const Tensor<T>& x) {
    Tape<T> tp;
    auto& mm = const_cast<ResTfrModel<T>&>(m);
    const ParamMap<T> L = ParamMap<T>::template lift<ResTfrModel<T>>(tp, mm, false);
    const int out = res_tfr_graph(tp, L, mm, tp.constant(x));
    return tp.val(out);
}

// ---------------------------------------------------------------------------
// optimization

template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m, v;
    int64_t step = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void init(const std::vector<Tensor<T>*>& params) {
        m.clear();
        v.clear();
        for (auto* p : params) {
            m.push_back(Tensor<T>::zeros(p->shape));
            v.push_back(Tensor<T>::zeros(p->shape));
        }
        step = 0;
    }

    /// Standard bias-corrected update; grads parallel to params.
    void update(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads) {
        ++step;
        const T bc1 = static_cast<T>(1.0 - std::pow(beta1, static_cast<double>(step)));
        const T bc2 = static_cast<T>(1.0 - std::pow(beta2, static_cast<double>(step)));
        const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
        const T lrt = static_cast<T>(lr), epst = static_cast<T>(eps);
        for (size_t i = 0; i < params.size(); ++i) {
            T* w = params[i]->ptr();
            T* mi = m[i].ptr();
            T* vi = v[i].ptr();
            const T* g = grads[i]->ptr();
            const int64_t n = params[i]->numel();
#pragma omp parallel for schedule(static) if (n > 16384)
            for (int64_t j = 0; j < n; ++j) {
                mi[j] = b1 * mi[j] + (T(1) - b1) * g[j];
                vi[j] = b2 * vi[j] + (T(1) - b2) * g[j] * g[j];
                const T mhat = mi[j] / bc1;
                const T vhat = vi[j] / bc2;
                w[j] -= lrt * mhat / (std::sqrt(vhat) + epst);
            }
        }
    }
};

/// Global-norm gradient clipping; returns the pre-clip norm.
template <typename T>
double clip_global_norm(std::vector<Tensor<T>*> grads, double max_norm) {
    double sq = 0.0;
    for (auto* g : grads)
        for (const T x : g->data) sq += static_cast<double>(x) * static_cast<double>(x);
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const T s = static_cast<T>(max_norm / norm);
        for (auto* g : grads)
            for (T& x : g->data) x *= s;
    }
    return norm;
}

}  // namespace jcdi
