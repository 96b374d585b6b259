#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "irid/math/rng.hpp"
#include "irid/tensor/ops.hpp"

namespace irid {

struct UNetConfig {
    int in_channels = 6;  // conditioning RGB + noisy triplet
    int out_channels = 3;
    std::array<int, 3> channels{32, 64, 128};
    int emb_dim = 128;
    int heads = 4;
    int norm_groups = 8;
    int resolution = 64;
    int component_count = 3;
};

struct MhaWeights {
    TensorRef<float> norm_g, norm_b;
    TensorRef<float> wq, bq, wk, bk, wv, bv, wo, bo;
};

// One attention stage: multi-head attention across components (tokens =
// D*h*w sharing a (batch, view)), then across views (tokens = N*h*w sharing
// a (batch, component)); each mode has its own norm and projection weights
// and adds back residually.
struct AttentionBlock {
    int channels = 0, heads = 1, norm_groups = 8;
    MhaWeights comp, view;

    // x: (B*N*D, C, h, w) laid out batch-major, then view, then component
    TensorRef<float> apply(Tape<float>& tape, const TensorRef<float>& x, int batch, int views,
                           int components) const;
};

using ParamRegistry = std::vector<std::pair<std::string, TensorRef<float>>>;

AttentionBlock make_attention_block(int channels, int heads, int norm_groups, Pcg32& rng,
                                    ParamRegistry* reg = nullptr,
                                    const std::string& prefix = "attn");

// Three-level UNet over 6-channel inputs: stride-2 patchify stem, two
// residual blocks per level, attention at the two lowest resolutions,
// sinusoidal timestep embedding through an MLP plus a learned per-component
// embedding. Output head upsamples back to the input resolution.
class UNet {
  public:
    UNet(const UNetConfig& cfg, uint64_t seed);

    // x: (B*N*D, in_channels, H, W); t, component_ids: one entry per image.
    TensorRef<float> forward(Tape<float>& tape, const TensorRef<float>& x,
                             const std::vector<int>& t, const std::vector<int>& component_ids,
                             int batch, int views) const;

    const UNetConfig& config() const { return cfg_; }
    const ParamRegistry& named_parameters() const { return named_; }
    std::vector<TensorRef<float>> parameters() const;
    int64_t parameter_count() const;

  private:
    struct Conv {
        TensorRef<float> w, b;
        int stride = 1;
    };
    struct Norm {
        TensorRef<float> g, b;
    };
    struct ResBlock {
        Norm n1;
        Conv c1;
        TensorRef<float> ew, eb; // embedding projection
        Norm n2;
        Conv c2;
        TensorRef<float> skip; // 1x1 weight when channel count changes, else null
    };

    TensorRef<float> param(const std::string& name, Shape shape, float stdev);
    Conv make_conv(const std::string& name, int cin, int cout, int k, int stride, bool zero_init);
    Norm make_norm(const std::string& name, int c);
    ResBlock make_res(const std::string& name, int cin, int cout);

    TensorRef<float> run_conv(Tape<float>& tape, const TensorRef<float>& x, const Conv& c) const;
    TensorRef<float> run_norm(Tape<float>& tape, const TensorRef<float>& x, const Norm& n) const;
    TensorRef<float> run_res(Tape<float>& tape, const TensorRef<float>& x, const ResBlock& r,
                             const TensorRef<float>& emb) const;
    TensorRef<float> run_tconv(Tape<float>& tape, const TensorRef<float>& x,
                               const TensorRef<float>& w, const TensorRef<float>& b) const;

    UNetConfig cfg_;
    Pcg32 init_rng_;
    ParamRegistry named_;

    Conv stem_;
    ResBlock rb0a_, rb0b_;
    Conv down0_;
    ResBlock rb1a_, rb1b_;
    Conv down1_;
    ResBlock rb2a_, rb2b_;
    AttentionBlock attn_lo_;  // lowest resolution
    TensorRef<float> up1_w_, up1_b_;
    ResBlock rb3a_, rb3b_;
    AttentionBlock attn_mid_; // second-lowest resolution
    TensorRef<float> up0_w_, up0_b_;
    ResBlock rb4a_, rb4b_;
    TensorRef<float> upf_w_, upf_b_; // back to full resolution
    Norm head_norm_;
    Conv head_;
    TensorRef<float> emb_w1_, emb_b1_, emb_w2_, emb_b2_;
    TensorRef<float> comp_embed_; // (component_count, emb_dim)
};

// (count, dim) sinusoidal position embedding of integer timesteps
TensorRef<float> timestep_embedding(const std::vector<int>& t, int dim);

} // namespace irid
