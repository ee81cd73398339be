#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kseg/nn.hpp"

namespace kseg {

/// Builder parameters for the dense encoder and both decoders.
struct ArchitectureConfig {
    std::vector<int64_t> block_layers{2, 2, 4, 8};
    int64_t growth_rate = 16;
    int64_t stem_channels = 16;
    int64_t norm_groups = 8;
    std::vector<int64_t> decoder_channels{64, 48, 32, 16};

    void validate() const;
    std::string serialize() const;
    static ArchitectureConfig deserialize(const std::string& text);
    bool operator==(const ArchitectureConfig&) const = default;

    /// Channel widths entering each block, after its transition (f1..f4), etc.
    struct Plan {
        std::array<int64_t, 4> block_in{};
        std::array<int64_t, 4> block_out{};   // after dense concat
        std::array<int64_t, 4> feature_ch{};  // f1..f4, after transition
    };
    Plan plan() const;

    static ArchitectureConfig desk_scale();
    static ArchitectureConfig full_scale();
    static ArchitectureConfig tiny();  // gradient-check scale
};

/// Pre-activation unit: group norm -> rectifier -> convolution.
struct PreActConv {
    nn::GroupNorm gn;
    nn::ReLU relu;
    nn::Conv3d conv;

    void configure(const std::string& name, int64_t cin, int64_t cout, int64_t k, int64_t stride,
                   int64_t pad, int64_t groups);
    void init_params(ParameterStore& store, std::mt19937_64& rng) const;
    Tensor forward(const ParameterStore& store, const Tensor& x);
    Tensor backward(const ParameterStore& store, const Tensor& grad_y, GradStore& grads);
};

struct EncoderFeatures {
    std::array<Tensor, 4> f;  // scales 1/2, 1/4, 1/8, 1/16
    Tensor embedding;         // spatial global average of f4
};

/// Dense encoder: 4 blocks of densely connected layers, stride-2 conv
/// downsampling, 1x1x1 channel-reducing transitions. Parameter names carry
/// the "encoder." prefix so the store subset can be transferred verbatim.
struct Encoder {
    ArchitectureConfig cfg;
    ArchitectureConfig::Plan plan;
    nn::Conv3d stem;
    struct Block {
        std::vector<PreActConv> dense;
        PreActConv down;
        PreActConv trans;
    };
    std::array<Block, 4> blocks;
    nn::GlobalAvgPool pool;

    explicit Encoder(const ArchitectureConfig& cfg);
    void init_params(ParameterStore& store, std::mt19937_64& rng) const;
    EncoderFeatures forward(const ParameterStore& store, const Tensor& input);
    /// grad_embedding may be null when only feature grads flow.
    Tensor backward(const ParameterStore& store, std::array<Tensor, 4> grad_f,
                    const Tensor* grad_embedding, GradStore& grads);
};

/// Two identical branches evaluating the same ParameterStore.
struct SiameseNet {
    Encoder branch_a, branch_b;

    explicit SiameseNet(const ArchitectureConfig& cfg) : branch_a(cfg), branch_b(cfg) {}
    std::pair<Tensor, Tensor> forward(const ParameterStore& store, const Tensor& crop_a,
                                      const Tensor& crop_b);
    void backward(const ParameterStore& store, const Tensor& grad_a, const Tensor& grad_b,
                  GradStore& grads);
};

struct SegOutput {
    Tensor seg_logits;  // [1, D, H, W]
    Tensor recon;       // [1, D, H, W]
};

/// Encoder-decoder with skip concatenation plus a skip-free reconstruction
/// decoder sharing only the bottleneck.
struct SegNet {
    ArchitectureConfig cfg;
    Encoder encoder;
    struct DecStage {
        PreActConv c1, c2;
        nn::GroupNorm up_gn;
        nn::ReLU up_relu;
        nn::ConvTranspose3d up;
    };
    std::array<DecStage, 4> dec, rec;
    PreActConv seg_head, rec_head;
    bool use_skips = true;

    std::array<Tensor, 4> skip_cache;  // f3, f2, f1 shapes used in backward
    std::array<int64_t, 3> skip_ch{};

    explicit SegNet(const ArchitectureConfig& cfg);
    void init_params(ParameterStore& store, std::mt19937_64& rng) const;
    SegOutput forward(const ParameterStore& store, const Tensor& input);
    void backward(const ParameterStore& store, const Tensor& grad_seg, const Tensor& grad_recon,
                  GradStore& grads);
};

/// Full parameter set (encoder + decoder + reconstruction head), seeded.
ParameterStore init_random(const ArchitectureConfig& cfg, uint64_t seed);
/// Encoder-only subset, seeded identically to the encoder part of init_random.
ParameterStore init_encoder_random(const ArchitectureConfig& cfg, uint64_t seed);

/// Wraps a [D,H,W] scalar field as a single-channel network input.
Tensor as_input(const std::vector<double>& voxels, const std::array<int64_t, 3>& shape);

}  // namespace kseg
