#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "collo/cag.hpp"

namespace collo {

struct ModelConfig {
    std::size_t input_size = 64;      // n, spatial size of the tensor
    std::size_t input_channels = 7;   // number of views
    double input_shift = 0.5;         // subtracted from every input value
    std::vector<std::size_t> widths{8, 16, 32, 64};  // one conv block per entry
    std::size_t kernel = 3;
    std::size_t pool = 2;
    std::size_t num_classes = 2;
    bool use_cag = true;
    cag::CagParams cag_init{};
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;

    std::size_t blocks() const { return widths.size(); }
    /// Spatial size of block l's conv output (and of its attention mask).
    std::size_t block_size(std::size_t l) const;
    void validate() const;

    std::string serialize() const;
    static ModelConfig deserialize(const std::string& text);

    bool operator==(const ModelConfig&) const = default;
};

/// Offsets of each trainable tensor inside the flat parameter vector.
struct BlockLayout {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t size = 0;  // conv output spatial size
    std::size_t weights = 0;
    std::size_t bias = 0;
    std::size_t cag = 0;  // alpha, beta, gamma, period
};

class Model {
public:
    /// Seeded Glorot-uniform init; zero biases; CAG parameters from config.
    explicit Model(ModelConfig config);
    Model(ModelConfig config, std::vector<double> parameters);

    const ModelConfig& config() const { return config_; }
    const std::vector<BlockLayout>& layout() const { return layout_; }
    std::size_t fc_weights() const { return fc_weights_; }
    std::size_t fc_bias() const { return fc_bias_; }

    std::span<const double> parameters() const { return params_; }
    /// Mutable access invalidates every ForwardCache taken from this model.
    std::span<double> mutable_parameters();

    cag::CagParams cag_params(std::size_t block) const;
    void set_cag_params(std::size_t block, const cag::CagParams& params);

    std::uint64_t generation() const { return generation_; }

private:
    void build_layout();

    ModelConfig config_;
    std::vector<BlockLayout> layout_;
    std::size_t fc_weights_ = 0;
    std::size_t fc_bias_ = 0;
    std::vector<double> params_;
    std::uint64_t generation_ = 0;
};

struct BlockCache {
    std::vector<double> columns;       // im2col of the input, (in k k) x (m m)
    std::vector<double> pre;           // conv + bias, before ReLU
    std::vector<double> activation;    // after ReLU, before regulation
    std::vector<double> regulated;     // after regulation (Grad-CAM target)
    std::vector<double> pooled;
    cag::AttentionMask mask;
};

struct ForwardCache {
    const Model* model = nullptr;
    std::uint64_t generation = 0;
    std::vector<double> shifted_input;
    std::vector<BlockCache> blocks;
    std::vector<double> features;  // global average pool of the last block
    std::vector<double> logits;
    std::vector<double> probabilities;
};

struct Gradients {
    std::vector<double> parameters;              // same layout as Model::parameters
    std::vector<std::vector<double>> regulated;  // dY / dF* for every block
    // Work buffers kept between calls.
    std::vector<double> scratch_upstream, scratch_delta, scratch_columns;
};

/// Class probabilities (softmax of the logits) and the activation cache.
ForwardCache forward(const Model& model, std::span<const double> input);
/// Same, reusing the buffers of `cache`.
void forward(const Model& model, std::span<const double> input, ForwardCache& cache);

/// Back-propagates an arbitrary gradient on the logits.
Gradients backprop(const ForwardCache& cache, const Model& model, std::span<const double> logit_grad);
void backprop(const ForwardCache& cache, const Model& model, std::span<const double> logit_grad, Gradients& out);

/// Gradient of the cross-entropy loss -log p[target].
Gradients backward(const ForwardCache& cache, const Model& model, std::size_t target);

double cross_entropy(const ForwardCache& cache, std::size_t target);

struct Example {
    std::vector<double> input;
    std::size_t label = 0;
};

struct TrainingLog {
    std::size_t epochs_completed = 0;
    std::uint64_t seed = 0;
    std::vector<double> epoch_loss;

    bool operator==(const TrainingLog&) const = default;
};

struct Checkpoint {
    Model model;
    TrainingLog log;
};

/// Mini-batch SGD with momentum on cross-entropy. Deterministic in config.seed.
Checkpoint train(std::span<const Example> dataset, const ModelConfig& config);

std::size_t predict(const Model& model, std::span<const double> input);

// Checkpoint: magic "CCKP", u32 version, u32-length-prefixed config text,
// u64 parameter count + float64 parameters, then the training log.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> save_checkpoint(const Checkpoint& checkpoint);
Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace collo
