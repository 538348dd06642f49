#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "skylens/tensor.hpp"

namespace skylens::nn {

// One training/inference sample for the learned predictors. The image block
// is channel-major (3, rows, cols); intensity values are expected to be
// bounded (the dataset builders apply v / (1 + v)).
struct ForecastSample {
    std::vector<float> image;          // (3, rows, cols)
    std::vector<double> ghi_history;   // normalized by the day's clear-sky peak
    std::vector<double> targets;       // occlusion bits or normalized GHI
    double anchor_t_s = 0.0;
};

// Named parameter registry shared by the models.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Flat little-endian float64 blob + CSV index (name, shape, offset).
void save_weights(const NamedParams& params, const std::string& base_path);
void load_weights(const NamedParams& params, const std::string& base_path);

// Constant forecast: the latest measurement holds for every horizon.
std::vector<double> persistence_forecast(double latest_value, int horizon);

// ---- CNN-MLP binary occlusion model ---------------------------------------

struct OcclusionModelConfig {
    int window_rows = 48;   // past frames fed to the trunk
    int window_cols = 109;  // past + horizon + 1 occlusion-time columns
    int horizon = 60;
    std::vector<int> conv_channels = {8, 16, 16};
    // Leading conv layers followed by 2x2 pooling. Occlusion time is the
    // column axis, so column resolution must survive to the head; two pool
    // stages keep ~4 columns per horizon step at desk scale.
    int pool_layers = 1;
    int mlp_hidden = 64;
    double learning_rate = 1e-3;
    int batch_size = 16;
    int epochs = 10;
    std::uint64_t seed = 1;
};

class CnnMlpOcclusion {
public:
    explicit CnnMlpOcclusion(const OcclusionModelConfig& config);

    struct TrainReport {
        std::vector<double> epoch_loss;
        bool single_class_warning = false;
    };
    TrainReport train(const std::vector<ForecastSample>& samples);
    // Extra gradient steps on a fixed set (capacity checks).
    double train_steps(const std::vector<ForecastSample>& samples, int steps);

    std::vector<double> predict(const ForecastSample& sample) const;  // probabilities

    // Deterministic loss hooks for gradient verification: dropout-free
    // forward, BCE against the sample targets; the backward variant
    // accumulates into the parameter gradients (zeroing them first).
    double loss_eval(const ForecastSample& sample) const;
    double loss_backward(const ForecastSample& sample);

    const OcclusionModelConfig& config() const { return config_; }
    NamedParams named_parameters() const;
    void save(const std::string& base_path) const;
    void load(const std::string& base_path);

private:
    Tensor forward(const ForecastSample& sample, bool training, Rng& dropout_rng) const;

    OcclusionModelConfig config_;
    std::vector<Tensor> conv_kernels_, conv_biases_;
    Tensor mlp_w1_, mlp_b1_, mlp_w2_, mlp_b2_;
    int flat_size_ = 0;
    Rng train_rng_;
    std::unique_ptr<AdamOptimizer> optimizer_;
};

// ---- masked-pretrained transformer GHI forecaster --------------------------

struct GhiModelConfig {
    int history = 60;          // GHI steps fed to the model
    int horizon = 60;
    int patch = 5;             // GHI patch size; history % patch == 0
    int image_rows = 81;       // slice crop fed to the image encoder
    int image_cols = 60;
    std::vector<int> conv_channels = {8, 16, 16, 16, 2};
    int model_dim = 64;
    int depth = 2;
    int heads = 4;
    double dropout = 0.1;
    double mask_ratio = 0.25;
    double lr_pretrain = 1e-3;
    double lr_finetune = 1e-3;
    int batch_size = 16;
    std::uint64_t seed = 1;

    void validate() const;
};

class GhiForecaster {
public:
    explicit GhiForecaster(const GhiModelConfig& config);

    // Masked-input reconstruction; returns the per-epoch loss curve.
    std::vector<double> pretrain(const std::vector<ForecastSample>& samples, int epochs);
    // Trains the forecasting head only; everything else stays frozen.
    std::vector<double> finetune(const std::vector<ForecastSample>& samples, int epochs);

    std::vector<double> predict(const ForecastSample& sample) const;  // normalized GHI, >= 0

    // Token sequence for a sample under the given masked patch indices
    // (values only; used by tests to pin the masking contract).
    std::vector<double> encode_tokens(const ForecastSample& sample,
                                      const std::vector<int>& masked_patches) const;

    // Deterministic reconstruction-loss hooks for gradient verification
    // (fixed mask set, dropout off).
    double reconstruction_loss_eval(const ForecastSample& sample,
                                    const std::vector<int>& masked_patches) const;
    double reconstruction_loss_backward(const ForecastSample& sample,
                                        const std::vector<int>& masked_patches);

    int token_count() const { return n_tokens_; }
    bool pretrained() const { return pretrained_; }
    const GhiModelConfig& config() const { return config_; }
    NamedParams named_parameters() const;     // every parameter
    NamedParams head_parameters() const;      // forecasting head only
    void save(const std::string& base_path) const;
    void load(const std::string& base_path, bool mark_pretrained = true);

private:
    Tensor encoder_forward(const ForecastSample& sample, const std::vector<int>& masked_patches,
                           bool training, Rng& dropout_rng) const;

    GhiModelConfig config_;
    // image encoder
    std::vector<Tensor> conv_kernels_, conv_biases_;
    Tensor k_embed_w_, k_embed_b_;
    // GHI patch pathway
    Tensor patch_embed_w_, patch_embed_b_, mask_token_;
    Tensor pos_embed_;
    // encoder blocks
    struct Block {
        Tensor ln1_g, ln1_b, ln2_g, ln2_b;
        std::vector<Tensor> wq, wk, wv;
        Tensor wo;
        Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    };
    std::vector<Block> blocks_;
    Tensor final_ln_g_, final_ln_b_;
    // heads
    Tensor recon_w1_, recon_b1_, recon_w2_, recon_b2_;
    Tensor fc_head_w_, fc_head_b_;

    int n_k_tokens_ = 0;
    int n_patches_ = 0;
    int n_tokens_ = 0;
    bool pretrained_ = false;
    Rng train_rng_;
};

}  // namespace skylens::nn
