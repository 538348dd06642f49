#include "skylens/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "skylens/csv.hpp"
#include "skylens/errors.hpp"

namespace skylens::nn {

namespace {

Tensor init_weight(const std::vector<int>& shape, double fan_in, Rng& rng) {
    std::vector<double> data;
    std::size_t n = 1;
    for (const int d : shape) n *= static_cast<std::size_t>(d);
    data.reserve(n);
    const double stddev = std::sqrt(2.0 / std::max(fan_in, 1.0));
    for (std::size_t i = 0; i < n; ++i) data.push_back(rng.normal(0.0, stddev));
    return Tensor::from(shape, std::move(data), true);
}

Tensor init_zeros(const std::vector<int>& shape) { return Tensor::zeros(shape, true); }

Tensor init_ones(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (const int d : shape) n *= static_cast<std::size_t>(d);
    return Tensor::from(shape, std::vector<double>(n, 1.0), true);
}

Tensor image_tensor(const std::vector<float>& data, int rows, int cols) {
    if (data.size() != static_cast<std::size_t>(3) * rows * cols)
        throw std::invalid_argument("sample image does not match the configured window shape");
    std::vector<double> v(data.begin(), data.end());
    return Tensor::from({3, rows, cols}, std::move(v));
}

void check_finite_loss(double loss) {
    if (!std::isfinite(loss))
        throw std::runtime_error(
            "training diverged: non-finite loss (reduce the learning rate or check input scaling)");
}

}  // namespace

void save_weights(const NamedParams& params, const std::string& base_path) {
    std::ofstream blob(base_path + ".bin", std::ios::binary);
    if (!blob) throw IoError("open for write: " + base_path + ".bin");
    CsvTable index;
    index.header = {"name", "shape", "offset"};
    std::size_t offset = 0;
    for (const auto& [name, t] : params) {
        std::string shape;
        for (std::size_t i = 0; i < t.shape().size(); ++i)
            shape += (i ? "x" : "") + std::to_string(t.shape()[i]);
        index.rows.push_back({name, shape, std::to_string(offset)});
        blob.write(reinterpret_cast<const char*>(t.value().data()),
                   static_cast<std::streamsize>(t.numel() * sizeof(double)));
        offset += t.numel() * sizeof(double);
    }
    if (!blob) throw IoError("write: " + base_path + ".bin");
    write_csv(index, base_path + ".index.csv");
}

void load_weights(const NamedParams& params, const std::string& base_path) {
    const CsvTable index = read_csv(base_path + ".index.csv");
    std::ifstream blob(base_path + ".bin", std::ios::binary);
    if (!blob) throw IoError("open for read: " + base_path + ".bin");
    if (index.rows.size() != params.size())
        throw IoError("weight index does not match the model's parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, t] = params[i];
        if (index.rows[i][0] != name)
            throw IoError("weight index mismatch: expected " + name + ", found " + index.rows[i][0]);
        blob.seekg(static_cast<std::streamoff>(std::stoull(index.rows[i][2])));
        blob.read(reinterpret_cast<char*>(const_cast<double*>(t.value().data())),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!blob) throw IoError("truncated weight blob: " + base_path + ".bin");
    }
}

std::vector<double> persistence_forecast(double latest_value, int horizon) {
    if (!std::isfinite(latest_value))
        throw std::invalid_argument("persistence needs a finite latest value");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    return std::vector<double>(static_cast<std::size_t>(horizon), latest_value);
}

// ---- CnnMlpOcclusion -------------------------------------------------------

CnnMlpOcclusion::CnnMlpOcclusion(const OcclusionModelConfig& config)
    : config_(config), train_rng_(config.seed ^ 0xC0FFEEULL) {
    if (config_.conv_channels.size() < 2)
        throw std::invalid_argument("need at least two conv layers");
    Rng init(config_.seed);
    int ch = 3, rows = config_.window_rows, cols = config_.window_cols;
    for (std::size_t l = 0; l < config_.conv_channels.size(); ++l) {
        const int out = config_.conv_channels[l];
        conv_kernels_.push_back(init_weight({out, ch, 3, 3}, ch * 9.0, init));
        conv_biases_.push_back(init_zeros({out}));
        ch = out;
        if (static_cast<int>(l) < config_.pool_layers) {
            rows /= 2;
            cols /= 2;
            if (rows == 0 || cols == 0)
                throw std::invalid_argument("window too small for the conv trunk");
        }
    }
    flat_size_ = ch * rows * cols;
    mlp_w1_ = init_weight({flat_size_, config_.mlp_hidden}, flat_size_, init);
    mlp_b1_ = init_zeros({config_.mlp_hidden});
    mlp_w2_ = init_weight({config_.mlp_hidden, config_.horizon}, config_.mlp_hidden, init);
    mlp_b2_ = init_zeros({config_.horizon});

    std::vector<Tensor> params;
    for (auto& [name, t] : named_parameters()) params.push_back(t);
    optimizer_ = std::make_unique<AdamOptimizer>(std::move(params), config_.learning_rate);
}

Tensor CnnMlpOcclusion::forward(const ForecastSample& sample, bool training,
                                Rng& dropout_rng) const {
    (void)training;
    (void)dropout_rng;
    Tensor x = image_tensor(sample.image, config_.window_rows, config_.window_cols);
    for (std::size_t l = 0; l < conv_kernels_.size(); ++l) {
        x = relu(conv2d(x, conv_kernels_[l], conv_biases_[l]));
        if (static_cast<int>(l) < config_.pool_layers) x = maxpool2x2(x);
    }
    x = reshape(x, {1, flat_size_});
    x = relu(linear(x, mlp_w1_, mlp_b1_));
    x = linear(x, mlp_w2_, mlp_b2_);
    return sigmoid(reshape(x, {config_.horizon}));
}

CnnMlpOcclusion::TrainReport CnnMlpOcclusion::train(const std::vector<ForecastSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("empty training set");
    TrainReport report;

    bool saw_pos = false, saw_neg = false;
    for (const auto& s : samples)
        for (const double t : s.targets) (t > 0.5 ? saw_pos : saw_neg) = true;
    report.single_class_warning = !(saw_pos && saw_neg);

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        train_rng_.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch = std::min<std::size_t>(config_.batch_size, order.size() - done);
            optimizer_->zero_grad();
            for (std::size_t b = 0; b < batch; ++b) {
                const ForecastSample& s = samples[order[done + b]];
                Tensor sample_loss = bce_loss(forward(s, true, train_rng_), s.targets);
                check_finite_loss(sample_loss.value()[0]);
                epoch_loss += sample_loss.value()[0];
                scale(sample_loss, 1.0 / static_cast<double>(batch)).backward();
            }
            optimizer_->step();
            done += batch;
        }
        report.epoch_loss.push_back(epoch_loss / static_cast<double>(samples.size()));
    }
    return report;
}

double CnnMlpOcclusion::train_steps(const std::vector<ForecastSample>& samples, int steps) {
    double last = 0.0;
    for (int s = 0; s < steps; ++s) {
        optimizer_->zero_grad();
        double acc = 0.0;
        for (const auto& sample : samples) {
            Tensor loss = scale(bce_loss(forward(sample, true, train_rng_), sample.targets),
                                1.0 / static_cast<double>(samples.size()));
            acc += loss.value()[0];
            loss.backward();
        }
        check_finite_loss(acc);
        optimizer_->step();
        last = acc;
    }
    return last;
}

namespace {

Tensor model_bce(const Tensor& probs, const std::vector<double>& targets) {
    return bce_loss(probs, targets);
}

}  // namespace

double CnnMlpOcclusion::loss_eval(const ForecastSample& sample) const {
    Rng unused(0);
    return model_bce(forward(sample, false, unused), sample.targets).value()[0];
}

double CnnMlpOcclusion::loss_backward(const ForecastSample& sample) {
    for (auto& [name, t] : named_parameters()) t.zero_grad();
    Rng unused(0);
    Tensor loss = model_bce(forward(sample, false, unused), sample.targets);
    loss.backward();
    return loss.value()[0];
}

std::vector<double> CnnMlpOcclusion::predict(const ForecastSample& sample) const {
    Rng unused(0);
    Tensor probs = forward(sample, false, unused);
    return probs.value();
}

NamedParams CnnMlpOcclusion::named_parameters() const {
    NamedParams p;
    for (std::size_t l = 0; l < conv_kernels_.size(); ++l) {
        p.push_back({"conv" + std::to_string(l) + ".kernel", conv_kernels_[l]});
        p.push_back({"conv" + std::to_string(l) + ".bias", conv_biases_[l]});
    }
    p.push_back({"mlp.w1", mlp_w1_});
    p.push_back({"mlp.b1", mlp_b1_});
    p.push_back({"mlp.w2", mlp_w2_});
    p.push_back({"mlp.b2", mlp_b2_});
    return p;
}

void CnnMlpOcclusion::save(const std::string& base_path) const {
    save_weights(named_parameters(), base_path);
}

void CnnMlpOcclusion::load(const std::string& base_path) {
    load_weights(named_parameters(), base_path);
}

// ---- GhiForecaster ---------------------------------------------------------

void GhiModelConfig::validate() const {
    if (history < 1 || horizon < 1) throw std::invalid_argument("history/horizon must be positive");
    if (patch < 1 || history % patch != 0)
        throw std::invalid_argument("history must be divisible by the patch size");
    if (!(mask_ratio > 0.0) || !(mask_ratio < 1.0))
        throw std::invalid_argument("mask ratio must lie in (0, 1)");
    if (model_dim % heads != 0) throw std::invalid_argument("model width must divide by head count");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
}

GhiForecaster::GhiForecaster(const GhiModelConfig& config)
    : config_(config), train_rng_(config.seed ^ 0x7EA5ULL) {
    config_.validate();
    Rng init(config_.seed);

    int ch = 3, rows = config_.image_rows, cols = config_.image_cols;
    for (std::size_t l = 0; l < config_.conv_channels.size(); ++l) {
        const int out = config_.conv_channels[l];
        conv_kernels_.push_back(init_weight({out, ch, 3, 3}, ch * 9.0, init));
        conv_biases_.push_back(init_zeros({out}));
        ch = out;
        if (l + 1 < config_.conv_channels.size()) {
            rows /= 2;
            cols /= 2;
            if (rows == 0 || cols == 0)
                throw std::invalid_argument("image crop too small for the encoder");
        }
    }
    n_k_tokens_ = rows * cols;  // one token per latent position, width = latent channels
    const int latent_ch = ch;
    k_embed_w_ = init_weight({latent_ch, config_.model_dim}, latent_ch, init);
    k_embed_b_ = init_zeros({config_.model_dim});

    n_patches_ = config_.history / config_.patch;
    patch_embed_w_ = init_weight({config_.patch, config_.model_dim}, config_.patch, init);
    patch_embed_b_ = init_zeros({config_.model_dim});
    mask_token_ = init_weight({config_.patch}, config_.patch, init);

    n_tokens_ = n_k_tokens_ + n_patches_;
    pos_embed_ = init_weight({n_tokens_, config_.model_dim}, config_.model_dim, init);

    const int head_dim = config_.model_dim / config_.heads;
    for (int l = 0; l < config_.depth; ++l) {
        Block b;
        b.ln1_g = init_ones({config_.model_dim});
        b.ln1_b = init_zeros({config_.model_dim});
        b.ln2_g = init_ones({config_.model_dim});
        b.ln2_b = init_zeros({config_.model_dim});
        for (int h = 0; h < config_.heads; ++h) {
            b.wq.push_back(init_weight({config_.model_dim, head_dim}, config_.model_dim, init));
            b.wk.push_back(init_weight({config_.model_dim, head_dim}, config_.model_dim, init));
            b.wv.push_back(init_weight({config_.model_dim, head_dim}, config_.model_dim, init));
        }
        b.wo = init_weight({config_.model_dim, config_.model_dim}, config_.model_dim, init);
        b.mlp_w1 = init_weight({config_.model_dim, 4 * config_.model_dim}, config_.model_dim, init);
        b.mlp_b1 = init_zeros({4 * config_.model_dim});
        b.mlp_w2 = init_weight({4 * config_.model_dim, config_.model_dim}, 4.0 * config_.model_dim, init);
        b.mlp_b2 = init_zeros({config_.model_dim});
        blocks_.push_back(std::move(b));
    }
    final_ln_g_ = init_ones({config_.model_dim});
    final_ln_b_ = init_zeros({config_.model_dim});

    recon_w1_ = init_weight({config_.model_dim, config_.model_dim}, config_.model_dim, init);
    recon_b1_ = init_zeros({config_.model_dim});
    recon_w2_ = init_weight({config_.model_dim, config_.patch}, config_.model_dim, init);
    recon_b2_ = init_zeros({config_.patch});

    fc_head_w_ = init_weight({n_tokens_ * config_.model_dim, config_.horizon},
                             static_cast<double>(n_tokens_) * config_.model_dim, init);
    fc_head_b_ = init_zeros({config_.horizon});
}

Tensor GhiForecaster::encoder_forward(const ForecastSample& sample,
                                      const std::vector<int>& masked_patches, bool training,
                                      Rng& dropout_rng) const {
    if (static_cast<int>(sample.ghi_history.size()) != config_.history)
        throw std::invalid_argument("sample history length does not match the config");

    // Image pathway: conv stack, then one token per latent spatial position.
    Tensor x = image_tensor(sample.image, config_.image_rows, config_.image_cols);
    for (std::size_t l = 0; l < conv_kernels_.size(); ++l) {
        x = relu(conv2d(x, conv_kernels_[l], conv_biases_[l]));
        if (l + 1 < conv_kernels_.size()) x = maxpool2x2(x);
    }
    const int latent_ch = x.shape()[0];
    // (C, H, W) -> (H*W, C): transpose of the flattened channel-major block.
    Tensor latent = transpose(reshape(x, {latent_ch, n_k_tokens_}));
    Tensor k_tokens = linear(latent, k_embed_w_, k_embed_b_);

    // GHI pathway: raw patches, with masked patches replaced by the
    // learnable mask token before the patch embedding.
    std::vector<std::uint8_t> is_masked(static_cast<std::size_t>(n_patches_), 0);
    for (const int m : masked_patches) {
        if (m < 0 || m >= n_patches_) throw std::invalid_argument("mask index out of range");
        is_masked[static_cast<std::size_t>(m)] = 1;
    }
    std::vector<double> patch_values(static_cast<std::size_t>(n_patches_) * config_.patch, 0.0);
    for (int p = 0; p < n_patches_; ++p)
        for (int i = 0; i < config_.patch; ++i)
            patch_values[static_cast<std::size_t>(p) * config_.patch + i] =
                sample.ghi_history[static_cast<std::size_t>(p) * config_.patch + i];
    Tensor patches = Tensor::from({n_patches_, config_.patch}, std::move(patch_values));

    // Replacement: masked rows come from the mask token, others pass through.
    std::vector<double> keep_mask(static_cast<std::size_t>(n_patches_) * config_.patch);
    std::vector<double> token_mask(keep_mask.size());
    for (int p = 0; p < n_patches_; ++p)
        for (int i = 0; i < config_.patch; ++i) {
            keep_mask[static_cast<std::size_t>(p) * config_.patch + i] = is_masked[p] ? 0.0 : 1.0;
            token_mask[static_cast<std::size_t>(p) * config_.patch + i] = is_masked[p] ? 1.0 : 0.0;
        }
    Tensor mask_rows = matmul(Tensor::from({n_patches_, 1}, std::vector<double>(n_patches_, 1.0)),
                              reshape(mask_token_, {1, config_.patch}));
    Tensor masked_patches_t =
        add(mul(patches, Tensor::from({n_patches_, config_.patch}, std::move(keep_mask))),
            mul(mask_rows, Tensor::from({n_patches_, config_.patch}, std::move(token_mask))));
    Tensor i_tokens = linear(masked_patches_t, patch_embed_w_, patch_embed_b_);

    Tensor tokens = add(concat_rows(k_tokens, i_tokens), pos_embed_);

    for (const Block& b : blocks_) {
        Tensor attn = multi_head_self_attention(layer_norm(tokens, b.ln1_g, b.ln1_b), b.wq, b.wk,
                                                b.wv, b.wo);
        attn = dropout(attn, config_.dropout, dropout_rng, training);
        tokens = add(tokens, attn);
        Tensor h = relu(linear(layer_norm(tokens, b.ln2_g, b.ln2_b), b.mlp_w1, b.mlp_b1));
        h = dropout(h, config_.dropout, dropout_rng, training);
        h = linear(h, b.mlp_w2, b.mlp_b2);
        tokens = add(tokens, h);
    }
    return layer_norm(tokens, final_ln_g_, final_ln_b_);
}

std::vector<double> GhiForecaster::encode_tokens(const ForecastSample& sample,
                                                 const std::vector<int>& masked_patches) const {
    Rng unused(0);
    // Token sequence = embedded [K || I] with positions, before the encoder.
    // Rebuild just that prefix of the graph.
    Tensor x = image_tensor(sample.image, config_.image_rows, config_.image_cols);
    for (std::size_t l = 0; l < conv_kernels_.size(); ++l) {
        x = relu(conv2d(x, conv_kernels_[l], conv_biases_[l]));
        if (l + 1 < conv_kernels_.size()) x = maxpool2x2(x);
    }
    Tensor latent = transpose(reshape(x, {x.shape()[0], n_k_tokens_}));
    Tensor k_tokens = linear(latent, k_embed_w_, k_embed_b_);

    std::vector<std::uint8_t> is_masked(static_cast<std::size_t>(n_patches_), 0);
    for (const int m : masked_patches) is_masked.at(static_cast<std::size_t>(m)) = 1;
    std::vector<double> vals(static_cast<std::size_t>(n_patches_) * config_.patch);
    for (int p = 0; p < n_patches_; ++p)
        for (int i = 0; i < config_.patch; ++i)
            vals[static_cast<std::size_t>(p) * config_.patch + i] =
                is_masked[p] ? mask_token_.value()[static_cast<std::size_t>(i)]
                             : sample.ghi_history[static_cast<std::size_t>(p) * config_.patch + i];
    Tensor i_tokens = linear(Tensor::from({n_patches_, config_.patch}, std::move(vals)),
                             patch_embed_w_, patch_embed_b_);
    Tensor tokens = add(concat_rows(k_tokens, i_tokens), pos_embed_);
    return tokens.value();
}

namespace {

std::vector<std::uint8_t> masked_value_positions(const std::vector<int>& masked, int patch,
                                                 std::size_t history) {
    std::vector<std::uint8_t> mask(history, 0);
    for (const int m : masked)
        for (int i = 0; i < patch; ++i)
            mask[static_cast<std::size_t>(m) * patch + i] = 1;
    return mask;
}

}  // namespace

double GhiForecaster::reconstruction_loss_eval(const ForecastSample& sample,
                                               const std::vector<int>& masked_patches) const {
    Rng unused(0);
    Tensor enc = encoder_forward(sample, masked_patches, false, unused);
    Tensor ghi_tokens = slice_rows(enc, n_k_tokens_, n_patches_);
    Tensor h = relu(linear(ghi_tokens, recon_w1_, recon_b1_));
    Tensor recon = linear(h, recon_w2_, recon_b2_);
    const auto mask = masked_value_positions(masked_patches, config_.patch, sample.ghi_history.size());
    return masked_mse_loss(reshape(recon, {config_.history}), sample.ghi_history, mask).value()[0];
}

double GhiForecaster::reconstruction_loss_backward(const ForecastSample& sample,
                                                   const std::vector<int>& masked_patches) {
    for (auto& [name, t] : named_parameters()) t.zero_grad();
    Rng unused(0);
    Tensor enc = encoder_forward(sample, masked_patches, false, unused);
    Tensor ghi_tokens = slice_rows(enc, n_k_tokens_, n_patches_);
    Tensor h = relu(linear(ghi_tokens, recon_w1_, recon_b1_));
    Tensor recon = linear(h, recon_w2_, recon_b2_);
    const auto mask = masked_value_positions(masked_patches, config_.patch, sample.ghi_history.size());
    Tensor loss = masked_mse_loss(reshape(recon, {config_.history}), sample.ghi_history, mask);
    loss.backward();
    return loss.value()[0];
}

std::vector<double> GhiForecaster::pretrain(const std::vector<ForecastSample>& samples,
                                            int epochs) {
    if (samples.empty()) throw std::invalid_argument("empty pretraining set");
    std::vector<Tensor> params;
    for (auto& [name, t] : named_parameters())
        if (name.rfind("fc_head", 0) != 0) params.push_back(t);
    AdamOptimizer opt(std::move(params), config_.lr_pretrain);

    const int n_masked =
        static_cast<int>(std::ceil(config_.mask_ratio * static_cast<double>(n_patches_)));
    std::vector<int> all_patches(static_cast<std::size_t>(n_patches_));
    for (int i = 0; i < n_patches_; ++i) all_patches[static_cast<std::size_t>(i)] = i;

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> curve;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        train_rng_.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch = std::min<std::size_t>(config_.batch_size, order.size() - done);
            opt.zero_grad();
            for (std::size_t b = 0; b < batch; ++b) {
                const ForecastSample& s = samples[order[done + b]];
                // Sample masked patches without replacement.
                std::vector<int> pool = all_patches;
                train_rng_.shuffle(pool);
                const std::vector<int> masked(pool.begin(), pool.begin() + n_masked);

                Tensor enc = encoder_forward(s, masked, true, train_rng_);
                Tensor ghi_tokens = slice_rows(enc, n_k_tokens_, n_patches_);
                Tensor h = relu(linear(ghi_tokens, recon_w1_, recon_b1_));
                h = dropout(h, config_.dropout, train_rng_, true);
                Tensor recon = linear(h, recon_w2_, recon_b2_);  // (n_patches, patch)

                std::vector<std::uint8_t> value_mask(s.ghi_history.size(), 0);
                for (const int m : masked)
                    for (int i = 0; i < config_.patch; ++i)
                        value_mask[static_cast<std::size_t>(m) * config_.patch + i] = 1;
                Tensor sample_loss =
                    masked_mse_loss(reshape(recon, {config_.history}), s.ghi_history, value_mask);
                check_finite_loss(sample_loss.value()[0]);
                epoch_loss += sample_loss.value()[0];
                scale(sample_loss, 1.0 / static_cast<double>(batch)).backward();
            }
            opt.step();
            done += batch;
        }
        curve.push_back(epoch_loss / static_cast<double>(samples.size()));
    }
    pretrained_ = true;
    return curve;
}

std::vector<double> GhiForecaster::finetune(const std::vector<ForecastSample>& samples,
                                            int epochs) {
    if (!pretrained_)
        throw std::runtime_error("finetune requires pretraining (or loading pretrained weights)");
    if (samples.empty()) throw std::invalid_argument("empty finetuning set");

    std::vector<Tensor> params;
    for (auto& [name, t] : head_parameters()) params.push_back(t);
    AdamOptimizer opt(std::move(params), config_.lr_finetune);

    // The encoder is frozen and runs in eval mode, so its output per sample
    // is fixed; cache the flattened features.
    Rng unused(0);
    std::vector<std::vector<double>> features;
    features.reserve(samples.size());
    for (const auto& s : samples) {
        Tensor enc = encoder_forward(s, {}, false, unused);
        features.push_back(enc.value());
    }

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> curve;
    const int feat_dim = n_tokens_ * config_.model_dim;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        train_rng_.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch = std::min<std::size_t>(config_.batch_size, order.size() - done);
            opt.zero_grad();
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t si = order[done + b];
                Tensor flat = Tensor::from({1, feat_dim}, features[si]);
                Tensor h = dropout(flat, config_.dropout, train_rng_, true);
                Tensor pred = reshape(linear(h, fc_head_w_, fc_head_b_), {config_.horizon});
                Tensor sample_loss = mse_loss(pred, samples[si].targets);
                check_finite_loss(sample_loss.value()[0]);
                epoch_loss += sample_loss.value()[0];
                scale(sample_loss, 1.0 / static_cast<double>(batch)).backward();
            }
            opt.step();
            done += batch;
        }
        curve.push_back(epoch_loss / static_cast<double>(samples.size()));
    }
    return curve;
}

std::vector<double> GhiForecaster::predict(const ForecastSample& sample) const {
    Rng unused(0);
    Tensor enc = encoder_forward(sample, {}, false, unused);
    Tensor flat = reshape(enc, {1, n_tokens_ * config_.model_dim});
    Tensor pred = reshape(linear(flat, fc_head_w_, fc_head_b_), {config_.horizon});
    std::vector<double> out = pred.value();
    for (auto& v : out) v = std::max(v, 0.0);
    return out;
}

NamedParams GhiForecaster::named_parameters() const {
    NamedParams p;
    for (std::size_t l = 0; l < conv_kernels_.size(); ++l) {
        p.push_back({"conv" + std::to_string(l) + ".kernel", conv_kernels_[l]});
        p.push_back({"conv" + std::to_string(l) + ".bias", conv_biases_[l]});
    }
    p.push_back({"k_embed.w", k_embed_w_});
    p.push_back({"k_embed.b", k_embed_b_});
    p.push_back({"patch_embed.w", patch_embed_w_});
    p.push_back({"patch_embed.b", patch_embed_b_});
    p.push_back({"mask_token", mask_token_});
    p.push_back({"pos_embed", pos_embed_});
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const std::string pre = "block" + std::to_string(l) + ".";
        const Block& b = blocks_[l];
        p.push_back({pre + "ln1.g", b.ln1_g});
        p.push_back({pre + "ln1.b", b.ln1_b});
        for (std::size_t h = 0; h < b.wq.size(); ++h) {
            p.push_back({pre + "head" + std::to_string(h) + ".wq", b.wq[h]});
            p.push_back({pre + "head" + std::to_string(h) + ".wk", b.wk[h]});
            p.push_back({pre + "head" + std::to_string(h) + ".wv", b.wv[h]});
        }
        p.push_back({pre + "wo", b.wo});
        p.push_back({pre + "ln2.g", b.ln2_g});
        p.push_back({pre + "ln2.b", b.ln2_b});
        p.push_back({pre + "mlp.w1", b.mlp_w1});
        p.push_back({pre + "mlp.b1", b.mlp_b1});
        p.push_back({pre + "mlp.w2", b.mlp_w2});
        p.push_back({pre + "mlp.b2", b.mlp_b2});
    }
    p.push_back({"final_ln.g", final_ln_g_});
    p.push_back({"final_ln.b", final_ln_b_});
    p.push_back({"recon.w1", recon_w1_});
    p.push_back({"recon.b1", recon_b1_});
    p.push_back({"recon.w2", recon_w2_});
    p.push_back({"recon.b2", recon_b2_});
    p.push_back({"fc_head.w", fc_head_w_});
    p.push_back({"fc_head.b", fc_head_b_});
    return p;
}

NamedParams GhiForecaster::head_parameters() const {
    return {{"fc_head.w", fc_head_w_}, {"fc_head.b", fc_head_b_}};
}

void GhiForecaster::save(const std::string& base_path) const {
    save_weights(named_parameters(), base_path);
}

void GhiForecaster::load(const std::string& base_path, bool mark_pretrained) {
    load_weights(named_parameters(), base_path);
    if (mark_pretrained) pretrained_ = true;
}

}  // namespace skylens::nn
