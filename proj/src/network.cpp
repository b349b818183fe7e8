#include "collo/network.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "collo/error.hpp"
#include "collo/io.hpp"

namespace collo {

namespace {

std::uint64_t next_generation() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

std::string join(const std::vector<std::size_t>& values) {
    std::string out;
    for (std::size_t v : values) {
        if (!out.empty()) out += ',';
        out += std::to_string(v);
    }
    return out;
}

std::size_t to_size(const std::string& text) {
    std::size_t pos = 0;
    const auto v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
}

double to_double(const std::string& text) {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
}

void softmax(std::span<const double> logits, std::vector<double>& out) {
    const double top = *std::max_element(logits.begin(), logits.end());
    out.resize(logits.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) sum += out[k] = std::exp(logits[k] - top);
    for (double& p : out) p /= sum;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// cols(ic k k + ky k + kx, y m + x) = in[ic](y + ky - pad, x + kx - pad), zero outside.
void im2col(const double* input, std::size_t in, std::size_t m, std::size_t k, std::vector<double>& cols) {
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const auto sm = static_cast<std::ptrdiff_t>(m);
    cols.assign(in * k * k * m * m, 0.0);
    for (std::size_t ic = 0; ic < in; ++ic)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                double* row = cols.data() + ((ic * k + ky) * k + kx) * m * m;
                const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
                const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
                for (std::ptrdiff_t y = 0; y < sm; ++y) {
                    const auto sy = y + dy;
                    if (sy < 0 || sy >= sm) continue;
                    const double* src = input + (static_cast<std::ptrdiff_t>(ic) * sm + sy) * sm;
                    for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, -dx); x < std::min(sm, sm - dx); ++x)
                        row[y * sm + x] = src[x + dx];
                }
            }
}

// Adjoint of im2col: scatters column gradients back onto the input planes.
void col2im(const double* cols, std::size_t in, std::size_t m, std::size_t k, double* out) {
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const auto sm = static_cast<std::ptrdiff_t>(m);
    std::fill(out, out + in * m * m, 0.0);
    for (std::size_t ic = 0; ic < in; ++ic)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                const double* row = cols + ((ic * k + ky) * k + kx) * m * m;
                const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
                const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
                for (std::ptrdiff_t y = 0; y < sm; ++y) {
                    const auto sy = y + dy;
                    if (sy < 0 || sy >= sm) continue;
                    double* dst = out + (static_cast<std::ptrdiff_t>(ic) * sm + sy) * sm;
                    for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, -dx); x < std::min(sm, sm - dx); ++x)
                        dst[x + dx] += row[y * sm + x];
                }
            }
}

}  // namespace

std::size_t ModelConfig::block_size(std::size_t l) const {
    std::size_t m = input_size;
    for (std::size_t i = 0; i < l; ++i) m /= std::max<std::size_t>(pool, 1);
    return m;
}

void ModelConfig::validate() const {
    if (widths.empty()) fail(ErrorCode::InvalidArgument, "model needs at least one block");
    if (std::find(widths.begin(), widths.end(), 0) != widths.end())
        fail(ErrorCode::InvalidArgument, "block widths must be positive");
    if (input_channels == 0 || input_size == 0) fail(ErrorCode::InvalidArgument, "empty model input");
    if (kernel == 0 || kernel % 2 == 0) fail(ErrorCode::InvalidArgument, "kernel size must be odd");
    if (pool == 0) fail(ErrorCode::InvalidArgument, "pool factor must be >= 1");
    if (num_classes < 2) fail(ErrorCode::InvalidArgument, "need at least two classes");
    if (block_size(blocks()) < 1)
        fail(ErrorCode::InvalidArgument, "input size " + std::to_string(input_size) + " vanishes after " +
                                             std::to_string(blocks()) + " pools");
    if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch size must be >= 1");
    if (!std::isfinite(input_shift)) fail(ErrorCode::InvalidArgument, "input shift must be finite");
    if (!(learning_rate > 0.0) || !(momentum >= 0.0)) fail(ErrorCode::InvalidArgument, "bad optimizer settings");
}

std::string ModelConfig::serialize() const {
    std::ostringstream out;
    out << "input_size=" << input_size << '\n'
        << "input_channels=" << input_channels << '\n'
        << "input_shift=" << format_double(input_shift) << '\n'
        << "widths=" << join(widths) << '\n'
        << "kernel=" << kernel << '\n'
        << "pool=" << pool << '\n'
        << "num_classes=" << num_classes << '\n'
        << "use_cag=" << (use_cag ? 1 : 0) << '\n'
        << "cag_alpha=" << format_double(cag_init.alpha) << '\n'
        << "cag_beta=" << format_double(cag_init.beta) << '\n'
        << "cag_gamma=" << format_double(cag_init.gamma) << '\n'
        << "cag_period=" << format_double(cag_init.period) << '\n'
        << "learning_rate=" << format_double(learning_rate) << '\n'
        << "momentum=" << format_double(momentum) << '\n'
        << "epochs=" << epochs << '\n'
        << "batch_size=" << batch_size << '\n'
        << "seed=" << seed << '\n';
    return out.str();
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorCode::ConfigParseError, "model config line without '=': " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) fail(ErrorCode::ConfigParseError, "model config lacks '" + key + "'");
        return it->second;
    };
    ModelConfig c;
    try {
        c.input_size = to_size(get("input_size"));
        c.input_channels = to_size(get("input_channels"));
        c.input_shift = to_double(get("input_shift"));
        c.widths.clear();
        for (const auto& w : split_csv_line(get("widths"))) c.widths.push_back(to_size(w));
        c.kernel = to_size(get("kernel"));
        c.pool = to_size(get("pool"));
        c.num_classes = to_size(get("num_classes"));
        c.use_cag = to_size(get("use_cag")) != 0;
        c.cag_init.alpha = to_double(get("cag_alpha"));
        c.cag_init.beta = to_double(get("cag_beta"));
        c.cag_init.gamma = to_double(get("cag_gamma"));
        c.cag_init.period = to_double(get("cag_period"));
        c.learning_rate = to_double(get("learning_rate"));
        c.momentum = to_double(get("momentum"));
        c.epochs = to_size(get("epochs"));
        c.batch_size = to_size(get("batch_size"));
        c.seed = to_size(get("seed"));
    } catch (const std::logic_error& e) {
        fail(ErrorCode::ConfigParseError, std::string("bad model config value: ") + e.what());
    }
    return c;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    build_layout();
    std::mt19937_64 rng(config_.seed);
    auto glorot = [&](std::size_t offset, std::size_t count, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t i = 0; i < count; ++i) params_[offset + i] = dist(rng);
    };
    const double kk = static_cast<double>(config_.kernel * config_.kernel);
    for (std::size_t l = 0; l < layout_.size(); ++l) {
        const auto& b = layout_[l];
        glorot(b.weights, b.out_channels * b.in_channels * config_.kernel * config_.kernel,
               static_cast<double>(b.in_channels) * kk, static_cast<double>(b.out_channels) * kk);
        set_cag_params(l, config_.cag_init);
    }
    const std::size_t last = layout_.back().out_channels;
    glorot(fc_weights_, config_.num_classes * last, static_cast<double>(last),
           static_cast<double>(config_.num_classes));
    generation_ = next_generation();
}

Model::Model(ModelConfig config, std::vector<double> parameters) : config_(std::move(config)) {
    config_.validate();
    build_layout();
    if (parameters.size() != params_.size())
        fail(ErrorCode::ShapeMismatch, "expected " + std::to_string(params_.size()) + " parameters, got " +
                                           std::to_string(parameters.size()));
    params_ = std::move(parameters);
    generation_ = next_generation();
}

void Model::build_layout() {
    layout_.clear();
    std::size_t offset = 0;
    std::size_t in = config_.input_channels;
    for (std::size_t l = 0; l < config_.blocks(); ++l) {
        BlockLayout b;
        b.in_channels = in;
        b.out_channels = config_.widths[l];
        b.size = config_.block_size(l);
        b.weights = offset;
        offset += b.out_channels * b.in_channels * config_.kernel * config_.kernel;
        b.bias = offset;
        offset += b.out_channels;
        b.cag = offset;
        offset += 4;
        layout_.push_back(b);
        in = b.out_channels;
    }
    fc_weights_ = offset;
    offset += config_.num_classes * in;
    fc_bias_ = offset;
    offset += config_.num_classes;
    params_.assign(offset, 0.0);
}

std::span<double> Model::mutable_parameters() {
    generation_ = next_generation();
    return params_;
}

cag::CagParams Model::cag_params(std::size_t block) const {
    const std::size_t o = layout_.at(block).cag;
    return {params_[o], params_[o + 1], params_[o + 2], params_[o + 3]};
}

void Model::set_cag_params(std::size_t block, const cag::CagParams& params) {
    cag::CagParams p = params;
    cag::clamp_period(p, layout_.at(block).size);
    const std::size_t o = layout_[block].cag;
    params_[o] = p.alpha;
    params_[o + 1] = p.beta;
    params_[o + 2] = p.gamma;
    params_[o + 3] = p.period;
    generation_ = next_generation();
}

void forward(const Model& model, std::span<const double> input, ForwardCache& cache) {
    const auto& cfg = model.config();
    const std::size_t n = cfg.input_size;
    if (input.size() != cfg.input_channels * n * n)
        fail(ErrorCode::ShapeMismatch, "input has " + std::to_string(input.size()) + " values, model expects " +
                                           std::to_string(cfg.input_channels) + "x" + std::to_string(n) + "x" +
                                           std::to_string(n));
    const auto params = model.parameters();
    const std::size_t k = cfg.kernel;

    cache.model = &model;
    cache.generation = model.generation();
    cache.blocks.resize(cfg.blocks());

    std::span<const double> current = input;
    if (cfg.input_shift != 0.0) {
        cache.shifted_input.resize(input.size());
        std::transform(input.begin(), input.end(), cache.shifted_input.begin(),
                       [&](double v) { return v - cfg.input_shift; });
        current = cache.shifted_input;
    }
    for (std::size_t l = 0; l < cfg.blocks(); ++l) {
        const auto& b = model.layout()[l];
        auto& bc = cache.blocks[l];
        const std::size_t m = b.size;

        im2col(current.data(), b.in_channels, m, k, bc.columns);
        const auto K = static_cast<Eigen::Index>(b.in_channels * k * k);
        const auto cells = static_cast<Eigen::Index>(m * m);
        const auto rows = static_cast<Eigen::Index>(b.out_channels);
        bc.pre.resize(b.out_channels * m * m);
        Eigen::Map<RowMatrix> pre(bc.pre.data(), rows, cells);
        pre.noalias() = Eigen::Map<const RowMatrix>(params.data() + b.weights, rows, K) *
                        Eigen::Map<const RowMatrix>(bc.columns.data(), K, cells);
        pre.colwise() += Eigen::Map<const Eigen::VectorXd>(params.data() + b.bias, rows);

        bc.activation.resize(bc.pre.size());
        std::transform(bc.pre.begin(), bc.pre.end(), bc.activation.begin(),
                       [](double v) { return v > 0.0 ? v : 0.0; });

        if (cfg.use_cag) {
            bc.mask = cag::build_mask(model.cag_params(l), m);
            bc.regulated.resize(bc.activation.size());
            cag::regulate(bc.activation, b.out_channels, bc.mask, bc.regulated);
        } else {
            bc.regulated = bc.activation;
        }

        const std::size_t q = m / cfg.pool;
        const double area = static_cast<double>(cfg.pool * cfg.pool);
        bc.pooled.assign(b.out_channels * q * q, 0.0);
        for (std::size_t c = 0; c < b.out_channels; ++c)
            for (std::size_t Y = 0; Y < q; ++Y)
                for (std::size_t X = 0; X < q; ++X) {
                    double s = 0.0;
                    for (std::size_t dy = 0; dy < cfg.pool; ++dy)
                        for (std::size_t dx = 0; dx < cfg.pool; ++dx)
                            s += bc.regulated[(c * m + Y * cfg.pool + dy) * m + X * cfg.pool + dx];
                    bc.pooled[(c * q + Y) * q + X] = s / area;
                }
        current = bc.pooled;
    }

    const auto& last = model.layout().back();
    const std::size_t q = cfg.block_size(cfg.blocks());
    cache.features.assign(last.out_channels, 0.0);
    for (std::size_t c = 0; c < last.out_channels; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < q * q; ++i) s += current[c * q * q + i];
        cache.features[c] = s / static_cast<double>(q * q);
    }
    cache.logits.assign(cfg.num_classes, 0.0);
    for (std::size_t cls = 0; cls < cfg.num_classes; ++cls) {
        double s = params[model.fc_bias() + cls];
        for (std::size_t c = 0; c < last.out_channels; ++c)
            s += params[model.fc_weights() + cls * last.out_channels + c] * cache.features[c];
        cache.logits[cls] = s;
    }
    softmax(cache.logits, cache.probabilities);
}

ForwardCache forward(const Model& model, std::span<const double> input) {
    ForwardCache cache;
    forward(model, input, cache);
    return cache;
}

void backprop(const ForwardCache& cache, const Model& model, std::span<const double> logit_grad, Gradients& g) {
    if (cache.model != &model || cache.generation != model.generation())
        fail(ErrorCode::StaleCache, "forward cache was produced by a different model state");
    const auto& cfg = model.config();
    if (logit_grad.size() != cfg.num_classes) fail(ErrorCode::ShapeMismatch, "logit gradient has wrong length");
    const auto params = model.parameters();
    const std::size_t k = cfg.kernel;

    g.parameters.assign(params.size(), 0.0);
    g.regulated.resize(cfg.blocks());

    const auto& last = model.layout().back();
    const std::size_t C = last.out_channels;
    std::vector<double> dfeat(C, 0.0);
    for (std::size_t cls = 0; cls < cfg.num_classes; ++cls) {
        const double dl = logit_grad[cls];
        g.parameters[model.fc_bias() + cls] += dl;
        for (std::size_t c = 0; c < C; ++c) {
            g.parameters[model.fc_weights() + cls * C + c] += dl * cache.features[c];
            dfeat[c] += params[model.fc_weights() + cls * C + c] * dl;
        }
    }
    std::size_t q = cfg.block_size(cfg.blocks());
    auto& dpooled = g.scratch_upstream;
    dpooled.resize(C * q * q);
    for (std::size_t c = 0; c < C; ++c)
        std::fill_n(dpooled.begin() + static_cast<std::ptrdiff_t>(c * q * q), q * q,
                    dfeat[c] / static_cast<double>(q * q));

    for (std::size_t l = cfg.blocks(); l-- > 0;) {
        const auto& b = model.layout()[l];
        const auto& bc = cache.blocks[l];
        const std::size_t m = b.size;
        const std::size_t out = b.out_channels;
        q = m / cfg.pool;

        auto& dreg = g.regulated[l];
        dreg.assign(out * m * m, 0.0);
        const double area = static_cast<double>(cfg.pool * cfg.pool);
        for (std::size_t c = 0; c < out; ++c)
            for (std::size_t Y = 0; Y < q; ++Y)
                for (std::size_t X = 0; X < q; ++X) {
                    const double v = dpooled[(c * q + Y) * q + X] / area;
                    for (std::size_t dy = 0; dy < cfg.pool; ++dy)
                        for (std::size_t dx = 0; dx < cfg.pool; ++dx)
                            dreg[(c * m + Y * cfg.pool + dy) * m + X * cfg.pool + dx] = v;
                }

        auto& dz = g.scratch_delta;
        dz = dreg;
        if (cfg.use_cag) {
            std::vector<double> by_offset(m, 0.0);
            for (std::size_t c = 0; c < out; ++c)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        const std::size_t cell = (c * m + i) * m + j;
                        by_offset[i > j ? i - j : j - i] += dreg[cell] * bc.activation[cell];
                    }
            const auto cg = cag::param_gradients_by_offset(by_offset, model.cag_params(l), bc.mask);
            g.parameters[b.cag] += cg.alpha;
            g.parameters[b.cag + 1] += cg.beta;
            g.parameters[b.cag + 2] += cg.gamma;
            g.parameters[b.cag + 3] += cg.period;
            for (std::size_t c = 0; c < out; ++c)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < m; ++j) dz[(c * m + i) * m + j] *= bc.mask.profile[i > j ? i - j : j - i] + 1.0;
        }
        for (std::size_t cell = 0; cell < dz.size(); ++cell)
            if (!(bc.pre[cell] > 0.0)) dz[cell] = 0.0;

        const auto K = static_cast<Eigen::Index>(b.in_channels * k * k);
        const auto cells = static_cast<Eigen::Index>(m * m);
        const auto rows = static_cast<Eigen::Index>(out);
        const Eigen::Map<const RowMatrix> dzm(dz.data(), rows, cells);
        // Fixed summation order regardless of buffer alignment.
        for (std::size_t c = 0; c < out; ++c) {
            double sum = 0.0;
            for (std::size_t cell = 0; cell < m * m; ++cell) sum += dz[c * m * m + cell];
            g.parameters[b.bias + c] += sum;
        }
        Eigen::Map<RowMatrix>(g.parameters.data() + b.weights, rows, K).noalias() +=
            dzm * Eigen::Map<const RowMatrix>(bc.columns.data(), K, cells).transpose();

        if (l == 0) break;
        g.scratch_columns.resize(static_cast<std::size_t>(K * cells));
        Eigen::Map<RowMatrix> dcols(g.scratch_columns.data(), K, cells);
        dcols.noalias() = Eigen::Map<const RowMatrix>(params.data() + b.weights, rows, K).transpose() * dzm;
        dpooled.resize(b.in_channels * m * m);
        col2im(dcols.data(), b.in_channels, m, k, dpooled.data());
    }
}

Gradients backprop(const ForwardCache& cache, const Model& model, std::span<const double> logit_grad) {
    Gradients g;
    backprop(cache, model, logit_grad, g);
    return g;
}

Gradients backward(const ForwardCache& cache, const Model& model, std::size_t target) {
    if (target >= cache.probabilities.size()) fail(ErrorCode::InvalidArgument, "target class out of range");
    std::vector<double> dl = cache.probabilities;
    dl[target] -= 1.0;
    return backprop(cache, model, dl);
}

double cross_entropy(const ForwardCache& cache, std::size_t target) {
    const double top = *std::max_element(cache.logits.begin(), cache.logits.end());
    double sum = 0.0;
    for (double z : cache.logits) sum += std::exp(z - top);
    return top + std::log(sum) - cache.logits.at(target);
}

std::size_t predict(const Model& model, std::span<const double> input) {
    const auto cache = forward(model, input);
    return static_cast<std::size_t>(
        std::max_element(cache.probabilities.begin(), cache.probabilities.end()) - cache.probabilities.begin());
}

Checkpoint train(std::span<const Example> dataset, const ModelConfig& config) {
    if (dataset.empty()) fail(ErrorCode::EmptyDataset, "training set is empty");
    config.validate();
    const std::size_t expected = config.input_channels * config.input_size * config.input_size;
    for (const auto& ex : dataset) {
        if (ex.input.size() != expected) fail(ErrorCode::ShapeMismatch, "training example has the wrong shape");
        if (ex.label >= config.num_classes) fail(ErrorCode::InvalidArgument, "training label out of range");
    }

    Checkpoint cp{Model(config), TrainingLog{}};
    Model& model = cp.model;
    cp.log.seed = config.seed;
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> velocity(model.parameters().size(), 0.0);
    std::vector<double> grad(velocity.size());
    ForwardCache cache;
    Gradients g;
    std::vector<double> logit_grad;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = start; i < stop; ++i) {
                const auto& ex = dataset[order[i]];
                forward(model, ex.input, cache);
                const double loss = cross_entropy(cache, ex.label);
                if (!std::isfinite(loss))
                    fail(ErrorCode::DivergedLoss, "loss became non-finite in epoch " + std::to_string(epoch));
                epoch_loss += loss;
                logit_grad = cache.probabilities;
                logit_grad[ex.label] -= 1.0;
                backprop(cache, model, logit_grad, g);
                for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += g.parameters[p];
            }
            const double scale = 1.0 / static_cast<double>(stop - start);
            if (!config.use_cag)
                for (const auto& b : model.layout()) std::fill_n(grad.begin() + static_cast<std::ptrdiff_t>(b.cag), 4, 0.0);
            auto params = model.mutable_parameters();
            for (std::size_t p = 0; p < grad.size(); ++p) {
                velocity[p] = config.momentum * velocity[p] + grad[p] * scale;
                params[p] -= config.learning_rate * velocity[p];
            }
            for (std::size_t l = 0; l < model.layout().size(); ++l) model.set_cag_params(l, model.cag_params(l));
        }
        epoch_loss /= static_cast<double>(dataset.size());
        if (!std::isfinite(epoch_loss)) fail(ErrorCode::DivergedLoss, "epoch loss is non-finite");
        cp.log.epoch_loss.push_back(epoch_loss);
        cp.log.epochs_completed = epoch + 1;
    }
    return cp;
}

std::vector<std::uint8_t> save_checkpoint(const Checkpoint& checkpoint) {
    ByteWriter out;
    out.magic("CCKP");
    out.u32(kCheckpointVersion);
    out.string(checkpoint.model.config().serialize());
    const auto params = checkpoint.model.parameters();
    out.u64(params.size());
    for (double v : params) out.f64(v);
    out.u64(checkpoint.log.epochs_completed);
    out.u64(checkpoint.log.seed);
    out.u64(checkpoint.log.epoch_loss.size());
    for (double v : checkpoint.log.epoch_loss) out.f64(v);
    return out.data();
}

Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8) fail(ErrorCode::CorruptCheckpoint, "checkpoint stream is truncated");
    ByteReader in({bytes.begin(), bytes.end()}, "checkpoint");
    if (!in.magic("CCKP")) fail(ErrorCode::VersionMismatch, "not a CCKP checkpoint");
    const auto version = in.u32();
    if (version != kCheckpointVersion)
        fail(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + " is not supported");
    ModelConfig config;
    try {
        config = ModelConfig::deserialize(in.string());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptCheckpoint) throw;
        fail(ErrorCode::CorruptCheckpoint, e.what());
    }
    const auto count = in.u64();
    if (count > in.remaining() / 8) fail(ErrorCode::CorruptCheckpoint, "parameter block is truncated");
    std::vector<double> params(count);
    for (double& v : params) v = in.f64();
    TrainingLog log;
    log.epochs_completed = in.u64();
    log.seed = in.u64();
    const auto losses = in.u64();
    if (losses > in.remaining() / 8) fail(ErrorCode::CorruptCheckpoint, "loss history is truncated");
    log.epoch_loss.resize(losses);
    for (double& v : log.epoch_loss) v = in.f64();
    if (in.remaining() != 0) fail(ErrorCode::CorruptCheckpoint, "trailing bytes after checkpoint");
    try {
        return Checkpoint{Model(std::move(config), std::move(params)), std::move(log)};
    } catch (const Error& e) {
        fail(ErrorCode::CorruptCheckpoint, e.what());
    }
}

}  // namespace collo
