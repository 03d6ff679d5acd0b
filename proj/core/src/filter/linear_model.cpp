#include "overgen/filter/linear_model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "overgen/hashing.hpp"
#include "overgen/random.hpp"

namespace overgen::filter {

namespace {

constexpr std::string_view kMagic = "OVGFLTR1";
constexpr std::uint32_t kFormatVersion = 1;

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_loss(double p, bool y) {
    constexpr double eps = 1e-15;
    p = std::clamp(p, eps, 1.0 - eps);
    return y ? -std::log(p) : -std::log(1.0 - p);
}

class Writer {
public:
    template <class T>
    void put(T v) {
        static_assert(std::is_integral_v<T>);
        for (std::size_t i = 0; i < sizeof(T); ++i)
            out_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    }
    void put_double(double d) { put(std::bit_cast<std::uint64_t>(d)); }
    void raw(std::string_view s) { out_ += s; }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    template <class T>
    T get() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    double get_double() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > in_.size()) throw ModelFormatError("model artifact is truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace

LinearModel::LinearModel(FeatureConfig features, FilterMode mode, std::uint64_t seed)
    : features_(features), mode_(mode), seed_(seed), weights_(features.dim(), 0.0) {}

double LinearModel::score_features(const SparseVector& x) const {
    if (x.empty()) return base_rate_;
    return sigmoid(bias_ + dot(x, weights_));
}

double LinearModel::score_text(std::string_view formatted) const {
    return score_features(featurize(formatted, features_));
}

double LinearModel::score(const FilterInput& input) const { return score_text(format_filter_input(input)); }

std::string LinearModel::serialize() const {
    Writer w;
    w.raw(kMagic);
    w.put(kFormatVersion);
    w.put(kFeatureVersion);
    w.put(static_cast<std::uint8_t>(mode_ == FilterMode::full ? 0 : 1));
    w.put(seed_);
    w.put(features_.dim_log2);
    w.put(features_.word_ngram_max);
    w.put(features_.char_ngram_min);
    w.put(features_.char_ngram_max);
    w.put(static_cast<std::uint8_t>(features_.lowercase ? 1 : 0));
    w.put_double(bias_);
    w.put_double(base_rate_);
    const auto nnz = static_cast<std::uint64_t>(
        std::count_if(weights_.begin(), weights_.end(), [](double v) { return v != 0.0; }));
    w.put(nnz);
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (weights_[i] == 0.0) continue;
        w.put(static_cast<std::uint32_t>(i));
        w.put_double(weights_[i]);
    }
    return w.take();
}

LinearModel LinearModel::deserialize(std::string_view bytes) {
    Reader r(bytes);
    if (r.raw(kMagic.size()) != kMagic) throw ModelFormatError("not a filter model artifact");
    if (auto v = r.get<std::uint32_t>(); v != kFormatVersion)
        throw ModelFormatError("unsupported model format version " + std::to_string(v));
    if (auto v = r.get<std::uint32_t>(); v != kFeatureVersion)
        throw ModelFormatError("model uses feature version " + std::to_string(v) + ", this build has " +
                               std::to_string(kFeatureVersion));
    const auto mode_byte = r.get<std::uint8_t>();
    if (mode_byte > 1) throw ModelFormatError("bad mode byte");
    const auto seed = r.get<std::uint64_t>();
    FeatureConfig fc;
    fc.dim_log2 = r.get<std::uint32_t>();
    fc.word_ngram_max = r.get<std::uint32_t>();
    fc.char_ngram_min = r.get<std::uint32_t>();
    fc.char_ngram_max = r.get<std::uint32_t>();
    fc.lowercase = r.get<std::uint8_t>() != 0;
    if (fc.dim_log2 == 0 || fc.dim_log2 > 30) throw ModelFormatError("bad feature dimension");
    LinearModel m(fc, mode_byte == 0 ? FilterMode::full : FilterMode::explanation_only, seed);
    m.bias_ = r.get_double();
    m.base_rate_ = r.get_double();
    const auto nnz = r.get<std::uint64_t>();
    for (std::uint64_t k = 0; k < nnz; ++k) {
        const auto idx = r.get<std::uint32_t>();
        if (idx >= m.weights_.size()) throw ModelFormatError("weight index out of range");
        m.weights_[idx] = r.get_double();
    }
    if (!r.done()) throw ModelFormatError("trailing bytes after model weights");
    return m;
}

void LinearModel::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

LinearModel LinearModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

std::string LinearModel::digest() const { return sha256_hex(serialize()); }

struct Trainer {
    struct Row {
        SparseVector x;
        bool y;
    };

    static double mean_loss(const LinearModel& m, const std::vector<Row>& rows, double* accuracy) {
        double loss = 0.0;
        std::size_t correct = 0;
        for (const auto& r : rows) {
            const double p = sigmoid(m.bias_ + dot(r.x, m.weights_));
            loss += log_loss(p, r.y);
            correct += ((p >= 0.5) == r.y) ? 1 : 0;
        }
        if (accuracy) *accuracy = rows.empty() ? 0.0 : static_cast<double>(correct) / rows.size();
        return rows.empty() ? 0.0 : loss / rows.size();
    }

    static std::pair<LinearModel, TrainReport> run(const TrainingSet& set, const TrainConfig& cfg) {
        if (cfg.max_epochs < 1 || cfg.patience < 1 || cfg.learning_rate <= 0.0 || cfg.l2 < 0.0)
            throw PreconditionError("invalid training configuration");

        const bool has_dev = set.count(Split::dev) > 0;
        std::vector<Row> train, val;
        for (const auto& e : set.examples) {
            bool to_val = false;
            if (e.split == Split::dev) {
                to_val = true;
            } else if (e.split != Split::train) {
                continue;
            } else if (!has_dev) {
                to_val = Rng::derive(cfg.seed, "holdout/" + e.instance_id).uniform01() < cfg.validation_fraction;
            }
            (to_val ? val : train).push_back({featurize(format_filter_input(e.input), cfg.features), e.label});
        }
        const auto positives =
            static_cast<std::size_t>(std::count_if(train.begin(), train.end(), [](const Row& r) { return r.y; }));
        if (positives == 0 || positives == train.size())
            throw PreconditionError("training set has a single label; both classes are required");

        TrainReport report;
        report.n_train = train.size();
        report.n_validation = val.size();
        report.held_out_validation = !has_dev;
        report.base_rate = static_cast<double>(positives) / train.size();

        LinearModel model(cfg.features, set.mode, cfg.seed);
        model.base_rate_ = report.base_rate;
        model.bias_ = std::log(report.base_rate / (1.0 - report.base_rate));
        if (val.empty()) spdlog::warn("train-filter: no validation examples; early stopping uses training loss");
        const auto& monitor = val.empty() ? train : val;

        LinearModel best = model;
        double best_loss = mean_loss(model, monitor, nullptr);
        int since_best = 0;
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            Rng rng = Rng::derive(cfg.seed, "epoch/" + std::to_string(epoch));
            order.resize(train.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(order));
            const double lr = cfg.learning_rate / std::sqrt(static_cast<double>(epoch));
            for (auto i : order) {
                const auto& r = train[i];
                const double g = sigmoid(model.bias_ + dot(r.x, model.weights_)) - (r.y ? 1.0 : 0.0);
                model.bias_ -= lr * g;
                for (const auto& f : r.x) {
                    double& w = model.weights_[f.index];
                    w -= lr * (g * f.value + cfg.l2 * w);
                }
            }
            report.epochs_run = epoch;
            const double loss = mean_loss(model, monitor, nullptr);
            if (loss < best_loss) {
                best_loss = loss;
                best = model;
                report.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
        report.best_validation_loss = best_loss;
        mean_loss(best, monitor, &report.validation_accuracy);
        return {std::move(best), report};
    }
};

std::pair<LinearModel, TrainReport> train_builtin(const TrainingSet& set, const TrainConfig& config) {
    return Trainer::run(set, config);
}

}  // namespace overgen::filter
