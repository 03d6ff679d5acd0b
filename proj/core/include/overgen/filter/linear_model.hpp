#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "overgen/error.hpp"
#include "overgen/filter/features.hpp"
#include "overgen/filter/training_set.hpp"

namespace overgen::filter {

class ModelFormatError : public Error {
public:
    using Error::Error;
};

/// Logistic regression over hashed n-gram features of the formatted filter input.
class LinearModel {
public:
    LinearModel() = default;
    LinearModel(FeatureConfig features, FilterMode mode, std::uint64_t seed);

    const FeatureConfig& features() const noexcept { return features_; }
    FilterMode mode() const noexcept { return mode_; }
    std::uint64_t seed() const noexcept { return seed_; }
    double bias() const noexcept { return bias_; }
    double base_rate() const noexcept { return base_rate_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// Probability of acceptability. Text with no features gets the training base rate.
    double score_text(std::string_view formatted) const;
    double score_features(const SparseVector& x) const;
    double score(const FilterInput& input) const;

    /// Single-file binary artifact: magic, format and feature versions, mode, seed, feature config,
    /// bias, base rate and the non-zero weights. All integers little-endian.
    std::string serialize() const;
    static LinearModel deserialize(std::string_view bytes);
    void save(const std::filesystem::path& path) const;
    static LinearModel load(const std::filesystem::path& path);
    /// SHA-256 of serialize().
    std::string digest() const;

private:
    friend struct Trainer;
    FeatureConfig features_;
    FilterMode mode_ = FilterMode::full;
    std::uint64_t seed_ = 0;
    double bias_ = 0.0;
    double base_rate_ = 0.5;
    std::vector<double> weights_;
};

struct TrainConfig {
    FeatureConfig features;
    double learning_rate = 0.2;
    double l2 = 1e-6;
    int max_epochs = 200;
    int patience = 10;
    /// Share of training instances held out for validation when the set has no dev split.
    double validation_fraction = 0.1;
    std::uint64_t seed = 1;
};

struct TrainReport {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_validation_loss = 0.0;
    double validation_accuracy = 0.0;
    double base_rate = 0.0;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    /// True when validation came from held-out training instances rather than the dev split.
    bool held_out_validation = false;
};

/// SGD on cross-entropy with early stopping on validation loss. Trains on the train split and validates
/// on dev, or on a seeded instance-level hold-out when there is no dev split. Test examples are never
/// read. Throws PreconditionError if the training examples carry only one label.
std::pair<LinearModel, TrainReport> train_builtin(const TrainingSet& set, const TrainConfig& config);

}  // namespace overgen::filter
