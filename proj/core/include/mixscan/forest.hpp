#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mixscan/wasabi.hpp"

namespace mixscan {

inline constexpr int kLabelNegative = 0;  // non-wasabi
inline constexpr int kLabelPositive = 1;  // wasabi

using FeatureRow = std::array<double, kFeatureCount>;

struct LabeledCorpus {
    std::vector<FeatureRow> rows;
    std::vector<int> labels;
    std::vector<std::string> txids;  // optional, parallel to rows when present

    std::size_t size() const { return rows.size(); }
    void append(const FeatureRow& row, int label, std::string txid = {});
    std::size_t class_count() const;
};

struct TrainConfig {
    std::size_t n_trees = 500;
    std::size_t mtry = 2;
    std::uint64_t rng_seed = 0;
    std::size_t max_depth = 0;  // 0 = unbounded
    std::size_t min_leaf = 1;
    std::size_t n_threads = 0;  // 0 = hardware concurrency
};

// Reproducible shuffle split. Throws EmptyCorpus; warns (and sets
// *warned_empty_test) when the test side comes out empty.
std::pair<LabeledCorpus, LabeledCorpus> split_train_test(const LabeledCorpus& corpus,
                                                         double train_fraction,
                                                         std::uint64_t seed,
                                                         bool* warned_empty_test = nullptr);

struct TreeNode {
    std::int16_t feature = -1;  // -1 marks a leaf
    std::int8_t label = kLabelNegative;
    double threshold = 0.0;
    std::int32_t left = -1;   // row[feature] <= threshold
    std::int32_t right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;

    int predict(const FeatureRow& row) const;
};

struct Forest {
    TrainConfig config;
    std::vector<Tree> trees;
    // Per tree: was train row i drawn into the bootstrap? Retained for
    // out-of-bag scoring; not serialized.
    std::vector<std::vector<std::uint8_t>> in_bag;

    // Majority vote; ties go to the negative class.
    int predict(const FeatureRow& row) const;
    std::pair<std::size_t, std::size_t> votes(const FeatureRow& row) const;  // (neg, pos)
};

// Bagged binary decision forest: bootstrap samples of |train| with
// replacement, mtry candidate features per node, best Gini split with
// deterministic first-feature/lowest-threshold tie-breaking.
Forest train_forest(const LabeledCorpus& train, const TrainConfig& cfg);

// Misclassified fraction voting only over trees whose bootstrap excluded
// the point; points included in every bootstrap leave the denominator.
double oob_error(const Forest& forest, const LabeledCorpus& train);

struct EvalMetrics {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    double accuracy() const;
    double fpr() const;  // FP / (FP + TN)
    double fnr() const;  // FN / (FN + TP)
};

EvalMetrics evaluate(const Forest& forest, const LabeledCorpus& test);
EvalMetrics confusion(const std::vector<int>& truth, const std::vector<int>& predicted);

// Accuracy drop on held-out data when one feature column is shuffled.
std::vector<double> permutation_importance(const Forest& forest, const LabeledCorpus& heldout,
                                           std::uint64_t seed);

// Versioned JSON model dump; bootstrap identities are not persisted.
void save_forest(const Forest& forest, const std::string& path);
Forest load_forest(const std::string& path);

}  // namespace mixscan
