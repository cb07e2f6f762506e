#include "mixscan/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "mixscan/error.hpp"
#include "mixscan/rng.hpp"

using json = nlohmann::json;

namespace mixscan {

void LabeledCorpus::append(const FeatureRow& row, int label, std::string txid) {
    rows.push_back(row);
    labels.push_back(label);
    if (!txid.empty() || !txids.empty()) {
        txids.resize(rows.size() - 1);
        txids.push_back(std::move(txid));
    }
}

std::size_t LabeledCorpus::class_count() const {
    bool seen[2] = {false, false};
    for (int l : labels) {
        seen[l == kLabelPositive ? 1 : 0] = true;
    }
    return static_cast<std::size_t>(seen[0]) + static_cast<std::size_t>(seen[1]);
}

std::pair<LabeledCorpus, LabeledCorpus> split_train_test(const LabeledCorpus& corpus,
                                                         double train_fraction,
                                                         std::uint64_t seed,
                                                         bool* warned_empty_test) {
    if (corpus.size() == 0) {
        raise(ErrorCode::EmptyCorpus, "cannot split an empty corpus");
    }
    if (train_fraction < 0.0 || train_fraction > 1.0) {
        raise(ErrorCode::Config, "train fraction must be in [0, 1]");
    }
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    shuffle_vec(order, rng);

    std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(corpus.size())));
    n_train = std::min(n_train, corpus.size());

    bool has_txids = !corpus.txids.empty();
    LabeledCorpus train, test;
    for (std::size_t i = 0; i < order.size(); ++i) {
        LabeledCorpus& dst = i < n_train ? train : test;
        std::size_t src = order[i];
        dst.append(corpus.rows[src], corpus.labels[src], has_txids ? corpus.txids[src] : "");
    }
    if (test.size() == 0) {
        if (warned_empty_test != nullptr) {
            *warned_empty_test = true;
        }
        std::fprintf(stderr, "warning: train fraction %.3f leaves an empty test set\n",
                     train_fraction);
    }
    return {std::move(train), std::move(test)};
}

int Tree::predict(const FeatureRow& row) const {
    std::int32_t node = 0;
    for (;;) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        if (n.feature < 0) {
            return n.label;
        }
        node = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
}

std::pair<std::size_t, std::size_t> Forest::votes(const FeatureRow& row) const {
    std::size_t pos = 0;
    for (const Tree& tree : trees) {
        pos += tree.predict(row) == kLabelPositive ? 1U : 0U;
    }
    return {trees.size() - pos, pos};
}

int Forest::predict(const FeatureRow& row) const {
    auto [neg, pos] = votes(row);
    return pos > neg ? kLabelPositive : kLabelNegative;
}

namespace {

struct TreeBuilder {
    const std::vector<FeatureRow>& rows;
    const std::vector<int>& labels;
    const TrainConfig& cfg;
    std::mt19937_64 rng;
    Tree tree;

    // (value, is_positive) pairs reused across nodes.
    std::vector<std::pair<double, int>> scratch;

    std::int32_t make_leaf(std::size_t n_pos, std::size_t n_total) {
        TreeNode leaf;
        leaf.label = n_pos * 2 > n_total ? kLabelPositive : kLabelNegative;
        tree.nodes.push_back(leaf);
        return static_cast<std::int32_t>(tree.nodes.size() - 1);
    }

    std::int32_t build(std::vector<std::uint32_t>& samples, std::size_t depth) {
        std::size_t n = samples.size();
        std::size_t n_pos = 0;
        for (std::uint32_t idx : samples) {
            n_pos += labels[idx] == kLabelPositive ? 1U : 0U;
        }
        bool pure = n_pos == 0 || n_pos == n;
        bool depth_capped = cfg.max_depth != 0 && depth >= cfg.max_depth;
        if (pure || depth_capped || n < 2 * cfg.min_leaf || n < 2) {
            return make_leaf(n_pos, n);
        }

        // Candidate features in random order. Constant features do not
        // consume the mtry budget (as in the usual RF splitters); among
        // equal gains the lowest feature index and threshold win.
        std::array<std::size_t, kFeatureCount> order{};
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = 0; i + 1 < kFeatureCount; ++i) {
            std::size_t j = i + static_cast<std::size_t>(bounded(rng, kFeatureCount - i));
            std::swap(order[i], order[j]);
        }

        double parent_impurity = gini(n_pos, n);
        double best_gain = 0.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        bool found = false;

        std::size_t evaluated = 0;
        for (std::size_t f : order) {
            if (evaluated >= cfg.mtry) {
                break;
            }
            scratch.clear();
            for (std::uint32_t idx : samples) {
                scratch.emplace_back(rows[idx][f], labels[idx] == kLabelPositive ? 1 : 0);
            }
            std::sort(scratch.begin(), scratch.end());
            if (scratch.front().first == scratch.back().first) {
                continue;  // constant here
            }
            ++evaluated;
            std::size_t left_n = 0;
            std::size_t left_pos = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                ++left_n;
                left_pos += static_cast<std::size_t>(scratch[i].second);
                if (scratch[i].first == scratch[i + 1].first) {
                    continue;
                }
                if (left_n < cfg.min_leaf || n - left_n < cfg.min_leaf) {
                    continue;
                }
                double w_left = static_cast<double>(left_n) / static_cast<double>(n);
                double impurity = w_left * gini(left_pos, left_n) +
                                  (1.0 - w_left) * gini(n_pos - left_pos, n - left_n);
                double gain = parent_impurity - impurity;
                if (gain <= 1e-12) {
                    continue;
                }
                double threshold = midpoint(scratch[i].first, scratch[i + 1].first);
                bool better = !found || gain > best_gain + 1e-12;
                bool tied = found && !better && gain > best_gain - 1e-12;
                if (better || (tied && (f < best_feature ||
                                        (f == best_feature && threshold < best_threshold)))) {
                    best_gain = std::max(best_gain, gain);
                    best_feature = f;
                    best_threshold = threshold;
                    found = true;
                }
            }
        }
        if (!found) {
            return make_leaf(n_pos, n);
        }

        std::vector<std::uint32_t> left, right;
        for (std::uint32_t idx : samples) {
            (rows[idx][best_feature] <= best_threshold ? left : right).push_back(idx);
        }
        samples.clear();
        samples.shrink_to_fit();

        TreeNode node;
        node.feature = static_cast<std::int16_t>(best_feature);
        node.threshold = best_threshold;
        tree.nodes.push_back(node);
        std::size_t self = tree.nodes.size() - 1;
        std::int32_t l = build(left, depth + 1);
        std::int32_t r = build(right, depth + 1);
        tree.nodes[self].left = l;
        tree.nodes[self].right = r;
        return static_cast<std::int32_t>(self);
    }

    static double gini(std::size_t n_pos, std::size_t n) {
        double p = static_cast<double>(n_pos) / static_cast<double>(n);
        return 2.0 * p * (1.0 - p);
    }

    static double midpoint(double lo, double hi) {
        double mid = lo + (hi - lo) / 2.0;
        // Guard against mid == hi after rounding; split must keep hi right.
        return mid < hi ? mid : lo;
    }
};

}  // namespace

Forest train_forest(const LabeledCorpus& train, const TrainConfig& cfg) {
    if (cfg.n_trees < 1) {
        raise(ErrorCode::Config, "n_trees must be >= 1");
    }
    if (cfg.mtry < 1 || cfg.mtry > kFeatureCount) {
        raise(ErrorCode::Config, "mtry must be in [1, 8]");
    }
    if (cfg.min_leaf < 1) {
        raise(ErrorCode::Config, "min_leaf must be >= 1");
    }
    if (train.class_count() < 2) {
        raise(ErrorCode::SingleClassCorpus, "training corpus has a single class");
    }

    Forest forest;
    forest.config = cfg;
    forest.trees.resize(cfg.n_trees);
    forest.in_bag.assign(cfg.n_trees, std::vector<std::uint8_t>(train.size(), 0));

    std::size_t n = train.size();
    auto build_one = [&](std::size_t t) {
        std::mt19937_64 rng(derive_seed(cfg.rng_seed, t));
        std::vector<std::uint32_t> samples(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t idx = static_cast<std::uint32_t>(bounded(rng, n));
            samples[i] = idx;
            forest.in_bag[t][idx] = 1;
        }
        TreeBuilder builder{train.rows, train.labels, cfg, rng, {}, {}};
        builder.build(samples, 0);
        forest.trees[t] = std::move(builder.tree);
    };

    std::size_t n_threads = cfg.n_threads != 0 ? cfg.n_threads : std::thread::hardware_concurrency();
    n_threads = std::max<std::size_t>(1, std::min(n_threads, cfg.n_trees));
    if (n_threads == 1) {
        for (std::size_t t = 0; t < cfg.n_trees; ++t) {
            build_one(t);
        }
    } else {
        std::vector<std::thread> workers;
        std::size_t per = (cfg.n_trees + n_threads - 1) / n_threads;
        for (std::size_t w = 0; w < n_threads; ++w) {
            std::size_t lo = w * per;
            std::size_t hi = std::min(cfg.n_trees, lo + per);
            if (lo >= hi) {
                break;
            }
            workers.emplace_back([&, lo, hi] {
                for (std::size_t t = lo; t < hi; ++t) {
                    build_one(t);
                }
            });
        }
        for (std::thread& th : workers) {
            th.join();
        }
    }
    return forest;
}

double oob_error(const Forest& forest, const LabeledCorpus& train) {
    if (forest.in_bag.empty()) {
        raise(ErrorCode::Config, "bootstrap identities missing (loaded model?)");
    }
    std::size_t considered = 0;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        std::size_t pos = 0;
        std::size_t total = 0;
        for (std::size_t t = 0; t < forest.trees.size(); ++t) {
            if (forest.in_bag[t][i]) {
                continue;
            }
            ++total;
            pos += forest.trees[t].predict(train.rows[i]) == kLabelPositive ? 1U : 0U;
        }
        if (total == 0) {
            continue;  // point appeared in every bootstrap
        }
        int vote = pos * 2 > total ? kLabelPositive : kLabelNegative;
        ++considered;
        wrong += vote != train.labels[i] ? 1U : 0U;
    }
    return considered == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(considered);
}

double EvalMetrics::accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
}

double EvalMetrics::fpr() const {
    return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tn);
}

double EvalMetrics::fnr() const {
    return fn + tp == 0 ? 0.0 : static_cast<double>(fn) / static_cast<double>(fn + tp);
}

EvalMetrics confusion(const std::vector<int>& truth, const std::vector<int>& predicted) {
    EvalMetrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        bool actual = truth[i] == kLabelPositive;
        bool pred = predicted[i] == kLabelPositive;
        if (actual && pred) {
            ++m.tp;
        } else if (actual && !pred) {
            ++m.fn;
        } else if (!actual && pred) {
            ++m.fp;
        } else {
            ++m.tn;
        }
    }
    return m;
}

EvalMetrics evaluate(const Forest& forest, const LabeledCorpus& test) {
    std::vector<int> preds;
    preds.reserve(test.size());
    for (const FeatureRow& row : test.rows) {
        preds.push_back(forest.predict(row));
    }
    return confusion(test.labels, preds);
}

std::vector<double> permutation_importance(const Forest& forest, const LabeledCorpus& heldout,
                                           std::uint64_t seed) {
    double baseline = evaluate(forest, heldout).accuracy();
    std::vector<double> importance(kFeatureCount, 0.0);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        std::vector<std::size_t> perm(heldout.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::mt19937_64 rng(derive_seed(seed, f));
        shuffle_vec(perm, rng);

        std::vector<int> preds;
        preds.reserve(heldout.size());
        FeatureRow row;
        for (std::size_t i = 0; i < heldout.size(); ++i) {
            row = heldout.rows[i];
            row[f] = heldout.rows[perm[i]][f];
            preds.push_back(forest.predict(row));
        }
        importance[f] = baseline - confusion(heldout.labels, preds).accuracy();
    }
    return importance;
}

void save_forest(const Forest& forest, const std::string& path) {
    json model;
    model["format_version"] = 1;
    model["n_trees"] = forest.config.n_trees;
    model["mtry"] = forest.config.mtry;
    model["seed"] = forest.config.rng_seed;
    json names = json::array();
    for (const char* name : kFeatureNames) {
        names.push_back(name);
    }
    model["feature_names"] = std::move(names);
    json trees = json::array();
    for (const Tree& tree : forest.trees) {
        json nodes = json::array();
        for (const TreeNode& n : tree.nodes) {
            nodes.push_back({n.feature, n.label, n.threshold, n.left, n.right});
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    model["trees"] = std::move(trees);

    std::ofstream out(path);
    if (!out) {
        raise(ErrorCode::Io, "cannot write model file: " + path);
    }
    out << model.dump() << "\n";
}

Forest load_forest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::Io, "cannot open model file: " + path);
    }
    json model = json::parse(in, nullptr, false);
    if (model.is_discarded() || !model.is_object()) {
        raise(ErrorCode::MalformedJson, "model file is not a JSON object: " + path);
    }
    if (model.value("format_version", 0) != 1) {
        raise(ErrorCode::Config, "unsupported model format version in " + path);
    }
    Forest forest;
    forest.config.n_trees = model.at("n_trees").get<std::size_t>();
    forest.config.mtry = model.at("mtry").get<std::size_t>();
    forest.config.rng_seed = model.at("seed").get<std::uint64_t>();
    for (const json& jt : model.at("trees")) {
        Tree tree;
        for (const json& jn : jt.at("nodes")) {
            TreeNode n;
            n.feature = jn.at(0).get<std::int16_t>();
            n.label = jn.at(1).get<std::int8_t>();
            n.threshold = jn.at(2).get<double>();
            n.left = jn.at(3).get<std::int32_t>();
            n.right = jn.at(4).get<std::int32_t>();
            tree.nodes.push_back(n);
        }
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

}  // namespace mixscan
