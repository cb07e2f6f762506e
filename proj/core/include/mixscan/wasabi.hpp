#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <unordered_set>

#include "mixscan/chain_store.hpp"

namespace mixscan {

class EntityMap;

struct WcdhConfig {
    std::size_t min_equal_outputs = 10;
    Amount mode_center{10'000'000};    // 0.1 BTC
    Amount mode_tolerance{2'000'000};  // 0.02 BTC, inclusive band
    std::size_t min_unique_values = 2;
};

// Static-coordinator era rule: a coordinator address among the outputs
// plus at least three outputs sharing one identical value.
bool detect_wasabi_static(const Transaction& tx,
                          const std::unordered_set<std::string>& coordinator_addrs);

// Threshold heuristic over output-value multiplicities. True iff the most
// frequent output value has multiplicity m >= min_equal_outputs, lies
// within mode_center +/- mode_tolerance, at least min_unique_values output
// values occur exactly once, and the tx has at least m inputs. When
// several values tie for the maximal multiplicity, any of them within the
// band qualifies.
bool detect_wasabi_wcdh(const Transaction& tx, const WcdhConfig& cfg = {});

inline constexpr std::size_t kFeatureCount = 8;
extern const std::array<const char*, kFeatureCount> kFeatureNames;

struct FeatureVector {
    std::size_t num_uniq_output_val = 0;
    double ratio_num_input_num_output = 0.0;
    Amount min_output_val;
    Amount rng_output_val;
    double mean_dec_places = 0.0;
    std::size_t num_input_reuse = 0;
    double mean_output_cluster_size = 0.0;
    bool is_native_segwit = false;

    std::array<double, kFeatureCount> as_row() const;
};

// Transaction-level features plus the entity size of each output address.
// Throws UnknownOutpoint when an input cannot be resolved.
FeatureVector extract_features(const Transaction& tx, const ChainStore& store,
                               const EntityMap& entities);

// Plain text file, one coordinator address per line; blank lines and
// '#' comments skipped.
std::unordered_set<std::string> load_coordinator_addrs(const std::string& path);

}  // namespace mixscan
