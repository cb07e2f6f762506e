#include "mixscan/wasabi.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_map>

#include "mixscan/entity_graph.hpp"
#include "mixscan/error.hpp"

namespace mixscan {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "num_uniq_output_val",
    "ratio_num_input_num_output",
    "min_output_val",
    "rng_output_val",
    "mean_dec_places",
    "num_input_reuse",
    "mean_output_cluster_size",
    "is_native_segwit",
};

bool detect_wasabi_static(const Transaction& tx,
                          const std::unordered_set<std::string>& coordinator_addrs) {
    bool has_coordinator = false;
    std::unordered_map<std::uint64_t, std::size_t> counts;
    std::size_t max_count = 0;
    for (const TxOutput& out : tx.outputs) {
        if (!has_coordinator && coordinator_addrs.count(out.address) != 0) {
            has_coordinator = true;
        }
        max_count = std::max(max_count, ++counts[out.value.sats]);
    }
    return has_coordinator && max_count >= 3;
}

bool detect_wasabi_wcdh(const Transaction& tx, const WcdhConfig& cfg) {
    std::unordered_map<std::uint64_t, std::size_t> counts;
    for (const TxOutput& out : tx.outputs) {
        ++counts[out.value.sats];
    }

    std::size_t max_count = 0;
    std::size_t unique_values = 0;
    for (const auto& [value, count] : counts) {
        max_count = std::max(max_count, count);
        if (count == 1) {
            ++unique_values;
        }
    }
    if (max_count < cfg.min_equal_outputs) {
        return false;
    }
    if (unique_values < cfg.min_unique_values) {
        return false;
    }
    if (tx.inputs.size() < max_count) {
        return false;
    }
    // Any value at the maximal multiplicity may play the mode.
    std::uint64_t lo = cfg.mode_center.sats - cfg.mode_tolerance.sats;
    std::uint64_t hi = cfg.mode_center.sats + cfg.mode_tolerance.sats;
    for (const auto& [value, count] : counts) {
        if (count == max_count && value >= lo && value <= hi) {
            return true;
        }
    }
    return false;
}

std::array<double, kFeatureCount> FeatureVector::as_row() const {
    return {
        static_cast<double>(num_uniq_output_val),
        ratio_num_input_num_output,
        static_cast<double>(min_output_val.sats),
        static_cast<double>(rng_output_val.sats),
        mean_dec_places,
        static_cast<double>(num_input_reuse),
        mean_output_cluster_size,
        is_native_segwit ? 1.0 : 0.0,
    };
}

FeatureVector extract_features(const Transaction& tx, const ChainStore& store,
                               const EntityMap& entities) {
    FeatureVector fv;

    std::unordered_set<std::uint64_t> values;
    Amount min_val{UINT64_MAX};
    Amount max_val{0};
    int dec_places_sum = 0;
    double cluster_size_sum = 0.0;
    std::unordered_set<std::string_view> output_addrs;
    for (const TxOutput& out : tx.outputs) {
        values.insert(out.value.sats);
        min_val = std::min(min_val, out.value);
        max_val = std::max(max_val, out.value);
        dec_places_sum += decimal_places(out.value);
        cluster_size_sum += static_cast<double>(entities.size_of(out.address));
        output_addrs.insert(out.address);
    }

    bool all_segwit = std::all_of(tx.outputs.begin(), tx.outputs.end(), [](const TxOutput& o) {
        return o.script == ScriptClass::NativeSegwitP2wpkh;
    });
    std::unordered_set<std::string_view> reused;
    for (const TxInput& in : tx.inputs) {
        const TxOutput& src = store.resolve_input(in);
        if (src.script != ScriptClass::NativeSegwitP2wpkh) {
            all_segwit = false;
        }
        if (output_addrs.count(src.address) != 0) {
            reused.insert(src.address);
        }
    }

    fv.num_uniq_output_val = values.size();
    fv.ratio_num_input_num_output =
        static_cast<double>(tx.inputs.size()) / static_cast<double>(tx.outputs.size());
    fv.min_output_val = min_val;
    fv.rng_output_val = max_val - min_val;
    fv.mean_dec_places = static_cast<double>(dec_places_sum) / static_cast<double>(tx.outputs.size());
    fv.num_input_reuse = reused.size();
    fv.mean_output_cluster_size = cluster_size_sum / static_cast<double>(tx.outputs.size());
    fv.is_native_segwit = all_segwit;
    return fv;
}

std::unordered_set<std::string> load_coordinator_addrs(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::Io, "cannot open coordinator address file: " + path);
    }
    std::unordered_set<std::string> addrs;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        addrs.insert(line);
    }
    return addrs;
}

}  // namespace mixscan
