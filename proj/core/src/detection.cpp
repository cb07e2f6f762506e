#include "mixscan/detection.hpp"

namespace mixscan {

std::unordered_set<std::string> DetectionSet::coinjoin_txids() const {
    std::unordered_set<std::string> all = wasabi_wcdh;
    all.insert(wasabi_static.begin(), wasabi_static.end());
    for (const WhirlpoolTx& tx : whirlpool.txs) {
        all.insert(tx.txid);
    }
    return all;
}

std::vector<std::string> DetectionSet::wasabi_txids_in_order(const ChainStore& store) const {
    std::vector<std::string> out;
    for (const Transaction& tx : store.transactions()) {
        if (is_wasabi(tx.txid)) {
            out.push_back(tx.txid);
        }
    }
    return out;
}

DetectionSet detect_all(const ChainStore& store, const DetectionOptions& options) {
    DetectionSet result;
    for (const Transaction& tx : store.transactions()) {
        if (!options.coordinator_addrs.empty() &&
            detect_wasabi_static(tx, options.coordinator_addrs)) {
            result.wasabi_static.insert(tx.txid);
        }
        if (detect_wasabi_wcdh(tx, options.wcdh)) {
            result.wasabi_wcdh.insert(tx.txid);
        }
    }
    if (!options.genesis_override.empty()) {
        result.whirlpool = scan_whirlpool(store, options.pools, options.genesis_override);
    } else {
        result.whirlpool = detect_samourai(store, options.pools);
    }
    return result;
}

}  // namespace mixscan
