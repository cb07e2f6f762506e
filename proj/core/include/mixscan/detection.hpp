#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "mixscan/chain_store.hpp"
#include "mixscan/wasabi.hpp"
#include "mixscan/whirlpool.hpp"

namespace mixscan {

struct DetectionOptions {
    WcdhConfig wcdh;
    std::unordered_set<std::string> coordinator_addrs;  // static rule runs when non-empty
    std::vector<Pool> pools{standard_pools().begin(), standard_pools().end()};
    std::vector<std::vector<std::string>> genesis_override;  // empty -> find genesis mixes
};

// Detected CoinJoin txids per protocol. The Wasabi analysis set is the
// union of the static and WCDH rules; classifier output is kept apart
// and never feeds the flow metrics.
struct DetectionSet {
    std::unordered_set<std::string> wasabi_static;
    std::unordered_set<std::string> wasabi_wcdh;
    WhirlpoolSet whirlpool;

    bool is_wasabi(const std::string& txid) const {
        return wasabi_wcdh.count(txid) != 0 || wasabi_static.count(txid) != 0;
    }
    bool is_samourai(const std::string& txid) const { return whirlpool.contains(txid); }
    bool is_coinjoin(const std::string& txid) const {
        return is_wasabi(txid) || is_samourai(txid);
    }

    std::unordered_set<std::string> coinjoin_txids() const;
    std::vector<std::string> wasabi_txids_in_order(const ChainStore& store) const;
};

DetectionSet detect_all(const ChainStore& store, const DetectionOptions& options = {});

}  // namespace mixscan
