#pragma once

#include <array>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mixscan/chain_store.hpp"

namespace mixscan {

struct Pool {
    Amount denomination;
    Amount premix_tolerance{110'000};  // 0.0011 BTC

    // Premix band is [denomination, denomination + tolerance]: premix
    // outputs carry the denomination plus a fee share, never less.
    bool in_premix_band(Amount v) const {
        return v >= denomination && v.sats <= denomination.sats + premix_tolerance.sats;
    }
};

// 0.001, 0.01, 0.05 and 0.5 BTC pools.
std::array<Pool, 4> standard_pools();

// Trimmed BTC string used in reports: "0.001", "0.01", "0.05", "0.5".
std::string pool_label(const Pool& pool);

// Exactly 5 inputs, 5 outputs, every output equal to the denomination.
bool is_whirlpool_shape(const Transaction& tx, const Pool& pool);

// Genesis candidates: whirlpool-shaped txs whose resolved inputs all lie
// in the premix band and none of whose inputs is an output of an earlier
// tx with the same property (all-premix, no remix inputs). Returned in
// chain order.
std::vector<std::string> find_genesis_mixes(const ChainStore& store, const Pool& pool);

struct WhirlpoolTx {
    std::string txid;
    std::uint32_t height = 0;
    std::size_t pool_index = 0;
    std::vector<std::string> parents;  // remix source txids, input order
    std::size_t remix_input_count = 0;
    bool genesis = false;
};

struct WhirlpoolSet {
    std::vector<Pool> pools;
    std::vector<WhirlpoolTx> txs;  // chronological

    bool contains(const std::string& txid) const { return index_.count(txid) != 0; }
    const WhirlpoolTx* find(const std::string& txid) const;
    std::vector<std::string> pool_members(std::size_t pool_index) const;
    void add(WhirlpoolTx tx);

private:
    std::unordered_map<std::string, std::size_t> index_;
};

// Single chronological pass: a tx joins pool p's set iff it matches the
// whirlpool shape and is a genesis mix or spends an output of a tx
// already in the set. Equivalent to a breadth-first search from the
// genesis mixes restricted to shape-matching children.
WhirlpoolSet scan_whirlpool(const ChainStore& store, std::span<const Pool> pools,
                            const std::vector<std::vector<std::string>>& genesis_per_pool);

// Txs with at least one output spent as a premix (non-remix) input of a
// detected mix. Chain order.
std::vector<std::string> identify_tx0(const ChainStore& store, const WhirlpoolSet& wp);

// find_genesis_mixes + scan_whirlpool over the given pools.
WhirlpoolSet detect_samourai(const ChainStore& store, std::span<const Pool> pools);

// Override file, one "pool,txid" line per genesis mix (pool as trimmed
// BTC string). Result is aligned with `pools`.
std::vector<std::vector<std::string>> load_genesis_override(const std::string& path,
                                                            std::span<const Pool> pools);

}  // namespace mixscan
