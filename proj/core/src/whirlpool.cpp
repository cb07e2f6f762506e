#include "mixscan/whirlpool.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "mixscan/error.hpp"

namespace mixscan {

std::array<Pool, 4> standard_pools() {
    return {Pool{Amount{100'000}}, Pool{Amount{1'000'000}}, Pool{Amount{5'000'000}},
            Pool{Amount{50'000'000}}};
}

std::string pool_label(const Pool& pool) { return format_btc_trimmed(pool.denomination); }

bool is_whirlpool_shape(const Transaction& tx, const Pool& pool) {
    if (tx.inputs.size() != 5 || tx.outputs.size() != 5) {
        return false;
    }
    return std::all_of(tx.outputs.begin(), tx.outputs.end(),
                       [&](const TxOutput& o) { return o.value == pool.denomination; });
}

std::vector<std::string> find_genesis_mixes(const ChainStore& store, const Pool& pool) {
    std::vector<std::string> genesis;
    std::unordered_set<std::string> candidates;  // shape + all inputs in premix band
    for (const Transaction& tx : store.transactions()) {
        if (!is_whirlpool_shape(tx, pool)) {
            continue;
        }
        bool all_premix_band = true;
        bool spends_candidate = false;
        for (const TxInput& in : tx.inputs) {
            const TxOutput* src = store.try_resolve(in);
            if (src == nullptr || !pool.in_premix_band(src->value)) {
                all_premix_band = false;
                break;
            }
            if (candidates.count(in.prev_txid) != 0) {
                spends_candidate = true;
            }
        }
        if (!all_premix_band) {
            continue;
        }
        if (!spends_candidate) {
            genesis.push_back(tx.txid);
        }
        candidates.insert(tx.txid);
    }
    return genesis;
}

const WhirlpoolTx* WhirlpoolSet::find(const std::string& txid) const {
    auto it = index_.find(txid);
    return it == index_.end() ? nullptr : &txs[it->second];
}

std::vector<std::string> WhirlpoolSet::pool_members(std::size_t pool_index) const {
    std::vector<std::string> members;
    for (const WhirlpoolTx& tx : txs) {
        if (tx.pool_index == pool_index) {
            members.push_back(tx.txid);
        }
    }
    return members;
}

void WhirlpoolSet::add(WhirlpoolTx tx) {
    index_.emplace(tx.txid, txs.size());
    txs.push_back(std::move(tx));
}

WhirlpoolSet scan_whirlpool(const ChainStore& store, std::span<const Pool> pools,
                            const std::vector<std::vector<std::string>>& genesis_per_pool) {
    WhirlpoolSet result;
    result.pools.assign(pools.begin(), pools.end());

    std::vector<std::unordered_set<std::string>> genesis(pools.size());
    for (std::size_t p = 0; p < pools.size() && p < genesis_per_pool.size(); ++p) {
        genesis[p].insert(genesis_per_pool[p].begin(), genesis_per_pool[p].end());
    }
    // Pool membership of detected txids; output values make pools disjoint.
    std::vector<std::unordered_set<std::string>> members(pools.size());

    for (const Transaction& tx : store.transactions()) {
        for (std::size_t p = 0; p < pools.size(); ++p) {
            if (!is_whirlpool_shape(tx, pools[p])) {
                continue;
            }
            WhirlpoolTx entry;
            for (const TxInput& in : tx.inputs) {
                if (members[p].count(in.prev_txid) != 0) {
                    entry.parents.push_back(in.prev_txid);
                }
            }
            entry.remix_input_count = entry.parents.size();
            entry.genesis = genesis[p].count(tx.txid) != 0;
            if (entry.parents.empty() && !entry.genesis) {
                continue;
            }
            entry.txid = tx.txid;
            entry.height = tx.height;
            entry.pool_index = p;
            members[p].insert(tx.txid);
            result.add(std::move(entry));
            break;
        }
    }
    return result;
}

std::vector<std::string> identify_tx0(const ChainStore& store, const WhirlpoolSet& wp) {
    std::vector<std::string> tx0s;
    std::unordered_set<std::string> seen;
    for (const WhirlpoolTx& mix : wp.txs) {
        const Transaction* tx = store.find(mix.txid);
        if (tx == nullptr) {
            continue;
        }
        std::unordered_set<std::string_view> remix_sources(mix.parents.begin(), mix.parents.end());
        for (const TxInput& in : tx->inputs) {
            if (remix_sources.count(in.prev_txid) != 0) {
                continue;  // remix input
            }
            if (store.contains(in.prev_txid) && seen.insert(in.prev_txid).second) {
                tx0s.push_back(in.prev_txid);
            }
        }
    }
    // Report in chain order regardless of discovery order.
    std::unordered_map<std::string_view, std::size_t> order;
    for (std::size_t i = 0; i < store.transactions().size(); ++i) {
        order.emplace(store.transactions()[i].txid, i);
    }
    std::sort(tx0s.begin(), tx0s.end(),
              [&](const std::string& a, const std::string& b) { return order[a] < order[b]; });
    return tx0s;
}

WhirlpoolSet detect_samourai(const ChainStore& store, std::span<const Pool> pools) {
    std::vector<std::vector<std::string>> genesis;
    genesis.reserve(pools.size());
    for (const Pool& pool : pools) {
        genesis.push_back(find_genesis_mixes(store, pool));
    }
    return scan_whirlpool(store, pools, genesis);
}

std::vector<std::vector<std::string>> load_genesis_override(const std::string& path,
                                                            std::span<const Pool> pools) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::Io, "cannot open genesis override file: " + path);
    }
    std::vector<std::vector<std::string>> genesis(pools.size());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            raise(ErrorCode::Config,
                  "genesis override line " + std::to_string(line_no) + ": expected pool,txid");
        }
        std::string pool_str = line.substr(0, comma);
        std::string txid = line.substr(comma + 1);
        if (!is_hex_txid(txid)) {
            raise(ErrorCode::BadTxid, "genesis override line " + std::to_string(line_no));
        }
        Amount denom = parse_btc(pool_str);
        bool matched = false;
        for (std::size_t p = 0; p < pools.size(); ++p) {
            if (pools[p].denomination == denom) {
                genesis[p].push_back(txid);
                matched = true;
                break;
            }
        }
        if (!matched) {
            raise(ErrorCode::Config, "genesis override line " + std::to_string(line_no) +
                                         ": unknown pool " + pool_str);
        }
    }
    return genesis;
}

}  // namespace mixscan
