#pragma once

#include <string>
#include <vector>

#include "mixscan/chain_store.hpp"
#include "mixscan/tx.hpp"

namespace testutil {

inline std::string hex_id(char c) { return std::string(64, c); }

inline mixscan::TxOutput out(std::uint64_t sats, std::string addr,
                             mixscan::ScriptClass script = mixscan::ScriptClass::NativeSegwitP2wpkh) {
    return {mixscan::Amount{sats}, std::move(addr), script};
}

inline mixscan::TxInput in(std::string prev, std::uint32_t vout) { return {std::move(prev), vout}; }

inline mixscan::Transaction tx(std::string txid, std::uint32_t height, std::int64_t time,
                               std::vector<mixscan::TxInput> inputs,
                               std::vector<mixscan::TxOutput> outputs) {
    mixscan::Transaction t;
    t.txid = std::move(txid);
    t.height = height;
    t.timestamp = time;
    t.inputs = std::move(inputs);
    t.outputs = std::move(outputs);
    return t;
}

// A root spending an outpoint nothing provides; lands in the unresolved report.
inline mixscan::Transaction root_tx(std::string txid, std::uint32_t height, std::int64_t time,
                                    std::vector<mixscan::TxOutput> outputs) {
    return tx(std::move(txid), height, time, {in(hex_id('e'), 0)}, std::move(outputs));
}

}  // namespace testutil
