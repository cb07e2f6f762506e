#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mixscan/tx.hpp"

namespace mixscan {

struct OutPoint {
    std::string txid;
    std::uint32_t vout = 0;

    bool operator==(const OutPoint&) const = default;
};

struct OutPointHash {
    std::size_t operator()(const OutPoint& o) const noexcept {
        std::size_t h = std::hash<std::string>{}(o.txid);
        return h ^ (static_cast<std::size_t>(o.vout) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    }
};

struct UnresolvedInput {
    std::string txid;  // spending tx
    std::size_t input_index = 0;
    OutPoint missing;
};

// Chronologically ordered transaction collection with spent and output
// lookups. Built once by a single sequential pass; immutable afterwards
// and safe to share across concurrent readers.
class ChainStore {
public:
    const std::vector<Transaction>& transactions() const { return txs_; }
    std::size_t size() const { return txs_.size(); }

    const Transaction* find(std::string_view txid) const;
    bool contains(std::string_view txid) const { return find(txid) != nullptr; }

    // Referenced output of `input`. resolve_input throws UnknownOutpoint.
    const TxOutput& resolve_input(const TxInput& input) const;
    const TxOutput* try_resolve(const TxInput& input) const;

    // Transaction consuming `out`, nullptr while unspent.
    const Transaction* spending_tx(const OutPoint& out) const;

    const std::vector<UnresolvedInput>& unresolved() const { return unresolved_; }
    const std::map<std::uint32_t, std::int64_t>& height_times() const { return height_times_; }

    // Resolved input sum minus output sum; nullopt when any input is
    // unresolved. Throws on negative fee (corrupt feed).
    std::optional<Amount> fee(const Transaction& tx) const;
    Amount total_fees() const;

private:
    friend class ChainStoreBuilder;

    std::vector<Transaction> txs_;
    std::unordered_map<std::string, std::uint32_t> tx_index_;
    std::unordered_map<OutPoint, std::uint32_t, OutPointHash> spent_;
    std::vector<UnresolvedInput> unresolved_;
    std::map<std::uint32_t, std::int64_t> height_times_;
};

// Streaming construction. add() enforces height order, txid uniqueness
// and single-spending; unknown outpoints are collected into the
// unresolved report rather than rejected.
class ChainStoreBuilder {
public:
    void add(Transaction tx);
    ChainStore finish();

private:
    ChainStore store_;
    bool done_ = false;
};

ChainStore build_chain_store(std::vector<Transaction> records);
ChainStore load_chain_store(const std::string& feed_path);

}  // namespace mixscan
