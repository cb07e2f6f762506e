#include "mixscan/chain_store.hpp"

#include <utility>

#include "mixscan/error.hpp"
#include "mixscan/feed.hpp"

namespace mixscan {

const Transaction* ChainStore::find(std::string_view txid) const {
    auto it = tx_index_.find(std::string(txid));
    return it == tx_index_.end() ? nullptr : &txs_[it->second];
}

const TxOutput* ChainStore::try_resolve(const TxInput& input) const {
    const Transaction* prev = find(input.prev_txid);
    if (prev == nullptr || input.prev_vout >= prev->outputs.size()) {
        return nullptr;
    }
    return &prev->outputs[input.prev_vout];
}

const TxOutput& ChainStore::resolve_input(const TxInput& input) const {
    const TxOutput* out = try_resolve(input);
    if (out == nullptr) {
        raise(ErrorCode::UnknownOutpoint,
              input.prev_txid + ":" + std::to_string(input.prev_vout));
    }
    return *out;
}

const Transaction* ChainStore::spending_tx(const OutPoint& out) const {
    auto it = spent_.find(out);
    return it == spent_.end() ? nullptr : &txs_[it->second];
}

std::optional<Amount> ChainStore::fee(const Transaction& tx) const {
    Amount in_sum;
    for (const TxInput& in : tx.inputs) {
        const TxOutput* out = try_resolve(in);
        if (out == nullptr) {
            return std::nullopt;
        }
        in_sum += out->value;
    }
    Amount out_sum = tx.output_sum();
    if (in_sum < out_sum) {
        raise(ErrorCode::BadField, "negative fee in tx " + tx.txid);
    }
    return in_sum - out_sum;
}

Amount ChainStore::total_fees() const {
    Amount total;
    for (const Transaction& tx : txs_) {
        if (auto f = fee(tx)) {
            total += *f;
        }
    }
    return total;
}

void ChainStoreBuilder::add(Transaction tx) {
    if (!store_.txs_.empty() && tx.height < store_.txs_.back().height) {
        raise(ErrorCode::OutOfOrderHeight,
              "tx " + tx.txid + " at height " + std::to_string(tx.height) + " after height " +
                  std::to_string(store_.txs_.back().height));
    }
    if (store_.tx_index_.count(tx.txid) != 0) {
        raise(ErrorCode::DuplicateTx, tx.txid);
    }

    std::uint32_t idx = static_cast<std::uint32_t>(store_.txs_.size());
    for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
        const TxInput& in = tx.inputs[i];
        OutPoint out{in.prev_txid, in.prev_vout};
        auto prev_it = store_.tx_index_.find(in.prev_txid);
        bool resolvable = prev_it != store_.tx_index_.end() &&
                          in.prev_vout < store_.txs_[prev_it->second].outputs.size();
        if (!resolvable) {
            store_.unresolved_.push_back({tx.txid, i, out});
            continue;
        }
        auto [it, inserted] = store_.spent_.emplace(std::move(out), idx);
        if (!inserted) {
            raise(ErrorCode::DoubleSpend, in.prev_txid + ":" + std::to_string(in.prev_vout) +
                                              " spent by " + store_.txs_[it->second].txid +
                                              " and " + tx.txid);
        }
    }

    store_.height_times_.emplace(tx.height, tx.timestamp);
    store_.tx_index_.emplace(tx.txid, idx);
    store_.txs_.push_back(std::move(tx));
}

ChainStore ChainStoreBuilder::finish() {
    done_ = true;
    return std::move(store_);
}

ChainStore build_chain_store(std::vector<Transaction> records) {
    ChainStoreBuilder builder;
    for (Transaction& tx : records) {
        builder.add(std::move(tx));
    }
    return builder.finish();
}

ChainStore load_chain_store(const std::string& feed_path) {
    ChainStoreBuilder builder;
    for_each_record(feed_path, [&](Transaction&& tx) { builder.add(std::move(tx)); });
    return builder.finish();
}

}  // namespace mixscan
