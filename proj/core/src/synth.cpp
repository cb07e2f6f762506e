#include "mixscan/synth.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mixscan/error.hpp"
#include "mixscan/feed.hpp"
#include "mixscan/rng.hpp"

using json = nlohmann::json;

namespace mixscan::synth {

std::size_t GroundTruth::label_count(const std::string& label) const {
    std::size_t n = 0;
    for (const auto& [txid, l] : labels) {
        n += l == label ? 1U : 0U;
    }
    return n;
}

namespace {

constexpr std::uint64_t kFaucetOutput = 200'000'000'000'000ULL;  // 2M BTC
constexpr std::uint64_t kWcdhLow = 8'000'000;
constexpr std::uint64_t kWcdhHigh = 12'000'000;

struct Utxo {
    OutPoint out;
    Amount value;
    std::string address;
    ScriptClass script = ScriptClass::NativeSegwitP2wpkh;
};

TxInput to_input(const Utxo& u) { return {u.out.txid, u.out.vout}; }

class Generator {
public:
    explicit Generator(ScenarioPlan plan) : plan_(std::move(plan)), rng_(plan_.rng_seed) {}

    Corpus run() {
        corpus_.plan = plan_;
        if (plan_.star_fan_in > 0 && plan_.star_fan_in < 10) {
            raise(ErrorCode::Config, "star_fan_in must be 0 or >= 10");
        }
        if (plan_.collector_fan_out > plan_.star_fan_in && plan_.collector_fan_out > 0 &&
            plan_.star_fan_in == 0) {
            raise(ErrorCode::Config, "collector_fan_out needs star_fan_in outputs to collect");
        }

        emit_roots();
        for (std::size_t i = 0; i < plan_.wasabi_mixes; ++i) {
            emit_wasabi_mix(0, 0);
        }
        if (plan_.star_fan_in > 0) {
            emit_wasabi_mix(plan_.star_fan_in, 0);
        }
        for (std::size_t i = 0; i < plan_.exchange_direct; ++i) {
            emit_wasabi_mix(0, 1);
        }
        for (std::size_t i = 0; i < plan_.exchange_indirect; ++i) {
            emit_wasabi_mix(0, 2);
        }
        emit_near_misses();
        emit_pools();
        if (plan_.collector_fan_out > 0) {
            emit_collector();
        }
        for (std::size_t i = 0; i < plan_.background_payments; ++i) {
            emit_payment();
        }
        emit_exits();
        while (plan_.background_target != 0 && background_count_ < plan_.background_target) {
            emit_payment();
        }

        assign_schedule();
        finalize_truth();
        return std::move(corpus_);
    }

private:
    ScenarioPlan plan_;
    std::mt19937_64 rng_;
    Corpus corpus_;
    std::uint64_t txid_counter_ = 0;
    std::uint64_t addr_counter_ = 0;
    std::size_t background_count_ = 0;

    std::vector<Utxo> faucet_;
    std::vector<std::vector<Utxo>> actors_;

    struct Pending {
        Utxo utxo;
        std::string protocol;
        bool eligible = true;
    };
    std::vector<Pending> wasabi_eligible_;
    std::vector<Pending> wasabi_change_;
    std::vector<std::vector<Pending>> pool_mixed_;
    std::vector<std::vector<Utxo>> premix_stash_;
    std::vector<std::size_t> premix_head_;
    std::string exchange_address_;
    std::string coordinator_address_;

    std::string new_txid() {
        char buf[65];
        for (int w = 0; w < 4; ++w) {
            std::uint64_t h = mix64(txid_counter_ * 4 + static_cast<std::uint64_t>(w) + 1);
            std::snprintf(buf + w * 16, 17, "%016llx", static_cast<unsigned long long>(h));
        }
        ++txid_counter_;
        return std::string(buf, 64);
    }

    std::string new_address(const char* prefix) {
        return std::string(prefix) + std::to_string(addr_counter_++);
    }

    const Transaction& emit(std::vector<TxInput> inputs, std::vector<TxOutput> outputs,
                            const char* label, const std::string& pool = "") {
        Transaction tx;
        tx.txid = new_txid();
        tx.inputs = std::move(inputs);
        tx.outputs = std::move(outputs);
        corpus_.truth.labels.emplace(tx.txid, label);
        if (!pool.empty()) {
            corpus_.truth.pool_of.emplace(tx.txid, pool);
        }
        if (std::string_view(label) == "background") {
            ++background_count_;
        }
        corpus_.txs.push_back(std::move(tx));
        return corpus_.txs.back();
    }

    void emit_roots() {
        for (int r = 0; r < 2; ++r) {
            std::vector<TxOutput> outs;
            for (int i = 0; i < 4; ++i) {
                outs.push_back({Amount{kFaucetOutput}, new_address("fau"),
                                ScriptClass::NativeSegwitP2wpkh});
            }
            // External funding; these two inputs are the only unresolved
            // outpoints in a generated corpus.
            const Transaction& tx = emit({{new_txid(), 0}}, std::move(outs), "background");
            for (std::uint32_t v = 0; v < tx.outputs.size(); ++v) {
                faucet_.push_back({{tx.txid, v}, tx.outputs[v].value, tx.outputs[v].address,
                                   tx.outputs[v].script});
            }
        }
    }

    Utxo take_faucet(Amount at_least) {
        for (std::size_t i = faucet_.size(); i > 0; --i) {
            if (faucet_[i - 1].value >= at_least) {
                Utxo u = faucet_[i - 1];
                faucet_.erase(faucet_.begin() + static_cast<std::ptrdiff_t>(i - 1));
                return u;
            }
        }
        raise(ErrorCode::Config, "faucet exhausted; plan too large");
    }

    // One funding tx paying the requested values to fresh addresses, exact
    // change back to the faucet. Single-input, so it can never satisfy the
    // input-count clause of the Wasabi heuristic.
    std::vector<Utxo> fund(const std::vector<Amount>& values, ScriptClass script,
                           const char* prefix) {
        Amount total;
        for (Amount v : values) {
            total += v;
        }
        Utxo source = take_faucet(Amount{total.sats + 1});
        std::vector<TxOutput> outs;
        outs.reserve(values.size() + 1);
        for (Amount v : values) {
            outs.push_back({v, new_address(prefix), script});
        }
        outs.push_back({source.value - total, new_address("fau"), ScriptClass::NativeSegwitP2wpkh});
        const Transaction& tx = emit({to_input(source)}, std::move(outs), "background");
        std::vector<Utxo> utxos;
        for (std::uint32_t v = 0; v + 1 < tx.outputs.size(); ++v) {
            utxos.push_back({{tx.txid, v}, tx.outputs[v].value, tx.outputs[v].address,
                             tx.outputs[v].script});
        }
        faucet_.push_back({{tx.txid, static_cast<std::uint32_t>(tx.outputs.size() - 1)},
                           tx.outputs.back().value, tx.outputs.back().address,
                           tx.outputs.back().script});
        return utxos;
    }

    // Random k-way composition of `total` with positive parts.
    std::vector<Amount> partition(Amount total, std::size_t k) {
        std::vector<Amount> parts;
        if (k == 1) {
            parts.push_back(total);
            return parts;
        }
        std::unordered_set<std::uint64_t> cuts;
        while (cuts.size() < k - 1) {
            cuts.insert(1 + bounded(rng_, total.sats - 1));
        }
        std::vector<std::uint64_t> sorted(cuts.begin(), cuts.end());
        std::sort(sorted.begin(), sorted.end());
        std::uint64_t prev = 0;
        for (std::uint64_t c : sorted) {
            parts.push_back(Amount{c - prev});
            prev = c;
        }
        parts.push_back(Amount{total.sats - prev});
        return parts;
    }

    std::uint64_t change_value(const std::unordered_set<std::uint64_t>& taken) {
        for (;;) {
            std::uint64_t e = between(rng_, 3, 6);
            std::uint64_t scale = 1;
            for (std::uint64_t i = 0; i < e; ++i) {
                scale *= 10;
            }
            std::uint64_t v = between(rng_, 1, 4000) * scale + bounded(rng_, 97);
            if (v != 0 && taken.count(v) == 0 && (v < kWcdhLow || v > kWcdhHigh)) {
                return v;
            }
        }
    }

    // exchange_plant: 0 none, 1 direct exit to the exchange, 2 via one hop.
    void emit_wasabi_mix(std::size_t star_fan_in, int exchange_plant) {
        bool star = star_fan_in > 0;
        std::size_t m = star ? star_fan_in
                             : between(rng_, plan_.wasabi_mode_min, plan_.wasabi_mode_max);
        Amount mode{kWcdhLow + bounded(rng_, kWcdhHigh - kWcdhLow + 1)};

        std::unordered_set<std::uint64_t> taken{mode.sats};
        std::size_t n_changes = between(rng_, 2, 4);
        std::vector<Amount> changes;
        for (std::size_t i = 0; i < n_changes; ++i) {
            std::uint64_t v = change_value(taken);
            taken.insert(v);
            changes.push_back(Amount{v});
        }
        bool with_coordinator = !star && unit_real(rng_) < plan_.coordinator_output_probability;
        Amount coordinator_fee;
        if (with_coordinator) {
            coordinator_fee = Amount{change_value(taken)};
            taken.insert(coordinator_fee.sats);
            if (coordinator_address_.empty()) {
                coordinator_address_ = new_address("coord");
                corpus_.truth.coordinator_addresses.push_back(coordinator_address_);
            }
        }

        std::size_t r = 0;
        std::vector<Utxo> remix;
        if (!star && !wasabi_eligible_.empty() &&
            unit_real(rng_) < plan_.wasabi_remix_probability) {
            r = between(rng_, 1, std::min<std::size_t>(3, wasabi_eligible_.size()));
            for (std::size_t i = 0; i < r; ++i) {
                std::size_t j = bounded(rng_, wasabi_eligible_.size());
                remix.push_back(wasabi_eligible_[j].utxo);
                wasabi_eligible_[j] = wasabi_eligible_.back();
                wasabi_eligible_.pop_back();
            }
        }

        std::size_t n_in = star ? star_fan_in : m + between(rng_, 0, 10);
        std::size_t fresh_n = n_in - r;

        Amount out_total;
        out_total += Amount{mode.sats * m};
        for (Amount c : changes) {
            out_total += c;
        }
        out_total += coordinator_fee;
        Amount remix_sum;
        for (const Utxo& u : remix) {
            remix_sum += u.value;
        }
        std::vector<Amount> fresh_values = partition(out_total - remix_sum, fresh_n);
        std::vector<Utxo> fresh =
            fund(fresh_values, ScriptClass::NativeSegwitP2wpkh, star ? "star" : "uw");

        std::vector<TxInput> inputs;
        for (const Utxo& u : remix) {
            inputs.push_back(to_input(u));
        }
        for (const Utxo& u : fresh) {
            inputs.push_back(to_input(u));
        }
        shuffle_vec(inputs, rng_);

        std::vector<TxOutput> outputs;
        for (std::size_t i = 0; i < m; ++i) {
            outputs.push_back({mode, new_address("wm"), ScriptClass::NativeSegwitP2wpkh});
        }
        for (Amount c : changes) {
            outputs.push_back({c, new_address("wc"), ScriptClass::NativeSegwitP2wpkh});
        }
        if (with_coordinator) {
            outputs.push_back({coordinator_fee, coordinator_address_,
                               ScriptClass::NativeSegwitP2wpkh});
        }
        shuffle_vec(outputs, rng_);

        const Transaction& tx = emit(std::move(inputs), std::move(outputs), "wasabi");
        GroundTruth& truth = corpus_.truth;
        truth.wasabi_txids.push_back(tx.txid);
        if (with_coordinator) {
            truth.wasabi_static_txids.push_back(tx.txid);
        }
        if (r == 0) {
            ++truth.wasabi_remixless;
        }
        ProtocolTruth& flows = truth.flows[kProtocolWasabi];
        ++flows.coinjoin_count;
        flows.fresh_total += out_total - remix_sum;
        flows.remix_in_total += remix_sum;
        flows.remix_all += remix_sum;

        std::vector<Pending> mode_outputs;
        for (std::uint32_t v = 0; v < tx.outputs.size(); ++v) {
            const TxOutput& out = tx.outputs[v];
            Pending p{{{tx.txid, v}, out.value, out.address, out.script}, kProtocolWasabi,
                      out.value == mode};
            if (p.eligible) {
                mode_outputs.push_back(p);
            } else {
                wasabi_change_.push_back(p);
            }
        }

        if (exchange_plant != 0) {
            ensure_exchange();
            Pending planted = mode_outputs.back();
            mode_outputs.pop_back();
            if (exchange_plant == 1) {
                emit_exit(planted.utxo, exchange_address_);
                ++truth.exchange_direct_txs;
                truth.exchange_direct_value += planted.utxo.value;
            } else {
                std::string hop_addr = new_address("hop");
                const Transaction& exit_tx = emit_exit(planted.utxo, hop_addr);
                Utxo hop{{exit_tx.txid, 0}, exit_tx.outputs[0].value, hop_addr,
                         ScriptClass::NativeSegwitP2wpkh};
                emit({to_input(hop)},
                     {{Amount{hop.value.sats - 500}, exchange_address_, ScriptClass::Other}},
                     "background");
                ++truth.exchange_indirect_txs;
                truth.exchange_indirect_value += planted.utxo.value;
            }
            flows.exit_all += planted.utxo.value;
        }
        wasabi_eligible_.insert(wasabi_eligible_.end(), mode_outputs.begin(), mode_outputs.end());
    }

    void ensure_exchange() {
        if (exchange_address_.empty()) {
            exchange_address_ = new_address("exch");
            corpus_.truth.exchange_addresses.push_back(exchange_address_);
        }
    }

    const Transaction& emit_exit(const Utxo& utxo, const std::string& to_addr) {
        std::uint64_t fee = 1000 < utxo.value.sats ? 1000 : 0;
        return emit({to_input(utxo)},
                    {{Amount{utxo.value.sats - fee}, to_addr, ScriptClass::NativeSegwitP2wpkh}},
                    "background");
    }

    // Single-clause WCDH violations, labelled background.
    void emit_near_misses() {
        const char* clauses[4] = {"mode-count", "mode-band", "unique-values", "input-count"};
        for (std::size_t i = 0; i < plan_.near_miss_per_clause * 4; ++i) {
            std::size_t clause = i % 4;
            std::size_t m = between(rng_, 10, 16);
            Amount mode{kWcdhLow + bounded(rng_, kWcdhHigh - kWcdhLow + 1)};
            std::size_t n_in = m + between(rng_, 0, 4);

            std::unordered_set<std::uint64_t> taken{mode.sats};
            std::vector<Amount> extras;
            std::vector<std::size_t> extra_mult;
            std::size_t unique_changes = 2 + bounded(rng_, 2);
            switch (clause) {
                case 0:  // most frequent value below the count threshold
                    m = 9;
                    n_in = 9 + between(rng_, 0, 4);
                    break;
                case 1:  // mode outside the value band
                    mode = Amount{bounded(rng_, 2) == 0
                                      ? kWcdhLow - 1 - bounded(rng_, 3'000'000)
                                      : kWcdhHigh + 1 + bounded(rng_, 6'000'000)};
                    break;
                case 2:  // too few unique values: changes come in pairs
                    unique_changes = bounded(rng_, 2);  // 0 or 1
                    for (std::size_t p = 0; p < 2; ++p) {
                        std::uint64_t v = change_value(taken);
                        taken.insert(v);
                        extras.push_back(Amount{v});
                        extra_mult.push_back(2);
                    }
                    break;
                case 3:  // fewer inputs than the mode multiplicity
                    n_in = m - 1;
                    break;
            }
            for (std::size_t u = 0; u < unique_changes; ++u) {
                std::uint64_t v = change_value(taken);
                taken.insert(v);
                extras.push_back(Amount{v});
                extra_mult.push_back(1);
            }

            Amount out_total{mode.sats * m};
            std::vector<TxOutput> outputs;
            for (std::size_t k = 0; k < m; ++k) {
                outputs.push_back({mode, new_address("nm"), ScriptClass::NativeSegwitP2wpkh});
            }
            for (std::size_t e = 0; e < extras.size(); ++e) {
                for (std::size_t k = 0; k < extra_mult[e]; ++k) {
                    outputs.push_back({extras[e], new_address("nm"),
                                       ScriptClass::NativeSegwitP2wpkh});
                    out_total += extras[e];
                }
            }
            shuffle_vec(outputs, rng_);

            std::vector<Amount> in_values = partition(out_total, n_in);
            std::vector<Utxo> funded = fund(in_values, ScriptClass::NativeSegwitP2wpkh, "nm");
            std::vector<TxInput> inputs;
            for (const Utxo& u : funded) {
                inputs.push_back(to_input(u));
            }
            const Transaction& tx = emit(std::move(inputs), std::move(outputs), "background");
            corpus_.truth.near_miss[clauses[clause]].push_back(tx.txid);
        }
    }

    Pool pool_from_plan(const PoolPlan& pp) const { return Pool{parse_btc(pp.pool)}; }

    void ensure_premix(std::size_t pool_idx, std::size_t need, Amount denom,
                       const std::string& label) {
        auto available = [&] {
            return premix_stash_[pool_idx].size() - premix_head_[pool_idx];
        };
        while (available() < need) {
            std::size_t k = between(rng_, 12, 25);
            Utxo source = take_faucet(Amount{denom.sats * k + 1'234'567});
            std::vector<TxOutput> outs;
            for (std::size_t i = 0; i < k; ++i) {
                outs.push_back({denom, new_address("pm"), ScriptClass::NativeSegwitP2wpkh});
            }
            outs.push_back({Amount{source.value.sats - denom.sats * k}, new_address("fau"),
                            ScriptClass::NativeSegwitP2wpkh});
            const Transaction& tx = emit({to_input(source)}, std::move(outs), "tx0", label);
            corpus_.truth.tx0s.push_back(tx.txid);
            for (std::uint32_t v = 0; v + 1 < tx.outputs.size(); ++v) {
                premix_stash_[pool_idx].push_back({{tx.txid, v}, denom,
                                                   tx.outputs[v].address, tx.outputs[v].script});
            }
            faucet_.push_back({{tx.txid, static_cast<std::uint32_t>(tx.outputs.size() - 1)},
                               tx.outputs.back().value, tx.outputs.back().address,
                               tx.outputs.back().script});
        }
    }

    std::vector<Utxo> take_premix(std::size_t pool_idx, std::size_t n) {
        std::vector<Utxo> taken;
        for (std::size_t i = 0; i < n; ++i) {
            taken.push_back(premix_stash_[pool_idx][premix_head_[pool_idx]++]);
        }
        return taken;
    }

    void emit_pools() {
        pool_mixed_.resize(plan_.pools.size());
        premix_stash_.resize(plan_.pools.size());
        premix_head_.assign(plan_.pools.size(), 0);
        corpus_.truth.genesis_per_pool.resize(plan_.pools.size());

        for (std::size_t p = 0; p < plan_.pools.size(); ++p) {
            const PoolPlan& pp = plan_.pools[p];
            Amount denom = parse_btc(pp.pool);
            std::string protocol = samourai_pool_protocol(pp.pool);
            ProtocolTruth& flows = corpus_.truth.flows[protocol];

            if (pp.mixes > 0 && pp.genesis == 0) {
                raise(ErrorCode::Config, "pool " + pp.pool + " has mixes but no genesis");
            }
            for (std::size_t g = 0; g < pp.genesis; ++g) {
                emit_whirlpool_mix(p, denom, pp.pool, 0, flows);
            }
            for (std::size_t i = 0; i < pp.mixes; ++i) {
                std::size_t r = between(rng_, 1, std::min<std::size_t>(4, pool_mixed_[p].size()));
                emit_whirlpool_mix(p, denom, pp.pool, r, flows);
            }
            for (std::size_t i = 0; i < plan_.whirlpool_negatives_per_pool; ++i) {
                emit_whirlpool_negative(i % 3, denom, pp.pool);
            }
        }
    }

    void emit_whirlpool_mix(std::size_t pool_idx, Amount denom, const std::string& pool,
                            std::size_t r, ProtocolTruth& flows) {
        std::vector<Utxo> remix;
        for (std::size_t i = 0; i < r; ++i) {
            std::size_t j = bounded(rng_, pool_mixed_[pool_idx].size());
            remix.push_back(pool_mixed_[pool_idx][j].utxo);
            pool_mixed_[pool_idx][j] = pool_mixed_[pool_idx].back();
            pool_mixed_[pool_idx].pop_back();
        }
        ensure_premix(pool_idx, 5 - r, denom, pool);
        std::vector<Utxo> premix = take_premix(pool_idx, 5 - r);

        std::vector<TxInput> inputs;
        for (const Utxo& u : remix) {
            inputs.push_back(to_input(u));
        }
        for (const Utxo& u : premix) {
            inputs.push_back(to_input(u));
        }
        shuffle_vec(inputs, rng_);
        std::vector<TxOutput> outputs;
        for (int i = 0; i < 5; ++i) {
            outputs.push_back({denom, new_address("mx"), ScriptClass::NativeSegwitP2wpkh});
        }
        const Transaction& tx = emit(std::move(inputs), std::move(outputs), "whirlpool", pool);

        GroundTruth& truth = corpus_.truth;
        truth.remix_counts[tx.txid] = r;
        if (r == 0) {
            truth.genesis_per_pool[pool_idx].push_back(tx.txid);
        }
        ++flows.coinjoin_count;
        flows.fresh_total += Amount{denom.sats * (5 - r)};
        flows.remix_in_total += Amount{denom.sats * r};
        flows.remix_all += Amount{denom.sats * r};

        std::string protocol = samourai_pool_protocol(pool);
        for (std::uint32_t v = 0; v < tx.outputs.size(); ++v) {
            pool_mixed_[pool_idx].push_back({{{tx.txid, v}, denom, tx.outputs[v].address,
                                              tx.outputs[v].script},
                                             protocol,
                                             true});
        }
    }

    // Planted scanner negatives: structurally close but never detectable.
    void emit_whirlpool_negative(std::size_t kind, Amount denom, const std::string& pool) {
        (void)pool;
        std::vector<TxOutput> outputs;
        std::vector<Amount> in_values;
        switch (kind) {
            case 0:  // right shape, zero remix inputs, premix out of band
                for (int i = 0; i < 5; ++i) {
                    outputs.push_back({denom, new_address("ng"), ScriptClass::NativeSegwitP2wpkh});
                    in_values.push_back(Amount{denom.sats + 220'001});
                }
                break;
            case 1:  // 4 inputs instead of 5
                for (int i = 0; i < 5; ++i) {
                    outputs.push_back({denom, new_address("ng"), ScriptClass::NativeSegwitP2wpkh});
                }
                for (int i = 0; i < 4; ++i) {
                    in_values.push_back(Amount{denom.sats * 2});
                }
                break;
            default:  // one output off by a satoshi
                for (int i = 0; i < 4; ++i) {
                    outputs.push_back({denom, new_address("ng"), ScriptClass::NativeSegwitP2wpkh});
                    in_values.push_back(denom);
                }
                outputs.push_back({Amount{denom.sats + 1}, new_address("ng"),
                                   ScriptClass::NativeSegwitP2wpkh});
                in_values.push_back(Amount{denom.sats + 1});
                break;
        }
        std::vector<Utxo> funded = fund(in_values, ScriptClass::NativeSegwitP2wpkh, "ng");
        std::vector<TxInput> inputs;
        for (const Utxo& u : funded) {
            inputs.push_back(to_input(u));
        }
        emit(std::move(inputs), std::move(outputs), "background");
    }

    void emit_collector() {
        std::size_t k = std::min(plan_.collector_fan_out, wasabi_eligible_.size());
        std::vector<TxInput> inputs;
        Amount total;
        for (std::size_t i = 0; i < k; ++i) {
            Pending p = wasabi_eligible_.back();
            wasabi_eligible_.pop_back();
            inputs.push_back(to_input(p.utxo));
            total += p.utxo.value;
            corpus_.truth.flows[kProtocolWasabi].exit_all += p.utxo.value;
        }
        emit(std::move(inputs), {{total, new_address("col"), ScriptClass::NativeSegwitP2wpkh}},
             "background");
    }

    std::size_t actor_for(std::size_t i) { return i % 8; }

    void seed_actor(std::size_t a) {
        std::vector<Amount> values;
        for (int i = 0; i < 6; ++i) {
            std::uint64_t scale = 1;
            for (std::uint64_t e = between(rng_, 3, 6); e > 0; --e) {
                scale *= 10;
            }
            values.push_back(Amount{between(rng_, 2, 2000) * scale});
        }
        ScriptClass script = bounded(rng_, 2) == 0 ? ScriptClass::NativeSegwitP2wpkh
                                                   : ScriptClass::Other;
        std::vector<Utxo> utxos = fund(values, script, "bg");
        actors_[a].insert(actors_[a].end(), utxos.begin(), utxos.end());
    }

    void emit_payment() {
        if (actors_.empty()) {
            actors_.resize(8);
        }
        std::size_t a = actor_for(bounded(rng_, 8));
        if (actors_[a].size() < 3) {
            seed_actor(a);
        }
        std::size_t n_in = between(rng_, 1, 3);
        std::vector<TxInput> inputs;
        Amount in_total;
        for (std::size_t i = 0; i < n_in; ++i) {
            Utxo u = actors_[a].back();
            actors_[a].pop_back();
            inputs.push_back(to_input(u));
            in_total += u.value;
        }
        Amount fee{bounded(rng_, 800)};
        if (fee.sats >= in_total.sats) {
            fee = Amount{0};
        }
        Amount spend = in_total - fee;
        std::size_t target = actor_for(a + 1 + bounded(rng_, 3));
        ScriptClass script = bounded(rng_, 2) == 0 ? ScriptClass::NativeSegwitP2wpkh
                                                   : ScriptClass::Other;
        std::vector<TxOutput> outputs;
        if (bounded(rng_, 2) == 0 || spend.sats < 2) {
            outputs.push_back({spend, new_address("bg"), script});
        } else {
            std::uint64_t scale = 1;
            for (std::uint64_t e = between(rng_, 2, 5); e > 0; --e) {
                scale *= 10;
            }
            std::uint64_t v1 = (spend.sats / 2 / scale) * scale;
            if (v1 == 0 || v1 >= spend.sats) {
                v1 = spend.sats / 2;
            }
            if (v1 == 0) {
                v1 = 1;
            }
            outputs.push_back({Amount{v1}, new_address("bg"), script});
            outputs.push_back({spend - Amount{v1}, new_address("bg"), script});
        }
        const Transaction& tx = emit(std::move(inputs), std::move(outputs), "background");
        for (std::uint32_t v = 0; v < tx.outputs.size(); ++v) {
            std::size_t dst = v == 0 ? target : a;
            actors_[dst].push_back({{tx.txid, v}, tx.outputs[v].value, tx.outputs[v].address,
                                    tx.outputs[v].script});
        }
    }

    void finish_pending(std::vector<Pending>& pending) {
        for (Pending& p : pending) {
            ProtocolTruth& flows = corpus_.truth.flows[p.protocol];
            if (unit_real(rng_) < plan_.exit_probability) {
                if (actors_.empty()) {
                    actors_.resize(8);
                }
                std::size_t a = actor_for(bounded(rng_, 8));
                const Transaction& tx = emit_exit(p.utxo, new_address("bg"));
                actors_[a].push_back({{tx.txid, 0}, tx.outputs[0].value, tx.outputs[0].address,
                                      tx.outputs[0].script});
                flows.exit_all += p.utxo.value;
            } else {
                flows.unspent_all += p.utxo.value;
                if (p.eligible) {
                    flows.unspent_eligible += p.utxo.value;
                }
            }
        }
        pending.clear();
    }

    void emit_exits() {
        finish_pending(wasabi_eligible_);
        finish_pending(wasabi_change_);
        for (auto& pool : pool_mixed_) {
            finish_pending(pool);
        }
    }

    void assign_schedule() {
        std::size_t total = corpus_.txs.size();
        if (total == 0) {
            return;
        }
        std::size_t per_block = std::max<std::size_t>(1, plan_.txs_per_block);
        std::size_t blocks = (total + per_block - 1) / per_block;
        std::int64_t span = static_cast<std::int64_t>(plan_.months) * 30 * 86'400;
        std::int64_t step = std::max<std::int64_t>(600, span / static_cast<std::int64_t>(blocks));
        for (std::size_t i = 0; i < total; ++i) {
            std::uint32_t block = static_cast<std::uint32_t>(i / per_block);
            corpus_.txs[i].height = plan_.start_height + block;
            corpus_.txs[i].timestamp = plan_.start_time + step * block;
        }
    }

    void finalize_truth() {
        GroundTruth& truth = corpus_.truth;
        std::unordered_map<std::string_view, const Transaction*> by_id;
        for (const Transaction& tx : corpus_.txs) {
            by_id.emplace(tx.txid, &tx);
        }
        for (const std::string& txid : truth.wasabi_txids) {
            ++truth.monthly[kProtocolWasabi][month_of(by_id[txid]->timestamp)];
        }
        for (const auto& [txid, pool] : truth.pool_of) {
            if (truth.labels[txid] != "whirlpool") {
                continue;
            }
            MonthKey m = month_of(by_id[txid]->timestamp);
            ++truth.monthly[kProtocolSamourai][m];
            ++truth.monthly[samourai_pool_protocol(pool)][m];
        }

        // Samourai aggregate flow totals.
        ProtocolTruth aggregate;
        bool any = false;
        for (const auto& [protocol, flows] : truth.flows) {
            if (protocol.rfind("samourai/", 0) != 0) {
                continue;
            }
            any = true;
            aggregate.fresh_total += flows.fresh_total;
            aggregate.remix_in_total += flows.remix_in_total;
            aggregate.exit_all += flows.exit_all;
            aggregate.remix_all += flows.remix_all;
            aggregate.unspent_all += flows.unspent_all;
            aggregate.unspent_eligible += flows.unspent_eligible;
            aggregate.coinjoin_count += flows.coinjoin_count;
        }
        if (any) {
            truth.flows[kProtocolSamourai] = aggregate;
        }
    }
};

}  // namespace

Corpus generate(const ScenarioPlan& plan) { return Generator(plan).run(); }

void write_feed(const Corpus& corpus, const std::string& path) {
    bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) {
        gzFile file = gzopen(path.c_str(), "wb");
        if (file == nullptr) {
            raise(ErrorCode::Io, "cannot write feed: " + path);
        }
        for (const Transaction& tx : corpus.txs) {
            std::string line = serialize_tx_record(tx) + "\n";
            gzwrite(file, line.data(), static_cast<unsigned>(line.size()));
        }
        gzclose(file);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        raise(ErrorCode::Io, "cannot write feed: " + path);
    }
    for (const Transaction& tx : corpus.txs) {
        out << serialize_tx_record(tx) << "\n";
    }
}

void write_labels_csv(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        raise(ErrorCode::Io, "cannot write labels: " + path);
    }
    out << "txid,label,pool\n";
    for (const Transaction& tx : corpus.txs) {
        auto label = corpus.truth.labels.find(tx.txid);
        auto pool = corpus.truth.pool_of.find(tx.txid);
        out << tx.txid << "," << (label != corpus.truth.labels.end() ? label->second : "")
            << "," << (pool != corpus.truth.pool_of.end() ? pool->second : "") << "\n";
    }
}

namespace {

json pool_to_json(const PoolPlan& pp) {
    return {{"pool", pp.pool}, {"genesis", pp.genesis}, {"mixes", pp.mixes}};
}

}  // namespace

std::string plan_to_json(const ScenarioPlan& plan) {
    json j;
    j["rng_seed"] = plan.rng_seed;
    j["start_height"] = plan.start_height;
    j["start_time"] = plan.start_time;
    j["txs_per_block"] = plan.txs_per_block;
    j["months"] = plan.months;
    j["wasabi_mixes"] = plan.wasabi_mixes;
    j["wasabi_mode_min"] = plan.wasabi_mode_min;
    j["wasabi_mode_max"] = plan.wasabi_mode_max;
    j["wasabi_remix_probability"] = plan.wasabi_remix_probability;
    j["coordinator_output_probability"] = plan.coordinator_output_probability;
    j["near_miss_per_clause"] = plan.near_miss_per_clause;
    j["pools"] = json::array();
    for (const PoolPlan& pp : plan.pools) {
        j["pools"].push_back(pool_to_json(pp));
    }
    j["whirlpool_negatives_per_pool"] = plan.whirlpool_negatives_per_pool;
    j["background_payments"] = plan.background_payments;
    j["background_target"] = plan.background_target;
    j["exit_probability"] = plan.exit_probability;
    j["star_fan_in"] = plan.star_fan_in;
    j["collector_fan_out"] = plan.collector_fan_out;
    j["exchange_direct"] = plan.exchange_direct;
    j["exchange_indirect"] = plan.exchange_indirect;
    return j.dump(2);
}

ScenarioPlan plan_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        raise(ErrorCode::Config, "plan is not a JSON object");
    }
    ScenarioPlan plan;
    plan.rng_seed = j.value("rng_seed", plan.rng_seed);
    plan.start_height = j.value("start_height", plan.start_height);
    plan.start_time = j.value("start_time", plan.start_time);
    plan.txs_per_block = j.value("txs_per_block", plan.txs_per_block);
    plan.months = j.value("months", plan.months);
    plan.wasabi_mixes = j.value("wasabi_mixes", plan.wasabi_mixes);
    plan.wasabi_mode_min = j.value("wasabi_mode_min", plan.wasabi_mode_min);
    plan.wasabi_mode_max = j.value("wasabi_mode_max", plan.wasabi_mode_max);
    plan.wasabi_remix_probability =
        j.value("wasabi_remix_probability", plan.wasabi_remix_probability);
    plan.coordinator_output_probability =
        j.value("coordinator_output_probability", plan.coordinator_output_probability);
    plan.near_miss_per_clause = j.value("near_miss_per_clause", plan.near_miss_per_clause);
    if (j.contains("pools")) {
        for (const json& jp : j["pools"]) {
            PoolPlan pp;
            pp.pool = jp.value("pool", pp.pool);
            pp.genesis = jp.value("genesis", pp.genesis);
            pp.mixes = jp.value("mixes", pp.mixes);
            plan.pools.push_back(std::move(pp));
        }
    }
    plan.whirlpool_negatives_per_pool =
        j.value("whirlpool_negatives_per_pool", plan.whirlpool_negatives_per_pool);
    plan.background_payments = j.value("background_payments", plan.background_payments);
    plan.background_target = j.value("background_target", plan.background_target);
    plan.exit_probability = j.value("exit_probability", plan.exit_probability);
    plan.star_fan_in = j.value("star_fan_in", plan.star_fan_in);
    plan.collector_fan_out = j.value("collector_fan_out", plan.collector_fan_out);
    plan.exchange_direct = j.value("exchange_direct", plan.exchange_direct);
    plan.exchange_indirect = j.value("exchange_indirect", plan.exchange_indirect);
    return plan;
}

ScenarioPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::Io, "cannot open plan: " + path);
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return plan_from_json(text);
}

void write_plan_json(const ScenarioPlan& plan, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        raise(ErrorCode::Io, "cannot write plan: " + path);
    }
    out << plan_to_json(plan) << "\n";
}

}  // namespace mixscan::synth
