#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mixscan/metrics.hpp"
#include "mixscan/tx.hpp"

namespace mixscan::synth {

struct PoolPlan {
    std::string pool = "0.01";  // trimmed BTC denomination
    std::size_t genesis = 1;
    std::size_t mixes = 50;
};

// Everything the generator needs; the corpus is a pure function of the
// plan. CoinJoin txs are emitted fee-free so the satoshi conservation
// identities hold exactly; background traffic burns small fees.
struct ScenarioPlan {
    std::uint64_t rng_seed = 1;
    std::uint32_t start_height = 600'000;
    std::int64_t start_time = 1'546'300'800;  // 2019-01-01T00:00:00Z
    std::size_t txs_per_block = 4;
    std::size_t months = 6;  // target corpus span

    std::size_t wasabi_mixes = 0;
    std::size_t wasabi_mode_min = 10;   // equal-output count range
    std::size_t wasabi_mode_max = 100;
    double wasabi_remix_probability = 0.3;
    double coordinator_output_probability = 0.5;
    std::size_t near_miss_per_clause = 0;  // single-clause WCDH violations

    std::vector<PoolPlan> pools;
    std::size_t whirlpool_negatives_per_pool = 0;

    std::size_t background_payments = 0;
    std::size_t background_target = 0;  // pad background-labelled txs up to this count

    double exit_probability = 0.5;  // chance an eligible output leaves the ecosystem

    std::size_t star_fan_in = 0;        // one funder pays this many fresh CoinJoin inputs
    std::size_t collector_fan_out = 0;  // one entity collects this many mixed outputs
    std::size_t exchange_direct = 0;    // CoinJoins with an exit straight to the exchange
    std::size_t exchange_indirect = 0;  // ... via one intermediary hop
};

ScenarioPlan plan_from_json(const std::string& text);
ScenarioPlan load_plan(const std::string& path);
std::string plan_to_json(const ScenarioPlan& plan);

struct ProtocolTruth {
    Amount fresh_total;
    Amount remix_in_total;
    Amount exit_all;
    Amount remix_all;
    Amount unspent_all;
    Amount unspent_eligible;
    std::size_t coinjoin_count = 0;
};

struct GroundTruth {
    std::map<std::string, std::string> labels;         // txid -> label, exhaustive
    std::map<std::string, std::string> pool_of;        // whirlpool/tx0 txid -> pool
    std::map<std::string, std::size_t> remix_counts;   // mix txid -> remix inputs
    std::vector<std::vector<std::string>> genesis_per_pool;
    std::vector<std::string> tx0s;
    std::vector<std::string> wasabi_txids;             // emission order
    std::vector<std::string> wasabi_static_txids;      // carry a coordinator output
    std::map<std::string, std::vector<std::string>> near_miss;  // clause -> txids
    std::map<std::string, ProtocolTruth> flows;        // per protocol key
    std::size_t wasabi_remixless = 0;
    std::vector<std::string> coordinator_addresses;
    std::vector<std::string> exchange_addresses;
    std::size_t exchange_direct_txs = 0;
    std::size_t exchange_indirect_txs = 0;
    Amount exchange_direct_value;
    Amount exchange_indirect_value;
    // Planted monthly tx counts: protocol key ("wasabi", "samourai",
    // "samourai/<pool>") -> month -> count.
    std::map<std::string, std::map<MonthKey, std::size_t>> monthly;

    std::size_t label_count(const std::string& label) const;
};

struct Corpus {
    ScenarioPlan plan;
    std::vector<Transaction> txs;  // height order
    GroundTruth truth;
};

Corpus generate(const ScenarioPlan& plan);

void write_feed(const Corpus& corpus, const std::string& path);
void write_labels_csv(const Corpus& corpus, const std::string& path);  // txid,label,pool
void write_plan_json(const ScenarioPlan& plan, const std::string& path);

}  // namespace mixscan::synth
