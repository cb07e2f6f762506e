#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "mixscan/detection.hpp"
#include "mixscan/feed.hpp"
#include "mixscan/forest.hpp"
#include "mixscan/metrics.hpp"
#include "mixscan/synth.hpp"

using namespace mixscan;
namespace fs = std::filesystem;

namespace {

synth::ScenarioPlan small_mixed_plan() {
    synth::ScenarioPlan plan;
    plan.rng_seed = 101;
    plan.wasabi_mixes = 30;
    plan.wasabi_mode_max = 30;
    plan.wasabi_remix_probability = 0.5;
    plan.near_miss_per_clause = 3;
    plan.pools = {{"0.01", 2, 25}, {"0.5", 1, 10}};
    plan.whirlpool_negatives_per_pool = 3;
    plan.background_payments = 40;
    plan.exit_probability = 0.5;
    return plan;
}

std::string feed_string(const synth::Corpus& corpus) {
    std::string s;
    for (const Transaction& tx : corpus.txs) {
        s += serialize_tx_record(tx);
        s += "\n";
    }
    return s;
}

ChainStore store_of(const synth::Corpus& corpus) {
    std::vector<Transaction> txs = corpus.txs;
    return build_chain_store(std::move(txs));
}

}  // namespace

TEST_CASE("generated corpora pass ingest validation") {
    synth::Corpus corpus = synth::generate(small_mixed_plan());
    ChainStore store = store_of(corpus);
    CHECK(store.size() == corpus.txs.size());

    // The only unresolved inputs are the faucet roots' external funding.
    CHECK(store.unresolved().size() == 2);

    // Heights non-decreasing, every fee non-negative (fee() throws on
    // negative), every other input resolvable.
    std::uint32_t prev_height = 0;
    for (const Transaction& tx : store.transactions()) {
        CHECK(tx.height >= prev_height);
        prev_height = tx.height;
        (void)store.fee(tx);
    }

    // Labels are exhaustive: every txid labelled exactly once.
    CHECK(corpus.truth.labels.size() == corpus.txs.size());
    for (const Transaction& tx : store.transactions()) {
        CHECK(corpus.truth.labels.count(tx.txid) == 1);
    }
}

TEST_CASE("generation is deterministic under the seed") {
    synth::Corpus a = synth::generate(small_mixed_plan());
    synth::Corpus b = synth::generate(small_mixed_plan());
    CHECK(feed_string(a) == feed_string(b));

    synth::ScenarioPlan other = small_mixed_plan();
    other.rng_seed = 102;
    synth::Corpus c = synth::generate(other);
    CHECK(feed_string(a) != feed_string(c));
}

TEST_CASE("wcdh separates generated wasabi txs from near misses exactly") {
    synth::ScenarioPlan plan;
    plan.rng_seed = 7;
    plan.wasabi_mixes = 200;
    plan.near_miss_per_clause = 25;
    plan.background_payments = 100;
    synth::Corpus corpus = synth::generate(plan);
    ChainStore store = store_of(corpus);

    std::unordered_set<std::string> positives(corpus.truth.wasabi_txids.begin(),
                                              corpus.truth.wasabi_txids.end());
    std::size_t false_negatives = 0;
    std::size_t false_positives = 0;
    for (const Transaction& tx : store.transactions()) {
        bool detected = detect_wasabi_wcdh(tx);
        bool actual = positives.count(tx.txid) != 0;
        false_negatives += (actual && !detected) ? 1U : 0U;
        false_positives += (!actual && detected) ? 1U : 0U;
    }
    CHECK(false_negatives == 0);
    CHECK(false_positives == 0);

    // Every planted near miss violates its clause and nothing else.
    REQUIRE(corpus.truth.near_miss.size() == 4);
    for (const auto& [clause, txids] : corpus.truth.near_miss) {
        CHECK(txids.size() == 25);
        for (const std::string& txid : txids) {
            CHECK(!detect_wasabi_wcdh(*store.find(txid)));
        }
    }
}

TEST_CASE("static heuristic recovers exactly the coordinator-fee txs") {
    synth::ScenarioPlan plan;
    plan.rng_seed = 8;
    plan.wasabi_mixes = 60;
    plan.coordinator_output_probability = 0.5;
    synth::Corpus corpus = synth::generate(plan);
    ChainStore store = store_of(corpus);
    REQUIRE(!corpus.truth.coordinator_addresses.empty());

    std::unordered_set<std::string> coordinators(corpus.truth.coordinator_addresses.begin(),
                                                 corpus.truth.coordinator_addresses.end());
    std::unordered_set<std::string> detected;
    for (const Transaction& tx : store.transactions()) {
        if (detect_wasabi_static(tx, coordinators)) {
            detected.insert(tx.txid);
        }
    }
    std::unordered_set<std::string> expected(corpus.truth.wasabi_static_txids.begin(),
                                             corpus.truth.wasabi_static_txids.end());
    CHECK(detected == expected);
    CHECK(!expected.empty());
    CHECK(expected.size() < corpus.truth.wasabi_txids.size());
}

TEST_CASE("whirlpool scan recovers the planted chains exactly") {
    synth::ScenarioPlan plan;
    plan.rng_seed = 9;
    plan.pools = {{"0.001", 1, 40}, {"0.01", 3, 60}, {"0.05", 3, 30}, {"0.5", 1, 15}};
    plan.whirlpool_negatives_per_pool = 6;
    plan.background_payments = 30;
    synth::Corpus corpus = synth::generate(plan);
    ChainStore store = store_of(corpus);

    auto pools = standard_pools();
    WhirlpoolSet wp = detect_samourai(store, pools);

    std::unordered_set<std::string> detected;
    for (const WhirlpoolTx& tx : wp.txs) {
        detected.insert(tx.txid);
    }
    std::unordered_set<std::string> expected;
    for (const auto& [txid, label] : corpus.truth.labels) {
        if (label == "whirlpool") {
            expected.insert(txid);
        }
    }
    CHECK(detected == expected);  // precision and recall both 1

    // Genesis sets per pool match the plant; remix input counts agree.
    for (std::size_t p = 0; p < plan.pools.size(); ++p) {
        Pool pool{parse_btc(plan.pools[p].pool)};
        std::vector<std::string> genesis = find_genesis_mixes(store, pool);
        CHECK(genesis == corpus.truth.genesis_per_pool[p]);
        CHECK(genesis.size() == plan.pools[p].genesis);
    }
    for (const WhirlpoolTx& tx : wp.txs) {
        CHECK(tx.remix_input_count == corpus.truth.remix_counts.at(tx.txid));
        CHECK(tx.genesis == (tx.remix_input_count == 0));
    }

    // Planted Tx0s are exactly the identified ones.
    std::vector<std::string> tx0s = identify_tx0(store, wp);
    std::unordered_set<std::string> got(tx0s.begin(), tx0s.end());
    std::unordered_set<std::string> planted(corpus.truth.tx0s.begin(), corpus.truth.tx0s.end());
    CHECK(got == planted);
}

TEST_CASE("ledger flows match the generator's bookkeeping exactly") {
    synth::Corpus corpus = synth::generate(small_mixed_plan());
    ChainStore store = store_of(corpus);
    DetectionSet detections = detect_all(store);

    MixFlowLedger ledger = mixed_and_fresh_flows(store, detections);
    for (const auto& [protocol, expected] : corpus.truth.flows) {
        CAPTURE(protocol);
        const ProtocolFlows* got = ledger.find(protocol);
        REQUIRE(got != nullptr);
        CHECK(got->coinjoin_count == expected.coinjoin_count);
        CHECK(got->fresh_total == expected.fresh_total);
        CHECK(got->remix_in_total == expected.remix_in_total);
        CHECK(got->exit_all == expected.exit_all);
        CHECK(got->remix_all == expected.remix_all);
        CHECK(got->unspent_all == expected.unspent_all);
        CHECK(got->unspent_eligible == expected.unspent_eligible);

        // Generated CoinJoins are fee-free, so inflow conservation holds
        // with the remix term cancelling.
        CHECK(got->coinjoin_fees.sats == 0);
        CHECK(got->fresh_total + got->remix_in_total ==
              got->remix_all + got->exit_all + got->unspent_all);
    }

    // Planted monthly counts match the detection-side series.
    auto rows = monthly_counts(store, detections);
    for (const auto& [protocol, months] : corpus.truth.monthly) {
        for (const auto& [month, count] : months) {
            bool found = false;
            for (const MonthlyCountRow& r : rows) {
                std::string key = r.pool.empty() ? r.protocol
                                                 : samourai_pool_protocol(r.pool);
                if (r.month == month && key == protocol) {
                    CHECK(r.count == count);
                    found = true;
                }
            }
            CHECK(found);
        }
    }

    RemixlessReport remixless = remixless_coinjoins(store, detections);
    CHECK(remixless.txids.size() == corpus.truth.wasabi_remixless);
}

TEST_CASE("alpha stays non-negative on generated corpora") {
    synth::Corpus corpus = synth::generate(small_mixed_plan());
    ChainStore store = store_of(corpus);
    DetectionSet detections = detect_all(store);
    MixFlowLedger ledger = mixed_and_fresh_flows(store, detections);
    for (const AnonymityBoundRow& row : anonymity_upper_bound(ledger)) {
        CHECK(row.alpha.sats <= Amount{1'000'000'000'000'000}.sats);  // sane magnitude; no underflow
    }
}

TEST_CASE("star and collector scenarios reduce the anonymity sets as planned") {
    synth::ScenarioPlan plan;
    plan.rng_seed = 15;
    plan.star_fan_in = 20;
    plan.collector_fan_out = 20;
    plan.exit_probability = 0.0;
    synth::Corpus corpus = synth::generate(plan);
    ChainStore store = store_of(corpus);
    DetectionSet detections = detect_all(store);
    REQUIRE(detections.wasabi_wcdh.size() == 1);

    EntityMap entities = EntityMap::cluster(store, detections.coinjoin_txids());
    auto rows = pre_post_anonymity(store, detections, entities);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].side == "pre");
    CHECK(rows[0].addresses == 20);
    CHECK(rows[0].entities == 1);
    CHECK(rows[1].side == "post");
    CHECK(rows[1].addresses == 20);
    CHECK(rows[1].entities == 1);
}

TEST_CASE("planted exchange flows are attributed at the right hop") {
    synth::ScenarioPlan plan;
    plan.rng_seed = 16;
    plan.wasabi_mixes = 10;
    plan.exchange_direct = 4;
    plan.exchange_indirect = 3;
    plan.exit_probability = 0.3;
    synth::Corpus corpus = synth::generate(plan);
    ChainStore store = store_of(corpus);
    DetectionSet detections = detect_all(store);

    EntityMap entities = EntityMap::cluster(store, detections.coinjoin_txids());
    EntityRelations relations = build_entity_relations(store, entities);
    std::vector<AttributionTag> tags;
    for (const std::string& addr : corpus.truth.exchange_addresses) {
        tags.push_back({false, addr, "exchange-1", TagCategory::Exchange});
    }
    auto lifted = lift_tags(tags, entities, nullptr);
    MixFlowLedger ledger = mixed_and_fresh_flows(store, detections);

    auto rows = exchange_flow_series(store, ledger, entities, relations, lifted, 100);
    REQUIRE(!rows.empty());
    ExchangeFlowRow last{};
    for (const ExchangeFlowRow& r : rows) {
        if (r.protocol == "wasabi") {
            last = r;
        }
    }
    CHECK(last.direct_tx_cum == corpus.truth.exchange_direct_txs);
    CHECK(last.indirect_tx_cum == corpus.truth.exchange_indirect_txs);
    CHECK(last.direct_value_cum == corpus.truth.exchange_direct_value);
    CHECK(last.indirect_value_cum == corpus.truth.exchange_indirect_value);
    CHECK(last.direct_tx_cum == 4);
    CHECK(last.indirect_tx_cum == 3);
}

TEST_CASE("feed files round-trip through the reader, gzip included") {
    synth::ScenarioPlan plan;
    plan.rng_seed = 17;
    plan.wasabi_mixes = 5;
    plan.background_payments = 10;
    synth::Corpus corpus = synth::generate(plan);

    fs::path dir = fs::temp_directory_path() / "mixscan_synth_test";
    fs::create_directories(dir);
    std::string plain = (dir / "feed.ndjson").string();
    std::string gz = (dir / "feed.ndjson.gz").string();
    synth::write_feed(corpus, plain);
    synth::write_feed(corpus, gz);

    ChainStore a = load_chain_store(plain);
    ChainStore b = load_chain_store(gz);
    REQUIRE(a.size() == corpus.txs.size());
    REQUIRE(b.size() == corpus.txs.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(serialize_tx_record(a.transactions()[i]) ==
              serialize_tx_record(b.transactions()[i]));
    }
    fs::remove_all(dir);
}

TEST_CASE("plan json round-trips") {
    synth::ScenarioPlan plan = small_mixed_plan();
    synth::ScenarioPlan parsed = synth::plan_from_json(synth::plan_to_json(plan));
    CHECK(parsed.rng_seed == plan.rng_seed);
    CHECK(parsed.wasabi_mixes == plan.wasabi_mixes);
    CHECK(parsed.pools.size() == plan.pools.size());
    CHECK(parsed.pools[1].pool == plan.pools[1].pool);
    CHECK(parsed.exit_probability == plan.exit_probability);
    CHECK(feed_string(synth::generate(parsed)) == feed_string(synth::generate(plan)));
}

TEST_CASE("feature correlations on a synthetic corpus stay moderate") {
    synth::ScenarioPlan plan;
    plan.rng_seed = 18;
    plan.wasabi_mixes = 50;
    plan.wasabi_mode_max = 40;
    plan.background_payments = 50;
    synth::Corpus corpus = synth::generate(plan);
    ChainStore store = store_of(corpus);
    DetectionSet detections = detect_all(store);
    EntityMap entities = EntityMap::cluster(store, detections.coinjoin_txids());

    std::vector<FeatureRow> rows;
    for (const Transaction& tx : store.transactions()) {
        bool resolvable = true;
        for (const TxInput& in : tx.inputs) {
            if (store.try_resolve(in) == nullptr) {
                resolvable = false;
                break;
            }
        }
        if (resolvable) {
            rows.push_back(extract_features(tx, store, entities).as_row());
        }
    }
    REQUIRE(rows.size() >= 100);

    // Pearson correlation oracle over feature pairs; reported as a soft
    // check only since it is a data property, not a contract.
    auto pearson = [&](std::size_t a, std::size_t b) {
        double n = static_cast<double>(rows.size());
        double ma = 0, mb = 0;
        for (const FeatureRow& r : rows) {
            ma += r[a];
            mb += r[b];
        }
        ma /= n;
        mb /= n;
        double cov = 0, va = 0, vb = 0;
        for (const FeatureRow& r : rows) {
            cov += (r[a] - ma) * (r[b] - mb);
            va += (r[a] - ma) * (r[a] - ma);
            vb += (r[b] - mb) * (r[b] - mb);
        }
        if (va == 0 || vb == 0) {
            return 0.0;
        }
        return cov / std::sqrt(va * vb);
    };
    for (std::size_t a = 0; a < kFeatureCount; ++a) {
        for (std::size_t b = a + 1; b < kFeatureCount; ++b) {
            double rho = pearson(a, b);
            CAPTURE(kFeatureNames[a]);
            CAPTURE(kFeatureNames[b]);
            WARN_LT(std::abs(rho), 0.85);
        }
    }
}
