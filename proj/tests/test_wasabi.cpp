#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "mixscan/entity_graph.hpp"
#include "mixscan/error.hpp"
#include "mixscan/rng.hpp"
#include "mixscan/wasabi.hpp"

using namespace mixscan;
using namespace testutil;

namespace {

// 12 x 0.1 BTC mode outputs, three unique changes, 15 inputs.
Transaction canonical_wcdh_tx() {
    std::vector<TxInput> ins;
    for (std::uint32_t i = 0; i < 15; ++i) {
        ins.push_back(in(hex_id('b'), i));
    }
    std::vector<TxOutput> outs;
    for (int i = 0; i < 12; ++i) {
        outs.push_back(out(10'000'000, "m" + std::to_string(i)));
    }
    outs.push_back(out(1'234'567, "c1"));
    outs.push_back(out(2'345'678, "c2"));
    outs.push_back(out(3'456'789, "c3"));
    return tx(hex_id('a'), 650'000, 1'600'000'000, std::move(ins), std::move(outs));
}

}  // namespace

TEST_CASE("wcdh accepts the canonical shape") {
    CHECK(detect_wasabi_wcdh(canonical_wcdh_tx()));
}

TEST_CASE("wcdh rejects single-clause violations") {
    SUBCASE("mode outside the band") {
        Transaction t = canonical_wcdh_tx();
        for (TxOutput& o : t.outputs) {
            if (o.value.sats == 10'000'000) {
                o.value = Amount{20'000'000};  // 0.2 BTC
            }
        }
        CHECK(!detect_wasabi_wcdh(t));
    }
    SUBCASE("too few inputs") {
        Transaction t = canonical_wcdh_tx();
        t.inputs.resize(9);
        CHECK(!detect_wasabi_wcdh(t));
    }
    SUBCASE("too few equal outputs") {
        Transaction t = canonical_wcdh_tx();
        // Drop three mode outputs: multiplicity 9 < 10.
        t.outputs.erase(t.outputs.begin(), t.outputs.begin() + 3);
        CHECK(!detect_wasabi_wcdh(t));
    }
    SUBCASE("no unique output values") {
        Transaction t = canonical_wcdh_tx();
        t.outputs[12] = out(7'000'000, "c1");
        t.outputs[13] = out(7'000'000, "c2");
        t.outputs[14] = out(6'000'000, "c3");
        t.outputs.push_back(out(6'000'000, "c4"));
        CHECK(!detect_wasabi_wcdh(t));
    }
}

TEST_CASE("wcdh band is inclusive and tie-break accepts any in-band mode") {
    Transaction t = canonical_wcdh_tx();
    for (TxOutput& o : t.outputs) {
        if (o.value.sats == 10'000'000) {
            o.value = Amount{12'000'000};  // exactly center + tolerance
        }
    }
    CHECK(detect_wasabi_wcdh(t));

    // Two values tie at multiplicity 12; one of them lies in the band.
    std::vector<TxOutput> outs;
    for (int i = 0; i < 12; ++i) {
        outs.push_back(out(10'000'000, "m" + std::to_string(i)));
        outs.push_back(out(40'000'000, "n" + std::to_string(i)));
    }
    outs.push_back(out(111, "c1"));
    outs.push_back(out(222, "c2"));
    std::vector<TxInput> ins;
    for (std::uint32_t i = 0; i < 30; ++i) {
        ins.push_back(in(hex_id('b'), i));
    }
    CHECK(detect_wasabi_wcdh(tx(hex_id('d'), 1, 1, std::move(ins), std::move(outs))));
}

TEST_CASE("wcdh is invariant under input and output permutation") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Transaction t = canonical_wcdh_tx();
        // Mutate into a random nearby shape.
        if (bounded(rng, 2) == 0) {
            t.inputs.resize(9 + bounded(rng, 10));
        }
        if (bounded(rng, 3) == 0) {
            t.outputs.resize(10 + bounded(rng, 5));
        }
        bool before = detect_wasabi_wcdh(t);
        shuffle_vec(t.inputs, rng);
        shuffle_vec(t.outputs, rng);
        CHECK(detect_wasabi_wcdh(t) == before);
    }
}

TEST_CASE("static coordinator heuristic needs both clauses") {
    std::unordered_set<std::string> coordinators{"coordX"};

    Transaction t = canonical_wcdh_tx();
    t.outputs.push_back(out(999'999, "coordX"));
    CHECK(detect_wasabi_static(t, coordinators));

    SUBCASE("no coordinator output") {
        CHECK(!detect_wasabi_static(canonical_wcdh_tx(), coordinators));
    }
    SUBCASE("coordinator output but all distinct values") {
        std::vector<TxOutput> outs{out(1'000, "a"), out(2'000, "b"), out(3'000, "coordX")};
        Transaction d = tx(hex_id('c'), 1, 1, {in(hex_id('b'), 0)}, std::move(outs));
        CHECK(!detect_wasabi_static(d, coordinators));
    }
    SUBCASE("three equal outputs suffice") {
        std::vector<TxOutput> outs{out(5'000, "a"), out(5'000, "b"), out(5'000, "c"),
                                   out(777, "coordX")};
        Transaction d = tx(hex_id('c'), 1, 1, {in(hex_id('b'), 0)}, std::move(outs));
        CHECK(detect_wasabi_static(d, coordinators));
    }
}

namespace {

// Store with one funding root and one spending tx whose features we test.
struct FeatureFixture {
    ChainStore store;
    EntityMap entities;
    std::string target;

    FeatureFixture() {
        std::string t1 = hex_id('1');
        std::string t2 = hex_id('2');
        target = t2;
        std::vector<Transaction> txs;
        txs.push_back(root_tx(t1, 100, 1000,
                              {out(10'000'000, "i1"), out(10'000'000, "i2"),
                               out(5'000'000, "i3", ScriptClass::NativeSegwitP2wpkh)}));
        txs.push_back(tx(t2, 101, 2000, {in(t1, 0), in(t1, 1), in(t1, 2)},
                         {out(10'000'000, "o1"), out(10'000'000, "o2"), out(5'000'000, "o3")}));
        store = build_chain_store(std::move(txs));
        entities = EntityMap::cluster(store, {});
    }
};

}  // namespace

TEST_CASE("feature arithmetic follows the definitions") {
    FeatureFixture fx;
    FeatureVector fv = extract_features(*fx.store.find(fx.target), fx.store, fx.entities);
    CHECK(fv.num_uniq_output_val == 2);
    CHECK(fv.ratio_num_input_num_output == doctest::Approx(1.0));
    CHECK(fv.min_output_val.sats == 5'000'000);
    CHECK(fv.rng_output_val.sats == 5'000'000);
    CHECK(fv.mean_dec_places == doctest::Approx((1.0 + 1.0 + 2.0) / 3.0));
    CHECK(fv.num_input_reuse == 0);
    CHECK(fv.is_native_segwit);
}

TEST_CASE("input address reuse is counted per distinct address") {
    std::string t1 = hex_id('1');
    std::string t2 = hex_id('2');
    std::vector<Transaction> txs;
    txs.push_back(root_tx(t1, 100, 1000, {out(5'000, "a1"), out(6'000, "a1"), out(7'000, "a2")}));
    txs.push_back(tx(t2, 101, 2000, {in(t1, 0), in(t1, 1), in(t1, 2)},
                     {out(9'000, "a1"), out(8'999, "zz")}));
    ChainStore store = build_chain_store(std::move(txs));
    EntityMap entities = EntityMap::cluster(store, {});
    FeatureVector fv = extract_features(*store.find(t2), store, entities);
    CHECK(fv.num_input_reuse == 1);  // a1 reused, counted once
}

TEST_CASE("non-segwit input source clears the segwit flag") {
    std::string t1 = hex_id('1');
    std::string t2 = hex_id('2');
    std::vector<Transaction> txs;
    txs.push_back(root_tx(t1, 100, 1000, {out(5'000, "a1", ScriptClass::Other)}));
    txs.push_back(tx(t2, 101, 2000, {in(t1, 0)}, {out(4'000, "b1")}));
    ChainStore store = build_chain_store(std::move(txs));
    EntityMap entities = EntityMap::cluster(store, {});
    CHECK(!extract_features(*store.find(t2), store, entities).is_native_segwit);
}

TEST_CASE("features only need the tx, its sources and entity sizes") {
    // Locality: a minimal sub-store with just the funding tx yields the
    // same features as a store with unrelated extra traffic.
    std::string t1 = hex_id('1');
    std::string t2 = hex_id('2');
    auto make = [&](bool extra) {
        std::vector<Transaction> txs;
        txs.push_back(root_tx(t1, 100, 1000, {out(10'000'000, "i1"), out(3'000'000, "i2")}));
        if (extra) {
            txs.push_back(root_tx(hex_id('9'), 100, 1000, {out(77'000, "x1"), out(88'000, "x2")}));
        }
        txs.push_back(tx(t2, 101, 2000, {in(t1, 0), in(t1, 1)},
                         {out(6'500'000, "o1"), out(6'500'000, "o2")}));
        return build_chain_store(std::move(txs));
    };
    ChainStore small = make(false);
    ChainStore big = make(true);
    EntityMap es = EntityMap::cluster(small, {});
    EntityMap eb = EntityMap::cluster(big, {});
    FeatureVector a = extract_features(*small.find(t2), small, es);
    FeatureVector b = extract_features(*big.find(t2), big, eb);
    CHECK(a.as_row() == b.as_row());
}

TEST_CASE("unresolvable input makes feature extraction fail") {
    std::vector<Transaction> txs;
    txs.push_back(tx(hex_id('2'), 101, 2000, {in(hex_id('f'), 0)}, {out(4'000, "b1")}));
    ChainStore store = build_chain_store(std::move(txs));
    EntityMap entities = EntityMap::cluster(store, {});
    CHECK_THROWS_AS(extract_features(store.transactions()[0], store, entities), Error);
}

TEST_CASE("output cluster sizes come from the entity map") {
    // a1 and a2 are co-spent elsewhere, so outputs to them sit in a
    // 2-address entity; fresh addresses count as singletons.
    std::string t1 = hex_id('1');
    std::string t2 = hex_id('2');
    std::string t3 = hex_id('3');
    std::vector<Transaction> txs;
    txs.push_back(root_tx(t1, 100, 1000,
                          {out(10'000, "a1"), out(20'000, "a2"), out(30'000, "a3")}));
    txs.push_back(tx(t2, 101, 2000, {in(t1, 0), in(t1, 1)}, {out(29'000, "p")}));
    txs.push_back(tx(t3, 102, 3000, {in(t1, 2)}, {out(10'000, "a1"), out(19'000, "fresh")}));
    ChainStore store = build_chain_store(std::move(txs));
    EntityMap entities = EntityMap::cluster(store, {});
    FeatureVector fv = extract_features(*store.find(t3), store, entities);
    CHECK(fv.mean_output_cluster_size == doctest::Approx((2.0 + 1.0) / 2.0));
}
