#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "mixscan/entity_graph.hpp"
#include "mixscan/rng.hpp"

using namespace mixscan;
using namespace testutil;

namespace {

// Naive transitive-closure oracle: repeatedly merge overlapping groups.
std::set<std::set<std::string>> closure_oracle(const std::vector<std::vector<std::string>>& groups) {
    std::vector<std::set<std::string>> classes;
    for (const auto& group : groups) {
        for (const std::string& addr : group) {
            bool found = false;
            for (auto& cls : classes) {
                if (cls.count(addr) != 0) {
                    found = true;
                    break;
                }
            }
            if (!found) {
                classes.push_back({addr});
            }
        }
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& group : groups) {
            if (group.empty()) {
                continue;
            }
            std::size_t first = SIZE_MAX;
            for (std::size_t c = 0; c < classes.size(); ++c) {
                bool touches = false;
                for (const std::string& addr : group) {
                    if (classes[c].count(addr) != 0) {
                        touches = true;
                        break;
                    }
                }
                if (!touches) {
                    continue;
                }
                if (first == SIZE_MAX) {
                    first = c;
                } else {
                    classes[first].insert(classes[c].begin(), classes[c].end());
                    classes.erase(classes.begin() + static_cast<std::ptrdiff_t>(c));
                    --c;
                    changed = true;
                }
            }
        }
    }
    return {classes.begin(), classes.end()};
}

std::set<std::set<std::string>> partition_of(const EntityMap& map) {
    std::map<std::uint32_t, std::set<std::string>> classes;
    for (const auto& [addr, entity] : map.memberships()) {
        classes[entity].insert(addr);
    }
    std::set<std::set<std::string>> result;
    for (auto& [entity, cls] : classes) {
        result.insert(std::move(cls));
    }
    return result;
}

std::vector<std::vector<std::string>> random_groups(std::mt19937_64& rng, std::size_t n_groups,
                                                    std::size_t n_addrs) {
    std::vector<std::vector<std::string>> groups;
    for (std::size_t g = 0; g < n_groups; ++g) {
        std::size_t k = 1 + bounded(rng, 4);
        std::vector<std::string> group;
        for (std::size_t i = 0; i < k; ++i) {
            group.push_back("a" + std::to_string(bounded(rng, n_addrs)));
        }
        groups.push_back(std::move(group));
    }
    return groups;
}

}  // namespace

TEST_CASE("co-spending is transitive") {
    EntityMap map = EntityMap::from_groups({{"a1", "a2"}, {"a2", "a3"}});
    CHECK(map.entity_count() == 1);
    CHECK(map.size_of("a1") == 3);
    CHECK(map.find("a1") == map.find("a3"));
    CHECK(map.canonical_id(*map.find("a3")) == "a1");
    CHECK(map.size_of("unknown") == 1);
}

TEST_CASE("coinjoin inputs are never merged") {
    std::string t1 = hex_id('1');
    std::string t2 = hex_id('2');
    std::vector<Transaction> txs;
    txs.push_back(root_tx(t1, 100, 1000, {out(10'000, "a1"), out(20'000, "b1")}));
    txs.push_back(tx(t2, 101, 2000, {in(t1, 0), in(t1, 1)}, {out(29'000, "p")}));
    ChainStore store = build_chain_store(std::move(txs));

    EntityMap merged = EntityMap::cluster(store, {});
    CHECK(merged.find("a1") == merged.find("b1"));

    EntityMap filtered = EntityMap::cluster(store, {t2});
    CHECK(filtered.find("a1") != filtered.find("b1"));
}

TEST_CASE("partition equals the brute-force closure on random instances") {
    std::mt19937_64 rng(42);
    for (int instance = 0; instance < 10; ++instance) {
        auto groups = random_groups(rng, 500, 150);
        EntityMap map = EntityMap::from_groups(groups);
        CHECK(partition_of(map) == closure_oracle(groups));
    }
}

TEST_CASE("clustering is order independent") {
    std::mt19937_64 rng(43);
    auto groups = random_groups(rng, 200, 80);
    auto baseline = partition_of(EntityMap::from_groups(groups));
    for (int shuffle = 0; shuffle < 5; ++shuffle) {
        shuffle_vec(groups, rng);
        CHECK(partition_of(EntityMap::from_groups(groups)) == baseline);
    }
}

TEST_CASE("excluding coinjoins only splits entities") {
    // Every entity of the filtered partition must sit inside one entity
    // of the unfiltered partition.
    std::mt19937_64 rng(44);
    std::vector<Transaction> txs;
    std::string prev = hex_id('0');
    txs.push_back(root_tx(prev, 100, 1000,
                          {out(10'000, "s0"), out(10'000, "s1"), out(10'000, "s2"),
                           out(10'000, "s3"), out(10'000, "s4"), out(10'000, "s5")}));
    std::unordered_set<std::string> marked;
    for (int i = 1; i <= 40; ++i) {
        std::string txid = std::string(62, '0') + (i < 10 ? "0" : "") + std::to_string(i);
        std::uint32_t v1 = static_cast<std::uint32_t>(bounded(rng, 6));
        std::uint32_t v2 = static_cast<std::uint32_t>(bounded(rng, 6));
        if (v1 == v2) {
            v2 = (v2 + 1) % 6;
        }
        txs.push_back(tx(txid, 100 + static_cast<std::uint32_t>(i), 1000 + i,
                         {in(prev, v1), in(prev, v2)},
                         {out(10'000, "s0"), out(10'000, "s1"), out(10'000, "s2"),
                          out(10'000, "s3"), out(10'000, "s4"), out(10'000, "s5")}));
        if (bounded(rng, 3) == 0) {
            marked.insert(txid);
        }
        prev = txid;
    }
    ChainStore store = build_chain_store(std::move(txs));
    EntityMap with = EntityMap::cluster(store, {});
    EntityMap without = EntityMap::cluster(store, marked);

    for (const auto& [addr, entity] : without.memberships()) {
        // Same filtered entity -> same unfiltered entity.
        const std::string& canon = without.canonical_id(entity);
        CHECK(with.find(addr).has_value());
        CHECK(*with.find(addr) == *with.find(canon));
    }
}

namespace {

EntityRelations relations_from_edges(std::size_t n,
                                     const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    EntityRelations rel;
    rel.out_adj.resize(n);
    rel.in_adj.resize(n);
    for (auto [s, d] : edges) {
        rel.out_adj[s].push_back(d);
        rel.in_adj[d].push_back(s);
    }
    for (auto& adj : rel.out_adj) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
    for (auto& adj : rel.in_adj) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
    return rel;
}

// Path-enumeration oracle: minimal hop count over paths of length <= 2
// that never expand through an over-threshold entity.
std::map<std::uint32_t, int> level_oracle(const EntityRelations& rel,
                                          const std::vector<std::uint32_t>& level0, std::size_t t,
                                          Direction dir) {
    const auto& adj = dir == Direction::Receive ? rel.out_adj : rel.in_adj;
    std::map<std::uint32_t, int> levels;
    for (std::uint32_t e : level0) {
        levels.emplace(e, 0);
    }
    for (std::uint32_t e : level0) {
        if (adj[e].size() > t) {
            continue;
        }
        for (std::uint32_t one : adj[e]) {
            if (levels.count(one) == 0) {
                levels.emplace(one, 1);
            }
        }
    }
    for (std::uint32_t e : level0) {
        if (adj[e].size() > t) {
            continue;
        }
        for (std::uint32_t one : adj[e]) {
            if (levels.at(one) != 1 || adj[one].size() > t) {
                continue;  // only expand via true Level-1 entities
            }
            for (std::uint32_t two : adj[one]) {
                if (levels.count(two) == 0) {
                    levels.emplace(two, 2);
                }
            }
        }
    }
    return levels;
}

}  // namespace

TEST_CASE("degree thresholds stop expansion but keep the entity") {
    // 0 -> 1 -> {2..152}; 1 exceeds t=100 so its successors stay unreached.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges{{0, 1}};
    for (std::uint32_t i = 2; i < 153; ++i) {
        edges.push_back({1, i});
    }
    EntityRelations rel = relations_from_edges(153, edges);
    LevelAssignment levels = assign_levels_on(rel, {0}, 100, Direction::Receive);
    CHECK(levels.level_of(1) == 1);
    CHECK(!levels.level_of(2).has_value());

    LevelAssignment wide = assign_levels_on(rel, {0}, 151, Direction::Receive);
    CHECK(wide.level_of(2) == 2);
}

TEST_CASE("levels match the path-enumeration oracle on random graphs") {
    std::mt19937_64 rng(45);
    for (int instance = 0; instance < 8; ++instance) {
        std::size_t n = 200;
        std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
        // A few hubs with large out-degrees straddling the thresholds.
        for (std::uint32_t hub = 0; hub < 4; ++hub) {
            std::size_t degree = 40 + bounded(rng, 80);
            for (std::size_t i = 0; i < degree; ++i) {
                edges.push_back({hub, static_cast<std::uint32_t>(bounded(rng, n))});
            }
        }
        for (int i = 0; i < 400; ++i) {
            edges.push_back({static_cast<std::uint32_t>(bounded(rng, n)),
                             static_cast<std::uint32_t>(bounded(rng, n))});
        }
        EntityRelations rel = relations_from_edges(n, edges);
        std::vector<std::uint32_t> level0{0, 1,
                                          static_cast<std::uint32_t>(10 + bounded(rng, 50))};

        std::map<std::uint32_t, int> previous;
        for (std::size_t t : {50U, 75U, 100U}) {
            for (Direction dir : {Direction::Receive, Direction::Send}) {
                LevelAssignment got = assign_levels_on(rel, level0, t, dir);
                std::map<std::uint32_t, int> flat(got.level.begin(), got.level.end());
                CHECK(flat == level_oracle(rel, level0, t, dir));
            }
            // Monotone in t: reachable set only grows.
            LevelAssignment got = assign_levels_on(rel, level0, t, Direction::Receive);
            std::map<std::uint32_t, int> flat(got.level.begin(), got.level.end());
            for (const auto& [entity, level] : previous) {
                REQUIRE(flat.count(entity) == 1);
                CHECK(flat[entity] <= level);
            }
            previous = std::move(flat);
        }
    }
}

TEST_CASE("degrees count distinct counterparties") {
    // E pays entity F through three separate txs: out-degree stays 1.
    std::string t0 = hex_id('0');
    std::vector<Transaction> txs;
    txs.push_back(root_tx(t0, 100, 1000,
                          {out(10'000, "e1"), out(10'000, "e1"), out(10'000, "e1"),
                           out(50'000, "f1")}));
    for (int i = 1; i <= 3; ++i) {
        txs.push_back(tx(std::string(63, '0') + std::to_string(i), 101, 2000,
                         {in(t0, static_cast<std::uint32_t>(i - 1))}, {out(9'000, "f1")}));
    }
    ChainStore store = build_chain_store(std::move(txs));
    EntityMap map = EntityMap::cluster(store, {});
    EntityRelations rel = build_entity_relations(store, map);
    CHECK(rel.out_degree(*map.find("e1")) == 1);
    CHECK(rel.in_degree(*map.find("f1")) == 1);

    // Brute-force edge enumeration agrees.
    std::set<std::pair<std::uint32_t, std::uint32_t>> expected;
    for (const Transaction& t : store.transactions()) {
        for (const TxInput& i : t.inputs) {
            const TxOutput* src = store.try_resolve(i);
            if (src == nullptr) {
                continue;
            }
            for (const TxOutput& o : t.outputs) {
                auto a = map.find(src->address);
                auto b = map.find(o.address);
                if (a && b && *a != *b) {
                    expected.insert({*a, *b});
                }
            }
        }
    }
    std::set<std::pair<std::uint32_t, std::uint32_t>> got;
    for (std::uint32_t e = 0; e < rel.out_adj.size(); ++e) {
        for (std::uint32_t d : rel.out_adj[e]) {
            got.insert({e, d});
        }
    }
    CHECK(got == expected);
}

TEST_CASE("attribution tags lift to entities") {
    EntityMap map = EntityMap::from_groups({{"a1", "a2"}, {"b1"}});
    std::vector<AttributionTag> tags;
    tags.push_back({false, "a2", "exA", TagCategory::Exchange});
    tags.push_back({false, "b1", "svc", TagCategory::Service});
    tags.push_back({false, "nope", "gone", TagCategory::Exchange});  // unknown address
    tags.push_back({false, "a1", "exA-dup", TagCategory::Service});  // conflict

    std::ostringstream warnings;
    auto lifted = lift_tags(tags, map, &warnings);
    CHECK(lifted.size() == 2);
    CHECK(lifted.at(*map.find("a1")) == TagCategory::Exchange);  // exchange wins
    CHECK(lifted.at(*map.find("b1")) == TagCategory::Service);
    CHECK(warnings.str().find("nope") != std::string::npos);

    LevelAssignment levels;
    levels.level[*map.find("a1")] = 1;
    levels.level[*map.find("b1")] = 1;
    auto matches = match_exchanges(levels, lifted);
    REQUIRE(matches.count(1) == 1);
    CHECK(matches.at(1) == std::vector<std::uint32_t>{*map.find("a1")});
}
