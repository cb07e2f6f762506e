#include "mixscan/entity_graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include "mixscan/error.hpp"

namespace mixscan {

namespace {

// Mutable union-find used during construction only.
struct UnionFind {
    std::vector<std::uint32_t> parent;

    std::uint32_t add() {
        parent.push_back(static_cast<std::uint32_t>(parent.size()));
        return parent.back();
    }

    std::uint32_t find(std::uint32_t x) {
        std::uint32_t root = x;
        while (parent[root] != root) {
            root = parent[root];
        }
        while (parent[x] != root) {  // path compression
            std::uint32_t next = parent[x];
            parent[x] = root;
            x = next;
        }
        return root;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            // Attach the larger index under the smaller one; keeps the
            // result independent of union order.
            if (a < b) {
                parent[b] = a;
            } else {
                parent[a] = b;
            }
        }
    }
};

struct Builder {
    UnionFind uf;
    std::vector<std::string> addresses;
    std::unordered_map<std::string, std::uint32_t> index;

    std::uint32_t intern(const std::string& address) {
        auto it = index.find(address);
        if (it != index.end()) {
            return it->second;
        }
        std::uint32_t idx = uf.add();
        addresses.push_back(address);
        index.emplace(address, idx);
        return idx;
    }

    void unite_group(const std::vector<std::uint32_t>& group) {
        for (std::size_t i = 1; i < group.size(); ++i) {
            uf.unite(group[0], group[i]);
        }
    }
};

}  // namespace

EntityMap EntityMap::cluster(const ChainStore& store,
                             const std::unordered_set<std::string>& coinjoin_txids) {
    Builder b;
    std::vector<std::uint32_t> group;
    for (const Transaction& tx : store.transactions()) {
        for (const TxOutput& out : tx.outputs) {
            b.intern(out.address);
        }
        bool is_coinjoin = coinjoin_txids.count(tx.txid) != 0;
        group.clear();
        for (const TxInput& in : tx.inputs) {
            const TxOutput* src = store.try_resolve(in);
            if (src != nullptr) {
                std::uint32_t idx = b.intern(src->address);
                if (!is_coinjoin) {
                    group.push_back(idx);
                }
            }
        }
        b.unite_group(group);
    }

    EntityMap map;
    map.addresses_ = std::move(b.addresses);
    map.address_index_ = std::move(b.index);
    map.parent_ = std::move(b.uf.parent);
    map.freeze();
    return map;
}

EntityMap EntityMap::from_groups(const std::vector<std::vector<std::string>>& groups) {
    Builder b;
    std::vector<std::uint32_t> group;
    for (const std::vector<std::string>& addrs : groups) {
        group.clear();
        for (const std::string& a : addrs) {
            group.push_back(b.intern(a));
        }
        b.unite_group(group);
    }

    EntityMap map;
    map.addresses_ = std::move(b.addresses);
    map.address_index_ = std::move(b.index);
    map.parent_ = std::move(b.uf.parent);
    map.freeze();
    return map;
}

std::uint32_t EntityMap::root_of(std::uint32_t idx) const {
    while (parent_[idx] != idx) {
        idx = parent_[idx];
    }
    return idx;
}

void EntityMap::freeze() {
    // Full path compression, then dense entity numbering in address-intern
    // order of the roots.
    for (std::uint32_t i = 0; i < parent_.size(); ++i) {
        parent_[i] = root_of(i);
    }
    entity_of_.assign(parent_.size(), 0);
    std::unordered_map<std::uint32_t, std::uint32_t> root_to_entity;
    for (std::uint32_t i = 0; i < parent_.size(); ++i) {
        std::uint32_t root = parent_[i];
        auto [it, inserted] = root_to_entity.emplace(root, static_cast<std::uint32_t>(roots_.size()));
        if (inserted) {
            roots_.push_back(root);
        }
        entity_of_[i] = it->second;
    }
    entity_sizes_.assign(roots_.size(), 0);
    canonical_.resize(roots_.size());
    for (std::uint32_t i = 0; i < parent_.size(); ++i) {
        std::uint32_t e = entity_of_[i];
        ++entity_sizes_[e];
        if (canonical_[e].empty() || addresses_[i] < canonical_[e]) {
            canonical_[e] = addresses_[i];
        }
    }
}

std::optional<std::uint32_t> EntityMap::find(std::string_view address) const {
    auto it = address_index_.find(std::string(address));
    if (it == address_index_.end()) {
        return std::nullopt;
    }
    return entity_of_[it->second];
}

std::size_t EntityMap::size_of(std::string_view address) const {
    auto e = find(address);
    return e ? entity_sizes_[*e] : 1;
}

std::vector<std::pair<std::string, std::uint32_t>> EntityMap::memberships() const {
    std::vector<std::pair<std::string, std::uint32_t>> rows;
    rows.reserve(addresses_.size());
    for (std::uint32_t i = 0; i < addresses_.size(); ++i) {
        rows.emplace_back(addresses_[i], entity_of_[i]);
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

EntityRelations build_entity_relations(const ChainStore& store, const EntityMap& entities) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::vector<std::uint32_t> sources;
    std::vector<std::uint32_t> dests;
    for (const Transaction& tx : store.transactions()) {
        sources.clear();
        dests.clear();
        for (const TxInput& in : tx.inputs) {
            const TxOutput* src = store.try_resolve(in);
            if (src == nullptr) {
                continue;
            }
            if (auto e = entities.find(src->address)) {
                sources.push_back(*e);
            }
        }
        for (const TxOutput& out : tx.outputs) {
            if (auto e = entities.find(out.address)) {
                dests.push_back(*e);
            }
        }
        std::sort(sources.begin(), sources.end());
        sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
        std::sort(dests.begin(), dests.end());
        dests.erase(std::unique(dests.begin(), dests.end()), dests.end());
        for (std::uint32_t s : sources) {
            for (std::uint32_t d : dests) {
                if (s != d) {
                    edges.emplace_back(s, d);
                }
            }
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    EntityRelations rel;
    rel.out_adj.resize(entities.entity_count());
    rel.in_adj.resize(entities.entity_count());
    for (const auto& [s, d] : edges) {
        rel.out_adj[s].push_back(d);
        rel.in_adj[d].push_back(s);
    }
    for (auto& adj : rel.in_adj) {
        std::sort(adj.begin(), adj.end());
    }
    return rel;
}

std::string_view to_string(Direction d) { return d == Direction::Send ? "send" : "receive"; }

std::optional<int> LevelAssignment::level_of(std::uint32_t entity) const {
    auto it = level.find(entity);
    if (it == level.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<std::uint32_t> coinjoin_level0_entities(
    const ChainStore& store, const EntityMap& entities,
    const std::unordered_set<std::string>& coinjoin_txids) {
    std::vector<std::uint32_t> level0;
    for (const std::string& txid : coinjoin_txids) {
        const Transaction* tx = store.find(txid);
        if (tx == nullptr) {
            continue;
        }
        for (const TxInput& in : tx->inputs) {
            const TxOutput* src = store.try_resolve(in);
            if (src != nullptr) {
                if (auto e = entities.find(src->address)) {
                    level0.push_back(*e);
                }
            }
        }
        for (const TxOutput& out : tx->outputs) {
            if (auto e = entities.find(out.address)) {
                level0.push_back(*e);
            }
        }
    }
    std::sort(level0.begin(), level0.end());
    level0.erase(std::unique(level0.begin(), level0.end()), level0.end());
    return level0;
}

LevelAssignment assign_levels_on(const EntityRelations& relations,
                                 const std::vector<std::uint32_t>& level0, std::size_t t,
                                 Direction direction) {
    LevelAssignment result;
    result.threshold = t;
    result.direction = direction;

    const auto& adj = direction == Direction::Receive ? relations.out_adj : relations.in_adj;
    std::deque<std::uint32_t> frontier;
    for (std::uint32_t e : level0) {
        if (result.level.emplace(e, 0).second) {
            frontier.push_back(e);
        }
    }
    for (int hop = 1; hop <= 2; ++hop) {
        std::deque<std::uint32_t> next;
        for (std::uint32_t e : frontier) {
            if (adj[e].size() > t) {
                continue;  // kept at its level, not expanded through
            }
            for (std::uint32_t succ : adj[e]) {
                if (result.level.emplace(succ, hop).second) {
                    next.push_back(succ);
                }
            }
        }
        frontier = std::move(next);
    }
    return result;
}

LevelAssignment assign_levels(const ChainStore& store, const EntityMap& entities,
                              const std::unordered_set<std::string>& coinjoin_txids,
                              std::size_t t, Direction direction) {
    EntityRelations relations = build_entity_relations(store, entities);
    std::vector<std::uint32_t> level0 = coinjoin_level0_entities(store, entities, coinjoin_txids);
    return assign_levels_on(relations, level0, t, direction);
}

std::string_view to_string(TagCategory c) {
    switch (c) {
        case TagCategory::Exchange: return "exchange";
        case TagCategory::Service: return "service";
        default: return "other";
    }
}

TagCategory tag_category_from_string(std::string_view s) {
    if (s == "exchange") {
        return TagCategory::Exchange;
    }
    if (s == "service") {
        return TagCategory::Service;
    }
    return TagCategory::Other;
}

std::vector<AttributionTag> load_attribution_tags(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::Io, "cannot open attribution tag file: " + path);
    }
    std::vector<AttributionTag> tags;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (line_no == 1 && line.rfind("target_type,", 0) == 0) {
            continue;  // header
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                fields.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (fields.size() != 4) {
            raise(ErrorCode::Config,
                  "tag file line " + std::to_string(line_no) + ": expected 4 fields");
        }
        AttributionTag tag;
        if (fields[0] == "entity") {
            tag.entity_target = true;
        } else if (fields[0] != "address") {
            raise(ErrorCode::Config, "tag file line " + std::to_string(line_no) +
                                         ": target_type must be address or entity");
        }
        tag.target = fields[1];
        tag.label = fields[2];
        tag.category = tag_category_from_string(fields[3]);
        tags.push_back(std::move(tag));
    }
    return tags;
}

std::unordered_map<std::uint32_t, TagCategory> lift_tags(const std::vector<AttributionTag>& tags,
                                                         const EntityMap& entities,
                                                         std::ostream* warnings) {
    std::unordered_map<std::uint32_t, TagCategory> lifted;
    for (const AttributionTag& tag : tags) {
        // Entity targets name the canonical (minimal) member address, so
        // both target kinds resolve through the address index.
        auto e = entities.find(tag.target);
        if (!e) {
            if (warnings != nullptr) {
                *warnings << "tag target not in entity map, skipped: " << tag.target << "\n";
            }
            continue;
        }
        auto [it, inserted] = lifted.emplace(*e, tag.category);
        if (!inserted && it->second != tag.category) {
            // Exchange wins conflicts: exchange attribution drives the
            // lower-bound exchange analyses.
            if (tag.category == TagCategory::Exchange || it->second == TagCategory::Exchange) {
                if (warnings != nullptr) {
                    *warnings << "conflicting tag categories for entity "
                              << entities.canonical_id(*e) << ", keeping exchange\n";
                }
                it->second = TagCategory::Exchange;
            }
        }
    }
    return lifted;
}

std::unordered_map<int, std::vector<std::uint32_t>> match_exchanges(
    const LevelAssignment& levels,
    const std::unordered_map<std::uint32_t, TagCategory>& entity_tags) {
    std::unordered_map<int, std::vector<std::uint32_t>> result;
    for (const auto& [entity, level] : levels.level) {
        auto it = entity_tags.find(entity);
        if (it != entity_tags.end() && it->second == TagCategory::Exchange) {
            result[level].push_back(entity);
        }
    }
    for (auto& [level, list] : result) {
        std::sort(list.begin(), list.end());
    }
    return result;
}

}  // namespace mixscan
