#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mixscan/chain_store.hpp"

namespace mixscan {

// Union-find partition of addresses under the co-spent heuristic: all
// input addresses of one clustered (non-CoinJoin) transaction belong to
// the same entity. Entity ids are the lexicographically minimal member
// address; addresses never seen are implicit singletons.
class EntityMap {
public:
    // Unions the input addresses of every tx outside `coinjoin_txids`
    // and registers all output addresses. CoinJoin txs contribute no
    // unions.
    static EntityMap cluster(const ChainStore& store,
                             const std::unordered_set<std::string>& coinjoin_txids);

    // Partition from explicit co-spent address groups. The result is a
    // pure function of the group set: processing order never matters.
    static EntityMap from_groups(const std::vector<std::vector<std::string>>& groups);

    std::size_t entity_count() const { return roots_.size(); }
    std::size_t address_count() const { return parent_.size(); }

    // Entity index of an address; nullopt for addresses never seen.
    std::optional<std::uint32_t> find(std::string_view address) const;

    // Number of addresses in the address's entity; 1 for unknown addresses.
    std::size_t size_of(std::string_view address) const;
    std::size_t entity_size(std::uint32_t entity) const { return entity_sizes_[entity]; }

    // Lexicographically minimal member address.
    const std::string& canonical_id(std::uint32_t entity) const { return canonical_[entity]; }

    // (address, entity index) pairs sorted by address.
    std::vector<std::pair<std::string, std::uint32_t>> memberships() const;

private:
    void freeze();
    std::uint32_t root_of(std::uint32_t idx) const;

    std::vector<std::string> addresses_;
    std::unordered_map<std::string, std::uint32_t> address_index_;
    std::vector<std::uint32_t> parent_;            // union-find forest over addresses
    std::vector<std::uint32_t> entity_of_;         // address idx -> dense entity idx
    std::vector<std::uint32_t> roots_;             // entity idx -> representative address idx
    std::vector<std::size_t> entity_sizes_;
    std::vector<std::string> canonical_;
};

// Distinct-counterparty adjacency between entities: an edge u -> v exists
// when some tx has an input address in u and an output address in v.
// Self-loops are not counterparties and are skipped. Unresolved inputs
// and unknown addresses are ignored.
struct EntityRelations {
    std::vector<std::vector<std::uint32_t>> out_adj;  // sorted unique
    std::vector<std::vector<std::uint32_t>> in_adj;

    std::size_t out_degree(std::uint32_t e) const { return out_adj[e].size(); }
    std::size_t in_degree(std::uint32_t e) const { return in_adj[e].size(); }
};

EntityRelations build_entity_relations(const ChainStore& store, const EntityMap& entities);

enum class Direction { Send, Receive };

std::string_view to_string(Direction d);

struct LevelAssignment {
    std::size_t threshold = 100;
    Direction direction = Direction::Receive;
    std::unordered_map<std::uint32_t, int> level;  // entity -> 0, 1 or 2

    std::optional<int> level_of(std::uint32_t entity) const;
};

// Entities of the CoinJoin txs' input and output addresses (Level 0 seeds).
std::vector<std::uint32_t> coinjoin_level0_entities(
    const ChainStore& store, const EntityMap& entities,
    const std::unordered_set<std::string>& coinjoin_txids);

// Two-hop BFS from the Level-0 seeds along `direction`. Entities whose
// relevant degree (out for Receive, in for Send) exceeds t keep their
// level but are not expanded through. Each entity gets its minimal level.
LevelAssignment assign_levels_on(const EntityRelations& relations,
                                 const std::vector<std::uint32_t>& level0, std::size_t t,
                                 Direction direction);

LevelAssignment assign_levels(const ChainStore& store, const EntityMap& entities,
                              const std::unordered_set<std::string>& coinjoin_txids,
                              std::size_t t, Direction direction);

enum class TagCategory { Exchange, Service, Other };

std::string_view to_string(TagCategory c);
TagCategory tag_category_from_string(std::string_view s);

struct AttributionTag {
    bool entity_target = false;  // target is an entity id instead of an address
    std::string target;
    std::string label;
    TagCategory category = TagCategory::Other;
};

// CSV `target_type,target,label,category` with a header line.
std::vector<AttributionTag> load_attribution_tags(const std::string& path);

// Address tags lifted to their containing entity. Tags on unknown
// addresses are logged to `warnings` and skipped; conflicting categories
// resolve to Exchange with a warning.
std::unordered_map<std::uint32_t, TagCategory> lift_tags(const std::vector<AttributionTag>& tags,
                                                         const EntityMap& entities,
                                                         std::ostream* warnings = nullptr);

// Exchange entities per level, sorted. Levels without matches are absent.
std::unordered_map<int, std::vector<std::uint32_t>> match_exchanges(
    const LevelAssignment& levels,
    const std::unordered_map<std::uint32_t, TagCategory>& entity_tags);

}  // namespace mixscan
