#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mixscan/detection.hpp"
#include "mixscan/entity_graph.hpp"

namespace mixscan {

struct MonthKey {
    int year = 1970;
    unsigned month = 1;  // 1..12

    auto operator<=>(const MonthKey&) const = default;
    std::string str() const;  // "2021-01"
    MonthKey next() const;
};

MonthKey month_of(std::int64_t timestamp);
std::int64_t day_of(std::int64_t timestamp);  // days since epoch
std::string day_str(std::int64_t days);       // "2021-01-31"

// Daily closing exchange rates keyed by day. Missing days fall back to
// the previous available day up to 7 days back; wider gaps are an error.
class RateTable {
public:
    static RateTable load(const std::string& path);  // csv date,rate

    void insert(std::int64_t day, double rate);
    bool empty() const { return rates_.empty(); }
    double rate_on(std::int64_t day) const;  // throws RateGap
    double convert(Amount amount, std::int64_t timestamp) const;

private:
    std::map<std::int64_t, double> rates_;
};

enum class OutputStatus { RemixSpent, MixedExit, Unspent };

std::string_view to_string(OutputStatus s);

// Protocol keys used across all metric series: "wasabi", "samourai"
// and "samourai/<pool>".
inline constexpr const char* kProtocolWasabi = "wasabi";
inline constexpr const char* kProtocolSamourai = "samourai";
std::string samourai_pool_protocol(const std::string& pool_label);

struct TrackedOutput {
    OutPoint outpoint;
    Amount value;
    bool eligible = false;  // counted in mixed-coin totals
    OutputStatus status = OutputStatus::Unspent;
    std::string protocol;  // "wasabi" or "samourai/<pool>"
};

struct FlowMonth {
    Amount fresh_in;
    Amount mixed_exit;  // eligible outputs leaving the ecosystem
    Amount remix;       // eligible outputs consumed by same-protocol CoinJoins
    double fresh_in_usd = 0.0;
    double mixed_exit_usd = 0.0;
};

struct ProtocolFlows {
    std::map<MonthKey, FlowMonth> months;
    Amount fresh_total;
    Amount remix_in_total;    // value of remix inputs (equals remix-spent output value)
    Amount exit_all;          // every spent-outside output, change included
    Amount remix_all;         // every remix-spent output
    Amount unspent_all;       // every unspent output
    Amount unspent_eligible;
    Amount coinjoin_fees;     // input sum minus output sum over the protocol's txs
    std::size_t coinjoin_count = 0;
};

struct MixFlowLedger {
    std::map<std::string, ProtocolFlows> protocols;
    std::vector<TrackedOutput> outputs;  // every detected CoinJoin output

    const ProtocolFlows* find(const std::string& protocol) const;
};

// Status partition over every CoinJoin output plus monthly fresh-in /
// mixed-exit / remix sums. Wasabi mix outputs are the values with
// multiplicity >= 3 inside their tx; unique change outputs stay out of
// the mixed-coin totals. Exits are booked in the spending tx's month,
// fresh inputs in the CoinJoin's month.
MixFlowLedger mixed_and_fresh_flows(const ChainStore& store, const DetectionSet& detections,
                                    const RateTable* rates = nullptr);

struct MonthlyCountRow {
    MonthKey month;
    std::string protocol;  // "wasabi" | "samourai"
    std::string pool;      // samourai pool label or "" (all pools / wasabi)
    std::size_t count = 0;
};

// Per month and protocol (and per Samourai pool) tx counts; months inside
// the corpus range without detections get explicit zero rows.
std::vector<MonthlyCountRow> monthly_counts(const ChainStore& store,
                                            const DetectionSet& detections);

struct AnonymityBoundRow {
    MonthKey month;
    std::string protocol;
    Amount alpha;            // cumulative fresh-in minus cumulative mixed-exit
    Amount beta;             // minimum denomination
    std::uint64_t bound = 0; // floor(alpha / beta)
};

// Upper bound on concurrently mixed outputs per month. Wasabi beta is
// 0.01 BTC (lowest supported denomination); Samourai pools use their own
// denomination and the aggregate series the minimum pool denomination.
std::vector<AnonymityBoundRow> anonymity_upper_bound(const MixFlowLedger& ledger);

struct ExchangeFlowRow {
    MonthKey month;
    std::string protocol;
    std::size_t direct_tx_cum = 0;    // CoinJoins with an exit reaching an exchange in 1 hop
    std::size_t indirect_tx_cum = 0;  // ... in exactly 2 hops (shortest path)
    Amount direct_value_cum;
    Amount indirect_value_cum;
};

// Cumulative monthly exchange attribution of mixed-exit outputs. Each
// output is attributed at most once; Level-1 contact wins over Level-2.
// Hop-2 expansion respects the out-degree threshold t.
std::vector<ExchangeFlowRow> exchange_flow_series(
    const ChainStore& store, const MixFlowLedger& ledger, const EntityMap& entities,
    const EntityRelations& relations,
    const std::unordered_map<std::uint32_t, TagCategory>& entity_tags, std::size_t t);

struct PrePostRow {
    MonthKey month;
    std::string protocol;
    std::string side;  // "pre" | "post"
    std::size_t addresses = 0;
    std::size_t entities = 0;
};

// Pre side: distinct fresh (non-remix) input addresses per month against
// the distinct entities that funded them. Post side: distinct mixed-exit
// output addresses against the distinct recipient entities.
std::vector<PrePostRow> pre_post_anonymity(const ChainStore& store,
                                           const DetectionSet& detections,
                                           const EntityMap& entities);

struct RemixlessReport {
    std::vector<std::string> txids;  // chain order
};

// Wasabi CoinJoins without a single remix input.
RemixlessReport remixless_coinjoins(const ChainStore& store, const DetectionSet& detections);

// CSV emission (fixed headers, deterministic order).
void write_monthly_counts_csv(std::ostream& out, const std::vector<MonthlyCountRow>& rows);
void write_mix_flows_csv(std::ostream& out, const MixFlowLedger& ledger, bool with_usd);
void write_anonymity_bounds_csv(std::ostream& out, const std::vector<AnonymityBoundRow>& rows);
void write_exchange_flows_csv(std::ostream& out, const std::vector<ExchangeFlowRow>& rows);
void write_pre_post_csv(std::ostream& out, const std::vector<PrePostRow>& rows);
void write_remixless_csv(std::ostream& out, const ChainStore& store, const RemixlessReport& report);

}  // namespace mixscan
