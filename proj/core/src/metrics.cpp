#include "mixscan/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "mixscan/error.hpp"

namespace mixscan {

namespace {

using days_t = std::chrono::sys_days;

days_t to_sys_days(std::int64_t timestamp) {
    return std::chrono::floor<std::chrono::days>(
        std::chrono::sys_seconds{std::chrono::seconds{timestamp}});
}

std::string two_digits(unsigned v) {
    char buf[4];
    std::snprintf(buf, sizeof(buf), "%02u", v);
    return buf;
}

}  // namespace

std::string MonthKey::str() const { return std::to_string(year) + "-" + two_digits(month); }

MonthKey MonthKey::next() const {
    return month == 12 ? MonthKey{year + 1, 1} : MonthKey{year, month + 1};
}

MonthKey month_of(std::int64_t timestamp) {
    std::chrono::year_month_day ymd{to_sys_days(timestamp)};
    return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month())};
}

std::int64_t day_of(std::int64_t timestamp) {
    return to_sys_days(timestamp).time_since_epoch().count();
}

std::string day_str(std::int64_t days) {
    std::chrono::year_month_day ymd{days_t{std::chrono::days{days}}};
    return std::to_string(static_cast<int>(ymd.year())) + "-" +
           two_digits(static_cast<unsigned>(ymd.month())) + "-" +
           two_digits(static_cast<unsigned>(ymd.day()));
}

RateTable RateTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::Io, "cannot open rates file: " + path);
    }
    RateTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#' || (line_no == 1 && line.rfind("date,", 0) == 0)) {
            continue;
        }
        std::size_t comma = line.find(',');
        if (comma == std::string::npos || comma != 10) {
            raise(ErrorCode::Config, "rates line " + std::to_string(line_no) +
                                         ": expected YYYY-MM-DD,rate");
        }
        int y = 0;
        unsigned m = 0, d = 0;
        if (std::sscanf(line.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3) {
            raise(ErrorCode::Config, "rates line " + std::to_string(line_no) + ": bad date");
        }
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
        if (!ymd.ok()) {
            raise(ErrorCode::Config, "rates line " + std::to_string(line_no) + ": bad date");
        }
        double rate = 0.0;
        try {
            rate = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            raise(ErrorCode::Config, "rates line " + std::to_string(line_no) + ": bad rate");
        }
        table.insert(days_t{ymd}.time_since_epoch().count(), rate);
    }
    return table;
}

void RateTable::insert(std::int64_t day, double rate) { rates_[day] = rate; }

double RateTable::rate_on(std::int64_t day) const {
    auto it = rates_.upper_bound(day);
    if (it == rates_.begin()) {
        raise(ErrorCode::RateGap, "no rate on or before " + day_str(day));
    }
    --it;
    if (day - it->first > 7) {
        raise(ErrorCode::RateGap, "rate gap of " + std::to_string(day - it->first) +
                                      " days before " + day_str(day));
    }
    if (day != it->first) {
        std::fprintf(stderr, "warning: no rate for %s, using %s\n", day_str(day).c_str(),
                     day_str(it->first).c_str());
    }
    return it->second;
}

double RateTable::convert(Amount amount, std::int64_t timestamp) const {
    return rate_on(day_of(timestamp)) * static_cast<double>(amount.sats) /
           static_cast<double>(kSatsPerBtc);
}

std::string_view to_string(OutputStatus s) {
    switch (s) {
        case OutputStatus::RemixSpent: return "remix-spent";
        case OutputStatus::MixedExit: return "mixed-exit";
        default: return "unspent";
    }
}

std::string samourai_pool_protocol(const std::string& pool_label) {
    return std::string(kProtocolSamourai) + "/" + pool_label;
}

const ProtocolFlows* MixFlowLedger::find(const std::string& protocol) const {
    auto it = protocols.find(protocol);
    return it == protocols.end() ? nullptr : &it->second;
}

namespace {

// Output values with multiplicity >= 3 carry the anonymity-bearing
// denominations of a Wasabi CoinJoin; unique change outputs do not.
std::vector<bool> wasabi_eligibility(const Transaction& tx) {
    std::unordered_map<std::uint64_t, std::size_t> counts;
    for (const TxOutput& out : tx.outputs) {
        ++counts[out.value.sats];
    }
    std::vector<bool> eligible(tx.outputs.size());
    for (std::size_t i = 0; i < tx.outputs.size(); ++i) {
        eligible[i] = counts[tx.outputs[i].value.sats] >= 3;
    }
    return eligible;
}

struct FlowAccumulator {
    MixFlowLedger& ledger;
    const ChainStore& store;
    const RateTable* rates;

    void track_tx(const Transaction& tx, const std::string& protocol,
                  const std::vector<bool>& eligible,
                  const std::function<bool(const std::string&)>& same_protocol) {
        ProtocolFlows& flows = ledger.protocols[protocol];
        ++flows.coinjoin_count;
        if (auto f = store.fee(tx)) {
            flows.coinjoin_fees += *f;
        }

        MonthKey tx_month = month_of(tx.timestamp);
        for (const TxInput& in : tx.inputs) {
            const TxOutput* src = store.try_resolve(in);
            if (src == nullptr) {
                continue;
            }
            if (same_protocol(in.prev_txid)) {
                flows.remix_in_total += src->value;
            } else {
                flows.fresh_total += src->value;
                FlowMonth& fm = flows.months[tx_month];
                fm.fresh_in += src->value;
                if (rates != nullptr) {
                    fm.fresh_in_usd += rates->convert(src->value, tx.timestamp);
                }
            }
        }

        for (std::uint32_t vout = 0; vout < tx.outputs.size(); ++vout) {
            const TxOutput& out = tx.outputs[vout];
            TrackedOutput tracked;
            tracked.outpoint = {tx.txid, vout};
            tracked.value = out.value;
            tracked.eligible = eligible[vout];
            tracked.protocol = protocol;

            const Transaction* spender = store.spending_tx(tracked.outpoint);
            if (spender == nullptr) {
                tracked.status = OutputStatus::Unspent;
                flows.unspent_all += out.value;
                if (tracked.eligible) {
                    flows.unspent_eligible += out.value;
                }
            } else if (same_protocol(spender->txid)) {
                tracked.status = OutputStatus::RemixSpent;
                flows.remix_all += out.value;
                if (tracked.eligible) {
                    flows.months[month_of(spender->timestamp)].remix += out.value;
                }
            } else {
                tracked.status = OutputStatus::MixedExit;
                flows.exit_all += out.value;
                if (tracked.eligible) {
                    FlowMonth& fm = flows.months[month_of(spender->timestamp)];
                    fm.mixed_exit += out.value;
                    if (rates != nullptr) {
                        fm.mixed_exit_usd += rates->convert(out.value, spender->timestamp);
                    }
                }
            }
            ledger.outputs.push_back(std::move(tracked));
        }
    }
};

}  // namespace

MixFlowLedger mixed_and_fresh_flows(const ChainStore& store, const DetectionSet& detections,
                                    const RateTable* rates) {
    MixFlowLedger ledger;
    FlowAccumulator acc{ledger, store, rates};

    auto is_wasabi = [&](const std::string& txid) { return detections.is_wasabi(txid); };
    for (const Transaction& tx : store.transactions()) {
        if (detections.is_wasabi(tx.txid)) {
            acc.track_tx(tx, kProtocolWasabi, wasabi_eligibility(tx), is_wasabi);
            continue;
        }
        const WhirlpoolTx* mix = detections.whirlpool.find(tx.txid);
        if (mix != nullptr) {
            const Pool& pool = detections.whirlpool.pools[mix->pool_index];
            std::string protocol = samourai_pool_protocol(pool_label(pool));
            std::vector<bool> eligible(tx.outputs.size(), true);
            std::size_t pool_index = mix->pool_index;
            auto same_pool = [&](const std::string& txid) {
                const WhirlpoolTx* other = detections.whirlpool.find(txid);
                return other != nullptr && other->pool_index == pool_index;
            };
            acc.track_tx(tx, protocol, eligible, same_pool);
        }
    }

    // Aggregate Samourai series over the pools.
    ProtocolFlows aggregate;
    bool any_pool = false;
    for (const auto& [protocol, flows] : ledger.protocols) {
        if (protocol.rfind("samourai/", 0) != 0) {
            continue;
        }
        any_pool = true;
        aggregate.fresh_total += flows.fresh_total;
        aggregate.remix_in_total += flows.remix_in_total;
        aggregate.exit_all += flows.exit_all;
        aggregate.remix_all += flows.remix_all;
        aggregate.unspent_all += flows.unspent_all;
        aggregate.unspent_eligible += flows.unspent_eligible;
        aggregate.coinjoin_fees += flows.coinjoin_fees;
        aggregate.coinjoin_count += flows.coinjoin_count;
        for (const auto& [month, fm] : flows.months) {
            FlowMonth& agg = aggregate.months[month];
            agg.fresh_in += fm.fresh_in;
            agg.mixed_exit += fm.mixed_exit;
            agg.remix += fm.remix;
            agg.fresh_in_usd += fm.fresh_in_usd;
            agg.mixed_exit_usd += fm.mixed_exit_usd;
        }
    }
    if (any_pool) {
        ledger.protocols[kProtocolSamourai] = std::move(aggregate);
    }
    return ledger;
}

std::vector<MonthlyCountRow> monthly_counts(const ChainStore& store,
                                            const DetectionSet& detections) {
    std::vector<MonthlyCountRow> rows;
    if (store.size() == 0) {
        return rows;
    }
    MonthKey first = month_of(store.transactions().front().timestamp);
    MonthKey last = first;
    for (const Transaction& tx : store.transactions()) {
        MonthKey m = month_of(tx.timestamp);
        first = std::min(first, m);
        last = std::max(last, m);
    }

    std::map<MonthKey, std::size_t> wasabi;
    std::map<MonthKey, std::size_t> samourai_all;
    std::map<std::string, std::map<MonthKey, std::size_t>> by_pool;
    std::vector<std::string> pool_labels;
    for (const Pool& pool : detections.whirlpool.pools) {
        pool_labels.push_back(pool_label(pool));
        by_pool[pool_labels.back()];
    }
    for (const Transaction& tx : store.transactions()) {
        MonthKey m = month_of(tx.timestamp);
        if (detections.is_wasabi(tx.txid)) {
            ++wasabi[m];
        }
        const WhirlpoolTx* mix = detections.whirlpool.find(tx.txid);
        if (mix != nullptr) {
            ++samourai_all[m];
            ++by_pool[pool_labels[mix->pool_index]][m];
        }
    }

    for (MonthKey m = first;; m = m.next()) {
        rows.push_back({m, "wasabi", "", wasabi[m]});
        rows.push_back({m, "samourai", "", samourai_all[m]});
        for (const std::string& label : pool_labels) {
            rows.push_back({m, "samourai", label, by_pool[label][m]});
        }
        if (m == last) {
            break;
        }
    }
    return rows;
}

std::vector<AnonymityBoundRow> anonymity_upper_bound(const MixFlowLedger& ledger) {
    std::vector<AnonymityBoundRow> rows;

    Amount samourai_min_denom{0};
    for (const auto& [protocol, flows] : ledger.protocols) {
        if (protocol.rfind("samourai/", 0) == 0) {
            Amount denom = parse_btc(protocol.substr(9));
            if (samourai_min_denom.sats == 0 || denom < samourai_min_denom) {
                samourai_min_denom = denom;
            }
        }
    }

    for (const auto& [protocol, flows] : ledger.protocols) {
        Amount beta;
        if (protocol == kProtocolWasabi) {
            beta = Amount{1'000'000};  // 0.01 BTC, lowest Wasabi denomination
        } else if (protocol == kProtocolSamourai) {
            beta = samourai_min_denom;
        } else {
            beta = parse_btc(protocol.substr(9));
        }
        if (beta.sats == 0 || flows.months.empty()) {
            continue;
        }
        Amount fresh_cum, exit_cum;
        MonthKey first = flows.months.begin()->first;
        MonthKey last = flows.months.rbegin()->first;
        for (MonthKey m = first;; m = m.next()) {
            auto it = flows.months.find(m);
            if (it != flows.months.end()) {
                fresh_cum += it->second.fresh_in;
                exit_cum += it->second.mixed_exit;
            }
            Amount alpha = fresh_cum - exit_cum;
            rows.push_back({m, protocol, alpha, beta, alpha.sats / beta.sats});
            if (m == last) {
                break;
            }
        }
    }
    std::sort(rows.begin(), rows.end(), [](const AnonymityBoundRow& a, const AnonymityBoundRow& b) {
        return std::tie(a.month, a.protocol) < std::tie(b.month, b.protocol);
    });
    return rows;
}

std::vector<ExchangeFlowRow> exchange_flow_series(
    const ChainStore& store, const MixFlowLedger& ledger, const EntityMap& entities,
    const EntityRelations& relations,
    const std::unordered_map<std::uint32_t, TagCategory>& entity_tags, std::size_t t) {
    std::unordered_set<std::uint32_t> exchanges;
    for (const auto& [entity, category] : entity_tags) {
        if (category == TagCategory::Exchange) {
            exchanges.insert(entity);
        }
    }

    struct TxAttribution {
        bool direct = false;
        bool indirect = false;
        Amount direct_value;
        Amount indirect_value;
    };
    // protocol -> coinjoin txid -> attribution
    std::map<std::string, std::unordered_map<std::string, TxAttribution>> attributions;

    for (const TrackedOutput& out : ledger.outputs) {
        if (!out.eligible || out.status != OutputStatus::MixedExit) {
            continue;
        }
        std::string protocol =
            out.protocol.rfind("samourai/", 0) == 0 ? kProtocolSamourai : out.protocol;
        const Transaction* spender = store.spending_tx(out.outpoint);
        if (spender == nullptr) {
            continue;
        }
        std::vector<std::uint32_t> recipients;
        for (const TxOutput& o : spender->outputs) {
            if (auto e = entities.find(o.address)) {
                recipients.push_back(*e);
            }
        }
        std::sort(recipients.begin(), recipients.end());
        recipients.erase(std::unique(recipients.begin(), recipients.end()), recipients.end());

        bool direct = std::any_of(recipients.begin(), recipients.end(),
                                  [&](std::uint32_t e) { return exchanges.count(e) != 0; });
        bool indirect = false;
        if (!direct) {
            for (std::uint32_t e : recipients) {
                if (relations.out_degree(e) > t) {
                    continue;  // high-degree entity, traversal stops here
                }
                for (std::uint32_t succ : relations.out_adj[e]) {
                    if (exchanges.count(succ) != 0) {
                        indirect = true;
                        break;
                    }
                }
                if (indirect) {
                    break;
                }
            }
        }
        if (!direct && !indirect) {
            continue;
        }
        TxAttribution& attr = attributions[protocol][out.outpoint.txid];
        if (direct) {
            attr.direct = true;
            attr.direct_value += out.value;
        } else {
            attr.indirect = true;
            attr.indirect_value += out.value;
        }
    }

    std::vector<ExchangeFlowRow> rows;
    if (store.size() == 0) {
        return rows;
    }
    MonthKey first = month_of(store.transactions().front().timestamp);
    MonthKey last = first;
    for (const Transaction& tx : store.transactions()) {
        MonthKey m = month_of(tx.timestamp);
        first = std::min(first, m);
        last = std::max(last, m);
    }

    for (const auto& [protocol, by_tx] : attributions) {
        // Monthly deltas keyed by the CoinJoin tx's month.
        std::map<MonthKey, ExchangeFlowRow> deltas;
        for (const auto& [txid, attr] : by_tx) {
            const Transaction* tx = store.find(txid);
            if (tx == nullptr) {
                continue;
            }
            ExchangeFlowRow& d = deltas[month_of(tx->timestamp)];
            d.direct_tx_cum += attr.direct ? 1U : 0U;
            d.indirect_tx_cum += attr.indirect ? 1U : 0U;
            d.direct_value_cum += attr.direct_value;
            d.indirect_value_cum += attr.indirect_value;
        }
        ExchangeFlowRow running;
        for (MonthKey m = first;; m = m.next()) {
            auto it = deltas.find(m);
            if (it != deltas.end()) {
                running.direct_tx_cum += it->second.direct_tx_cum;
                running.indirect_tx_cum += it->second.indirect_tx_cum;
                running.direct_value_cum += it->second.direct_value_cum;
                running.indirect_value_cum += it->second.indirect_value_cum;
            }
            running.month = m;
            running.protocol = protocol;
            rows.push_back(running);
            if (m == last) {
                break;
            }
        }
    }
    return rows;
}

std::vector<PrePostRow> pre_post_anonymity(const ChainStore& store,
                                           const DetectionSet& detections,
                                           const EntityMap& entities) {
    struct SideSets {
        std::unordered_set<std::string> addresses;
        std::unordered_set<std::uint32_t> entity_set;
    };
    std::map<std::pair<MonthKey, std::string>, SideSets> pre, post;

    for (const Transaction& tx : store.transactions()) {
        bool wasabi = detections.is_wasabi(tx.txid);
        const WhirlpoolTx* mix = detections.whirlpool.find(tx.txid);
        if (!wasabi && mix == nullptr) {
            continue;
        }
        std::string protocol = wasabi ? kProtocolWasabi : kProtocolSamourai;
        auto same_protocol = [&](const std::string& txid) {
            if (wasabi) {
                return detections.is_wasabi(txid);
            }
            const WhirlpoolTx* other = detections.whirlpool.find(txid);
            return other != nullptr && other->pool_index == mix->pool_index;
        };

        // Pre side: fresh input addresses vs the entities that funded them.
        SideSets& pre_sets = pre[{month_of(tx.timestamp), protocol}];
        for (const TxInput& in : tx.inputs) {
            if (same_protocol(in.prev_txid)) {
                continue;  // remix input
            }
            const TxOutput* src = store.try_resolve(in);
            if (src == nullptr) {
                continue;
            }
            pre_sets.addresses.insert(src->address);
            const Transaction* funding = store.find(in.prev_txid);
            for (const TxInput& fin : funding->inputs) {
                const TxOutput* fsrc = store.try_resolve(fin);
                if (fsrc == nullptr) {
                    continue;
                }
                if (auto e = entities.find(fsrc->address)) {
                    pre_sets.entity_set.insert(*e);
                }
                break;  // funding tx inputs share one entity after clustering
            }
        }

        // Post side: mixed-exit output addresses vs recipient entities.
        std::vector<bool> eligible =
            wasabi ? wasabi_eligibility(tx) : std::vector<bool>(tx.outputs.size(), true);
        for (std::uint32_t vout = 0; vout < tx.outputs.size(); ++vout) {
            if (!eligible[vout]) {
                continue;
            }
            const Transaction* spender = store.spending_tx({tx.txid, vout});
            if (spender == nullptr || same_protocol(spender->txid)) {
                continue;
            }
            SideSets& post_sets = post[{month_of(spender->timestamp), protocol}];
            post_sets.addresses.insert(tx.outputs[vout].address);
            for (const TxOutput& o : spender->outputs) {
                if (auto e = entities.find(o.address)) {
                    post_sets.entity_set.insert(*e);
                }
            }
        }
    }

    std::vector<PrePostRow> rows;
    for (const auto& [key, sets] : pre) {
        rows.push_back({key.first, key.second, "pre", sets.addresses.size(),
                        sets.entity_set.size()});
    }
    for (const auto& [key, sets] : post) {
        rows.push_back({key.first, key.second, "post", sets.addresses.size(),
                        sets.entity_set.size()});
    }
    std::sort(rows.begin(), rows.end(), [](const PrePostRow& a, const PrePostRow& b) {
        return std::tie(a.month, a.protocol, a.side) < std::tie(b.month, b.protocol, b.side);
    });
    return rows;
}

RemixlessReport remixless_coinjoins(const ChainStore& store, const DetectionSet& detections) {
    RemixlessReport report;
    for (const Transaction& tx : store.transactions()) {
        if (!detections.is_wasabi(tx.txid)) {
            continue;
        }
        bool has_remix = std::any_of(tx.inputs.begin(), tx.inputs.end(), [&](const TxInput& in) {
            return detections.is_wasabi(in.prev_txid);
        });
        if (!has_remix) {
            report.txids.push_back(tx.txid);
        }
    }
    return report;
}

namespace {

std::string usd(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void write_monthly_counts_csv(std::ostream& out, const std::vector<MonthlyCountRow>& rows) {
    out << "month,protocol,pool,count\n";
    for (const MonthlyCountRow& r : rows) {
        out << r.month.str() << "," << r.protocol << "," << r.pool << "," << r.count << "\n";
    }
}

void write_mix_flows_csv(std::ostream& out, const MixFlowLedger& ledger, bool with_usd) {
    out << "month,protocol,fresh_in_sat,mixed_exit_sat,remix_sat";
    if (with_usd) {
        out << ",fresh_in_usd,mixed_exit_usd";
    }
    out << "\n";
    std::vector<std::tuple<MonthKey, std::string, const FlowMonth*>> rows;
    for (const auto& [protocol, flows] : ledger.protocols) {
        for (const auto& [month, fm] : flows.months) {
            rows.emplace_back(month, protocol, &fm);
        }
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    for (const auto& [month, protocol, fm] : rows) {
        out << month.str() << "," << protocol << "," << fm->fresh_in.sats << ","
            << fm->mixed_exit.sats << "," << fm->remix.sats;
        if (with_usd) {
            out << "," << usd(fm->fresh_in_usd) << "," << usd(fm->mixed_exit_usd);
        }
        out << "\n";
    }
}

void write_anonymity_bounds_csv(std::ostream& out, const std::vector<AnonymityBoundRow>& rows) {
    out << "month,protocol,alpha_sat,beta_sat,max_outputs\n";
    for (const AnonymityBoundRow& r : rows) {
        out << r.month.str() << "," << r.protocol << "," << r.alpha.sats << "," << r.beta.sats
            << "," << r.bound << "\n";
    }
}

void write_exchange_flows_csv(std::ostream& out, const std::vector<ExchangeFlowRow>& rows) {
    out << "month,protocol,direct_txs_cum,indirect_txs_cum,direct_sat_cum,indirect_sat_cum\n";
    for (const ExchangeFlowRow& r : rows) {
        out << r.month.str() << "," << r.protocol << "," << r.direct_tx_cum << ","
            << r.indirect_tx_cum << "," << r.direct_value_cum.sats << ","
            << r.indirect_value_cum.sats << "\n";
    }
}

void write_pre_post_csv(std::ostream& out, const std::vector<PrePostRow>& rows) {
    out << "month,protocol,side,addresses,entities\n";
    for (const PrePostRow& r : rows) {
        out << r.month.str() << "," << r.protocol << "," << r.side << "," << r.addresses << ","
            << r.entities << "\n";
    }
}

void write_remixless_csv(std::ostream& out, const ChainStore& store,
                         const RemixlessReport& report) {
    out << "txid,height\n";
    for (const std::string& txid : report.txids) {
        const Transaction* tx = store.find(txid);
        out << txid << "," << (tx != nullptr ? tx->height : 0) << "\n";
    }
}

}  // namespace mixscan
