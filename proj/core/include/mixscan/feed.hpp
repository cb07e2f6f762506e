#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "mixscan/tx.hpp"

namespace mixscan {

// One NDJSON feed object -> validated Transaction. Throws Error on
// malformed JSON, missing fields, zero output values, >8 decimal places
// or non-hex txids. Txids are normalized to lowercase.
Transaction parse_tx_record(std::string_view line);

// Canonical NDJSON form; amounts as 8-digit BTC decimal strings.
// serialize(parse(line)) is the fixed point for amounts.
std::string serialize_tx_record(const Transaction& tx);

// Line reader over plain or gzip-compressed feeds (zlib handles both
// transparently). Lines are returned without the trailing newline.
class FeedReader {
public:
    explicit FeedReader(const std::string& path);
    ~FeedReader();
    FeedReader(const FeedReader&) = delete;
    FeedReader& operator=(const FeedReader&) = delete;

    bool next(std::string& line);
    std::size_t line_number() const;  // 1-based index of the last line read

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Parses every non-blank line of a feed. Parse errors are rethrown with
// the 1-based line number prepended.
void for_each_record(const std::string& path, const std::function<void(Transaction&&)>& fn);

}  // namespace mixscan
