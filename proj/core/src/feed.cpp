#include "mixscan/feed.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>

#include <nlohmann/json.hpp>

#include "mixscan/error.hpp"

using json = nlohmann::json;

namespace mixscan {

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

const json& require(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        raise(ErrorCode::MissingField, std::string("missing field '") + key + "'");
    }
    return *it;
}

std::string parse_txid_field(const json& v, const char* key) {
    if (!v.is_string()) {
        raise(ErrorCode::BadField, std::string(key) + " must be a string");
    }
    std::string s = v.get<std::string>();
    if (!is_hex_txid(s)) {
        raise(ErrorCode::BadTxid, std::string(key) + " is not 64 hex chars: " + s);
    }
    return lowercase(std::move(s));
}

}  // namespace

Transaction parse_tx_record(std::string_view line) {
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        raise(ErrorCode::MalformedJson, "line is not a JSON object");
    }

    Transaction tx;
    tx.txid = parse_txid_field(require(obj, "txid"), "txid");

    const json& height = require(obj, "height");
    if (!height.is_number_integer() || height.get<std::int64_t>() < 0) {
        raise(ErrorCode::BadField, "height must be a non-negative integer");
    }
    tx.height = height.get<std::uint32_t>();

    const json& time = require(obj, "time");
    if (!time.is_number_integer()) {
        raise(ErrorCode::BadField, "time must be an integer");
    }
    tx.timestamp = time.get<std::int64_t>();

    const json& inputs = require(obj, "inputs");
    if (!inputs.is_array() || inputs.empty()) {
        raise(ErrorCode::BadField, "inputs must be a non-empty array");
    }
    tx.inputs.reserve(inputs.size());
    for (const json& in : inputs) {
        if (!in.is_object()) {
            raise(ErrorCode::BadField, "input must be an object");
        }
        TxInput txin;
        txin.prev_txid = parse_txid_field(require(in, "prev_txid"), "prev_txid");
        const json& vout = require(in, "prev_vout");
        if (!vout.is_number_integer() || vout.get<std::int64_t>() < 0) {
            raise(ErrorCode::BadField, "prev_vout must be a non-negative integer");
        }
        txin.prev_vout = vout.get<std::uint32_t>();
        tx.inputs.push_back(std::move(txin));
    }

    const json& outputs = require(obj, "outputs");
    if (!outputs.is_array() || outputs.empty()) {
        raise(ErrorCode::BadField, "outputs must be a non-empty array");
    }
    tx.outputs.reserve(outputs.size());
    for (const json& out : outputs) {
        if (!out.is_object()) {
            raise(ErrorCode::BadField, "output must be an object");
        }
        TxOutput txout;
        const json& value = require(out, "value");
        if (!value.is_string()) {
            raise(ErrorCode::BadAmount, "output value must be a decimal string");
        }
        txout.value = parse_btc(value.get<std::string>());
        if (txout.value.sats == 0) {
            raise(ErrorCode::BadAmount, "output value must be positive");
        }
        const json& address = require(out, "address");
        if (!address.is_string() || address.get<std::string>().empty()) {
            raise(ErrorCode::BadField, "address must be a non-empty string");
        }
        txout.address = address.get<std::string>();
        const json& script = require(out, "script");
        if (!script.is_string()) {
            raise(ErrorCode::BadField, "script must be a string");
        }
        txout.script = script_class_from_string(script.get<std::string>());
        tx.outputs.push_back(std::move(txout));
    }

    return tx;
}

std::string serialize_tx_record(const Transaction& tx) {
    json obj;
    obj["txid"] = tx.txid;
    obj["height"] = tx.height;
    obj["time"] = tx.timestamp;
    json inputs = json::array();
    for (const TxInput& in : tx.inputs) {
        inputs.push_back({{"prev_txid", in.prev_txid}, {"prev_vout", in.prev_vout}});
    }
    obj["inputs"] = std::move(inputs);
    json outputs = json::array();
    for (const TxOutput& out : tx.outputs) {
        outputs.push_back({{"value", format_btc(out.value)},
                           {"address", out.address},
                           {"script", std::string(to_string(out.script))}});
    }
    obj["outputs"] = std::move(outputs);
    return obj.dump();
}

struct FeedReader::Impl {
    gzFile file = nullptr;
    std::size_t line_no = 0;
    std::array<char, 1 << 16> buf{};
};

FeedReader::FeedReader(const std::string& path) : impl_(std::make_unique<Impl>()) {
    impl_->file = gzopen(path.c_str(), "rb");
    if (impl_->file == nullptr) {
        raise(ErrorCode::Io, "cannot open feed: " + path);
    }
}

FeedReader::~FeedReader() {
    if (impl_ && impl_->file != nullptr) {
        gzclose(impl_->file);
    }
}

bool FeedReader::next(std::string& line) {
    line.clear();
    bool got_any = false;
    for (;;) {
        char* chunk = gzgets(impl_->file, impl_->buf.data(), static_cast<int>(impl_->buf.size()));
        if (chunk == nullptr) {
            if (!got_any) {
                return false;
            }
            break;
        }
        got_any = true;
        line.append(chunk);
        if (!line.empty() && line.back() == '\n') {
            line.pop_back();
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            break;
        }
    }
    ++impl_->line_no;
    return true;
}

std::size_t FeedReader::line_number() const { return impl_->line_no; }

void for_each_record(const std::string& path, const std::function<void(Transaction&&)>& fn) {
    FeedReader reader(path);
    std::string line;
    while (reader.next(line)) {
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        try {
            fn(parse_tx_record(line));
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(reader.line_number()) + ": " + e.what());
        }
    }
}

}  // namespace mixscan
