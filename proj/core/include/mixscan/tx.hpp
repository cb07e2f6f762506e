#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mixscan/amount.hpp"

namespace mixscan {

enum class ScriptClass { NativeSegwitP2wpkh, Other };

// "p2wpkh" maps to NativeSegwitP2wpkh, anything else to Other.
ScriptClass script_class_from_string(std::string_view s);
std::string_view to_string(ScriptClass s);

struct TxOutput {
    Amount value;
    std::string address;
    ScriptClass script = ScriptClass::Other;
};

struct TxInput {
    std::string prev_txid;  // 64 lowercase hex chars
    std::uint32_t prev_vout = 0;
};

struct Transaction {
    std::string txid;
    std::uint32_t height = 0;
    std::int64_t timestamp = 0;  // UTC seconds
    std::vector<TxInput> inputs;
    std::vector<TxOutput> outputs;

    Amount output_sum() const;
};

bool is_hex_txid(std::string_view s);

}  // namespace mixscan
