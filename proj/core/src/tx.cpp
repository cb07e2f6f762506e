#include "mixscan/tx.hpp"

namespace mixscan {

ScriptClass script_class_from_string(std::string_view s) {
    return s == "p2wpkh" ? ScriptClass::NativeSegwitP2wpkh : ScriptClass::Other;
}

std::string_view to_string(ScriptClass s) {
    return s == ScriptClass::NativeSegwitP2wpkh ? "p2wpkh" : "other";
}

Amount Transaction::output_sum() const {
    Amount total;
    for (const TxOutput& out : outputs) {
        total += out.value;
    }
    return total;
}

bool is_hex_txid(std::string_view s) {
    if (s.size() != 64) {
        return false;
    }
    for (char c : s) {
        bool hex = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
        if (!hex) {
            return false;
        }
    }
    return true;
}

}  // namespace mixscan
