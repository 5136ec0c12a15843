#include "cvm/value.hpp"

namespace cvm {

bool same_value(const Value& a, const Value& b) noexcept {
    if (a.index() != b.index()) return false;
    if (const auto* sa = std::get_if<String>(&a)) {
        const auto& sb = std::get<String>(b);
        return sa->text == sb.text || *sa->text == *sb.text;
    }
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, String>) {
                return false;
            } else {
                return x == std::get<T>(b);
            }
        },
        a);
}

}  // namespace cvm
