#include "apmax/indicators.hpp"

namespace apmax {

std::string_view to_string(Category c) {
    switch (c) {
        case Category::Unknown: return "Unknown";
        case Category::AD: return "AD";
        case Category::CN: return "CN";
    }
    return "?";
}

std::optional<Category> category_from_string(std::string_view s) {
    if (s == "AD") return Category::AD;
    if (s == "CN") return Category::CN;
    if (s == "Unknown") return Category::Unknown;
    return std::nullopt;
}

const std::array<std::string_view, kIndicatorCount>& indicator_names() {
    static const std::array<std::string_view, kIndicatorCount> names = {
        "Psychiatric",    "NeurologicOther", "PresentCount21",
        "PresentCount28", "CCI12",           "CCI20",
        "CDRSB",          "ADAS11",          "ADAS13",
        "ADASQ4",         "MMSE",            "MOCA",
        "mPACCdigit",     "mPACCtrailsB",
    };
    return names;
}

std::optional<int> indicator_index(std::string_view name) {
    const auto& names = indicator_names();
    for (int i = 0; i < kIndicatorCount; ++i) {
        if (names[i] == name) return i;
    }
    return std::nullopt;
}

}  // namespace apmax
