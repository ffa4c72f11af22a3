#pragma once

#include <string>

#include "graynet/errors.hpp"

namespace graynet::io {

enum class Label { Anomaly, Normal, Unlabeled };

inline const char* label_name(Label label) {
    switch (label) {
        case Label::Anomaly: return "anomaly";
        case Label::Normal: return "normal";
        case Label::Unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

inline Label parse_label(const std::string& text) {
    if (text == "anomaly") return Label::Anomaly;
    if (text == "normal") return Label::Normal;
    if (text == "unlabeled") return Label::Unlabeled;
    fail(Errc::parse_error, "unknown label '" + text + "'");
}

}  // namespace graynet::io
