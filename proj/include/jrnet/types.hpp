#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace jrnet {

enum class Valence { positive, negative };

inline std::string to_string(Valence v) { return v == Valence::positive ? "positive" : "negative"; }

inline Valence valence_from_string(const std::string& s) {
    if (s == "positive") return Valence::positive;
    if (s == "negative") return Valence::negative;
    throw std::runtime_error("invalid valence label: " + s);
}

enum class Modality { face, head, ecg, eda, resp };

inline constexpr std::array<Modality, 5> kAllModalities = {
    Modality::face, Modality::head, Modality::ecg, Modality::eda, Modality::resp};

inline std::string to_string(Modality m) {
    switch (m) {
    case Modality::face: return "face";
    case Modality::head: return "head";
    case Modality::ecg: return "ecg";
    case Modality::eda: return "eda";
    case Modality::resp: return "resp";
    }
    return "?";
}

inline Modality modality_from_string(const std::string& s) {
    for (Modality m : kAllModalities)
        if (to_string(m) == s) return m;
    throw std::runtime_error("unknown modality: " + s);
}

} // namespace jrnet
