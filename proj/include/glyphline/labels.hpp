#pragma once

#include <stdexcept>
#include <string>

namespace glyphline {

enum class RegionLabel { Text, NoText, Both };
enum class GlyphLabel { Jar, NoJar };

inline const char* to_string(RegionLabel l) {
    switch (l) {
        case RegionLabel::Text: return "Text";
        case RegionLabel::NoText: return "NoText";
        case RegionLabel::Both: return "Both";
    }
    return "?";
}

inline const char* to_string(GlyphLabel l) {
    return l == GlyphLabel::Jar ? "Jar" : "NoJar";
}

inline RegionLabel region_label_from_string(const std::string& s) {
    if (s == "Text") return RegionLabel::Text;
    if (s == "NoText") return RegionLabel::NoText;
    if (s == "Both") return RegionLabel::Both;
    throw std::invalid_argument("unknown region label: " + s);
}

inline GlyphLabel glyph_label_from_string(const std::string& s) {
    if (s == "Jar") return GlyphLabel::Jar;
    if (s == "NoJar") return GlyphLabel::NoJar;
    throw std::invalid_argument("unknown glyph label: " + s);
}

}  // namespace glyphline
