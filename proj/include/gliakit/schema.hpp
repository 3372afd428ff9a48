#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gliakit/error.hpp"

namespace gliakit {

using Label = std::uint8_t;

// BraTS label integers (2024 convention; remappable through LabelSchema).
inline constexpr Label kBackground = 0;
inline constexpr Label kNetc = 1;  // non-enhancing necrotic tumor core
inline constexpr Label kSnfh = 2;  // surrounding non-enhancing FLAIR hyperintensity
inline constexpr Label kEt = 3;    // enhancing tissue
inline constexpr Label kRc = 4;    // resection cavity (post-treatment only)

/// Label semantics for one challenge task: the declared label set and the
/// composite regions built from it. TC = ET u NETC, WT = TC u SNFH; RC is
/// scored as its own region and never folded into WT.
struct LabelSchema {
  std::string name;
  std::map<Label, std::string> classes;
  std::map<std::string, std::vector<Label>> composites;

  bool contains(Label v) const { return classes.count(v) != 0; }

  bool has_region(const std::string& region) const { return composites.count(region) != 0; }

  const std::vector<Label>& region_labels(const std::string& region) const {
    auto it = composites.find(region);
    if (it == composites.end())
      throw ValidationError("schema '" + name + "': unknown region '" + region + "'");
    return it->second;
  }

  std::vector<Label> labels() const {
    std::vector<Label> out;
    for (const auto& [v, _] : classes) out.push_back(v);
    return out;
  }

  /// Adult Glioma Post Treatment: {0 background, 1 NETC, 2 SNFH, 3 ET, 4 RC}.
  static LabelSchema agpt() {
    LabelSchema s;
    s.name = "agpt";
    s.classes = {{kBackground, "background"}, {kNetc, "NETC"}, {kSnfh, "SNFH"}, {kEt, "ET"}, {kRc, "RC"}};
    s.composites = {{"ET", {kEt}},
                    {"TC", {kEt, kNetc}},
                    {"WT", {kEt, kNetc, kSnfh}},
                    {"RC", {kRc}},
                    {"NETC", {kNetc}},
                    {"SNFH", {kSnfh}}};
    return s;
  }

  /// Pre-treatment tasks (Africa, GoAT): same labels without the cavity.
  static LabelSchema pre_treatment() {
    LabelSchema s;
    s.name = "pre";
    s.classes = {{kBackground, "background"}, {kNetc, "NETC"}, {kSnfh, "SNFH"}, {kEt, "ET"}};
    s.composites = {{"ET", {kEt}},
                    {"TC", {kEt, kNetc}},
                    {"WT", {kEt, kNetc, kSnfh}},
                    {"NETC", {kNetc}},
                    {"SNFH", {kSnfh}}};
    return s;
  }

  static LabelSchema by_name(const std::string& n) {
    if (n == "agpt") return agpt();
    if (n == "pre") return pre_treatment();
    throw ValidationError("unknown schema '" + n + "' (expected agpt|pre)");
  }
};

inline bool operator==(const LabelSchema& a, const LabelSchema& b) {
  return a.name == b.name && a.classes == b.classes && a.composites == b.composites;
}

}  // namespace gliakit
