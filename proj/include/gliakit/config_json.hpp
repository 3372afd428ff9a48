#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gliakit/augment.hpp"
#include "gliakit/ensemble.hpp"
#include "gliakit/error.hpp"
#include "gliakit/losses.hpp"
#include "gliakit/morphology.hpp"
#include "gliakit/metrics_image.hpp"
#include "gliakit/metrics_seg.hpp"
#include "gliakit/phantom.hpp"
#include "gliakit/postproc.hpp"
#include "gliakit/rng.hpp"
#include "gliakit/version.hpp"

namespace gliakit {

using Json = nlohmann::json;

namespace json_detail {

inline void require_object(const Json& j, const std::string& what) {
  if (!j.is_object()) throw FormatError(what + ": expected a JSON object");
}

inline void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& what) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool known = false;
    for (const auto& a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known) throw FormatError(what + ": unknown key '" + key + "'");
  }
}

/// Descriptors of the kind-specific parameter fields (double or int members).
struct ParamField {
  const char* name;
  double TransformParams::* dmember;
  int TransformParams::* imember;
};

inline const std::vector<ParamField>& param_fields(TransformKind kind) {
  using P = TransformParams;
  static const std::map<TransformKind, std::vector<ParamField>> table = {
      {TransformKind::gibbs, {{"alpha_min", &P::alpha_min, nullptr}, {"alpha_max", &P::alpha_max, nullptr}}},
      {TransformKind::gaussian_noise,
       {{"noise_std_min", &P::noise_std_min, nullptr}, {"noise_std_max", &P::noise_std_max, nullptr}}},
      {TransformKind::gaussian_smooth,
       {{"sigma_min", &P::sigma_min, nullptr}, {"sigma_max", &P::sigma_max, nullptr}}},
      {TransformKind::intensity_scale,
       {{"scale_min", &P::scale_min, nullptr}, {"scale_max", &P::scale_max, nullptr}}},
      {TransformKind::flip, {{"flip_chance", &P::flip_chance, nullptr}}},
      {TransformKind::motion,
       {{"degrees", &P::degrees, nullptr},
        {"translation_mm", &P::translation_mm, nullptr},
        {"num_movements", nullptr, &P::num_movements}}},
      {TransformKind::spike,
       {{"num_spikes", nullptr, &P::num_spikes},
        {"spike_intensity_min", &P::spike_intensity_min, nullptr},
        {"spike_intensity_max", &P::spike_intensity_max, nullptr}}},
      {TransformKind::bias_field,
       {{"bias_coefficient", &P::bias_coefficient, nullptr}, {"bias_order", nullptr, &P::bias_order}}},
      {TransformKind::elastic,
       {{"control_points", nullptr, &P::control_points},
        {"max_displacement_voxels", &P::max_displacement_voxels, nullptr}}},
      {TransformKind::anisotropy,
       {{"downsample_min", &P::downsample_min, nullptr}, {"downsample_max", &P::downsample_max, nullptr}}},
  };
  return table.at(kind);
}

}  // namespace json_detail

inline TransformSpec transform_spec_from_json(const Json& j) {
  json_detail::require_object(j, "transform");
  json_detail::reject_unknown_keys(j, {"kind", "probability", "params"}, "transform");
  if (!j.contains("kind")) throw FormatError("transform: missing 'kind'");
  TransformSpec spec;
  spec.kind = transform_kind_from_string(j.at("kind").get<std::string>());
  spec.probability = j.value("probability", 0.1);
  if (j.contains("params")) {
    const Json& p = j.at("params");
    json_detail::require_object(p, "transform params");
    const auto& fields = json_detail::param_fields(spec.kind);
    std::vector<std::string> allowed;
    for (const auto& f : fields) allowed.push_back(f.name);
    json_detail::reject_unknown_keys(p, allowed, std::string("params of ") + to_string(spec.kind));
    for (const auto& f : fields) {
      if (!p.contains(f.name)) continue;
      if (f.dmember)
        spec.params.*(f.dmember) = p.at(f.name).get<double>();
      else
        spec.params.*(f.imember) = p.at(f.name).get<int>();
    }
  }
  spec.validate();
  return spec;
}

inline Json to_json(const TransformSpec& spec) {
  Json p = Json::object();
  for (const auto& f : json_detail::param_fields(spec.kind)) {
    if (f.dmember)
      p[f.name] = spec.params.*(f.dmember);
    else
      p[f.name] = spec.params.*(f.imember);
  }
  return Json{{"kind", to_string(spec.kind)}, {"probability", spec.probability}, {"params", p}};
}

inline AugmentConfig augment_config_from_json(const Json& j) {
  json_detail::require_object(j, "augmentation config");
  json_detail::reject_unknown_keys(j, {"master_seed", "transforms"}, "augmentation config");
  AugmentConfig cfg;
  cfg.master_seed = j.value("master_seed", std::uint64_t{0});
  if (!j.contains("transforms") || !j.at("transforms").is_array())
    throw FormatError("augmentation config: missing 'transforms' array");
  for (const auto& t : j.at("transforms")) cfg.transforms.push_back(transform_spec_from_json(t));
  cfg.validate();
  return cfg;
}

inline Json to_json(const AugmentConfig& cfg) {
  Json ts = Json::array();
  for (const auto& t : cfg.transforms) ts.push_back(to_json(t));
  return Json{{"master_seed", cfg.master_seed}, {"transforms", ts}};
}

inline PostprocConfig postproc_config_from_json(const Json& j) {
  json_detail::require_object(j, "postproc config");
  json_detail::reject_unknown_keys(
      j, {"dust_min_voxels", "dust_regions", "et_wt_threshold", "snfh_wt_trigger", "connectivity"},
      "postproc config");
  PostprocConfig cfg;
  cfg.dust_min_voxels = j.value("dust_min_voxels", cfg.dust_min_voxels);
  if (j.contains("dust_regions")) cfg.dust_regions = j.at("dust_regions").get<std::vector<std::string>>();
  cfg.et_wt_threshold = j.value("et_wt_threshold", cfg.et_wt_threshold);
  cfg.snfh_wt_trigger = j.value("snfh_wt_trigger", cfg.snfh_wt_trigger);
  if (j.contains("connectivity")) cfg.connectivity = connectivity_from_int(j.at("connectivity").get<int>());
  cfg.validate();
  return cfg;
}

inline Json to_json(const PostprocConfig& cfg) {
  return Json{{"dust_min_voxels", cfg.dust_min_voxels},
              {"dust_regions", cfg.dust_regions},
              {"et_wt_threshold", cfg.et_wt_threshold},
              {"snfh_wt_trigger", cfg.snfh_wt_trigger},
              {"connectivity", static_cast<int>(cfg.connectivity)}};
}

inline LesionWiseConfig lesionwise_config_from_json(const Json& j) {
  json_detail::require_object(j, "lesion-wise config");
  json_detail::reject_unknown_keys(
      j, {"dilation_radius_voxels", "min_gt_lesion_voxels", "fp_fn_hd95_penalty_mm", "connectivity"},
      "lesion-wise config");
  LesionWiseConfig cfg;
  cfg.dilation_radius_voxels = j.value("dilation_radius_voxels", cfg.dilation_radius_voxels);
  cfg.min_gt_lesion_voxels = j.value("min_gt_lesion_voxels", cfg.min_gt_lesion_voxels);
  cfg.fp_fn_hd95_penalty_mm = j.value("fp_fn_hd95_penalty_mm", cfg.fp_fn_hd95_penalty_mm);
  if (j.contains("connectivity")) cfg.connectivity = connectivity_from_int(j.at("connectivity").get<int>());
  cfg.validate();
  return cfg;
}

inline Json to_json(const LesionWiseConfig& cfg) {
  return Json{{"dilation_radius_voxels", cfg.dilation_radius_voxels},
              {"min_gt_lesion_voxels", cfg.min_gt_lesion_voxels},
              {"fp_fn_hd95_penalty_mm", cfg.fp_fn_hd95_penalty_mm},
              {"connectivity", static_cast<int>(cfg.connectivity)}};
}

inline FusionConfig fusion_config_from_json(const Json& j) {
  json_detail::require_object(j, "fusion config");
  json_detail::reject_unknown_keys(j, {"mode", "tie_priority", "weights"}, "fusion config");
  FusionConfig cfg;
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "majority_vote" || mode == "vote")
      cfg.mode = FusionMode::majority_vote;
    else if (mode == "prob_mean")
      cfg.mode = FusionMode::prob_mean;
    else
      throw FormatError("fusion config: unknown mode '" + mode + "'");
  }
  if (j.contains("tie_priority"))
    for (const auto& l : j.at("tie_priority")) cfg.tie_priority.push_back(static_cast<Label>(l.get<int>()));
  if (j.contains("weights")) cfg.weights = j.at("weights").get<std::vector<double>>();
  return cfg;
}

inline Json to_json(const FusionConfig& cfg) {
  Json prio = Json::array();
  for (Label l : cfg.tie_priority) prio.push_back(static_cast<int>(l));
  return Json{{"mode", cfg.mode == FusionMode::majority_vote ? "majority_vote" : "prob_mean"},
              {"tie_priority", prio},
              {"weights", cfg.weights}};
}

inline Json to_json(const LossWeights& w) {
  return Json{{"w_dice", w.w_dice},       {"w_focal", w.w_focal}, {"w_bbox", w.w_bbox},
              {"w_inertia", w.w_inertia}, {"focal_gamma", w.focal_gamma}, {"epsilon", w.epsilon}};
}

inline Json to_json(const ImageMetricConfig& cfg) {
  return Json{{"data_range", cfg.data_range}, {"window", cfg.window},         {"sigma", cfg.sigma},
              {"k1", cfg.k1},                 {"k2", cfg.k2},                 {"slice_mode", cfg.slice_mode}};
}

inline PhantomSpec phantom_spec_from_json(const Json& j) {
  json_detail::require_object(j, "phantom spec");
  json_detail::reject_unknown_keys(j, {"dims", "spacing", "lesions", "noise_std", "seed", "schema"}, "phantom spec");
  PhantomSpec spec;
  if (j.contains("dims")) {
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() != 3) throw FormatError("phantom spec: 'dims' must have 3 entries");
    spec.dims = {dims[0], dims[1], dims[2]};
  }
  if (j.contains("spacing")) {
    const auto sp = j.at("spacing").get<std::vector<double>>();
    if (sp.size() != 3) throw FormatError("phantom spec: 'spacing' must have 3 entries");
    spec.spacing = {sp[0], sp[1], sp[2]};
  }
  if (j.contains("schema")) spec.schema = LabelSchema::by_name(j.at("schema").get<std::string>());
  spec.noise_std = j.value("noise_std", spec.noise_std);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("lesions"))
    for (const auto& l : j.at("lesions")) {
      json_detail::require_object(l, "phantom lesion");
      json_detail::reject_unknown_keys(l, {"center_mm", "semi_axes_mm", "label", "intensity"}, "phantom lesion");
      LesionSpec ls;
      const auto c = l.at("center_mm").get<std::vector<double>>();
      const auto s = l.at("semi_axes_mm").get<std::vector<double>>();
      if (c.size() != 3 || s.size() != 3)
        throw FormatError("phantom lesion: 'center_mm' and 'semi_axes_mm' must have 3 entries");
      ls.center_mm = {c[0], c[1], c[2]};
      ls.semi_axes_mm = {s[0], s[1], s[2]};
      ls.label = static_cast<Label>(l.at("label").get<int>());
      ls.intensity = l.value("intensity", 1.0f);
      spec.lesions.push_back(ls);
    }
  spec.validate();
  return spec;
}

inline Json to_json(const PhantomSpec& spec) {
  Json lesions = Json::array();
  for (const auto& l : spec.lesions)
    lesions.push_back(Json{{"center_mm", l.center_mm},
                           {"semi_axes_mm", l.semi_axes_mm},
                           {"label", static_cast<int>(l.label)},
                           {"intensity", l.intensity}});
  return Json{{"dims", spec.dims},           {"spacing", spec.spacing}, {"lesions", lesions},
              {"noise_std", spec.noise_std}, {"seed", spec.seed},       {"schema", spec.schema.name}};
}

// ---------------------------------------------------------------------------
// File helpers and run manifests.
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline Json json_from_file(const std::string& path) {
  const std::string text = read_text_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw FormatError("'" + path + "' is not valid JSON");
  return j;
}

/// FNV-1a 64-bit digest of a file's bytes, streamed.
inline std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for digesting");
  std::uint64_t h = 0xCBF29CE484222325ull;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ull;
    }
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Run manifest: everything needed to reproduce an invocation. The timestamp
/// is informational and excluded from determinism comparisons.
inline Json make_manifest(const std::string& command, const Json& config,
                          const std::vector<std::string>& input_paths, std::uint64_t master_seed,
                          const std::string& timestamp) {
  Json inputs = Json::array();
  std::vector<std::string> sorted = input_paths;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& p : sorted) inputs.push_back(Json{{"path", p}, {"fnv1a64", hex64(fnv1a64_file(p))}});
  return Json{{"tool", kToolName},   {"version", kVersion},       {"command", command},
              {"config", config},    {"inputs", inputs},          {"master_seed", master_seed},
              {"timestamp", timestamp}};
}

inline void write_manifest(const std::string& path, const Json& manifest) {
  write_text_file(path, manifest.dump(2) + "\n");
}

}  // namespace gliakit
