// gliakit command-line tool: evaluate, postprocess, ensemble, augment,
// inpaint-eval, loss, phantom, pipeline.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gliakit/gliakit.hpp"

namespace fs = std::filesystem;
using namespace gliakit;

namespace {

constexpr int kExitRuntimeError = 2;
constexpr int kExitPartialFailure = 3;

struct GlobalOpts {
  std::string schema = "agpt";
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Case id: filename up to the first dot ("sub-01.nii.gz" -> "sub-01").
std::string stem_of(const fs::path& p) {
  const std::string name = p.filename().string();
  const auto dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

bool is_nifti_name(const std::string& name) {
  const auto ends_with = [&](const char* suffix) {
    const std::size_t n = std::char_traits<char>::length(suffix);
    return name.size() >= n && name.compare(name.size() - n, n, suffix) == 0;
  };
  return ends_with(".nii") || ends_with(".nii.gz");
}

/// stem -> path for every NIfTI file directly inside `dir`, sorted by stem.
std::map<std::string, std::string> list_cases(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
  std::map<std::string, std::string> cases;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_nifti_name(entry.path().filename().string())) continue;
    const std::string stem = stem_of(entry.path());
    const auto [it, inserted] = cases.emplace(stem, entry.path().string());
    if (!inserted)
      throw ValidationError("case id '" + stem + "' is ambiguous in '" + dir + "': " + it->second + " vs " +
                            entry.path().string());
  }
  return cases;
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string tok = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!tok.empty()) out.push_back(tok);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& tok : split_csv_list(s)) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ValidationError(what + ": '" + tok + "' is not a number");
    }
  }
  return out;
}

LabelSchema schema_of(const GlobalOpts& g) { return LabelSchema::by_name(g.schema); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

struct CasePair {
  std::string case_id;
  std::string gt_path;
  std::string pred_path;
};

/// Pair GT and prediction files; unmatched stems are reported by the caller.
struct Pairing {
  std::vector<CasePair> pairs;
  std::vector<std::string> gt_only;
  std::vector<std::string> pred_only;
};

Pairing pair_dirs(const std::string& gt_dir, const std::string& pred_dir) {
  Pairing out;
  const auto gt = list_cases(gt_dir);
  const auto pred = list_cases(pred_dir);
  for (const auto& [stem, path] : gt) {
    const auto it = pred.find(stem);
    if (it == pred.end())
      out.gt_only.push_back(stem);
    else
      out.pairs.push_back({stem, path, it->second});
  }
  for (const auto& [stem, path] : pred)
    if (!gt.count(stem)) out.pred_only.push_back(stem);
  return out;
}

Pairing pairs_from_csv(const std::string& path) {
  Pairing out;
  const auto rows = parse_csv(read_text_file(path));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (r == 0 && !row.empty() && row[0] == "case_id") continue;  // optional header
    if (row.size() != 3)
      throw FormatError("pairs file '" + path + "' row " + std::to_string(r + 1) +
                        ": expected case_id,gt_path,pred_path");
    out.pairs.push_back({row[0], row[1], row[2]});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const CasePair& a, const CasePair& b) { return a.case_id < b.case_id; });
  return out;
}

int report_unmatched(const Pairing& pairing) {
  for (const auto& stem : pairing.gt_only)
    std::cerr << "unmatched case (ground truth only): " << stem << "\n";
  for (const auto& stem : pairing.pred_only)
    std::cerr << "unmatched case (prediction only): " << stem << "\n";
  if (pairing.pairs.empty()) {
    std::cerr << "error: no cases paired\n";
    return kExitPartialFailure;
  }
  if (!pairing.gt_only.empty() || !pairing.pred_only.empty()) return kExitPartialFailure;
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOpts {
  std::string gt_dir, pred_dir, pairs_csv;
  std::string regions = "ET,TC,WT";
  std::string out_csv;
  std::string lesion_json;
  std::string config_path;
  int dilation = -1, min_lesion = -1, connectivity = 0;
  double penalty = -1.0;
};

LesionWiseConfig resolve_lesionwise_config(const std::string& config_path, int dilation, int min_lesion,
                                           double penalty, int connectivity) {
  LesionWiseConfig cfg;
  if (!config_path.empty()) cfg = lesionwise_config_from_json(json_from_file(config_path));
  if (dilation >= 0) cfg.dilation_radius_voxels = dilation;
  if (min_lesion >= 0) cfg.min_gt_lesion_voxels = min_lesion;
  if (penalty >= 0.0) cfg.fp_fn_hd95_penalty_mm = penalty;
  if (connectivity > 0) cfg.connectivity = connectivity_from_int(connectivity);
  cfg.validate();
  return cfg;
}

std::string evaluate_csv(const std::vector<std::string>& case_ids, const std::vector<std::string>& regions,
                         const std::vector<SegReport>& reports) {
  CsvWriter csv;
  csv.row({"case_id", "region", "dice", "hd95", "lw_dice", "lw_hd95", "n_tp", "n_fn", "n_fp"});
  for (std::size_t i = 0; i < case_ids.size(); ++i)
    for (const auto& r : reports[i].regions)
      csv.row({case_ids[i], r.region, format_value(r.dice), format_value(r.hd95), format_value(r.lw.lw_dice),
               format_value(r.lw.lw_hd95), std::to_string(r.lw.n_tp), std::to_string(r.lw.n_fn),
               std::to_string(r.lw.n_fp)});
  if (reports.empty()) return csv.text();  // zero data rows, no summary
  for (std::size_t k = 0; k < regions.size(); ++k) {
    std::vector<double> dice_v, hd_v, lwd_v, lwh_v;
    long long tp = 0, fn = 0, fp = 0;
    for (const auto& rep : reports) {
      const auto& r = rep.regions[k];
      dice_v.push_back(r.dice);
      hd_v.push_back(r.hd95);
      lwd_v.push_back(r.lw.lw_dice);
      lwh_v.push_back(r.lw.lw_hd95);
      tp += r.lw.n_tp;
      fn += r.lw.n_fn;
      fp += r.lw.n_fp;
    }
    csv.row({"mean", regions[k], format_value(nanmean(dice_v)), format_value(nanmean(hd_v)),
             format_value(nanmean(lwd_v)), format_value(nanmean(lwh_v)), std::to_string(tp), std::to_string(fn),
             std::to_string(fp)});
  }
  return csv.text();
}

Json lesion_matches_json(const std::vector<std::string>& case_ids, const std::vector<std::string>& regions,
                         const std::vector<SegReport>& reports) {
  Json cases = Json::array();
  for (std::size_t i = 0; i < case_ids.size(); ++i) {
    Json case_obj{{"case_id", case_ids[i]}};
    Json region_arr = Json::array();
    for (std::size_t k = 0; k < regions.size(); ++k) {
      const auto& r = reports[i].regions[k];
      Json matches = Json::array();
      for (const auto& m : r.lw.matches)
        matches.push_back(Json{{"status", to_string(m.status)},
                               {"gt_lesion_ids", m.gt_lesion_ids},
                               {"pred_component_ids", m.pred_component_ids},
                               {"dice", m.dice},
                               {"hd95_mm", m.hd95_mm},
                               {"gt_voxels", m.gt_voxels},
                               {"pred_voxels", m.pred_voxels}});
      region_arr.push_back(Json{{"region", r.region}, {"matches", matches}});
    }
    case_obj["regions"] = region_arr;
    cases.push_back(case_obj);
  }
  return cases;
}

int cmd_evaluate(const GlobalOpts& g, const EvaluateOpts& o) {
  const LabelSchema schema = schema_of(g);
  const auto regions = split_csv_list(o.regions);
  if (regions.empty()) throw ValidationError("evaluate: no regions requested");
  const LesionWiseConfig cfg =
      resolve_lesionwise_config(o.config_path, o.dilation, o.min_lesion, o.penalty, o.connectivity);

  Pairing pairing = o.pairs_csv.empty() ? pair_dirs(o.gt_dir, o.pred_dir) : pairs_from_csv(o.pairs_csv);
  const int pair_status = report_unmatched(pairing);

  std::vector<std::string> case_ids;
  for (const auto& p : pairing.pairs) case_ids.push_back(p.case_id);
  std::vector<SegReport> reports(pairing.pairs.size());
  parallel_for(pairing.pairs.size(), resolve_threads(g.threads), [&](std::size_t i) {
    const auto& p = pairing.pairs[i];
    const LabelMap gt = nifti::read_labels(p.gt_path, schema);
    const LabelMap pred = nifti::read_labels(p.pred_path, schema);
    reports[i] = evaluate_case(gt, pred, regions, cfg);
  });

  write_text_file(o.out_csv, evaluate_csv(case_ids, regions, reports));
  if (!o.lesion_json.empty())
    write_text_file(o.lesion_json, lesion_matches_json(case_ids, regions, reports).dump(2) + "\n");

  std::vector<std::string> inputs;
  for (const auto& p : pairing.pairs) {
    inputs.push_back(p.gt_path);
    inputs.push_back(p.pred_path);
  }
  Json config{{"schema", schema.name}, {"regions", regions}, {"lesion_wise", to_json(cfg)}};
  write_manifest(o.out_csv + ".manifest.json", make_manifest("evaluate", config, inputs, g.seed, timestamp_utc()));
  return pair_status;
}

// ---------------------------------------------------------------------------
// postprocess
// ---------------------------------------------------------------------------

struct PostprocessOpts {
  std::string in_path, out_path, config_path;
  int dust = -1, connectivity = 0;
  double et_wt = -1.0, snfh_trigger = -1.0;
};

PostprocConfig resolve_postproc_config(const std::string& config_path, int dust, double et_wt, double snfh_trigger,
                                       int connectivity) {
  PostprocConfig cfg;
  if (!config_path.empty()) cfg = postproc_config_from_json(json_from_file(config_path));
  if (dust >= 0) cfg.dust_min_voxels = dust;
  if (et_wt >= 0.0) cfg.et_wt_threshold = et_wt;
  if (snfh_trigger >= 0.0) cfg.snfh_wt_trigger = snfh_trigger;
  if (connectivity > 0) cfg.connectivity = connectivity_from_int(connectivity);
  cfg.validate();
  return cfg;
}

int cmd_postprocess(const GlobalOpts& g, const PostprocessOpts& o) {
  const LabelSchema schema = schema_of(g);
  const PostprocConfig cfg = resolve_postproc_config(o.config_path, o.dust, o.et_wt, o.snfh_trigger, o.connectivity);
  const Json config{{"schema", schema.name}, {"postproc", to_json(cfg)}};

  if (fs::is_directory(o.in_path)) {
    const auto cases = list_cases(o.in_path);
    if (cases.empty()) {
      std::cerr << "error: no NIfTI files in '" << o.in_path << "'\n";
      return kExitPartialFailure;
    }
    ensure_dir(o.out_path);
    std::vector<std::pair<std::string, std::string>> items(cases.begin(), cases.end());
    std::vector<std::string> inputs;
    for (const auto& [stem, path] : items) inputs.push_back(path);
    parallel_for(items.size(), resolve_threads(g.threads), [&](std::size_t i) {
      const LabelMap in = nifti::read_labels(items[i].second, schema);
      const LabelMap out = postprocess(in, cfg);
      nifti::write_labels(out, (fs::path(o.out_path) / fs::path(items[i].second).filename()).string());
    });
    write_manifest((fs::path(o.out_path) / "run_manifest.json").string(),
                   make_manifest("postprocess", config, inputs, g.seed, timestamp_utc()));
    return 0;
  }

  const LabelMap in = nifti::read_labels(o.in_path, schema);
  const LabelMap out = postprocess(in, cfg);
  nifti::write_labels(out, o.out_path);
  write_manifest(o.out_path + ".manifest.json",
                 make_manifest("postprocess", config, {o.in_path}, g.seed, timestamp_utc()));
  return 0;
}

// ---------------------------------------------------------------------------
// ensemble
// ---------------------------------------------------------------------------

struct EnsembleOpts {
  std::vector<std::string> inputs;
  std::string mode;  // empty = config file / default (vote)
  std::string weights, tie_priority, config_path;
  std::string out_path;
};

FusionConfig resolve_fusion_config(const EnsembleOpts& o) {
  FusionConfig cfg;
  if (!o.config_path.empty()) cfg = fusion_config_from_json(json_from_file(o.config_path));
  if (!o.mode.empty()) {
    if (o.mode == "vote" || o.mode == "majority_vote")
      cfg.mode = FusionMode::majority_vote;
    else if (o.mode == "prob_mean")
      cfg.mode = FusionMode::prob_mean;
    else
      throw ValidationError("ensemble: unknown mode '" + o.mode + "'");
  }
  if (!o.weights.empty()) cfg.weights = parse_double_list(o.weights, "ensemble weights");
  if (!o.tie_priority.empty()) {
    cfg.tie_priority.clear();
    for (const auto& tok : split_csv_list(o.tie_priority)) {
      int v = 0;
      try {
        v = std::stoi(tok);
      } catch (const std::exception&) {
        v = -1;
      }
      if (v < 0 || v > 255) throw ValidationError("tie priority: '" + tok + "' is not a label in [0, 255]");
      cfg.tie_priority.push_back(static_cast<Label>(v));
    }
  }
  return cfg;
}

LabelMap fuse_files(const std::vector<std::string>& paths, const LabelSchema& schema, const FusionConfig& cfg) {
  if (cfg.mode == FusionMode::majority_vote) {
    std::vector<LabelMap> maps;
    maps.reserve(paths.size());
    for (const auto& p : paths) maps.push_back(nifti::read_labels(p, schema));
    return vote(maps, cfg);
  }
  std::vector<ProbMap> maps;
  maps.reserve(paths.size());
  for (const auto& p : paths) maps.push_back(nifti::read_probmap_auto(p));
  return prob_mean(maps, schema, cfg);
}

int cmd_ensemble(const GlobalOpts& g, const EnsembleOpts& o) {
  const LabelSchema schema = schema_of(g);
  const FusionConfig cfg = resolve_fusion_config(o);
  if (o.inputs.size() < 2) throw ValidationError("ensemble: need at least 2 inputs");
  const Json config{{"schema", schema.name}, {"fusion", to_json(cfg)}};

  const bool dirs = fs::is_directory(o.inputs.front());
  for (const auto& p : o.inputs)
    if (fs::is_directory(p) != dirs)
      throw ValidationError("ensemble: inputs must be all files or all directories");

  if (!dirs) {
    const LabelMap fused = fuse_files(o.inputs, schema, cfg);
    nifti::write_labels(fused, o.out_path);
    write_manifest(o.out_path + ".manifest.json",
                   make_manifest("ensemble", config, o.inputs, g.seed, timestamp_utc()));
    return 0;
  }

  std::vector<std::map<std::string, std::string>> listings;
  for (const auto& d : o.inputs) listings.push_back(list_cases(d));
  std::vector<std::string> case_ids;
  bool unmatched = false;
  for (const auto& [stem, path] : listings.front()) {
    bool everywhere = true;
    for (const auto& l : listings)
      if (!l.count(stem)) everywhere = false;
    if (everywhere) {
      case_ids.push_back(stem);
    } else {
      std::cerr << "unmatched case (not in every input): " << stem << "\n";
      unmatched = true;
    }
  }
  for (std::size_t k = 1; k < listings.size(); ++k)
    for (const auto& [stem, path] : listings[k])
      if (!listings.front().count(stem)) {
        std::cerr << "unmatched case (missing from " << o.inputs.front() << "): " << stem << "\n";
        unmatched = true;
      }
  if (case_ids.empty()) {
    std::cerr << "error: no cases present in every input directory\n";
    return kExitPartialFailure;
  }
  ensure_dir(o.out_path);
  std::vector<std::string> inputs;
  parallel_for(case_ids.size(), resolve_threads(g.threads), [&](std::size_t i) {
    std::vector<std::string> paths;
    for (const auto& l : listings) paths.push_back(l.at(case_ids[i]));
    const LabelMap fused = fuse_files(paths, schema, cfg);
    nifti::write_labels(fused, (fs::path(o.out_path) / fs::path(paths.front()).filename()).string());
  });
  for (const auto& l : listings)
    for (const auto& stem : case_ids) inputs.push_back(l.at(stem));
  write_manifest((fs::path(o.out_path) / "run_manifest.json").string(),
                 make_manifest("ensemble", config, inputs, g.seed, timestamp_utc()));
  return unmatched ? kExitPartialFailure : 0;
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

struct AugmentOpts {
  std::string in_dir, out_dir, config_path;
  std::string labels_suffix = "_seg";
};

int cmd_augment(const GlobalOpts& g, const AugmentOpts& o) {
  if (!g.seed_given)
    throw ValidationError("augment: --seed is required so runs are reproducible");
  const LabelSchema schema = schema_of(g);
  AugmentConfig cfg = augment_config_from_json(json_from_file(o.config_path));
  cfg.master_seed = g.seed;

  const auto files = list_cases(o.in_dir);
  // split into intensity volumes and "<case><suffix>" label maps
  std::map<std::string, std::string> volumes, labels;
  for (const auto& [stem, path] : files) {
    const auto& suf = o.labels_suffix;
    if (stem.size() > suf.size() && stem.compare(stem.size() - suf.size(), suf.size(), suf) == 0)
      labels.emplace(stem.substr(0, stem.size() - suf.size()), path);
    else
      volumes.emplace(stem, path);
  }
  for (const auto& [stem, path] : labels)
    if (!volumes.count(stem))
      throw ValidationError("augment: label map '" + path + "' has no matching volume case '" + stem + "'");
  if (volumes.empty()) {
    std::cerr << "error: no NIfTI volumes in '" << o.in_dir << "'\n";
    return kExitPartialFailure;
  }
  ensure_dir(o.out_dir);

  std::vector<std::pair<std::string, std::string>> items(volumes.begin(), volumes.end());
  parallel_for(items.size(), resolve_threads(g.threads), [&](std::size_t i) {
    const auto& [stem, vol_path] = items[i];
    std::vector<Volume> vols;
    vols.push_back(nifti::read_volume(vol_path));
    std::optional<LabelMap> lab;
    const auto lit = labels.find(stem);
    if (lit != labels.end()) lab = nifti::read_labels(lit->second, schema);
    AugmentResult res = apply_pipeline(std::move(vols), lab ? &*lab : nullptr, cfg, stem);
    nifti::write_volume(res.volumes[0], (fs::path(o.out_dir) / fs::path(vol_path).filename()).string());
    if (res.labels)
      nifti::write_labels(*res.labels,
                          (fs::path(o.out_dir) / fs::path(labels.at(stem)).filename()).string());
  });

  std::vector<std::string> inputs{o.config_path};
  for (const auto& [stem, path] : items) inputs.push_back(path);
  for (const auto& [stem, path] : labels) inputs.push_back(path);
  const Json config{{"schema", schema.name}, {"augment", to_json(cfg)}};
  write_manifest((fs::path(o.out_dir) / "run_manifest.json").string(),
                 make_manifest("augment", config, inputs, g.seed, timestamp_utc()));
  return 0;
}

// ---------------------------------------------------------------------------
// inpaint-eval
// ---------------------------------------------------------------------------

struct InpaintOpts {
  std::string ref, pred, mask;
  std::string out_csv;
  double data_range = 0.0;
  int window = 11;
  double sigma = 1.5, k1 = 0.01, k2 = 0.03;
  bool slice_mode = false;
};

Mask mask_from_file(const std::string& path) {
  const Volume v = nifti::read_volume(path);
  Mask m(v.geometry);
  for (std::size_t i = 0; i < v.data.size(); ++i) m.data[i] = v.data[i] != 0.0f ? 1 : 0;
  return m;
}

int cmd_inpaint_eval(const GlobalOpts& g, const InpaintOpts& o) {
  ImageMetricConfig cfg;
  cfg.data_range = o.data_range;
  cfg.window = o.window;
  cfg.sigma = o.sigma;
  cfg.k1 = o.k1;
  cfg.k2 = o.k2;
  cfg.slice_mode = o.slice_mode;
  cfg.validate();

  struct Item {
    std::string case_id, ref, pred, mask;  // mask may be empty
  };
  std::vector<Item> items;
  std::vector<std::string> inputs;
  bool unmatched = false;
  if (fs::is_directory(o.ref)) {
    const auto refs = list_cases(o.ref);
    const auto preds = list_cases(o.pred);
    std::map<std::string, std::string> masks;
    if (!o.mask.empty()) masks = list_cases(o.mask);
    for (const auto& [stem, path] : refs) {
      const auto pit = preds.find(stem);
      if (pit == preds.end()) {
        std::cerr << "unmatched case (reference only): " << stem << "\n";
        unmatched = true;
        continue;
      }
      std::string mask_path;
      if (!o.mask.empty()) {
        const auto mit = masks.find(stem);
        if (mit == masks.end()) {
          std::cerr << "unmatched case (no mask): " << stem << "\n";
          unmatched = true;
          continue;
        }
        mask_path = mit->second;
      }
      items.push_back({stem, path, pit->second, mask_path});
    }
    for (const auto& [stem, path] : preds)
      if (!refs.count(stem)) {
        std::cerr << "unmatched case (prediction only): " << stem << "\n";
        unmatched = true;
      }
    if (items.empty()) {
      std::cerr << "error: no cases paired\n";
      CsvWriter empty;
      empty.row({"case_id", "scope", "ssim", "psnr", "mse"});
      write_text_file(o.out_csv, empty.text());
      return kExitPartialFailure;
    }
  } else {
    items.push_back({stem_of(o.ref), o.ref, o.pred, o.mask});
  }

  std::vector<std::vector<ImageReport>> rows(items.size());
  parallel_for(items.size(), resolve_threads(g.threads), [&](std::size_t i) {
    const Volume ref = nifti::read_volume(items[i].ref);
    const Volume pred = nifti::read_volume(items[i].pred);
    rows[i].push_back(evaluate_inpainting(ref, pred, cfg, nullptr));
    if (!items[i].mask.empty()) {
      const Mask m = mask_from_file(items[i].mask);
      rows[i].push_back(evaluate_inpainting(ref, pred, cfg, &m));
    }
  });

  CsvWriter csv;
  csv.row({"case_id", "scope", "ssim", "psnr", "mse"});
  for (std::size_t i = 0; i < items.size(); ++i)
    for (const auto& r : rows[i])
      csv.row({items[i].case_id, r.scope, format_value(r.ssim), format_value(r.psnr), format_value(r.mse)});
  const std::size_t scopes = rows.empty() ? 1 : rows.front().size();
  for (std::size_t s = 0; s < scopes; ++s) {
    std::vector<double> ssim_v, psnr_v, mse_v;
    for (const auto& rr : rows) {
      ssim_v.push_back(rr[s].ssim);
      psnr_v.push_back(rr[s].psnr);
      mse_v.push_back(rr[s].mse);
    }
    csv.row({"mean", rows.front()[s].scope, format_value(nanmean(ssim_v)), format_value(nanmean(psnr_v)),
             format_value(nanmean(mse_v))});
  }
  write_text_file(o.out_csv, csv.text());

  for (const auto& it : items) {
    inputs.push_back(it.ref);
    inputs.push_back(it.pred);
    if (!it.mask.empty()) inputs.push_back(it.mask);
  }
  Json config{{"metrics", to_json(cfg)}};
  write_manifest(o.out_csv + ".manifest.json",
                 make_manifest("inpaint-eval", config, inputs, g.seed, timestamp_utc()));
  return unmatched ? kExitPartialFailure : 0;
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

struct LossOpts {
  std::string pred, gt, out_json;
  std::string weights;
  double gamma = -1.0, epsilon = -1.0, threshold = 0.5;
};

int cmd_loss(const GlobalOpts& g, const LossOpts& o) {
  const LabelSchema schema = schema_of(g);
  LossWeights w;
  if (!o.weights.empty()) {
    const auto v = parse_double_list(o.weights, "loss weights");
    if (v.size() != 4) throw ValidationError("loss: --weights expects w_dice,w_focal,w_bbox,w_inertia");
    w.w_dice = v[0];
    w.w_focal = v[1];
    w.w_bbox = v[2];
    w.w_inertia = v[3];
  }
  if (o.gamma >= 0.0) w.focal_gamma = o.gamma;
  if (o.epsilon > 0.0) w.epsilon = o.epsilon;
  w.validate();

  ProbMap pred = nifti::read_probmap_auto(o.pred);
  const LabelMap gt = nifti::read_labels(o.gt, schema);
  // mark the prediction normalized when channel sums are consistently ~1
  bool normalized = true;
  for (std::size_t i = 0; i < pred.geometry.voxel_count() && normalized; ++i) {
    double s = 0.0;
    for (const auto& grid : pred.data) s += grid[i];
    if (std::abs(s - 1.0) > 1e-4) normalized = false;
  }
  pred.normalized = normalized;

  if (!normalized && w.w_focal > 0.0)
    throw ValidationError("loss: the focal term needs channel probabilities that sum to 1 per voxel; "
                          "pass --weights with w_focal=0 for unnormalized inputs");
  LossBreakdown b;
  b.dice = dice_loss(pred, gt, w);
  b.focal = normalized ? focal_loss(pred, gt, w) : std::numeric_limits<double>::quiet_NaN();
  b.bbox = bbox_loss(pred, gt, w, o.threshold);
  b.inertia = inertia_loss(pred, gt, w);
  b.total = w.w_dice * b.dice + w.w_focal * b.focal + w.w_bbox * b.bbox + w.w_inertia * b.inertia;
  if (!normalized) b.total = w.w_dice * b.dice + w.w_bbox * b.bbox + w.w_inertia * b.inertia;

  const Json out{{"dice", b.dice},       {"focal", b.focal}, {"bbox", b.bbox},
                 {"inertia", b.inertia}, {"total", b.total}, {"weights", to_json(w)},
                 {"normalized", normalized}};
  if (o.out_json.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    write_text_file(o.out_json, out.dump(2) + "\n");
    write_manifest(o.out_json + ".manifest.json",
                   make_manifest("loss", Json{{"schema", schema.name}, {"weights", to_json(w)}},
                                 {o.pred, o.gt}, g.seed, timestamp_utc()));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// phantom
// ---------------------------------------------------------------------------

struct PhantomOpts {
  std::string spec_path, out_dir;
  std::string name = "phantom";
};

int cmd_phantom(const GlobalOpts& g, const PhantomOpts& o) {
  PhantomSpec spec = phantom_spec_from_json(json_from_file(o.spec_path));
  const Phantom ph = generate(spec);
  ensure_dir(o.out_dir);
  const std::string vol_path = (fs::path(o.out_dir) / (o.name + ".nii.gz")).string();
  const std::string seg_path = (fs::path(o.out_dir) / (o.name + "_seg.nii.gz")).string();
  nifti::write_volume(ph.volume, vol_path);
  nifti::write_labels(ph.labels, seg_path);

  Json lesions = Json::array();
  for (const auto& b : ph.lesions)
    lesions.push_back(Json{{"lesion_index", b.lesion_index},
                           {"label", static_cast<int>(b.label)},
                           {"voxels", b.voxels},
                           {"centroid_voxel", b.centroid_voxel}});
  write_text_file((fs::path(o.out_dir) / (o.name + "_bookkeeping.json")).string(),
                  Json{{"lesions", lesions}}.dump(2) + "\n");
  write_manifest((fs::path(o.out_dir) / "run_manifest.json").string(),
                 make_manifest("phantom", to_json(spec), {o.spec_path}, g.seed, timestamp_utc()));
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline: ensemble -> postprocess -> optional evaluate
// ---------------------------------------------------------------------------

struct PipelineOpts {
  std::vector<std::string> inputs;
  std::string fusion_config, postproc_config;
  std::string gt_dir;
  std::string regions = "ET,TC,WT";
  std::string out_dir;
};

int cmd_pipeline(const GlobalOpts& g, const PipelineOpts& o) {
  const LabelSchema schema = schema_of(g);
  FusionConfig fusion;
  if (!o.fusion_config.empty()) fusion = fusion_config_from_json(json_from_file(o.fusion_config));
  if (fusion.mode != FusionMode::majority_vote)
    throw ValidationError("pipeline: only majority-vote fusion of label maps is supported here");
  PostprocConfig post;
  if (!o.postproc_config.empty()) post = postproc_config_from_json(json_from_file(o.postproc_config));

  if (o.inputs.empty()) throw ValidationError("pipeline: need at least one input directory");
  std::vector<std::map<std::string, std::string>> listings;
  for (const auto& d : o.inputs) listings.push_back(list_cases(d));
  std::vector<std::string> case_ids;
  bool unmatched = false;
  for (const auto& [stem, path] : listings.front()) {
    bool everywhere = true;
    for (const auto& l : listings)
      if (!l.count(stem)) everywhere = false;
    if (everywhere)
      case_ids.push_back(stem);
    else {
      std::cerr << "unmatched case: " << stem << "\n";
      unmatched = true;
    }
  }
  for (std::size_t k = 1; k < listings.size(); ++k)
    for (const auto& [stem, path] : listings[k])
      if (!listings.front().count(stem)) {
        std::cerr << "unmatched case: " << stem << "\n";
        unmatched = true;
      }
  if (case_ids.empty()) {
    std::cerr << "error: no cases present in every input directory\n";
    return kExitPartialFailure;
  }
  ensure_dir(o.out_dir);
  const std::string maps_dir = (fs::path(o.out_dir) / "maps").string();
  ensure_dir(maps_dir);

  const auto regions = split_csv_list(o.regions);
  std::map<std::string, std::string> gt_cases;
  if (!o.gt_dir.empty()) gt_cases = list_cases(o.gt_dir);

  std::vector<SegReport> reports(case_ids.size());
  std::vector<char> has_report(case_ids.size(), 0);
  parallel_for(case_ids.size(), resolve_threads(g.threads), [&](std::size_t i) {
    const std::string& stem = case_ids[i];
    std::vector<LabelMap> maps;
    for (const auto& l : listings) maps.push_back(nifti::read_labels(l.at(stem), schema));
    LabelMap fused = maps.size() >= 2 ? vote(maps, fusion) : maps.front();
    fused = postprocess(fused, post);
    nifti::write_labels(fused, (fs::path(maps_dir) / fs::path(listings.front().at(stem)).filename()).string());
    if (!o.gt_dir.empty()) {
      const auto git = gt_cases.find(stem);
      if (git != gt_cases.end()) {
        const LabelMap gt = nifti::read_labels(git->second, schema);
        reports[i] = evaluate_case(gt, fused, regions);
        has_report[i] = 1;
      }
    }
  });

  if (!o.gt_dir.empty()) {
    std::vector<std::string> eval_ids;
    std::vector<SegReport> eval_reports;
    for (std::size_t i = 0; i < case_ids.size(); ++i) {
      if (!has_report[i]) {
        std::cerr << "unmatched case (no ground truth): " << case_ids[i] << "\n";
        unmatched = true;
        continue;
      }
      eval_ids.push_back(case_ids[i]);
      eval_reports.push_back(reports[i]);
    }
    if (!eval_ids.empty())
      write_text_file((fs::path(o.out_dir) / "metrics.csv").string(),
                      evaluate_csv(eval_ids, regions, eval_reports));
  }

  std::vector<std::string> inputs;
  for (const auto& l : listings)
    for (const auto& stem : case_ids) inputs.push_back(l.at(stem));
  Json config{{"schema", schema.name},
              {"fusion", to_json(fusion)},
              {"postproc", to_json(post)},
              {"regions", regions}};
  write_manifest((fs::path(o.out_dir) / "run_manifest.json").string(),
                 make_manifest("pipeline", config, inputs, g.seed, timestamp_utc()));
  return unmatched ? kExitPartialFailure : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gliakit: deterministic evaluation, post-processing, ensembling and augmentation "
               "for brain-tumor segmentation and inpainting pipelines"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--schema", g.schema, "Label schema: agpt or pre")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = GLIAKIT_THREADS env or hardware)")
      ->capture_default_str();
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed for randomized commands");

  EvaluateOpts eo;
  auto* ev = app.add_subcommand("evaluate", "Classic + lesion-wise segmentation metrics over paired cases");
  ev->add_option("--gt", eo.gt_dir, "Ground-truth directory");
  ev->add_option("--pred", eo.pred_dir, "Prediction directory");
  ev->add_option("--pairs", eo.pairs_csv, "CSV case_id,gt_path,pred_path overriding directory pairing");
  ev->add_option("--regions", eo.regions, "Comma-separated regions")->capture_default_str();
  ev->add_option("--lesionwise-config", eo.config_path, "Lesion-wise config JSON");
  ev->add_option("--dilation", eo.dilation, "Lesion dilation radius in voxels");
  ev->add_option("--min-lesion", eo.min_lesion, "Minimum GT lesion size in voxels");
  ev->add_option("--penalty", eo.penalty, "FN/FP HD95 penalty in mm");
  ev->add_option("--connectivity", eo.connectivity, "Component connectivity: 6, 18 or 26");
  ev->add_option("--out", eo.out_csv, "Output CSV path")->required();
  ev->add_option("--lesion-json", eo.lesion_json, "Optional per-lesion match dump (JSON)");
  ev->fallthrough();

  PostprocessOpts po;
  auto* pp = app.add_subcommand("postprocess", "Dust removal and volume-ratio relabeling");
  pp->add_option("--in", po.in_path, "Input label map or directory")->required();
  pp->add_option("--out", po.out_path, "Output path (file or directory)")->required();
  pp->add_option("--config", po.config_path, "Postproc config JSON");
  pp->add_option("--dust", po.dust, "Minimum component size kept");
  pp->add_option("--et-wt", po.et_wt, "ET/WT relabel threshold");
  pp->add_option("--snfh-trigger", po.snfh_trigger, "SNFH/WT relabel trigger");
  pp->add_option("--connectivity", po.connectivity, "Component connectivity: 6, 18 or 26");
  pp->fallthrough();

  EnsembleOpts no;
  auto* en = app.add_subcommand("ensemble", "Fuse label maps (vote) or probability maps (prob_mean)");
  en->add_option("--inputs", no.inputs, "Input files or directories")->required()->expected(-2);
  en->add_option("--mode", no.mode, "vote or prob_mean (default: vote)");
  en->add_option("--weights", no.weights, "Comma-separated per-input weights");
  en->add_option("--tie-priority", no.tie_priority, "Comma-separated label integers, most preferred first");
  en->add_option("--config", no.config_path, "Fusion config JSON");
  en->add_option("--out", no.out_path, "Output file or directory")->required();
  en->fallthrough();

  AugmentOpts ao;
  auto* au = app.add_subcommand("augment", "Probability-gated MRI artifact augmentation");
  au->add_option("--in", ao.in_dir, "Input directory")->required();
  au->add_option("--out", ao.out_dir, "Output directory")->required();
  au->add_option("--config", ao.config_path, "Augmentation config JSON")->required();
  au->add_option("--labels-suffix", ao.labels_suffix, "Stem suffix marking label maps")->capture_default_str();
  au->fallthrough();

  InpaintOpts io;
  auto* ie = app.add_subcommand("inpaint-eval", "SSIM / PSNR / MSE over full volumes and masked regions");
  ie->add_option("--ref", io.ref, "Reference volume or directory")->required();
  ie->add_option("--pred", io.pred, "Predicted volume or directory")->required();
  ie->add_option("--mask", io.mask, "Optional mask volume or directory");
  ie->add_option("--data-range", io.data_range, "Dynamic range L (default: reference max-min)");
  ie->add_option("--window", io.window, "SSIM window size (odd)")->capture_default_str();
  ie->add_option("--ssim-sigma", io.sigma, "SSIM Gaussian sigma")->capture_default_str();
  ie->add_option("--k1", io.k1, "SSIM stability constant K1")->capture_default_str();
  ie->add_option("--k2", io.k2, "SSIM stability constant K2")->capture_default_str();
  ie->add_flag("--slice-mode", io.slice_mode, "2D windows per axial slice");
  ie->add_option("--out", io.out_csv, "Output CSV path")->required();
  ie->fallthrough();

  LossOpts lo;
  auto* ls = app.add_subcommand("loss", "Composite loss diagnostics for one (probmap, labels) pair");
  ls->add_option("--pred", lo.pred, "Prediction probability map (4D NIfTI)")->required();
  ls->add_option("--gt", lo.gt, "Ground-truth label map")->required();
  ls->add_option("--weights", lo.weights, "w_dice,w_focal,w_bbox,w_inertia");
  ls->add_option("--gamma", lo.gamma, "Focal gamma");
  ls->add_option("--epsilon", lo.epsilon, "Stability epsilon");
  ls->add_option("--threshold", lo.threshold, "Bounding-box probability threshold")->capture_default_str();
  ls->add_option("--out", lo.out_json, "Output JSON path (default: stdout)");
  ls->fallthrough();

  PhantomOpts fo;
  auto* ft = app.add_subcommand("phantom", "Generate a synthetic labeled-ellipsoid case");
  ft->add_option("--spec", fo.spec_path, "Phantom spec JSON")->required();
  ft->add_option("--out", fo.out_dir, "Output directory")->required();
  ft->add_option("--name", fo.name, "Case name for output files")->capture_default_str();
  ft->fallthrough();

  PipelineOpts qo;
  auto* pl = app.add_subcommand("pipeline", "ensemble -> postprocess -> optional evaluate");
  pl->add_option("--inputs", qo.inputs, "Prediction directories")->required()->expected(-1);
  pl->add_option("--fusion-config", qo.fusion_config, "Fusion config JSON");
  pl->add_option("--postproc-config", qo.postproc_config, "Postproc config JSON");
  pl->add_option("--gt", qo.gt_dir, "Optional ground-truth directory for evaluation");
  pl->add_option("--regions", qo.regions, "Comma-separated regions")->capture_default_str();
  pl->add_option("--out", qo.out_dir, "Output directory")->required();
  pl->fallthrough();

  CLI11_PARSE(app, argc, argv);
  g.seed_given = seed_opt->count() > 0;

  try {
    if (ev->parsed()) {
      if (eo.pairs_csv.empty() && (eo.gt_dir.empty() || eo.pred_dir.empty()))
        throw ValidationError("evaluate: provide --gt and --pred directories, or --pairs");
      return cmd_evaluate(g, eo);
    }
    if (pp->parsed()) return cmd_postprocess(g, po);
    if (en->parsed()) return cmd_ensemble(g, no);
    if (au->parsed()) return cmd_augment(g, ao);
    if (ie->parsed()) return cmd_inpaint_eval(g, io);
    if (ls->parsed()) return cmd_loss(g, lo);
    if (ft->parsed()) return cmd_phantom(g, fo);
    if (pl->parsed()) return cmd_pipeline(g, qo);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}
