#include "maskmatch/mmc.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "maskmatch/attention_io.hpp"

namespace maskmatch {

namespace fs = std::filesystem;
using json = nlohmann::json;

IouMatrix::IouMatrix(std::size_t steps, std::size_t layers, double value)
    : steps_(steps), layers_(layers), values_(steps * layers, value) {}

IouMatrix::IouMatrix(std::size_t steps, std::size_t layers, std::vector<double> values)
    : steps_(steps), layers_(layers), values_(std::move(values)) {
  if (values_.size() != steps_ * layers_) {
    throw Error(ErrorCode::kShapeMismatch, "IoU matrix size mismatch");
  }
}

IouMatrix IouMatrix::transposed() const {
  IouMatrix out(layers_, steps_);
  for (std::size_t t = 0; t < steps_; ++t) {
    for (std::size_t l = 0; l < layers_; ++l) out(l, t) = (*this)(t, l);
  }
  return out;
}

double miou(const BinaryGrid& a, const BinaryGrid& b) {
  if (a.dims() != b.dims()) {
    throw Error(ErrorCode::kShapeMismatch, "miou: mask dimensions differ");
  }
  std::size_t inter = 0;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  const auto ba = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ba.size(); ++i) {
    count_a += ba[i];
    count_b += bb[i];
    inter += ba[i] & bb[i];
  }
  const std::size_t uni = count_a + count_b - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

void require_nonempty(const IouMatrix& d) {
  if (d.empty()) throw Error(ErrorCode::kInvalidArgument, "empty IoU matrix");
}

double cost_of(double iou) { return 1.0 / std::max(iou, kCostEpsilon); }

std::size_t argmin(std::span<const double> costs) {
  if (costs.empty()) throw Error(ErrorCode::kInvalidArgument, "argmin of empty costs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < costs.size(); ++i) {
    if (costs[i] < costs[best]) best = i;
  }
  return best;
}

}  // namespace

std::vector<double> lmmc(const IouMatrix& d) {
  require_nonempty(d);
  std::vector<double> out(d.layers(), 0.0);
  for (std::size_t l = 0; l < d.layers(); ++l) {
    double acc = 0.0;
    for (std::size_t t = 0; t < d.steps(); ++t) acc += cost_of(d(t, l));
    out[l] = acc / static_cast<double>(d.steps());
  }
  return out;
}

std::vector<double> tmmc(const IouMatrix& d) {
  require_nonempty(d);
  std::vector<double> out(d.steps(), 0.0);
  for (std::size_t t = 0; t < d.steps(); ++t) {
    double acc = 0.0;
    for (std::size_t l = 0; l < d.layers(); ++l) acc += cost_of(d(t, l));
    out[t] = acc / static_cast<double>(d.layers());
  }
  return out;
}

std::size_t select_layer(std::span<const double> layer_costs) { return argmin(layer_costs); }

std::size_t select_timestep(std::span<const double> step_costs) { return argmin(step_costs); }

IouMatrix match_mask_set(const MaskSet& set, const BinaryGrid& reference) {
  IouMatrix d(set.steps(), set.layers());
  for (std::size_t t = 0; t < set.steps(); ++t) {
    for (std::size_t l = 0; l < set.layers(); ++l) d(t, l) = miou(set.at(t, l).grid, reference);
  }
  return d;
}

MmcProfile profile_from_matrix(const IouMatrix& d, std::string model_id) {
  MmcProfile p;
  p.model_id = std::move(model_id);
  p.d = d;
  p.layer_costs = lmmc(d);
  p.step_costs = tmmc(d);
  p.l_star = select_layer(p.layer_costs);
  p.t_star = select_timestep(p.step_costs);
  p.video_count = 1;
  return p;
}

MmcProfile aggregate_profiles(std::span<const IouMatrix> per_video, AggregateMode mode,
                              std::string model_id) {
  if (per_video.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "aggregate_profiles: no videos");
  }
  const std::size_t steps = per_video.front().steps();
  const std::size_t layers = per_video.front().layers();
  IouMatrix mean(steps, layers);
  for (const auto& d : per_video) {
    if (d.steps() != steps || d.layers() != layers) {
      throw Error(ErrorCode::kShapeMismatch, "aggregate_profiles: matrices differ in T x L");
    }
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t l = 0; l < layers; ++l) mean(t, l) += d(t, l);
    }
  }
  const double n = static_cast<double>(per_video.size());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t l = 0; l < layers; ++l) mean(t, l) /= n;
  }

  MmcProfile p = profile_from_matrix(mean, std::move(model_id));
  if (mode == AggregateMode::kMeanCost) {
    std::fill(p.layer_costs.begin(), p.layer_costs.end(), 0.0);
    std::fill(p.step_costs.begin(), p.step_costs.end(), 0.0);
    for (const auto& d : per_video) {
      const auto dl = lmmc(d);
      const auto dt = tmmc(d);
      for (std::size_t l = 0; l < layers; ++l) p.layer_costs[l] += dl[l] / n;
      for (std::size_t t = 0; t < steps; ++t) p.step_costs[t] += dt[t] / n;
    }
    p.l_star = select_layer(p.layer_costs);
    p.t_star = select_timestep(p.step_costs);
  }
  p.video_count = per_video.size();
  return p;
}

int semantic_delta(std::string_view p0, std::string_view p1) {
  const std::string a = fold_word(p0);
  const std::string b = fold_word(p1);
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "semantic_delta: empty object word");
  }
  return a == b ? 1 : 0;
}

const char* to_string(MaskMode mode) {
  return mode == MaskMode::kTimeAgnostic ? "time-agnostic" : "time-aware";
}

SelectedMasks select_masks(const MaskSet& set, const MmcProfile& profile, int delta) {
  if (delta != 0 && delta != 1) {
    throw Error(ErrorCode::kInvalidArgument, "delta must be 0 or 1");
  }
  if (profile.l_star >= set.layers() || profile.t_star >= set.steps()) {
    throw Error(ErrorCode::kInvalidArgument,
                "profile selection (l*, t*) outside the mask set extents");
  }
  SelectedMasks out;
  out.layer = profile.l_star;
  out.mode = delta == 1 ? MaskMode::kTimeAgnostic : MaskMode::kTimeAware;
  out.masks.reserve(set.steps());
  for (std::size_t t = 0; t < set.steps(); ++t) {
    const std::size_t src_t = delta == 1 ? profile.t_star : t;
    out.masks.push_back(set.at(src_t, profile.l_star).grid);
  }
  return out;
}

namespace {

json matrix_to_json(const IouMatrix& d) {
  json rows = json::array();
  for (std::size_t t = 0; t < d.steps(); ++t) {
    json row = json::array();
    for (std::size_t l = 0; l < d.layers(); ++l) row.push_back(d(t, l));
    rows.push_back(std::move(row));
  }
  return rows;
}

IouMatrix matrix_from_json(const json& rows) {
  const std::size_t steps = rows.size();
  const std::size_t layers = steps ? rows[0].size() : 0;
  IouMatrix d(steps, layers);
  for (std::size_t t = 0; t < steps; ++t) {
    if (rows[t].size() != layers) {
      throw Error(ErrorCode::kInvalidArgument, "profile 'd' rows differ in length");
    }
    for (std::size_t l = 0; l < layers; ++l) d(t, l) = rows[t][l].get<double>();
  }
  return d;
}

}  // namespace

std::string serialize_profile(const MmcProfile& p) {
  const json doc{{"model_id", p.model_id},
                 {"T", p.steps()},
                 {"L", p.layers()},
                 {"d", matrix_to_json(p.d)},
                 {"D_l", p.layer_costs},
                 {"D_t", p.step_costs},
                 {"l_star", p.l_star},
                 {"t_star", p.t_star},
                 {"video_count", p.video_count}};
  return doc.dump(2);
}

MmcProfile parse_profile(std::string_view text) {
  try {
    const json doc = json::parse(text);
    MmcProfile p;
    p.model_id = doc.at("model_id").get<std::string>();
    p.d = matrix_from_json(doc.at("d"));
    p.layer_costs = doc.at("D_l").get<std::vector<double>>();
    p.step_costs = doc.at("D_t").get<std::vector<double>>();
    p.l_star = doc.at("l_star").get<std::size_t>();
    p.t_star = doc.at("t_star").get<std::size_t>();
    p.video_count = doc.at("video_count").get<std::size_t>();
    if (doc.at("T").get<std::size_t>() != p.steps() ||
        doc.at("L").get<std::size_t>() != p.layers() ||
        p.layer_costs.size() != p.layers() || p.step_costs.size() != p.steps() ||
        p.l_star >= p.layers() || p.t_star >= p.steps()) {
      throw Error(ErrorCode::kInvalidArgument, "profile extents are inconsistent");
    }
    return p;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed profile: ") + ex.what());
  }
}

void save_profile(const fs::path& path, const MmcProfile& p) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << serialize_profile(p) << '\n';
}

MmcProfile load_profile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingPrerequisite, "profile not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_profile(buffer.str());
  } catch (const Error& ex) {
    throw Error(ex.code(), path.string() + ": " + ex.what());
  }
}

}  // namespace maskmatch
