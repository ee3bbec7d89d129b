#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maskmatch/mask_extraction.hpp"
#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Row-major T x L matrix of per-candidate IoU values d[t][l].
class IouMatrix {
 public:
  IouMatrix() = default;
  IouMatrix(std::size_t steps, std::size_t layers, double value = 0.0);
  IouMatrix(std::size_t steps, std::size_t layers, std::vector<double> values);

  std::size_t steps() const noexcept { return steps_; }
  std::size_t layers() const noexcept { return layers_; }
  bool empty() const noexcept { return values_.empty(); }

  double operator()(std::size_t t, std::size_t l) const { return values_[t * layers_ + l]; }
  double& operator()(std::size_t t, std::size_t l) { return values_[t * layers_ + l]; }
  const std::vector<double>& values() const noexcept { return values_; }

  IouMatrix transposed() const;

  bool operator==(const IouMatrix&) const = default;

 private:
  std::size_t steps_ = 0;
  std::size_t layers_ = 0;
  std::vector<double> values_;
};

inline constexpr double kCostEpsilon = 1e-6;

// |a & b| / (|a| + |b| - |a & b|) over every cell; two empty masks score 1.
double miou(const BinaryGrid& a, const BinaryGrid& b);

// D_l = mean over t of 1 / max(d[t][l], eps).
std::vector<double> lmmc(const IouMatrix& d);
// D_t = mean over l of 1 / max(d[t][l], eps).
std::vector<double> tmmc(const IouMatrix& d);

// argmin, ties to the smallest index.
std::size_t select_layer(std::span<const double> layer_costs);
std::size_t select_timestep(std::span<const double> step_costs);

enum class AggregateMode { kMeanIou, kMeanCost };

struct MmcProfile {
  std::string model_id;
  IouMatrix d;
  std::vector<double> layer_costs;  // D_l
  std::vector<double> step_costs;   // D_t
  std::size_t l_star = 0;
  std::size_t t_star = 0;
  std::size_t video_count = 0;

  std::size_t steps() const { return d.steps(); }
  std::size_t layers() const { return d.layers(); }

  bool operator==(const MmcProfile&) const = default;
};

IouMatrix match_mask_set(const MaskSet& set, const BinaryGrid& reference);

MmcProfile profile_from_matrix(const IouMatrix& d, std::string model_id = {});

MmcProfile aggregate_profiles(std::span<const IouMatrix> per_video,
                              AggregateMode mode = AggregateMode::kMeanIou,
                              std::string model_id = {});

// 1 when the folded object words agree (structure-preserving edit), else 0.
int semantic_delta(std::string_view p0, std::string_view p1);

enum class MaskMode { kTimeAware, kTimeAgnostic };

const char* to_string(MaskMode mode);

struct SelectedMasks {
  std::vector<BinaryGrid> masks;  // one per timestep index
  MaskMode mode = MaskMode::kTimeAware;
  std::size_t layer = 0;
};

SelectedMasks select_masks(const MaskSet& set, const MmcProfile& profile, int delta);

std::string serialize_profile(const MmcProfile& profile);
MmcProfile parse_profile(std::string_view text);

void save_profile(const std::filesystem::path& path, const MmcProfile& profile);
MmcProfile load_profile(const std::filesystem::path& path);

}  // namespace maskmatch
