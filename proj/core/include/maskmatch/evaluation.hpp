#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "maskmatch/blending.hpp"
#include "maskmatch/mmc.hpp"
#include "maskmatch/tensor.hpp"

namespace maskmatch {

inline constexpr double kPsnrCap = 99.0;
inline constexpr float kAnnotationThreshold = 0.3f;

// PSNR over the pixels where `mask` is set, MAX = 1. Videos are (F, C, H, W)
// and the (F, H, W) mask applies to every channel. Zero error gives kPsnrCap.
double masked_psnr(const Tensor& edited, const Tensor& source, const BinaryGrid& mask);

// Region kept out of the edit: the complement of the annotation (binarized at
// 0.3), or the whole frame for stylization.
BinaryGrid unedited_mask(const Tensor& annotation, EditTask task);
BinaryGrid unedited_mask(const BinaryGrid& annotation, EditTask task);

struct PsnrRow {
  std::string video;
  double psnr = 0.0;
  bool operator==(const PsnrRow&) const = default;
};

struct VideoMatrix {
  std::string video;
  IouMatrix d;
  bool operator==(const VideoMatrix&) const = default;
};

struct Report {
  MmcProfile profile;
  std::vector<VideoMatrix> per_video;
  std::vector<PsnrRow> masked_psnr;
  bool operator==(const Report&) const = default;
};

// report.json, lmmc.csv, tmmc.csv and, with `plots`, lmmc.png / tmmc.png.
void emit_report(const Report& report, const std::filesystem::path& out_dir, bool plots = false);
Report read_report(const std::filesystem::path& path);

std::string costs_csv(const char* index_name, const std::vector<double>& costs);

// 800x600 RGB line chart of `values` against their index.
void write_line_plot(const std::filesystem::path& path, const std::vector<double>& values);

}  // namespace maskmatch
