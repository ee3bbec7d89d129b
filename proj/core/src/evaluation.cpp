#include "maskmatch/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "maskmatch/image_io.hpp"

namespace maskmatch {

namespace fs = std::filesystem;
using json = nlohmann::json;

double masked_psnr(const Tensor& edited, const Tensor& source, const BinaryGrid& mask) {
  if (edited.dims() != source.dims()) {
    throw Error(ErrorCode::kShapeMismatch, "masked_psnr: video shapes differ");
  }
  if (edited.rank() != 4) throw Error(ErrorCode::kShapeMismatch, "masked_psnr: expected (F, C, H, W)");
  const auto& d = edited.dims();
  if (mask.dims() != Shape{d[0], d[2], d[3]}) {
    throw Error(ErrorCode::kShapeMismatch, "masked_psnr: mask does not match the video");
  }
  const std::size_t plane = d[2] * d[3];
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t f = 0; f < d[0]; ++f) {
    for (std::size_t c = 0; c < d[1]; ++c) {
      const std::size_t base = (f * d[1] + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        if (!mask[f * plane + p]) continue;
        const double e = static_cast<double>(edited[base + p]) - source[base + p];
        sum += e * e;
        ++n;
      }
    }
  }
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "no unedited pixels");
  const double mse = sum / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

BinaryGrid unedited_mask(const Tensor& annotation, EditTask task) {
  return unedited_mask(threshold_binarize(annotation, kAnnotationThreshold), task);
}

BinaryGrid unedited_mask(const BinaryGrid& annotation, EditTask task) {
  if (task == EditTask::kStylization) {
    return BinaryGrid(annotation.frames(), annotation.height(), annotation.width(), true);
  }
  return annotation.complement();
}

std::string costs_csv(const char* index_name, const std::vector<double>& costs) {
  std::string out = std::string(index_name) + ",cost\n";
  char line[64];
  for (std::size_t i = 0; i < costs.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.9g\n", i, costs[i]);
    out += line;
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

json matrix_json(const IouMatrix& d) {
  json rows = json::array();
  for (std::size_t t = 0; t < d.steps(); ++t) {
    json row = json::array();
    for (std::size_t l = 0; l < d.layers(); ++l) row.push_back(d(t, l));
    rows.push_back(std::move(row));
  }
  return rows;
}

IouMatrix matrix_from(const json& rows) {
  const std::size_t steps = rows.size();
  const std::size_t layers = steps ? rows.at(0).size() : 0;
  std::vector<double> values;
  for (const auto& row : rows) {
    if (row.size() != layers) throw Error(ErrorCode::kInvalidArgument, "ragged d matrix");
    for (const auto& v : row) values.push_back(v.get<double>());
  }
  return IouMatrix(steps, layers, std::move(values));
}

}  // namespace

void emit_report(const Report& report, const fs::path& out_dir, bool plots) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  json videos = json::array();
  for (const auto& v : report.per_video) videos.push_back({{"video", v.video}, {"d", matrix_json(v.d)}});
  json psnr = json::array();
  for (const auto& row : report.masked_psnr) psnr.push_back({{"video", row.video}, {"masked_psnr", row.psnr}});
  const json doc{{"profile", json::parse(serialize_profile(report.profile))},
                 {"per_video", std::move(videos)},
                 {"masked_psnr", std::move(psnr)},
                 // Metrics that need pretrained encoders are reserved but not computed.
                 {"clip_score", nullptr},
                 {"temporal_consistency", nullptr},
                 {"lpips", nullptr}};
  write_text(out_dir / "report.json", doc.dump(2) + "\n");
  write_text(out_dir / "lmmc.csv", costs_csv("layer", report.profile.layer_costs));
  write_text(out_dir / "tmmc.csv", costs_csv("timestep", report.profile.step_costs));
  if (plots) {
    write_line_plot(out_dir / "lmmc.png", report.profile.layer_costs);
    write_line_plot(out_dir / "tmmc.png", report.profile.step_costs);
  }
}

Report read_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "report not found: " + path.string());
  try {
    const json doc = json::parse(in);
    Report r;
    r.profile = parse_profile(doc.at("profile").dump());
    for (const auto& v : doc.at("per_video")) {
      r.per_video.push_back({v.at("video").get<std::string>(), matrix_from(v.at("d"))});
    }
    for (const auto& row : doc.at("masked_psnr")) {
      r.masked_psnr.push_back({row.at("video").get<std::string>(), row.at("masked_psnr").get<double>()});
    }
    return r;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidArgument, "malformed report " + path.string() + ": " + ex.what());
  }
}

void write_line_plot(const fs::path& path, const std::vector<double>& values) {
  constexpr std::size_t kW = 800, kH = 600, kMargin = 60;
  Image img{kW, kH, 3, std::vector<std::uint8_t>(kW * kH * 3, 255)};
  auto put = [&](long x, long y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= static_cast<long>(kW) || y >= static_cast<long>(kH)) return;
    auto* p = &img.pixels[(static_cast<std::size_t>(y) * kW + static_cast<std::size_t>(x)) * 3];
    p[0] = r, p[1] = g, p[2] = b;
  };
  auto line = [&](long x0, long y0, long x1, long y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    for (;;) {
      put(x0, y0, r, g, b);
      put(x0, y0 + 1, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const long e2 = 2 * err;
      if (e2 >= dy) err += dy, x0 += sx;
      if (e2 <= dx) err += dx, y0 += sy;
    }
  };
  const long left = kMargin, right = kW - kMargin, top = kMargin, bottom = kH - kMargin;
  line(left, bottom, right, bottom, 0, 0, 0);
  line(left, top, left, bottom, 0, 0, 0);

  if (!values.empty()) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values) {
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    auto px = [&](std::size_t i) {
      const double s = values.size() == 1 ? 0.5 : static_cast<double>(i) / (values.size() - 1);
      return left + std::lround(s * (right - left));
    };
    auto py = [&](double v) {
      const double s = std::isfinite(v) ? (v - lo) / (hi - lo) : 1.0;
      return bottom - std::lround(s * (bottom - top));
    };
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      line(px(i), py(values[i]), px(i + 1), py(values[i + 1]), 200, 40, 40);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (long oy = -3; oy <= 3; ++oy)
        for (long ox = -3; ox <= 3; ++ox) put(px(i) + ox, py(values[i]) + oy, 30, 60, 200);
    }
  }
  write_png(path, img);
}

}  // namespace maskmatch
