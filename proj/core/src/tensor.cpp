#include "maskmatch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

namespace maskmatch {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kDegenerateShape: return "degenerate shape";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported version";
    case ErrorCode::kUnsupportedDtype: return "unsupported dtype";
    case ErrorCode::kTruncated: return "truncated payload";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kMissingPrerequisite: return "missing prerequisite";
    case ErrorCode::kInvariant: return "invariant violation";
  }
  return "unknown";
}

namespace {

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ", ";
    os << dims[i];
  }
  os << ')';
  return os.str();
}

}  // namespace

std::size_t shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape dims) : dims_(std::move(dims)), data_(shape_size(dims_)) {}

Tensor::Tensor(Shape dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (shape_size(dims_) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "tensor of shape " + shape_string(dims_) + " given " +
                    std::to_string(data_.size()) + " values");
  }
  for (float v : data_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFinite, "tensor values must be finite");
    }
  }
}

Tensor Tensor::filled(Shape dims, float value) {
  Tensor t(std::move(dims));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= dims_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "axis " + std::to_string(axis) + " out of range for shape " +
                    shape_string(dims_));
  }
  return dims_[axis];
}

Tensor Tensor::reshaped(Shape dims) const {
  if (shape_size(dims) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cannot reshape " +
                                               shape_string(dims_) + " to " +
                                               shape_string(dims));
  }
  Tensor out;
  out.dims_ = std::move(dims);
  out.data_ = data_;
  return out;
}

BinaryGrid::BinaryGrid(std::size_t frames, std::size_t height,
                       std::size_t width, bool value)
    : frames_(frames),
      height_(height),
      width_(width),
      bits_(frames * height * width, value ? 1 : 0) {}

BinaryGrid::BinaryGrid(std::size_t frames, std::size_t height,
                       std::size_t width, std::vector<std::uint8_t> bits)
    : frames_(frames), height_(height), width_(width), bits_(std::move(bits)) {
  if (bits_.size() != frames * height * width) {
    throw Error(ErrorCode::kShapeMismatch, "binary grid size mismatch");
  }
  for (auto& b : bits_) {
    if (b > 1) {
      throw Error(ErrorCode::kInvalidArgument, "binary grid values must be 0 or 1");
    }
  }
}

std::size_t BinaryGrid::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

BinaryGrid BinaryGrid::frame(std::size_t f) const {
  if (f >= frames_) {
    throw Error(ErrorCode::kInvalidArgument, "frame index out of range");
  }
  const std::size_t plane = height_ * width_;
  std::vector<std::uint8_t> bits(bits_.begin() + f * plane,
                                 bits_.begin() + (f + 1) * plane);
  return BinaryGrid(1, height_, width_, std::move(bits));
}

BinaryGrid BinaryGrid::complement() const {
  BinaryGrid out = *this;
  for (auto& b : out.bits_) b = 1 - b;
  return out;
}

Tensor BinaryGrid::to_tensor() const {
  Tensor t({frames_, height_, width_});
  for (std::size_t i = 0; i < bits_.size(); ++i) t[i] = bits_[i] ? 1.0f : 0.0f;
  return t;
}

Tensor softmax_rows(const Tensor& t, std::size_t axis) {
  if (t.empty()) {
    throw Error(ErrorCode::kDegenerateShape, "degenerate shape: empty tensor");
  }
  const std::size_t n = t.extent(axis);
  std::size_t inner = 1;
  for (std::size_t a = axis + 1; a < t.rank(); ++a) inner *= t.dims()[a];
  const std::size_t outer = t.size() / (n * inner);

  Tensor out(t.dims());
  auto in = t.data();
  auto dst = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      float mx = in[base];
      for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, in[base + k * inner]);
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double e = std::exp(static_cast<double>(in[base + k * inner]) - mx);
        dst[base + k * inner] = static_cast<float>(e);
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (std::size_t k = 0; k < n; ++k) {
        dst[base + k * inner] =
            static_cast<float>(static_cast<double>(dst[base + k * inner]) * inv);
      }
    }
  }
  return out;
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double w;  // weight on hi
};

std::vector<Tap> bilinear_taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, src - 1);
    taps[i] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& map, std::size_t height, std::size_t width) {
  if (map.rank() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "resize_bilinear expects a 2-D map");
  }
  if (height == 0 || width == 0) {
    throw Error(ErrorCode::kInvalidArgument, "resize target must be nonzero");
  }
  const std::size_t sh = map.dims()[0];
  const std::size_t sw = map.dims()[1];
  if (sh == 0 || sw == 0) {
    throw Error(ErrorCode::kDegenerateShape, "degenerate shape: empty source map");
  }
  const auto ty = bilinear_taps(sh, height);
  const auto tx = bilinear_taps(sw, width);
  Tensor out({height, width});
  auto in = map.data();
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double a = in[ty[y].lo * sw + tx[x].lo];
      const double b = in[ty[y].lo * sw + tx[x].hi];
      const double c = in[ty[y].hi * sw + tx[x].lo];
      const double d = in[ty[y].hi * sw + tx[x].hi];
      const double top = a + (b - a) * tx[x].w;
      const double bottom = c + (d - c) * tx[x].w;
      out[y * width + x] = static_cast<float>(top + (bottom - top) * ty[y].w);
    }
  }
  return out;
}

BinaryGrid resize_nearest(const BinaryGrid& grid, std::size_t height,
                          std::size_t width) {
  if (height == 0 || width == 0) {
    throw Error(ErrorCode::kInvalidArgument, "resize target must be nonzero");
  }
  if (grid.height() == height && grid.width() == width) return grid;
  BinaryGrid out(grid.frames(), height, width);
  for (std::size_t f = 0; f < grid.frames(); ++f) {
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t sy = std::min(grid.height() - 1, y * grid.height() / height);
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t sx = std::min(grid.width() - 1, x * grid.width() / width);
        out.set(f, y, x, grid.at(f, sy, sx));
      }
    }
  }
  return out;
}

Tensor minmax_normalize(const Tensor& map) {
  Tensor out(map.dims());
  if (map.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(map.data().begin(), map.data().end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < map.size(); ++i) {
    out[i] = static_cast<float>((map[i] - lo) / range);
  }
  return out;
}

BinaryGrid threshold_binarize(const Tensor& map, float tau) {
  if (!(tau >= 0.0f && tau <= 1.0f)) {
    throw Error(ErrorCode::kInvalidArgument, "tau must lie in [0, 1]");
  }
  std::size_t frames = 1;
  std::size_t h = 0;
  std::size_t w = 0;
  if (map.rank() == 2) {
    h = map.dims()[0];
    w = map.dims()[1];
  } else if (map.rank() == 3) {
    frames = map.dims()[0];
    h = map.dims()[1];
    w = map.dims()[2];
  } else {
    throw Error(ErrorCode::kInvalidArgument, "threshold_binarize expects rank 2 or 3");
  }
  std::vector<std::uint8_t> bits(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) bits[i] = map[i] >= tau ? 1 : 0;
  return BinaryGrid(frames, h, w, std::move(bits));
}

Tensor masked_select(const Tensor& src, const Tensor& edit, const Tensor& mask) {
  if (src.dims() != edit.dims()) {
    throw Error(ErrorCode::kShapeMismatch, "masked_select: src " +
                                               shape_string(src.dims()) +
                                               " vs edit " + shape_string(edit.dims()));
  }
  if (mask.rank() > src.rank()) {
    throw Error(ErrorCode::kShapeMismatch, "masked_select: mask rank exceeds src rank");
  }
  // Right-align mask dims and compute broadcast strides.
  const std::size_t rank = src.rank();
  const std::size_t pad = rank - mask.rank();
  std::vector<std::size_t> mstride(rank, 0);
  {
    std::size_t stride = 1;
    for (std::size_t a = rank; a-- > pad;) {
      const std::size_t md = mask.dims()[a - pad];
      if (md != 1 && md != src.dims()[a]) {
        throw Error(ErrorCode::kShapeMismatch,
                    "masked_select: mask " + shape_string(mask.dims()) +
                        " not broadcastable to " + shape_string(src.dims()));
      }
      mstride[a] = md == 1 ? 0 : stride;
      stride *= md;
    }
  }
  for (float m : mask.data()) {
    if (!(m >= 0.0f && m <= 1.0f)) {
      throw Error(ErrorCode::kInvalidArgument, "masked_select: mask values must lie in [0, 1]");
    }
  }

  Tensor out(src.dims());
  std::vector<std::size_t> idx(rank, 0);
  std::size_t moff = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const float m = mask[moff];
    out[i] = (1.0f - m) * src[i] + m * edit[i];
    // Odometer increment keeping the mask offset in sync.
    for (std::size_t a = rank; a-- > 0;) {
      if (++idx[a] < src.dims()[a]) {
        moff += mstride[a];
        break;
      }
      moff -= mstride[a] * (idx[a] - 1);
      idx[a] = 0;
    }
  }
  return out;
}

Tensor take_leading(const Tensor& t, std::size_t index) {
  if (t.rank() == 0 || index >= t.dims()[0]) {
    throw Error(ErrorCode::kInvalidArgument, "take_leading: index out of range");
  }
  Shape rest(t.dims().begin() + 1, t.dims().end());
  const std::size_t n = shape_size(rest);
  std::vector<float> data(t.data().begin() + index * n,
                          t.data().begin() + (index + 1) * n);
  Tensor out(std::move(rest));
  std::copy(data.begin(), data.end(), out.data().begin());
  return out;
}

}  // namespace maskmatch
