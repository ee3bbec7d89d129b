#include "maskmatch/attention_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "maskmatch/image_io.hpp"

namespace maskmatch {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string pair_name(std::size_t t, std::size_t l) {
  return "(" + std::to_string(t) + "," + std::to_string(l) + ")";
}

}  // namespace

std::size_t dump_header_size(std::size_t ndim) { return 4 + 4 + 1 + 1 + 8 * ndim; }

std::vector<std::uint8_t> encode_dump(const Tensor& tensor) {
  if (tensor.rank() > 255) {
    throw Error(ErrorCode::kInvalidArgument, "dump rank exceeds 255");
  }
  std::vector<std::uint8_t> out;
  out.reserve(dump_header_size(tensor.rank()) + 4 * tensor.size());
  out.insert(out.end(), kDumpMagic.begin(), kDumpMagic.end());
  put_u32(out, kDumpVersion);
  out.push_back(kDumpDtypeF32);
  out.push_back(static_cast<std::uint8_t>(tensor.rank()));
  for (std::size_t d : tensor.dims()) put_u64(out, d);
  for (float v : tensor.data()) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(out, bits);
  }
  return out;
}

Tensor decode_dump(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10) {
    throw Error(ErrorCode::kTruncated, "truncated header");
  }
  if (!std::equal(kDumpMagic.begin(), kDumpMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::kBadMagic, "bad magic");
  }
  if (const auto version = get_u32(bytes, 4); version != kDumpVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "unsupported version " + std::to_string(version));
  }
  if (bytes[8] != kDumpDtypeF32) {
    throw Error(ErrorCode::kUnsupportedDtype,
                "unsupported dtype " + std::to_string(bytes[8]));
  }
  const std::size_t ndim = bytes[9];
  const std::size_t header = dump_header_size(ndim);
  if (bytes.size() < header) {
    throw Error(ErrorCode::kTruncated, "truncated header");
  }
  Shape dims(ndim);
  for (std::size_t i = 0; i < ndim; ++i) dims[i] = get_u64(bytes, 10 + 8 * i);
  const std::size_t count = shape_size(dims);
  if (bytes.size() - header != 4 * count) {
    throw Error(ErrorCode::kTruncated,
                "truncated payload: expected " + std::to_string(4 * count) +
                    " bytes, found " + std::to_string(bytes.size() - header));
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(bytes, header + 4 * i);
    std::memcpy(&data[i], &bits, sizeof(bits));
  }
  return Tensor(std::move(dims), std::move(data));
}

void check_dump_consistent(const Tensor& tensor, const DumpManifest& entry) {
  const Shape expected{entry.frames, entry.spatial_h * entry.spatial_w, entry.token_count};
  if (tensor.dims() != expected) {
    throw Error(ErrorCode::kShapeMismatch,
                "dump for " + pair_name(entry.timestep_index, entry.layer_index) +
                    " does not match manifest geometry (F, h'w', S')");
  }
  if (entry.token_strings.size() != entry.token_count) {
    throw Error(ErrorCode::kShapeMismatch, "token_strings length differs from token_count");
  }
}

void write_dump(const fs::path& path, const Tensor& tensor) {
  const auto bytes = encode_dump(tensor);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

void write_dump(const fs::path& path, const Tensor& tensor, const DumpManifest& entry) {
  check_dump_consistent(tensor, entry);
  write_dump(path, tensor);
}

Tensor read_dump(const fs::path& path) { return decode_dump(read_file(path)); }

namespace {

json entry_to_json(const DumpManifest& e) {
  return json{{"model_id", e.model_id},
              {"layer_index", e.layer_index},
              {"timestep_index", e.timestep_index},
              {"spatial", {e.spatial_h, e.spatial_w}},
              {"frames", e.frames},
              {"token_count", e.token_count},
              {"token_strings", e.token_strings},
              {"file", e.file}};
}

DumpManifest entry_from_json(const json& j) {
  DumpManifest e;
  e.model_id = j.at("model_id").get<std::string>();
  e.layer_index = j.at("layer_index").get<std::size_t>();
  e.timestep_index = j.at("timestep_index").get<std::size_t>();
  const auto& spatial = j.at("spatial");
  if (!spatial.is_array() || spatial.size() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "manifest 'spatial' must be [h, w]");
  }
  e.spatial_h = spatial[0].get<std::size_t>();
  e.spatial_w = spatial[1].get<std::size_t>();
  e.frames = j.at("frames").get<std::size_t>();
  e.token_count = j.at("token_count").get<std::size_t>();
  e.token_strings = j.at("token_strings").get<std::vector<std::string>>();
  e.file = j.at("file").get<std::string>();
  return e;
}

}  // namespace

void save_manifest(const fs::path& dir, const VideoManifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) entries.push_back(entry_to_json(e));
  const json doc{{"model_id", manifest.model_id},
                 {"steps", manifest.steps},
                 {"layers", manifest.layers},
                 {"entries", std::move(entries)}};
  fs::create_directories(dir);
  std::ofstream out(dir / kManifestFile, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest in " + dir.string());
  out << doc.dump(2) << '\n';
}

VideoManifest load_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestFile;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "missing " + path.string());
  VideoManifest m;
  try {
    const json doc = json::parse(in);
    m.model_id = doc.value("model_id", std::string{});
    for (const auto& j : doc.at("entries")) m.entries.push_back(entry_from_json(j));
    std::size_t max_t = 0;
    std::size_t max_l = 0;
    for (const auto& e : m.entries) {
      max_t = std::max(max_t, e.timestep_index + 1);
      max_l = std::max(max_l, e.layer_index + 1);
    }
    m.steps = doc.contains("steps") ? doc["steps"].get<std::size_t>() : max_t;
    m.layers = doc.contains("layers") ? doc["layers"].get<std::size_t>() : max_l;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidArgument,
                "malformed manifest " + path.string() + ": " + ex.what());
  }
  return m;
}

std::vector<std::string> validate_manifest(const fs::path& dir, double row_sum_tolerance) {
  std::vector<std::string> errors;
  VideoManifest manifest;
  try {
    manifest = load_manifest(dir);
  } catch (const Error& e) {
    errors.emplace_back(e.what());
    return errors;
  }

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : manifest.entries) {
    const std::string where = pair_name(e.timestep_index, e.layer_index);
    if (e.timestep_index >= manifest.steps || e.layer_index >= manifest.layers) {
      errors.push_back(where + ": index outside steps x layers");
    }
    if (!seen.emplace(e.timestep_index, e.layer_index).second) {
      errors.push_back(where + ": duplicate entry");
    }
    if (!manifest.model_id.empty() && e.model_id != manifest.model_id) {
      errors.push_back(where + ": model_id differs from manifest");
    }
    if (e.token_strings.size() != e.token_count) {
      errors.push_back(where + ": token_strings length differs from token_count");
    }
    Tensor t;
    try {
      t = read_dump(dir / e.file);
    } catch (const Error& err) {
      errors.push_back(where + ": " + e.file + ": " + err.what());
      continue;
    }
    if (t.rank() != 3 || t.dims()[0] != e.frames || t.dims()[2] != e.token_count) {
      errors.push_back(where + ": tensor dims disagree with (frames, S, token_count)");
      continue;
    }
    if (t.dims()[1] != e.spatial_h * e.spatial_w) {
      errors.push_back(where + ": h'*w' = " + std::to_string(e.spatial_h * e.spatial_w) +
                       " but tensor S extent is " + std::to_string(t.dims()[1]));
      continue;
    }
    const std::size_t rows = t.dims()[0] * t.dims()[1];
    const std::size_t cols = t.dims()[2];
    double worst = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += t[r * cols + c];
      worst = std::max(worst, std::abs(s - 1.0));
    }
    if (worst > row_sum_tolerance) {
      std::ostringstream os;
      os << where << ": attention rows not stochastic (max |sum - 1| = " << worst << ")";
      errors.push_back(os.str());
    }
  }

  std::vector<std::string> missing;
  for (std::size_t t = 0; t < manifest.steps; ++t) {
    for (std::size_t l = 0; l < manifest.layers; ++l) {
      if (!seen.count({t, l})) missing.push_back(pair_name(t, l));
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing (t,l) pairs:";
    for (const auto& m : missing) msg += " " + m;
    errors.push_back(msg);
  }
  return errors;
}

BinaryGrid load_reference_masks(const fs::path& dir, std::size_t frames) {
  const auto files = list_pngs(dir);
  if (files.size() != frames) {
    throw Error(ErrorCode::kInvalidArgument,
                "annotation frame count " + std::to_string(files.size()) +
                    " does not match video frame count " + std::to_string(frames));
  }
  BinaryGrid grid;
  for (std::size_t f = 0; f < frames; ++f) {
    const Image img = read_png(files[f]);
    if (f == 0) {
      grid = BinaryGrid(frames, img.height, img.width);
    } else if (img.height != grid.height() || img.width != grid.width()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "annotation " + files[f].filename().string() + " size differs from frame 0");
    }
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        const std::size_t p = (y * img.width + x) * img.channels;
        bool on = false;
        for (std::size_t c = 0; c < img.channels; ++c) on = on || img.pixels[p + c] != 0;
        grid.set(f, y, x, on);
      }
    }
  }
  return grid;
}

std::string fold_word(std::string_view word) {
  std::size_t b = 0;
  std::size_t e = word.size();
  while (b < e && std::isspace(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(word[e - 1]))) --e;
  std::string out(word.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

namespace {

// Strips common subword markers; empty result means "special token".
std::string clean_token(const std::string& token) {
  std::string t = fold_word(token);
  if (t.size() >= 2 && t.front() == '<' && t.back() == '>') return {};
  auto strip_prefix = [&t](std::string_view p) {
    if (t.size() >= p.size() && t.compare(0, p.size(), p) == 0) t.erase(0, p.size());
  };
  strip_prefix("##");
  strip_prefix("\xC4\xA0");      // byte-level BPE space marker
  strip_prefix("\xE2\x96\x81");  // sentencepiece space marker
  const std::string_view eow = "</w>";
  if (t.size() >= eow.size() && t.compare(t.size() - eow.size(), eow.size(), eow) == 0) {
    t.erase(t.size() - eow.size());
  }
  return t;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || (c & 0x80);
}

}  // namespace

TokenAlignment align_token(std::string_view prompt, std::string_view word,
                           const Tokenization& tokens) {
  const std::string text = fold_word(prompt);
  const std::string needle = fold_word(word);
  if (needle.empty()) throw Error(ErrorCode::kInvalidArgument, "empty object word");

  std::size_t start = std::string::npos;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == text.size() || !is_word_char(text[end]);
    if (left_ok && right_ok) {
      start = pos;
      break;
    }
  }
  if (start == std::string::npos) {
    throw Error(ErrorCode::kNotFound, "token not found: '" + std::string(word) + "'");
  }
  const std::size_t stop = start + needle.size();

  TokenAlignment out{std::string(word), {}};
  std::size_t cursor = 0;
  for (const auto& [token, index] : tokens) {
    const std::string piece = clean_token(token);
    if (piece.empty()) continue;
    std::size_t at = cursor;
    while (at < text.size() && std::isspace(static_cast<unsigned char>(text[at]))) ++at;
    if (text.compare(at, piece.size(), piece) != 0) continue;
    const std::size_t end = at + piece.size();
    if (at < stop && end > start) out.token_indices.push_back(index);
    cursor = end;
  }
  if (out.token_indices.empty()) {
    throw Error(ErrorCode::kNotFound, "token not found: '" + std::string(word) + "'");
  }
  std::sort(out.token_indices.begin(), out.token_indices.end());
  out.token_indices.erase(std::unique(out.token_indices.begin(), out.token_indices.end()),
                          out.token_indices.end());
  return out;
}

}  // namespace maskmatch
