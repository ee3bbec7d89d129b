#include "maskmatch_cli/app.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "maskmatch/attention_io.hpp"
#include "maskmatch/evaluation.hpp"
#include "maskmatch/image_io.hpp"
#include "maskmatch/pipeline.hpp"
#include "maskmatch/synthetic.hpp"

namespace maskmatch::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Globals {
  std::uint64_t model_seed = kDefaultModelSeed;
  std::size_t steps = 50;
  float tau = 0.3f;
  double guidance = 7.5;
  double alpha_s = 0.99;
  double alpha_c = 0.99;
  double alpha_t = 0.99;
  std::size_t frames = 4;
  std::size_t resolution = 64;
  std::string out = "maskmatch-out";
  std::size_t jobs = 1;
};

fs::path out_dir(const Globals& g) {
  if (const char* env = std::getenv("MASKMATCH_OUT"); env != nullptr && *env != '\0') return env;
  return g.out;
}

ToyDenoiser make_net(const Globals& g) {
  if (g.resolution % (kPatchSize * 4) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "--resolution must be a multiple of 16");
  }
  return ToyDenoiser(g.model_seed, g.resolution / kPatchSize);
}

ExtractionOptions extraction(const Globals& g) {
  return {g.tau, g.resolution, g.resolution, true};
}

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidArgument, "malformed JSON in " + path.string() + ": " + ex.what());
  }
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) words.push_back(fold_word(w));
  return words;
}

// The edit word is the P1 word at the position the source word holds in P0.
std::string infer_edit_word(std::string_view source_prompt, std::string_view source_word,
                            std::string_view edit_prompt) {
  const auto src = words_of(source_prompt);
  const auto dst = words_of(edit_prompt);
  const auto it = std::find(src.begin(), src.end(), fold_word(source_word));
  if (it == src.end()) throw Error(ErrorCode::kNotFound, "token not found: " + std::string(source_word));
  const auto idx = static_cast<std::size_t>(it - src.begin());
  return idx < dst.size() ? dst[idx] : fold_word(source_word);
}

// ---------------------------------------------------------------- mmc-profile

struct DatasetVideo {
  std::string name;
  std::string prompt;
  std::string object;
};

std::vector<DatasetVideo> read_prompts(const fs::path& path) {
  const json doc = read_json(path);
  std::vector<DatasetVideo> videos;
  try {
    for (const auto& v : doc.at("videos")) {
      videos.push_back({v.at("name").get<std::string>(), v.at("prompt").get<std::string>(),
                        v.at("object").get<std::string>()});
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidArgument, "malformed prompts file " + path.string() + ": " + ex.what());
  }
  if (videos.empty()) throw Error(ErrorCode::kInvalidArgument, "prompts file lists no videos");
  return videos;
}

struct ProfileOptions {
  std::string dataset;
  std::string prompts;
  bool keep_dumps = false;
  bool debug_masks = false;
  bool plots = false;
  std::string aggregate = "iou";
};

IouMatrix profile_one(const ToyDenoiser& net, const Globals& g, const ProfileOptions& o,
                      const DatasetVideo& v, const fs::path& out) {
  const fs::path dataset(o.dataset);
  const fs::path annotations = dataset / "annotations" / v.name;
  if (!fs::is_directory(annotations)) {
    throw Error(ErrorCode::kNotFound, "missing annotations for video '" + v.name + "' (" +
                                          annotations.string() + ")");
  }
  const Tensor video = load_video(dataset / "videos" / v.name, g.frames, g.resolution, g.resolution);
  BinaryGrid reference = load_reference_masks(annotations, g.frames);
  if (reference.height() != g.resolution || reference.width() != g.resolution) {
    reference = resize_nearest(reference, g.resolution, g.resolution);
  }
  const Schedule schedule = make_linear_schedule(g.steps);
  const InversionResult inversion = invert(net, video, v.prompt, schedule);
  if (o.keep_dumps) write_cross_attention_dumps(inversion, net, v.prompt, out / "dumps" / v.name);
  const TokenAlignment align = align_token(v.prompt, v.object, toy_tokenize(v.prompt));
  const auto maps = inversion.cache.cross_attention_maps();
  const MaskSet set = build_mask_set(maps, g.steps, net.layer_count(), align, extraction(g));
  if (o.debug_masks) write_mask_set_pngs(set, out / "debug_masks" / v.name);
  return match_mask_set(set, reference);
}

int cmd_mmc_profile(const Globals& g, const ProfileOptions& o, std::ostream& log) {
  const ToyDenoiser net = make_net(g);
  const fs::path out = out_dir(g);
  const fs::path prompts = o.prompts.empty() ? fs::path(o.dataset) / "prompts.json" : fs::path(o.prompts);
  const auto videos = read_prompts(prompts);

  std::vector<IouMatrix> per_video(videos.size());
  std::vector<std::exception_ptr> failures(videos.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < videos.size();) {
      try {
        per_video[i] = profile_one(net, g, o, videos[i], out);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(
      g.jobs == 0 ? std::thread::hardware_concurrency() : g.jobs, 1, videos.size());
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  const AggregateMode mode = o.aggregate == "cost" ? AggregateMode::kMeanCost : AggregateMode::kMeanIou;
  const MmcProfile profile = aggregate_profiles(per_video, mode, net.model_id());
  save_profile(out / "profile.json", profile);

  Report report;
  report.profile = profile;
  for (std::size_t i = 0; i < videos.size(); ++i) report.per_video.push_back({videos[i].name, per_video[i]});
  emit_report(report, out / "report", o.plots);

  log << "profiled " << videos.size() << " video(s), T=" << profile.steps()
      << " L=" << profile.layers() << ": l* = " << profile.l_star << ", t* = " << profile.t_star
      << '\n'
      << "wrote " << (out / "profile.json").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- select-masks

struct SelectOptions {
  std::string dumps;
  std::string profile = "profile.json";
  std::string prompt;
  std::string p0;
  std::string p1;
};

MmcProfile require_profile(const fs::path& path) {
  try {
    return load_profile(path);
  } catch (const Error& ex) {
    if (ex.code() != ErrorCode::kMissingPrerequisite) throw;
    throw Error(ErrorCode::kMissingPrerequisite,
                std::string(ex.what()) + "; run mmc-profile first");
  }
}

int cmd_select_masks(const Globals& g, const SelectOptions& o, std::ostream& log) {
  const MmcProfile profile = require_profile(o.profile);
  const VideoManifest manifest = load_manifest(o.dumps);
  if (manifest.entries.empty()) throw Error(ErrorCode::kInvalidArgument, "manifest has no entries");
  Tokenization tokens;
  const auto& strings = manifest.entries.front().token_strings;
  for (std::size_t i = 0; i < strings.size(); ++i) tokens.emplace_back(strings[i], i);
  const TokenAlignment align = align_token(o.prompt, o.p0, tokens);
  const MaskSet set = build_mask_set(o.dumps, align, extraction(g));
  if (set.steps() != profile.steps() || set.layers() != profile.layers()) {
    throw Error(ErrorCode::kInvalidArgument, "dump extents do not match the profile");
  }
  const int delta = semantic_delta(o.p0, o.p1.empty() ? o.p0 : o.p1);
  const SelectedMasks selected = select_masks(set, profile, delta);

  const fs::path out = out_dir(g) / "selected";
  for (std::size_t t = 0; t < selected.masks.size(); ++t) {
    for (std::size_t f = 0; f < selected.masks[t].frames(); ++f) {
      write_mask_png(out / ("t" + std::to_string(t) + "_f" + std::to_string(f) + ".png"),
                     selected.masks[t], f);
    }
  }
  write_json(out_dir(g) / "selection.json", {{"mode", to_string(selected.mode)},
                                             {"delta", delta},
                                             {"layer", selected.layer},
                                             {"l_star", profile.l_star},
                                             {"t_star", profile.t_star},
                                             {"steps", selected.masks.size()}});
  log << "mask mode: " << to_string(selected.mode) << " (delta=" << delta
      << ", layer=" << selected.layer << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- edit

struct EditOptions {
  std::string video;
  std::string synthetic;
  std::string p0_prompt;
  std::string p1_prompt;
  std::string p0;
  std::string p1;
  std::string task = "attribute";
  std::string profile = "profile.json";
  std::size_t latent_cutoff = 0;
  std::string sa_axis = "query";
  bool write_masks = false;
};

int cmd_edit(const Globals& g, const EditOptions& o, std::ostream& log) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();
  if (o.video.empty() == o.synthetic.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "give exactly one of --video or --synthetic");
  }
  EditRequest request;
  if (!o.synthetic.empty()) {
    if (o.synthetic != "moving-square") {
      throw Error(ErrorCode::kInvalidArgument, "unknown synthetic scene: " + o.synthetic);
    }
    SyntheticScene scene = moving_square(g.frames, g.resolution, g.resolution);
    request.video = std::move(scene.video);
    request.source_prompt = o.p0_prompt.empty() ? scene.prompt : o.p0_prompt;
    request.source_word = o.p0.empty() ? scene.object : o.p0;
  } else {
    if (o.p0_prompt.empty() || o.p0.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "--video needs --p0-prompt and --p0");
    }
    request.video = load_video(o.video, g.frames, g.resolution, g.resolution);
    request.source_prompt = o.p0_prompt;
    request.source_word = o.p0;
  }
  request.edit_prompt = o.p1_prompt.empty() ? request.source_prompt : o.p1_prompt;
  request.edit_word = o.p1.empty()
                          ? infer_edit_word(request.source_prompt, request.source_word, request.edit_prompt)
                          : o.p1;

  EditConfig config;
  config.steps = g.steps;
  config.tau = g.tau;
  config.guidance = g.guidance;
  config.alpha_s = g.alpha_s;
  config.alpha_c = g.alpha_c;
  config.alpha_t = g.alpha_t;
  config.task = parse_edit_task(o.task);
  config.latent_cutoff = o.latent_cutoff;
  config.sa_axis = o.sa_axis == "both" ? SelfAttentionAxis::kBoth : SelfAttentionAxis::kQuery;

  const MmcProfile profile = require_profile(o.profile);
  const ToyDenoiser net = make_net(g);
  const EditResult result = edit(net, request, config, &profile);
  const double seconds = std::chrono::duration<double>(clock::now() - started).count();

  const fs::path out = out_dir(g);
  write_video(out / "frames", result.video);
  if (o.write_masks) {
    const BinaryGrid& shown = result.masks.masks[profile.t_star];
    for (std::size_t f = 0; f < shown.frames(); ++f) {
      write_mask_png(out / "masks" / ("f" + std::to_string(f) + ".png"), shown, f);
    }
  }
  write_json(out / "metadata.json",
             {{"model_id", net.model_id()},
              {"model_seed", g.model_seed},
              {"profile", {{"path", o.profile}, {"model_id", profile.model_id},
                           {"l_star", profile.l_star}, {"t_star", profile.t_star}}},
              {"source_prompt", request.source_prompt},
              {"edit_prompt", request.edit_prompt},
              {"source_word", request.source_word},
              {"edit_word", request.edit_word},
              {"delta", result.delta},
              {"mask_mode", to_string(result.masks.mode)},
              {"mask_layer", result.masks.layer},
              {"config", {{"steps", config.steps}, {"tau", config.tau}, {"guidance", config.guidance},
                          {"alpha_s", config.alpha_s}, {"alpha_c", config.alpha_c},
                          {"alpha_t", config.alpha_t}, {"task", to_string(config.task)},
                          {"latent_cutoff", config.latent_cutoff}, {"sa_axis", o.sa_axis},
                          {"frames", g.frames}, {"resolution", g.resolution}}},
              {"timings", {{"total_seconds", seconds}}}});
  log << "mask mode: " << to_string(result.masks.mode) << " (delta=" << result.delta
      << ", layer=" << result.masks.layer << ")\n"
      << "wrote " << result.video.dims()[0] << " frame(s) to " << (out / "frames").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string edited;
  std::string source;
  std::string annotation;
  std::string task = "attribute";
};

std::pair<std::size_t, std::size_t> frame_size(const fs::path& dir, std::size_t& frames) {
  const auto files = list_pngs(dir);
  if (files.empty()) throw Error(ErrorCode::kNotFound, "no PNG frames in " + dir.string());
  frames = files.size();
  const Image first = read_png(files.front());
  for (const auto& f : files) {
    const Image img = read_png(f);
    if (img.width != first.width || img.height != first.height) {
      throw Error(ErrorCode::kShapeMismatch, "frame sizes differ inside " + dir.string());
    }
  }
  return {first.height, first.width};
}

Tensor load_annotation(const fs::path& dir, std::size_t frames, std::size_t height, std::size_t width) {
  const auto files = list_pngs(dir);
  if (files.size() != frames) {
    throw Error(ErrorCode::kShapeMismatch, "annotation has " + std::to_string(files.size()) +
                                               " frame(s), video has " + std::to_string(frames));
  }
  Tensor out({frames, height, width});
  for (std::size_t f = 0; f < frames; ++f) {
    const Image img = read_png(files[f]);
    if (img.width != width || img.height != height) {
      throw Error(ErrorCode::kShapeMismatch, "annotation size differs from the video");
    }
    for (std::size_t p = 0; p < height * width; ++p) {
      std::uint8_t m = 0;
      for (std::size_t c = 0; c < img.channels; ++c) m = std::max(m, img.pixels[p * img.channels + c]);
      out[f * height * width + p] = static_cast<float>(m) / 255.0f;
    }
  }
  return out;
}

int cmd_eval(const Globals& g, const EvalOptions& o, std::ostream& log) {
  const EditTask task = parse_edit_task(o.task);
  std::size_t edited_frames = 0;
  std::size_t source_frames = 0;
  const auto [h, w] = frame_size(o.edited, edited_frames);
  const auto source_size = frame_size(o.source, source_frames);
  if (edited_frames != source_frames || source_size != std::make_pair(h, w)) {
    throw Error(ErrorCode::kShapeMismatch, "edited and source videos differ in frame count or size");
  }
  const Tensor edited = load_video(o.edited, edited_frames, h, w);
  const Tensor source = load_video(o.source, source_frames, h, w);
  BinaryGrid mask;
  if (task == EditTask::kStylization) {
    mask = BinaryGrid(edited_frames, h, w, true);
  } else {
    if (o.annotation.empty()) throw Error(ErrorCode::kInvalidArgument, "--annotation is required for " + o.task);
    mask = unedited_mask(load_annotation(o.annotation, edited_frames, h, w), task);
  }
  const double psnr = masked_psnr(edited, source, mask);
  write_json(out_dir(g) / "metrics.json", {{"masked_psnr", psnr},
                                           {"task", to_string(task)},
                                           {"frames", edited_frames},
                                           {"unedited_pixels", mask.count()},
                                           {"clip_score", nullptr},
                                           {"temporal_consistency", nullptr},
                                           {"lpips", nullptr}});
  log << "masked PSNR: " << psnr << " dB over " << mask.count() << " pixel(s)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- gen-fixtures

struct FixtureOptions {
  std::size_t videos = 2;
  bool dumps = false;
};

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

int cmd_gen_fixtures(const Globals& g, const FixtureOptions& o, std::ostream& log) {
  if (o.videos == 0) throw Error(ErrorCode::kInvalidArgument, "--videos must be positive");
  const fs::path out = out_dir(g);
  const fs::path dataset = out / "dataset";
  json listing = json::array();
  for (std::size_t i = 0; i < o.videos; ++i) {
    const SyntheticScene scene = moving_square(g.frames, g.resolution, g.resolution,
                                               static_cast<std::uint32_t>(i));
    const std::string name = "square_" + std::to_string(i);
    write_video(dataset / "videos" / name, scene.video);
    for (std::size_t f = 0; f < g.frames; ++f) {
      char file[16];
      std::snprintf(file, sizeof file, "%05zu.png", f);
      write_mask_png(dataset / "annotations" / name / file, scene.mask, f);
    }
    listing.push_back({{"name", name}, {"prompt", scene.prompt}, {"object", scene.object}});
    if (o.dumps && i == 0) {
      const ToyDenoiser net = make_net(g);
      const Tensor video = load_video(dataset / "videos" / name, g.frames, g.resolution, g.resolution);
      const auto inversion = invert(net, video, scene.prompt, make_linear_schedule(g.steps));
      write_cross_attention_dumps(inversion, net, scene.prompt, out / "dumps" / name);
    }
  }
  write_json(dataset / "prompts.json", {{"videos", listing}});

  // Interchange fixtures: one valid dump and one per header failure.
  const fs::path interchange = out / "interchange";
  const auto golden = encode_dump(Tensor({3}, {0.5f, -1.25f, 3.0f}));
  write_bytes(interchange / "golden.attn", golden);
  auto bad_magic = golden;
  bad_magic[0] = 'X';
  write_bytes(interchange / "bad_magic.attn", bad_magic);
  auto bad_version = golden;
  bad_version[4] = 2;
  write_bytes(interchange / "bad_version.attn", bad_version);
  auto bad_dtype = golden;
  bad_dtype[8] = 7;
  write_bytes(interchange / "bad_dtype.attn", bad_dtype);
  auto truncated = golden;
  truncated.resize(truncated.size() - 2);
  write_bytes(interchange / "truncated.attn", truncated);

  log << "wrote " << o.videos << " synthetic video(s) and interchange fixtures to " << out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- validate-dump

struct ValidateOptions {
  std::string path;
  double tolerance = 1e-2;
};

int cmd_validate_dump(const ValidateOptions& o, std::ostream& log, std::ostream& err) {
  if (fs::is_directory(o.path)) {
    const auto problems = validate_manifest(o.path, o.tolerance);
    for (const auto& p : problems) err << "invalid: " << p << '\n';
    if (!problems.empty()) return kExitInput;
    log << "ok: " << load_manifest(o.path).entries.size() << " dump(s) consistent with "
        << kManifestFile << '\n';
    return kExitOk;
  }
  const Tensor t = read_dump(o.path);
  log << "ok: dims [";
  for (std::size_t i = 0; i < t.rank(); ++i) log << (i ? ", " : "") << t.dims()[i];
  log << "]\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingPrerequisite: return kExitPrerequisite;
    case ErrorCode::kInvariant: return kExitInvariant;
    default: return kExitInput;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-free video editing with matched cross-attention masks (toy engine)",
               "maskmatch"};
  app.set_config("--config", "", "key=value configuration file; flags take precedence");
  app.require_subcommand(1);

  Globals g;
  app.add_option("--model-seed", g.model_seed, "seed for every toy model weight")->capture_default_str();
  app.add_option("--steps", g.steps, "DDIM steps T (method default: 50)")
      ->capture_default_str()->check(CLI::Range(1, 1000));
  app.add_option("--tau", g.tau, "mask threshold on normalized attention (method default: 0.3)")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app.add_option("--guidance", g.guidance, "classifier-free guidance scale (method default: 7.5)")
      ->capture_default_str();
  app.add_option("--alpha-s", g.alpha_s, "self-attention blend fraction (method default: 0.99)")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app.add_option("--alpha-c", g.alpha_c, "cross-attention blend fraction (method default: 0.99)")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app.add_option("--alpha-t", g.alpha_t, "temporal-attention blend fraction (method default: 0.99)")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app.add_option("--frames", g.frames, "frames per video (toy scale; method uses 8)")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--resolution", g.resolution, "square frame size in pixels (toy scale; method uses 512)")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory (MASKMATCH_OUT overrides)")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads for per-video profiling (0 = all cores)")
      ->capture_default_str();

  ProfileOptions profile_opts;
  auto* profile_cmd = app.add_subcommand("mmc-profile", "profile mask matching cost over a dataset");
  profile_cmd->fallthrough();
  profile_cmd->add_option("--dataset", profile_opts.dataset, "dataset with videos/, annotations/, prompts.json")
      ->required();
  profile_cmd->add_option("--prompts", profile_opts.prompts, "prompts file (default: <dataset>/prompts.json)");
  profile_cmd->add_flag("--keep-dumps", profile_opts.keep_dumps, "write cross-attention dumps per video");
  profile_cmd->add_flag("--debug-masks", profile_opts.debug_masks, "write every candidate mask as PNG");
  profile_cmd->add_flag("--plots", profile_opts.plots, "write LMMC/TMMC line plots");
  profile_cmd->add_option("--aggregate", profile_opts.aggregate, "average IoU matrices (iou) or costs (cost)")
      ->capture_default_str()->check(CLI::IsMember({"iou", "cost"}));

  SelectOptions select_opts;
  auto* select_cmd = app.add_subcommand("select-masks", "pick per-timestep masks from saved dumps");
  select_cmd->fallthrough();
  select_cmd->add_option("--dumps", select_opts.dumps, "dump directory with manifest.json")->required();
  select_cmd->add_option("--profile", select_opts.profile, "profile from mmc-profile")->capture_default_str();
  select_cmd->add_option("--prompt", select_opts.prompt, "source prompt of the dumps")->required();
  select_cmd->add_option("--p0", select_opts.p0, "object word in the source prompt")->required();
  select_cmd->add_option("--p1", select_opts.p1, "object word in the edit prompt (default: --p0)");

  EditOptions edit_opts;
  auto* edit_cmd = app.add_subcommand("edit", "edit a video with matched masks");
  edit_cmd->fallthrough();
  auto* video_opt = edit_cmd->add_option("--video", edit_opts.video, "directory of PNG frames");
  edit_cmd->add_option("--synthetic", edit_opts.synthetic, "built-in scene instead of --video")
      ->check(CLI::IsMember({"moving-square"}))->excludes(video_opt);
  edit_cmd->add_option("--p0-prompt", edit_opts.p0_prompt, "source prompt");
  edit_cmd->add_option("--p1-prompt", edit_opts.p1_prompt, "edit prompt (default: source prompt)");
  edit_cmd->add_option("--p0", edit_opts.p0, "object word in the source prompt");
  edit_cmd->add_option("--p1", edit_opts.p1, "object word in the edit prompt (default: same position)");
  edit_cmd->add_option("--task", edit_opts.task, "attribute | shape | stylization")
      ->capture_default_str()->check(CLI::IsMember({"attribute", "shape", "stylization"}));
  edit_cmd->add_option("--profile", edit_opts.profile, "profile from mmc-profile")->capture_default_str();
  edit_cmd->add_option("--latent-cutoff", edit_opts.latent_cutoff,
                       "blend output latents for the first N steps (0 = off)")->capture_default_str();
  edit_cmd->add_option("--sa-axis", edit_opts.sa_axis, "self-attention mask axis: query | both")
      ->capture_default_str()->check(CLI::IsMember({"query", "both"}));
  edit_cmd->add_flag("--write-masks", edit_opts.write_masks, "write the t* masks as PNG");

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "masked PSNR of an edit against its source");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--edited", eval_opts.edited, "edited frames")->required();
  eval_cmd->add_option("--source", eval_opts.source, "source frames")->required();
  eval_cmd->add_option("--annotation", eval_opts.annotation, "edit-region annotation frames");
  eval_cmd->add_option("--task", eval_opts.task, "attribute | shape | stylization")
      ->capture_default_str()->check(CLI::IsMember({"attribute", "shape", "stylization"}));

  FixtureOptions fixture_opts;
  auto* fixtures_cmd = app.add_subcommand("gen-fixtures", "write a synthetic dataset and interchange fixtures");
  fixtures_cmd->fallthrough();
  fixtures_cmd->add_option("--videos", fixture_opts.videos, "number of synthetic videos")->capture_default_str();
  fixtures_cmd->add_flag("--dumps", fixture_opts.dumps, "also write toy dumps for the first video");

  ValidateOptions validate_opts;
  auto* validate_cmd = app.add_subcommand("validate-dump", "check a dump file or a dump directory");
  validate_cmd->fallthrough();
  validate_cmd->add_option("path", validate_opts.path, "dump file or directory with manifest.json")
      ->required();
  validate_cmd->add_option("--tolerance", validate_opts.tolerance, "row-sum tolerance")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*profile_cmd) return cmd_mmc_profile(g, profile_opts, out);
    if (*select_cmd) return cmd_select_masks(g, select_opts, out);
    if (*edit_cmd) return cmd_edit(g, edit_opts, out);
    if (*eval_cmd) return cmd_eval(g, eval_opts, out);
    if (*fixtures_cmd) return cmd_gen_fixtures(g, fixture_opts, out);
    if (*validate_cmd) return cmd_validate_dump(validate_opts, out, err);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitInput;
}

}  // namespace maskmatch::cli
