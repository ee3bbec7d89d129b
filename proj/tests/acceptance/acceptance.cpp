// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "generators.hpp"
#include "maskmatch/attention_io.hpp"
#include "maskmatch/blending.hpp"
#include "maskmatch/evaluation.hpp"
#include "maskmatch/mmc.hpp"
#include "maskmatch/pipeline.hpp"
#include "maskmatch/synthetic.hpp"
#include "temp_dir.hpp"

using namespace maskmatch;
using maskmatch::testing::Gen;
using maskmatch::testing::TempDir;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double set_iou(const BinaryGrid& a, const BinaryGrid& b) {
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> sa, sb, uni;
  for (std::size_t f = 0; f < a.frames(); ++f) {
    for (std::size_t y = 0; y < a.height(); ++y) {
      for (std::size_t x = 0; x < a.width(); ++x) {
        if (a.at(f, y, x)) sa.emplace(f, y, x);
        if (b.at(f, y, x)) sb.emplace(f, y, x);
      }
    }
  }
  uni = sa;
  uni.insert(sb.begin(), sb.end());
  if (uni.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& c : sa) inter += sb.count(c);
  return static_cast<double>(inter) / static_cast<double>(uni.size());
}

Verdict iou_oracle() {
  const auto start = Clock::now();
  Gen gen(1001);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t f = gen.size(1, 4), h = gen.size(1, 8), w = gen.size(1, 8);
    const BinaryGrid a = gen.grid(f, h, w, gen.real(0.0, 1.0));
    const BinaryGrid b = gen.grid(f, h, w, gen.real(0.0, 1.0));
    worst = std::max(worst, std::abs(miou(a, b) - set_iou(a, b)));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-12 && secs < 5.0, fmt("max |diff| %.3g, %.3f s", worst, secs)};
}

Verdict profiler_recovery() {
  const auto start = Clock::now();
  Gen gen(1002);
  bool ok = true;
  for (int i = 0; i < 20; ++i) {
    const IouMatrix d = gen.planted<IouMatrix>(50, 5, 2, 40);
    ok = ok && select_layer(lmmc(d)) == 2 && select_timestep(tmmc(d)) == 40 &&
         tmmc(d) == lmmc(d.transposed());
  }
  const double secs = seconds_since(start);
  return {ok && secs < 1.0, fmt("20 planted matrices, %.4f s", secs)};
}

Verdict cost_hand_cases() {
  const double a = lmmc(IouMatrix(2, 1, std::vector<double>{0.5, 1.0}))[0];
  const double b = lmmc(IouMatrix(2, 1, std::vector<double>{0.25, 0.5}))[0];
  return {a == 1.5 && b == 3.0, fmt("%.17g, %.17g", a, b)};
}

Verdict boundary_identities() {
  Gen gen(1004);
  std::size_t failures = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t h = gen.size(1, 4), w = gen.size(1, 4), f = gen.size(1, 4);
    const std::size_t cells = h * w, tokens = gen.size(2, 6), dim = gen.size(1, 5);
    const UnwrappedMask zero{Tensor::filled({cells, f}, 0.0f), h, w};
    const UnwrappedMask one{Tensor::filled({cells, f}, 1.0f), h, w};

    const TempAttentionState ts{gen.tensor({cells, f, dim}), gen.tensor({cells, f, dim})};
    const TempAttentionState te{gen.tensor({cells, f, dim}), gen.tensor({cells, f, dim})};
    const auto t0 = blend_temp(ts, te, zero), t1 = blend_temp(ts, te, one);
    failures += !(t0.keys == ts.keys && t0.queries == ts.queries);
    failures += !(t1.keys == te.keys && t1.queries == te.queries);

    const CrossAttentionMap cs{gen.stochastic({f, cells, tokens}), 0, 0, h, w};
    CrossAttentionMap ce = cs;
    ce.tensor = gen.stochastic({f, cells, tokens});
    failures += !(blend_cross(cs, ce, zero).tensor == cs.tensor);
    failures += !(blend_cross(cs, ce, one).tensor == ce.tensor);

    const Tensor ss = gen.stochastic({f, cells, cells});
    const Tensor se = gen.stochastic({f, cells, cells});
    failures += !(blend_self(ss, se, zero, EditTask::kAttribute) == ss);
    failures += !(blend_self(ss, se, one, EditTask::kAttribute) == se);
    // Stylization: the role of the mask is swapped.
    failures += !(blend_self(ss, se, zero, EditTask::kStylization) == se);
    failures += !(blend_self(ss, se, one, EditTask::kStylization) == ss);

    const Tensor ls = gen.tensor({f, dim, h, w});
    const Tensor le = gen.tensor({f, dim, h, w});
    failures += !(blend_latent(ls, le, BinaryGrid(f, h, w, false), 0, 1) == ls);
    failures += !(blend_latent(ls, le, BinaryGrid(f, h, w, true), 0, 1) == le);
  }
  return {failures == 0, fmt("%.0f mismatches over 100 trials", static_cast<double>(failures))};
}

Verdict row_stochastic() {
  Gen gen(1005);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t h = gen.size(1, 8), w = gen.size(1, 8), f = gen.size(1, 4), tokens = gen.size(2, 16);
    const std::size_t cells = h * w;
    UnwrappedMask m{Tensor({cells, f}), h, w};
    for (auto& v : m.m.data()) v = gen.coin() ? 1.0f : 0.0f;
    const CrossAttentionMap cs{gen.stochastic({f, cells, tokens}), 0, 0, h, w};
    CrossAttentionMap ce = cs;
    ce.tensor = gen.stochastic({f, cells, tokens});
    const Tensor out = blend_cross(cs, ce, m).tensor;
    for (std::size_t r = 0; r < f * cells; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < tokens; ++k) s += out[r * tokens + k];
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return {worst < 1e-6, fmt("max |row sum - 1| %.3g", worst)};
}

Verdict time_agnostic_unwrap() {
  Gen gen(1006);
  bool ok = true;
  for (int i = 0; i < 100; ++i) {
    const std::size_t f = gen.size(1, 4), s = gen.size(1, 8), dim = gen.size(1, 4);
    const UnwrappedMask m = unwrap(gen.grid(f, gen.size(8, 32), gen.size(8, 32)), s, s, 1);
    for (float v : m.m.values()) ok = ok && v == 0.0f;
    const TempAttentionState src{gen.tensor({s * s, f, dim}), gen.tensor({s * s, f, dim})};
    const TempAttentionState edit{gen.tensor({s * s, f, dim}), gen.tensor({s * s, f, dim})};
    const auto out = blend_temp(src, edit, m);
    ok = ok && out.keys == src.keys && out.queries == src.queries;
  }
  return {ok, "100 random masks"};
}

struct ToyRun {
  ToyDenoiser net;
  SyntheticScene scene = moving_square(4, 64, 64);
  Schedule schedule = make_linear_schedule(50);
  InversionResult inversion = invert(net, scene.video, scene.prompt, schedule);
};

Verdict replay_identity(const ToyRun& run) {
  const double rel = relative_l2(replay(run.inversion.z_final, run.inversion.cache, run.schedule),
                                 run.inversion.z0);
  return {rel < 1e-5, fmt("relative L2 %.3g", rel)};
}

Verdict fresh_round_trip(const ToyRun& run) {
  const Tensor z = sample(run.net, run.inversion.z_final, run.scene.prompt, run.schedule, 1.0);
  const double rel = relative_l2(z, run.inversion.z0);
  return {rel < 0.05, fmt("relative L2 %.3g", rel)};
}

Verdict full_fusion(const ToyRun& run) {
  EditConfig config;
  config.alpha_s = config.alpha_c = config.alpha_t = 1.0;
  Gen gen(1009);
  const MmcProfile profile = profile_from_matrix(gen.planted<IouMatrix>(50, 5, 2, 40), run.net.model_id());
  const EditRequest req{run.scene.video, run.scene.prompt, run.scene.prompt, run.scene.object,
                        run.scene.object};
  const EditResult r = edit(run.net, req, config, &profile);
  const Tensor plain = run.net.codec().decode(replay(run.inversion.z_final, run.inversion.cache, run.schedule));
  const double rel = relative_l2(r.video, plain);
  return {rel < 1e-4, fmt("relative L2 %.3g", rel)};
}

Verdict masked_psnr_checks() {
  Gen gen(1010);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Shape dims{gen.size(1, 4), 3, gen.size(1, 8), gen.size(1, 8)};
    const Tensor a = gen.tensor(dims, 0.0f, 1.0f);
    const Tensor b = gen.tensor(dims, 0.0f, 1.0f);
    long double sum = 0.0L;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const long double e = static_cast<long double>(a[k]) - b[k];
      sum += e * e;
    }
    const double oracle = static_cast<double>(10.0L * std::log10(a.size() / sum));
    worst = std::max(worst, std::abs(masked_psnr(a, b, BinaryGrid(dims[0], dims[2], dims[3], true)) - oracle));
  }
  const double twenty = masked_psnr(Tensor::filled({2, 3, 4, 4}, 0.1f), Tensor::filled({2, 3, 4, 4}, 0.0f),
                                    BinaryGrid(2, 4, 4, true));
  // 0.1 is stored as float32; 1e-6 dB covers exactly that rounding.
  const bool ok = worst <= 1e-9 && std::abs(twenty - 20.0) < 1e-6;
  return {ok, fmt("scalar oracle max |diff| %.3g, constant 0.1 -> %.9f dB", worst, twenty)};
}

int shell(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict end_to_end(const fs::path& work) {
  const std::string cli = MASKMATCH_CLI_PATH;
  const std::string root = work.string();
  if (shell(cli + " gen-fixtures --videos 2 --out " + root) != 0) return {false, "gen-fixtures failed"};
  if (shell(cli + " mmc-profile --dataset " + root + "/dataset --jobs 1 --out " + root) != 0) {
    return {false, "mmc-profile failed"};
  }
  double worst = 0.0;
  for (const char* run : {"a", "b"}) {
    const auto start = Clock::now();
    const int rc = shell(cli + " edit --synthetic moving-square --steps 50 --jobs 1 --profile " + root +
                         "/profile.json --out " + root + "/edit_" + run);
    worst = std::max(worst, seconds_since(start));
    if (rc != 0) return {false, std::string("edit run ") + run + " failed"};
  }
  std::size_t frames = 0;
  bool identical = true;
  for (const auto& entry : fs::directory_iterator(work / "edit_a" / "frames")) {
    ++frames;
    identical = identical && slurp(entry.path()) == slurp(work / "edit_b" / "frames" / entry.path().filename());
  }
  return {identical && frames > 0 && worst < 60.0,
          fmt("slowest edit %.2f s, %.0f frames", worst, static_cast<double>(frames)) +
              (identical ? ", byte-identical" : ", frames differ")};
}

Verdict interchange(const fs::path& work) {
  Gen gen(1012);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const Tensor t = gen.tensor(gen.shape(1, 4, 6), -1e3f, 1e3f);
    const fs::path p = work / "rt.attn";
    write_dump(p, t);
    mismatches += !(read_dump(p) == t);
  }
  auto code_of = [&](const char* name) -> std::string {
    try {
      read_dump(work / "interchange" / name);
    } catch (const Error& e) {
      return to_string(e.code());
    }
    return "none";
  };
  const std::set<std::string> codes{code_of("bad_magic.attn"), code_of("bad_version.attn"),
                                    code_of("bad_dtype.attn")};
  const bool ok = mismatches == 0 && codes.size() == 3 && !codes.count("none");
  std::string names;
  for (const auto& c : codes) names += (names.empty() ? "" : "/") + c;
  return {ok, fmt("%.0f round-trip mismatches, ", static_cast<double>(mismatches)) + names};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << " (" << v.detail << ")" << std::endl;
  };

  report("iou-oracle-equivalence", iou_oracle);
  report("profiler-recovery", profiler_recovery);
  report("cost-hand-cases", cost_hand_cases);
  report("blend-boundary-identities", boundary_identities);
  report("cross-blend-row-stochastic", row_stochastic);
  report("time-agnostic-unwrap-zero", time_agnostic_unwrap);
  const ToyRun toy;
  report("ddim-replay-identity", [&] { return replay_identity(toy); });
  report("ddim-fresh-round-trip", [&] { return fresh_round_trip(toy); });
  report("full-fusion-collapse", [&] { return full_fusion(toy); });
  report("masked-psnr", masked_psnr_checks);
  TempDir work("acceptance");
  report("end-to-end-smoke", [&] { return end_to_end(work.path()); });
  report("interchange-round-trip", [&] { return interchange(work.path()); });

  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
