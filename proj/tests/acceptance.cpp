//
//   Copyright 2026 The leyolo-cpp Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//

// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// non-zero if any fails. Usage: acceptance <path to leyolo CLI>

#include "oracles.hpp"

#include "leyolo/leyolo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

namespace {

using namespace leyolo;

// Tolerances, pinned.
constexpr double kConvRelTol       = 1e-5;
constexpr double kParamTol         = 0.10;
constexpr double kBackboneTol      = 0.005;
constexpr double kFlopTol          = 0.12;
constexpr double kAblationTol      = 0.12;
constexpr double kRoundTripPx      = 1e-4;
constexpr double kEndToEndSeconds  = 30.0;
constexpr int    kConvConfigs      = 200;
constexpr int    kNmsSets          = 500;

struct Outcome
{
  bool        ok{true};
  std::string detail;

  void require(bool cond, std::string const &what)
  {
    if (!cond)
    {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }

  void note(std::string const &what)
  {
    detail += (detail.empty() ? "" : "; ") + what;
  }
};

std::string fmt(char const *f, double a, double b = 0, double c = 0)
{
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

bool within(double value, double ref, double tol)
{
  return std::abs(value / ref - 1.0) <= tol;
}

ArchitectureSpec spec_of(VariantConfig const &v)
{
  return build_model_spec(v);
}

Outcome kernel_oracle()
{
  Outcome        out;
  std::mt19937   gen(20260101);
  double         worst = 0;
  auto const     t0    = std::chrono::steady_clock::now();
  std::uniform_real_distribution<float> val(-1.0f, 1.0f);
  for (int i = 0; i < kConvConfigs; ++i)
  {
    oracle::ConvCase c;
    std::size_t const ks[] = {1, 3, 5};
    c.k      = ks[gen() % 3];
    c.stride = 1 + gen() % 2;
    c.h      = std::max<std::size_t>(1 + gen() % 16, c.k);
    c.w      = std::max<std::size_t>(1 + gen() % 16, c.k);
    c.in_ch  = 1 + gen() % 16;
    c.out_ch = 1 + gen() % 16;
    c.bias   = gen() % 2 == 0;
    if (i % 3 == 1)
    {
      c.out_ch = c.in_ch;
      c.groups = c.in_ch;
    }
    else if (i % 3 == 2)
    {
      c.k = 1;
    }
    c.pad = c.k / 2;
    std::vector<float> x(c.in_ch * c.h * c.w);
    for (auto &v : x)
      v = val(gen);
    ConvWeights w;
    w.out_ch       = c.out_ch;
    w.in_per_group = c.in_ch / c.groups;
    w.k            = c.k;
    w.kernel.resize(w.kernel_count());
    for (auto &v : w.kernel)
      v = val(gen);
    if (c.bias)
    {
      w.bias.resize(c.out_ch);
      for (auto &v : w.bias)
        v = val(gen);
    }
    auto abs_of = [](std::vector<float> v) {
      for (auto &e : v)
        e = std::abs(e);
      return v;
    };
    auto const y    = conv2d(Tensor(Shape{1, c.in_ch, c.h, c.w}, x), w, ConvParams{c.stride, c.pad, c.groups});
    auto const want = oracle::conv_double(c, x, w.kernel, w.bias);
    auto const mag  = oracle::conv_double(c, abs_of(x), abs_of(w.kernel), abs_of(w.bias));
    worst           = std::max(worst, oracle::max_relative_error(y.data(), want, mag));
  }
  auto const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(worst <= kConvRelTol, "relative error too large");
  out.require(secs < 60.0, "too slow");
  out.note(fmt("%.0f configs, max rel err %.2e, %.2f s", kConvConfigs, worst, secs));
  return out;
}

Outcome block_cases()
{
  Outcome out;
  auto    convs = [](BottleneckConfig const &c) {
    BottleneckWeights w;
    if (c.use_first_pw)
      w.expand = ConvWeights::zeros(c.expand_ch, c.in_ch, 1);
    w.depthwise = ConvWeights::zeros(c.expand_ch, 1, c.kernel);
    w.project   = ConvWeights::zeros(c.out_ch, c.expand_ch, 1);
    ConvTrace t;
    inverted_bottleneck(Tensor(Shape{1, c.in_ch, 8, 8}), c, w, &t);
    return t.convs;
  };
  auto const a = convs({16, 96, 32, 3, 2, true, false});
  auto const b = convs({32, 32, 32, 3, 1, true, true});
  auto const c = convs({32, 32, 32, 3, 1, false, true});

  // The pw-free row of the backbone, executed inside the full model.
  auto const   spec  = spec_of(VariantConfig::nano());
  Model const  model = Model::bind(spec, init_random(spec, 0));
  ForwardTrace trace;
  forward(model, Tensor(Shape{1, 3, 64, 64}), &trace);
  auto const row = std::ranges::count_if(trace.convs.executed,
                                         [](std::string const &s) { return s.starts_with("backbone.p2.0."); });
  out.require(a == 3, "case (a)");
  out.require(b == 3, "case (b)");
  out.require(c == 2, "case (c)");
  out.require(row == 2, "pw-free backbone row");
  out.note("convs (a)=" + std::to_string(a) + " (b)=" + std::to_string(b) + " (c)=" + std::to_string(c) +
           " pw-free row=" + std::to_string(row));
  return out;
}

Outcome shape_suite()
{
  Outcome    out;
  auto const bb     = build_backbone(VariantConfig::nano());
  auto const shapes = propagate_shapes(bb, 640, 640);
  out.require(shapes[*bb.index_of(bb.outputs[0])] == Shape{1, 32, 80, 80}, "P3 tap");
  out.require(shapes[*bb.index_of(bb.outputs[1])] == Shape{1, 64, 40, 40}, "P4 tap");
  out.require(shapes[*bb.index_of(bb.outputs[2])] == Shape{1, 96, 20, 20}, "P5 tap");

  set_num_threads(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  int checked = 0;
  for (auto const &v : VariantConfig::all())
  {
    auto const  spec  = spec_of(v);
    Model const model = Model::bind(spec, init_random(spec, 1));
    for (std::size_t size : {320u, 480u, 640u, 768u})
    {
      ForwardTrace trace;
      forward(model, Tensor(Shape{1, 3, size, size}, 0.5f), &trace);
      out.require(trace.shapes == propagate_shapes(spec, size, size), v.name + "@" + std::to_string(size));
      ++checked;
    }
  }
  set_num_threads(1);
  out.note("taps (32,80,80)/(64,40,40)/(96,20,20); " + std::to_string(checked) + " variant/size runs static==dynamic");
  return out;
}

Outcome parameter_totals()
{
  Outcome                                         out;
  std::vector<std::pair<VariantConfig, double>> const refs{{VariantConfig::nano(), 1.1},
                                                           {VariantConfig::small(), 1.9},
                                                           {VariantConfig::medium(), 2.4},
                                                           {VariantConfig::large(), 2.4}};
  for (auto const &[v, ref] : refs)
  {
    double const m = count(spec_of(v), v.train_size).total.mparams();
    out.require(within(m, ref, kParamTol), v.name);
    out.note(v.name + fmt(" %.3fM (ref %.1f, %+.1f%%)", m, ref, 100 * (m / ref - 1)));
  }
  auto const   bb     = count(spec_of(VariantConfig::nano()), 640).section(Section::backbone).params;
  auto const   hand   = oracle::nano_backbone_cost().first;
  double const bb_rel = std::abs(static_cast<double>(bb) / static_cast<double>(hand) - 1.0);
  out.require(bb_rel <= kBackboneTol, "backbone subtotal");
  out.note("backbone " + std::to_string(bb) + " vs hand " + std::to_string(hand));
  return out;
}

Outcome flop_totals()
{
  Outcome    out;
  auto const nano = spec_of(VariantConfig::nano());
  auto const r320 = count(nano, 320);
  auto const r640 = count(nano, 640);
  struct Row
  {
    std::string name;
    double      g, ref;
  };
  std::vector<Row> const rows{
      {"nano@320", r320.total.gflops(), 0.66},
      {"nano@640", r640.total.gflops(), 2.64},
      {"small@640", count(spec_of(VariantConfig::small()), 640).total.gflops(), 4.5},
      {"medium@640", count(spec_of(VariantConfig::medium()), 640).total.gflops(), 5.8},
      {"large@768", count(spec_of(VariantConfig::large()), 768).total.gflops(), 8.4},
  };
  for (auto const &r : rows)
  {
    out.require(within(r.g, r.ref, kFlopTol), r.name);
    out.note(r.name + fmt(" %.3fG (%+.1f%%)", r.g, 100 * (r.g / r.ref - 1)));
  }
  out.require(r640.total.flops == 4 * r320.total.flops, "640/320 ratio");
  out.note(fmt("ratio %.6f", static_cast<double>(r640.total.flops) / static_cast<double>(r320.total.flops)));
  return out;
}

Outcome ablation_flops()
{
  Outcome    out;
  auto const origin = ablation_origin(spec_of(VariantConfig::nano()));
  std::unordered_map<std::string, double> g;
  for (auto const &row : ablation_rows())
  {
    g[row.key] = count(apply_ablation(origin, row.config), 640).total.gflops();
    if (row.key == "neck_expansion_2")
    {
      out.note(row.key + fmt(" %.3f (ungated)", g[row.key]));
      continue;
    }
    out.require(within(g[row.key], row.reference_gflop, kAblationTol), row.key + " out of tolerance");
    out.note(row.key + fmt(" %.3f vs %.3f (%+.1f%%)", g[row.key], row.reference_gflop,
                           100 * (g[row.key] / row.reference_gflop - 1)));
  }
  out.require(g["kernels_3x3_only"] < g["k5_after_p4_only"] && g["k5_after_p4_only"] < g["kernels_5x5_only"],
              "kernel ordering");
  out.require(g["no_pw_backbone_and_neck"] < g["downsample_3x3_only"], "no-pw below its predecessor");
  out.require(g["neck_expansion_2"] < g["no_pw_backbone_and_neck"], "expansion 2 below no-pw");
  return out;
}

Outcome constraint_suite()
{
  Outcome out;
  for (auto const &v : VariantConfig::all())
  {
    auto const rep = verify_constraints(spec_of(v));
    out.require(rep.ok(), v.name);
  }
  out.note("ratio-6, backbone span, neck expansion 2, max neck d, two strided neck convs on 4 variants");
  return out;
}

Outcome nms_suite()
{
  Outcome      out;
  std::mt19937 gen(777);
  int          mismatches = 0;
  for (int i = 0; i < kNmsSets; ++i)
  {
    auto const  d     = oracle::random_detections(gen, 200);
    float const thr   = 0.3f + 0.1f * static_cast<float>(i % 5);
    auto const  once  = nms(d, thr, 300);
    bool const  match = once == oracle::nms_brute(d, thr, 300);
    bool const  idem  = nms(once, thr, 300) == once;
    bool const  det   = nms(d, thr, 300) == once;
    mismatches += (match && idem && det) ? 0 : 1;
  }
  out.require(mismatches == 0, "mismatch");
  out.note(std::to_string(kNmsSets) + " sets, " + std::to_string(mismatches) + " failing");
  return out;
}

Outcome determinism()
{
  Outcome    out;
  auto const spec  = spec_of(VariantConfig::nano());
  Model const model = Model::bind(spec, init_random(spec, 9));
  Tensor      x(Shape{1, 3, 320, 320});
  auto        d = x.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<float>((i * 2654435761u) % 1000) / 1000.0f;

  std::vector<std::vector<Tensor>> runs;
  for (char const *threads : {"1", "1", "4", "4"})
  {
    setenv("LEYOLO_THREADS", threads, 1);
    set_num_threads(detail::threads_from_env());
    runs.push_back(forward(model, x));
  }
  set_num_threads(1);
  bool same = true;
  for (auto const &r : runs)
    for (std::size_t i = 0; i < 3; ++i)
      same = same && r[i].values() == runs[0][i].values();
  out.require(same, "outputs differ");
  out.note("LEYOLO_THREADS=1,1,4,4 bitwise identical");
  return out;
}

Outcome io_round_trips(std::string const &cli)
{
  Outcome    out;
  auto const dir = std::filesystem::temp_directory_path() / "leyolo_acceptance";
  std::filesystem::create_directories(dir);

  auto const spec  = spec_of(VariantConfig::nano());
  auto const store = init_random(spec, 3);
  auto const wpath = (dir / "w.leyw").string();
  write_store(wpath, store);
  out.require(serialize_store(read_store(wpath)) == read_file_bytes(wpath), "LEYW round trip");
  out.require(serialize_store(WeightStore{}).size() == 12, "empty store size");

  LetterboxMeta const m{0.4f, 0.0f, 64.0f, 1000, 600};
  double              worst = 0;
  for (Box const &b : {Box{0, 0, 1000, 600}, Box{12.5f, 33.0f, 400.25f, 599.0f}})
  {
    auto const r = unletterbox_box(letterbox_box(b, m), m);
    for (int i = 0; i < 4; ++i)
      worst = std::max(worst, static_cast<double>(std::abs(r[i] - b[i])));
  }
  out.require(worst <= kRoundTripPx, "letterbox round trip");

  if (cli.empty())
  {
    out.require(false, "no CLI path given");
    return out;
  }
  Tensor img(Shape{1, 3, 240, 320});
  auto   d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<float>(i % 251) / 250.0f;
  auto const ipath = (dir / "in.ppm").string();
  auto const epath = (dir / "w_cli.leyw").string();
  auto const opath = (dir / "dets.json").string();
  write_ppm(ipath, img);
  auto const t0 = std::chrono::steady_clock::now();
  int const  a  = std::system((cli + " init-random --variant nano --seed 1 -o " + epath + " 2>/dev/null").c_str());
  int const  b  = std::system((cli + " infer --weights " + epath + " --image " + ipath + " --imgsz 320 -o " + opath +
                              " 2>/dev/null")
                                 .c_str());
  auto const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool       json_ok = false;
  try
  {
    std::ifstream in(opath);
    json_ok = nlohmann::json::parse(in).is_array();
  }
  catch (std::exception const &)
  {
  }
  out.require(a == 0 && b == 0, "CLI exit status");
  out.require(json_ok, "detections JSON");
  out.require(secs < kEndToEndSeconds, "end-to-end time");
  out.note(fmt("LEYW byte-identical; letterbox err %.1e px; init-random -> infer @320 %.2f s", worst, secs));
  std::filesystem::remove_all(dir);
  return out;
}

}  // namespace

int main(int argc, char **argv)
{
  std::string const cli = argc > 1 ? argv[1] : "";
  std::vector<std::pair<std::string, std::function<Outcome()>>> const criteria{
      {"1 kernel oracle equivalence", kernel_oracle},
      {"2 bottleneck case coverage", block_cases},
      {"3 shape suite", shape_suite},
      {"4 parameter totals", parameter_totals},
      {"5 FLOP totals", flop_totals},
      {"6 ablation FLOPs", ablation_flops},
      {"7 constraint suite", constraint_suite},
      {"8 NMS oracle", nms_suite},
      {"9 determinism", determinism},
      {"10 I/O round trips", [&] { return io_round_trips(cli); }},
  };
  int failed = 0;
  for (auto const &[name, check] : criteria)
  {
    Outcome r;
    try
    {
      r = check();
    }
    catch (std::exception const &e)
    {
      r.ok     = false;
      r.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %s: %s\n", r.ok ? "PASS" : "FAIL", name.c_str(), r.detail.c_str());
    std::fflush(stdout);
    failed += r.ok ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
