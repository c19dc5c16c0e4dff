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

// leyolo command-line tool. Results go to stdout (or -o), diagnostics to stderr.
//
// Exit codes:
//   0  success
//   1  verification found violations
//   2  bad arguments or configuration
//   3  file could not be read, written or parsed
//   4  weights do not match the architecture
//   5  input violates a precondition (e.g. size not divisible by 32)
//   6  any other failure

#include "leyolo/leyolo.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

enum Exit : int
{
  kOk            = 0,
  kVerifyFailed  = 1,
  kUsage         = 2,
  kIo            = 3,
  kBind          = 4,
  kPrecondition  = 5,
  kOther         = 6,
};

struct Options
{
  std::string              variant{"nano"};
  std::size_t              imgsz{640};
  std::vector<std::string> ablate;
  std::string              format{"table"};
  std::string              output;
  std::string              weights;
  std::string              image;
  float                    conf{leyolo::kDefaultConf};
  float                    iou{leyolo::kDefaultIou};
  std::size_t              max_det{leyolo::kDefaultMaxDet};
  std::size_t              classes{0};
  std::uint32_t            seed{0};
};

leyolo::ArchitectureSpec make_spec(Options const &o, std::size_t classes = 80)
{
  auto spec = leyolo::build_model_spec(leyolo::VariantConfig::by_name(o.variant), classes);
  if (!o.ablate.empty())
  {
    spec = leyolo::apply_ablation(leyolo::ablation_origin(spec), leyolo::ablation_config_for(o.ablate));
  }
  return spec;
}

void emit(Options const &o, std::string const &text)
{
  if (o.output.empty() || o.output == "-")
  {
    std::cout << text;
    return;
  }
  std::ofstream out(o.output, std::ios::trunc);
  out << text;
  if (!out)
  {
    throw leyolo::FormatError(leyolo::FormatError::Kind::io, "cannot write '" + o.output + "'");
  }
}

void run_analyze(Options const &o)
{
  auto const report = leyolo::count(make_spec(o), o.imgsz);
  if (o.format == "json")
  {
    emit(o, leyolo::to_json(report).dump(2) + "\n");
  }
  else if (o.format == "csv")
  {
    emit(o, leyolo::format_csv(report));
  }
  else
  {
    emit(o, leyolo::format_table(report));
  }
}

void run_compare(Options const &o)
{
  std::string text;
  char        buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %5s %9s %9s %8s %9s %9s\n", "variant", "size", "GFLOP", "ref", "delta",
                "M params", "ref");
  text += buf;
  for (auto const &c : leyolo::compare_variants())
  {
    std::snprintf(buf, sizeof(buf), "%-8s %5zu %9.3f %9.3f %+7.1f%% %9.3f %9.1f\n", c.variant.c_str(),
                  c.input_size, c.gflops, c.reference_gflops, 100.0 * c.gflop_delta(), c.mparams,
                  c.reference_mparams.value_or(0.0));
    text += buf;
  }
  emit(o, text);
}

int run_verify(Options const &o)
{
  std::vector<std::string> names;
  if (o.variant == "all")
  {
    for (auto const &v : leyolo::VariantConfig::all())
    {
      names.push_back(v.name);
    }
  }
  else
  {
    names.push_back(o.variant);
  }
  bool        ok = true;
  std::string text;
  for (auto const &name : names)
  {
    Options one = o;
    one.variant = name;
    auto rep    = leyolo::verify_constraints(make_spec(one));
    text += name + ": " + (rep.ok() ? "ok" : "FAILED") + "\n";
    for (auto const &v : rep.violations)
    {
      text += "  violation " + v.layer + " [" + v.rule + "] " + v.detail + "\n";
    }
    for (auto const &c : rep.checks)
    {
      text += std::string("  ") + (c.ok ? "ok   " : "FAIL ") + c.name + ": " + c.detail + "\n";
    }
    ok = ok && rep.ok();
  }
  emit(o, text);
  return ok ? kOk : kVerifyFailed;
}

void run_dump_spec(Options const &o)
{
  emit(o, leyolo::to_json(make_spec(o)).dump(2) + "\n");
}

void run_init_random(Options const &o)
{
  auto const spec  = make_spec(o, o.classes == 0 ? 80 : o.classes);
  auto const store = leyolo::init_random(spec, o.seed);
  leyolo::write_store(o.output, store);
  std::cerr << "wrote " << store.size() << " tensors for " << spec.variant << " to " << o.output << "\n";
}

void run_infer(Options const &o)
{
  auto const t0    = std::chrono::steady_clock::now();
  auto const store = leyolo::read_store(o.weights);

  // The class count is read off the stored predictor unless given explicitly.
  std::size_t classes = o.classes;
  if (classes == 0)
  {
    auto const *bias = store.find("head.p3.cls_pred.bias");
    classes          = bias != nullptr && bias->dims.size() == 1 ? bias->dims[0] : 80;
  }
  auto const model = leyolo::Model::bind(make_spec(o, classes), store);
  auto const image = leyolo::read_ppm(o.image);
  auto [input, meta] = leyolo::letterbox(image, o.imgsz);
  auto const heads   = leyolo::forward(model, input);
  auto const dets    = leyolo::postprocess(heads, meta, {o.conf, o.iou, o.max_det});
  emit(o, leyolo::detections_to_json(dets).dump() + "\n");
  auto const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "%zu detection(s) in %.2f s (%d thread(s))\n", dets.size(), secs, leyolo::num_threads());
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"LeYOLO architecture analysis and reference inference"};
  app.require_subcommand(1);
  Options o;

  auto add_variant = [&](CLI::App *sub, bool allow_all = false) {
    std::vector<std::string> choices{"nano", "small", "medium", "large"};
    if (allow_all)
    {
      choices.emplace_back("all");
    }
    sub->add_option("--variant", o.variant, "Model variant")->check(CLI::IsMember(choices));
  };
  auto add_ablate = [&](CLI::App *sub) {
    std::vector<std::string> keys;
    for (auto const &row : leyolo::ablation_rows())
    {
      keys.push_back(row.key);
    }
    sub->add_option("--ablate", o.ablate, "Ablation step (repeatable)")->check(CLI::IsMember(keys));
  };

  auto *analyze = app.add_subcommand("analyze", "FLOP, parameter and memory report");
  add_variant(analyze);
  analyze->add_option("--imgsz", o.imgsz, "Square input size")->check(CLI::PositiveNumber);
  add_ablate(analyze);
  analyze->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"table", "json", "csv"}));
  analyze->add_option("-o,--output", o.output, "Output file (default stdout)");

  auto *compare = app.add_subcommand("compare", "All variants against published operating points");
  compare->add_option("-o,--output", o.output, "Output file (default stdout)");

  auto *infer = app.add_subcommand("infer", "Run detection on a PPM image");
  infer->add_option("--weights", o.weights, "LEYW weight file")->required();
  infer->add_option("--image", o.image, "Binary PPM (P6) image")->required();
  infer->add_option("--imgsz", o.imgsz, "Letterbox size (multiple of 32)");
  infer->add_option("--conf", o.conf, "Score threshold");
  infer->add_option("--iou", o.iou, "NMS IoU threshold");
  infer->add_option("--max-det", o.max_det, "Maximum detections");
  infer->add_option("--classes", o.classes, "Class count (default: read from the weights)");
  add_variant(infer);
  add_ablate(infer);
  infer->add_option("-o,--output", o.output, "Detections JSON (default stdout)");

  auto *dump = app.add_subcommand("dump-spec", "Write the architecture as JSON");
  add_variant(dump);
  add_ablate(dump);
  dump->add_option("-o,--output", o.output, "Output file (default stdout)");

  auto *verify = app.add_subcommand("verify", "Check architecture constraints");
  add_variant(verify, true);
  add_ablate(verify);
  verify->add_option("-o,--output", o.output, "Output file (default stdout)");

  auto *init = app.add_subcommand("init-random", "Write deterministic random weights");
  add_variant(init);
  add_ablate(init);
  init->add_option("--seed", o.seed, "Generator seed");
  init->add_option("--classes", o.classes, "Number of classes (default 80)");
  init->add_option("-o,--output", o.output, "Output LEYW file")->required();

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::ParseError const &e)
  {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try
  {
    if (*analyze)
    {
      run_analyze(o);
    }
    else if (*compare)
    {
      run_compare(o);
    }
    else if (*infer)
    {
      run_infer(o);
    }
    else if (*dump)
    {
      run_dump_spec(o);
    }
    else if (*verify)
    {
      return run_verify(o);
    }
    else if (*init)
    {
      run_init_random(o);
    }
    return kOk;
  }
  catch (leyolo::ConfigError const &e)
  {
    std::cerr << "error: configuration: " << e.what() << "\n";
    return kUsage;
  }
  catch (leyolo::FormatError const &e)
  {
    std::cerr << "error: " << (e.kind() == leyolo::FormatError::Kind::io ? "file: " : "format: ") << e.what()
              << "\n";
    return kIo;
  }
  catch (leyolo::BindError const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kBind;
  }
  catch (leyolo::PreconditionError const &e)
  {
    std::cerr << "error: precondition: " << e.what() << "\n";
    return kPrecondition;
  }
  catch (std::exception const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
