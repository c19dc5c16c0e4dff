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

#include "leyolo/analyzer.hpp"
#include "leyolo/engine.hpp"
#include "leyolo/init.hpp"

#include <gtest/gtest.h>

#include <thread>

namespace {

using namespace leyolo;

Tensor ramp(std::size_t size)
{
  Tensor x(Shape{1, 3, size, size});
  auto   d = x.data();
  for (std::size_t i = 0; i < d.size(); ++i)
  {
    d[i] = static_cast<float>(i % 255) / 255.0f;
  }
  return x;
}

WeightStore zero_store(ArchitectureSpec const &spec)
{
  WeightStore store;
  for (auto const &t : parameter_manifest(spec))
  {
    std::size_t n = 1;
    for (auto d : t.dims)
    {
      n *= d;
    }
    bool const ones = t.name.ends_with(".bn.gamma") || t.name.ends_with(".bn.var");
    store.add(t.name, t.dims, std::vector<float>(n, ones ? 1.0f : 0.0f));
  }
  return store;
}

TEST(Bind, RandomStoreBindsCleanly)
{
  auto const spec = build_model_spec(VariantConfig::nano());
  EXPECT_NO_THROW(Model::bind(spec, init_random(spec, 0)));
}

TEST(Bind, ReportsEveryMissingAndMismatchedTensor)
{
  auto const spec  = build_model_spec(VariantConfig::nano());
  auto       store = init_random(spec, 0);
  store.erase("neck.td4.1.dw.bn.var");
  store.erase("head.p5.cls_pred.bias");

  // Replace a pointwise kernel with its transpose.
  auto const *pw = store.find("backbone.p3.0.project.weight");
  ASSERT_NE(pw, nullptr);
  auto values = pw->floats();
  store.erase("backbone.p3.0.project.weight");
  store.add("backbone.p3.0.project.weight", {96, 32, 1, 1}, values);

  try
  {
    Model::bind(spec, store);
    FAIL() << "bind accepted an incomplete store";
  }
  catch (BindError const &e)
  {
    ASSERT_EQ(e.problems().size(), 3u);
    std::string const all = e.what();
    EXPECT_NE(all.find("missing tensor 'neck.td4.1.dw.bn.var' (layer neck.td4.1)"), std::string::npos);
    EXPECT_NE(all.find("head.p5.cls_pred.bias"), std::string::npos);
    EXPECT_NE(all.find("expected (32,96,1,1), got (96,32,1,1)"), std::string::npos);
  }
}

TEST(Forward, ShapesAt640And320)
{
  auto const  spec  = build_model_spec(VariantConfig::nano());
  Model const model = Model::bind(spec, init_random(spec, 1));
  auto        out   = forward(model, ramp(640));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].shape(), (Shape{1, 84, 80, 80}));
  EXPECT_EQ(out[1].shape(), (Shape{1, 84, 40, 40}));
  EXPECT_EQ(out[2].shape(), (Shape{1, 84, 20, 20}));
  out = forward(model, ramp(320));
  EXPECT_EQ(out[0].shape(), (Shape{1, 84, 40, 40}));
  EXPECT_EQ(out[2].shape(), (Shape{1, 84, 10, 10}));
}

TEST(Forward, DynamicShapesEqualStaticShapes)
{
  for (auto const &v : VariantConfig::all())
  {
    auto const  spec  = build_model_spec(v);
    Model const model = Model::bind(spec, init_random(spec, 2));
    for (std::size_t size : {320u, 480u})
    {
      ForwardTrace trace;
      forward(model, ramp(size), &trace);
      auto const want = propagate_shapes(spec, size, size);
      ASSERT_EQ(trace.shapes.size(), want.size());
      EXPECT_EQ(trace.shapes, want) << v.name << "@" << size;
      ASSERT_EQ(trace.order.size(), spec.layers.size());
      for (std::size_t i = 0; i < spec.layers.size(); ++i)
      {
        EXPECT_EQ(trace.order[i], spec.layers[i].id);
      }
    }
  }
}

TEST(Forward, PeakMemoryMatchesAnalyzerSchedule)
{
  auto const   spec  = build_model_spec(VariantConfig::nano());
  Model const  model = Model::bind(spec, init_random(spec, 3));
  ForwardTrace trace;
  forward(model, ramp(320), &trace);
  EXPECT_EQ(trace.peak_live_bytes, count(spec, 320).peak_activation_bytes);
}

TEST(Forward, ZeroWeightsGiveZeroOutputs)
{
  auto const  spec  = build_model_spec(VariantConfig::nano());
  Model const model = Model::bind(spec, zero_store(spec));
  for (auto const &t : forward(model, ramp(320)))
  {
    for (float v : t.data())
    {
      ASSERT_EQ(v, 0.0f);
    }
  }
}

TEST(Forward, RepeatedRunsAreBitwiseIdentical)
{
  auto const  spec  = build_model_spec(VariantConfig::nano());
  Model const model = Model::bind(spec, init_random(spec, 4));
  auto const  a     = forward(model, ramp(320));
  auto const  b     = forward(model, ramp(320));
  for (std::size_t i = 0; i < 3; ++i)
  {
    EXPECT_EQ(a[i].values(), b[i].values());
  }
}

TEST(Forward, ConcurrentCallsOnOneModel)
{
  auto const          spec  = build_model_spec(VariantConfig::nano());
  Model const         model = Model::bind(spec, init_random(spec, 5));
  auto const          want  = forward(model, ramp(320));
  std::vector<Tensor> got0, got1;
  {
    std::jthread t0([&] { got0 = forward(model, ramp(320)); });
    std::jthread t1([&] { got1 = forward(model, ramp(320)); });
  }
  for (std::size_t i = 0; i < 3; ++i)
  {
    EXPECT_EQ(got0[i].values(), want[i].values());
    EXPECT_EQ(got1[i].values(), want[i].values());
  }
}

TEST(Forward, ConvCountMatchesSlots)
{
  auto const   spec  = build_model_spec(VariantConfig::nano());
  Model const  model = Model::bind(spec, init_random(spec, 6));
  ForwardTrace trace;
  forward(model, ramp(320), &trace);
  std::size_t slots = 0;
  for (auto const &layer : spec.layers)
  {
    slots += conv_slots(layer).size();
  }
  EXPECT_EQ(trace.convs.convs, slots);
}

TEST(Forward, Preconditions)
{
  auto const  spec  = build_model_spec(VariantConfig::nano());
  Model const model = Model::bind(spec, init_random(spec, 7));
  EXPECT_THROW(forward(model, Tensor(Shape{1, 3, 320, 336})), PreconditionError);
  EXPECT_THROW(forward(model, Tensor(Shape{1, 1, 320, 320})), PreconditionError);
}

}  // namespace
