#include <cmath>
#include <vector>

#include "doctest.h"
#include "fd_util.hpp"
#include "trajlm/errors.hpp"
#include "trajlm/scene_encoder.hpp"

using namespace trajlm;

namespace {

Scene make_normalized_scene() {
  Scene s;
  s.id = "hand";
  s.ego = Track::all_present({{-4, 0}, {-3, 0}, {-2, 0}, {-1, 0}, {0, 0}});
  s.neighbors.push_back(Track::all_present({{-2, 4}, {-1, 4}, {0, 4}, {1, 4}, {2, 4}}));
  s.heading = 0.0;
  return s;
}

/// The same two-layer lift the encoder applies, rebuilt from the handles.
ad::Value lift(ad::Graph& g, const SceneEncoderHandles& h, const Tensor& x) {
  ad::Value hidden = ad::gelu(ad::add_rowvec(ad::matmul(g.input(x), h.phi_w1), h.phi_b1));
  return ad::add_rowvec(ad::matmul(hidden, h.phi_w2), h.phi_b2);
}

}  // namespace

TEST_CASE("vectorize produces displacement/offset state rows") {
  const Scene s = make_normalized_scene();
  const VectorizedScene vs = vectorize(s);

  REQUIRE(vs.ego.rows() == kEncodedSteps);
  REQUIRE(vs.ego.cols() == 4);
  // Ego at raw step 1: moved (1,0), sits at (-3,0) relative to its t=0 pose.
  CHECK(vs.ego(0, 0) == 1.0);
  CHECK(vs.ego(0, 1) == 0.0);
  CHECK(vs.ego(0, 2) == -3.0);
  CHECK(vs.ego(0, 3) == 0.0);
  // Ego at raw step 4: offset from itself is zero.
  CHECK(vs.ego(3, 0) == 1.0);
  CHECK(vs.ego(3, 2) == 0.0);

  // Neighbor at raw step 4: displacement (1,0), offset (2,4) from the ego.
  REQUIRE(vs.neighbors.size() == kEncodedSteps);
  REQUIRE(vs.neighbors[3].rows() == 1);
  CHECK(vs.neighbors[3](0, 0) == 1.0);
  CHECK(vs.neighbors[3](0, 1) == 0.0);
  CHECK(vs.neighbors[3](0, 2) == 2.0);
  CHECK(vs.neighbors[3](0, 3) == 4.0);
}

TEST_CASE("vectorize drops neighbors without a valid predecessor") {
  Scene s = make_normalized_scene();
  s.neighbors[0].present[3] = false;  // absent at raw step 3

  const VectorizedScene vs = vectorize(s);
  CHECK(vs.neighbors[0].rows() == 1);  // raw steps 0->1 intact
  CHECK(vs.neighbors[1].rows() == 1);  // raw steps 1->2 intact
  CHECK(vs.neighbors[2].empty());      // raw step 3 missing
  CHECK(vs.neighbors[3].empty());      // predecessor at raw step 3 missing
}

TEST_CASE("vectorize validates history lengths") {
  Scene s = make_normalized_scene();
  s.ego.positions.pop_back();
  s.ego.present.pop_back();
  CHECK_THROWS_AS(vectorize(s), DataError);

  Scene t = make_normalized_scene();
  t.neighbors[0].positions.pop_back();
  t.neighbors[0].present.pop_back();
  CHECK_THROWS_AS(vectorize(t), DataError);
}

TEST_CASE("single neighbor attention passes its value through exactly") {
  Rng rng(7);
  const SceneEncoderParams params = SceneEncoderParams::init(16, rng);
  const Tensor n_state = Tensor::from_rows(1, 4, {0.3, -0.2, 1.5, 2.0});
  const Tensor ego_state = Tensor::from_rows(1, 4, {1.0, 0.0, 0.0, 0.0});

  ad::Graph g;
  const SceneEncoderHandles h = register_scene_encoder(g, params, false);
  ad::Value ego_feat = lift(g, h, ego_state);
  ad::Value inter = encode_interactions(g, h, ego_feat, n_state);

  // softmax over one key is 1, so the output is that neighbor's value row.
  ad::Value expected = ad::matmul(lift(g, h, n_state), h.wv);
  CHECK(max_abs_diff(g.val(inter), g.val(expected)) == 0.0);
}

TEST_CASE("duplicated neighbors attend to the same value") {
  Rng rng(8);
  const SceneEncoderParams params = SceneEncoderParams::init(16, rng);
  const Tensor one = Tensor::from_rows(1, 4, {0.3, -0.2, 1.5, 2.0});
  const Tensor two = Tensor::from_rows(2, 4, {0.3, -0.2, 1.5, 2.0, 0.3, -0.2, 1.5, 2.0});
  const Tensor ego_state = Tensor::from_rows(1, 4, {1.0, 0.0, -0.5, 0.25});

  ad::Graph g;
  const SceneEncoderHandles h = register_scene_encoder(g, params, false);
  ad::Value ego_feat = lift(g, h, ego_state);
  ad::Value a = encode_interactions(g, h, ego_feat, one);
  ad::Value b = encode_interactions(g, h, ego_feat, two);
  CHECK(max_abs_diff(g.val(a), g.val(b)) == 0.0);
}

TEST_CASE("no neighbors yield the zero interaction vector") {
  Rng rng(9);
  const SceneEncoderParams params = SceneEncoderParams::init(16, rng);
  ad::Graph g;
  const SceneEncoderHandles h = register_scene_encoder(g, params, false);
  ad::Value ego_feat = lift(g, h, Tensor::from_rows(1, 4, {1.0, 0.0, 0.0, 0.0}));
  ad::Value inter = encode_interactions(g, h, ego_feat, Tensor());
  for (std::size_t j = 0; j < 16; ++j) CHECK(g.val(inter)(0, j) == 0.0);
}

TEST_CASE("gate blends with two free sigmoids") {
  Rng rng(10);
  SceneEncoderParams params = SceneEncoderParams::init(6, rng);
  const Tensor inter = Tensor::from_rows(1, 6, {1, -2, 3, 0.5, -0.25, 2});
  const Tensor ego = Tensor::from_rows(1, 6, {-1, 1, 0.5, 2, -3, 0.125});

  auto gate_out = [&](double alpha) {
    params.alpha.fill(alpha);
    ad::Graph g;
    const SceneEncoderHandles h = register_scene_encoder(g, params, false);
    return g.val(fuse_gate(g, h, g.input(inter), g.input(ego)));
  };

  SUBCASE("alpha zero weighs the sides 0.5 and sigmoid(1)") {
    const Tensor out = gate_out(0.0);
    const double ge = 1.0 / (1.0 + std::exp(-1.0));
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(out(0, j) == doctest::Approx(0.5 * inter(0, j) + ge * ego(0, j)).epsilon(1e-12));
  }
  SUBCASE("alpha +40 saturates to the interaction side") {
    const Tensor out = gate_out(40.0);
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(std::fabs(out(0, j) - inter(0, j)) <= 1e-12);
  }
  SUBCASE("alpha -40 saturates to the ego side") {
    const Tensor out = gate_out(-40.0);
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(std::fabs(out(0, j) - ego(0, j)) <= 1e-12);
  }
}

TEST_CASE("zero-neighbor scene encodes to the gated ego features") {
  Rng rng(11);
  const SceneEncoderParams params = SceneEncoderParams::init(12, rng);  // alpha stays zero
  Scene s = make_normalized_scene();
  s.neighbors.clear();

  ad::Graph g;
  const SceneEncoderHandles h = register_scene_encoder(g, params, false);
  const VectorizedScene vs = vectorize(s);
  const Tensor out = g.val(encode_scene(g, h, vs));
  REQUIRE(out.rows() == kEncodedSteps);
  REQUIRE(out.cols() == 12);

  const Tensor ego_feat = g.val(lift(g, h, vs.ego));
  const double ge = 1.0 / (1.0 + std::exp(-1.0));
  for (std::size_t t = 0; t < kEncodedSteps; ++t)
    for (std::size_t j = 0; j < 12; ++j)
      CHECK(out(t, j) == doctest::Approx(ge * ego_feat(t, j)).epsilon(1e-12));
}

TEST_CASE("neighbor order never changes the encoding") {
  Rng rng(12);
  const SceneEncoderParams params = SceneEncoderParams::init(24, rng);
  Scene s = make_normalized_scene();
  s.neighbors.push_back(Track::all_present({{3, -2}, {3.5, -2}, {4, -2}, {4.5, -2}, {5, -2}}));
  s.neighbors.push_back(Track::all_present({{-6, 1}, {-5, 1}, {-4, 1}, {-3, 1}, {-2, 1}}));

  Scene permuted = s;
  std::swap(permuted.neighbors[0], permuted.neighbors[2]);
  std::swap(permuted.neighbors[1], permuted.neighbors[2]);

  ad::Graph g;
  const SceneEncoderHandles h = register_scene_encoder(g, params, false);
  const Tensor a = g.val(encode_scene(g, h, vectorize(s)));
  const Tensor b = g.val(encode_scene(g, h, vectorize(permuted)));
  CHECK(max_abs_diff(a, b) <= 1e-9);
}

TEST_CASE("encoding is invariant to rigid motion of the raw scene") {
  Rng rng(13);
  const SceneEncoderParams params = SceneEncoderParams::init(16, rng);
  Rng scene_rng(99);

  Scene s;
  s.id = "rigid";
  std::vector<Vec2> ego;
  for (int t = 0; t < 5; ++t)
    ego.push_back({2.0 * t + 0.2 * scene_rng.normal(), 1.0 * t + 0.2 * scene_rng.normal()});
  s.ego = Track::all_present(ego);
  for (int n = 0; n < 3; ++n) {
    std::vector<Vec2> pos;
    const Vec2 base{scene_rng.uniform(-10, 10), scene_rng.uniform(-10, 10)};
    for (int t = 0; t < 5; ++t)
      pos.push_back({base.x + 1.5 * t, base.y + scene_rng.uniform(-0.3, 0.3)});
    s.neighbors.push_back(Track::all_present(pos));
  }

  for (int trial = 0; trial < 5; ++trial) {
    const double angle = scene_rng.uniform(0, 2 * M_PI);
    const Vec2 shift{scene_rng.uniform(-80, 80), scene_rng.uniform(-80, 80)};
    const Scene moved = apply_rigid(s, angle, shift);

    ad::Graph g;
    const SceneEncoderHandles h = register_scene_encoder(g, params, false);
    const Tensor a = g.val(encode_scene(g, h, vectorize(normalize_scene(s))));
    const Tensor b = g.val(encode_scene(g, h, vectorize(normalize_scene(moved))));
    CHECK(max_abs_diff(a, b) <= 1e-5);
  }
}

TEST_CASE("scene encoder gradients agree with finite differences") {
  Rng rng(14);
  SceneEncoderParams params = SceneEncoderParams::init(8, rng);
  // Nonzero alpha so its gradient path is generic.
  for (std::size_t i = 0; i < params.alpha.numel(); ++i) params.alpha[i] = rng.uniform(-0.5, 0.5);

  Scene s = make_normalized_scene();
  s.neighbors.push_back(Track::all_present({{3, -2}, {3.5, -2}, {4, -2}, {4.5, -2}, {5, -2}}));
  s.neighbors[1].present[2] = false;  // exercise the presence gating
  const VectorizedScene vs = vectorize(s);

  Tensor weights({kEncodedSteps, 8});
  for (std::size_t i = 0; i < weights.numel(); ++i) weights[i] = rng.uniform(-1, 1);

  auto loss_value = [&]() {
    ad::Graph g;
    const SceneEncoderHandles h = register_scene_encoder(g, params, true);
    ad::Value out = encode_scene(g, h, vs);
    return g.val(ad::mean_all(ad::mul(out, g.input(weights))))[0];
  };

  ad::Graph g;
  const SceneEncoderHandles h = register_scene_encoder(g, params, true);
  ad::Value out = encode_scene(g, h, vs);
  g.backward(ad::mean_all(ad::mul(out, g.input(weights))));

  const std::vector<ad::Value> handles = {h.phi_w1, h.phi_b1, h.phi_w2, h.phi_b2,
                                          h.wq,     h.wk,     h.wv,     h.alpha};
  const std::vector<std::string> names = {"phi_w1", "phi_b1", "phi_w2", "phi_b2",
                                          "wq",     "wk",     "wv",     "alpha"};
  std::vector<Tensor*> tensors = {&params.phi_w1, &params.phi_b1, &params.phi_w2, &params.phi_b2,
                                  &params.wq,     &params.wk,     &params.wv,     &params.alpha};
  std::vector<Tensor> grads;
  for (ad::Value v : handles) grads.push_back(g.grad(v));

  const fdtest::FdReport report = fdtest::fd_compare(tensors, grads, names, loss_value);
  INFO("worst coordinate: " << report.where);
  CHECK(report.max_rel <= 1e-3);
}
