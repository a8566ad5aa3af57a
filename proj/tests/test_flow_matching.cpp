#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "condforge/error.hpp"
#include "condforge/flow_matching.hpp"
#include "oracles.hpp"

using namespace condforge;

namespace {

FlowSample sample(VecX x0, VecX x1, double t, int text = 0, int cond = 0) {
  return {std::move(x0), std::move(x1), t, VecX::Zero(text), VecX::Zero(cond)};
}

VecX vec(std::initializer_list<double> v) {
  VecX out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

/// Central differences of fm_loss over every parameter.
ModelGradient numeric_gradient(const LinearVelocityModel& m, const std::vector<FlowSample>& batch, double h) {
  ModelGradient g{MatX::Zero(m.W.rows(), m.W.cols()), VecX::Zero(m.b.size())};
  auto probe = [&](double& p) {
    const double saved = p;
    p = saved + h;
    const double up = oracle::fm_loss(m, batch);
    p = saved - h;
    const double down = oracle::fm_loss(m, batch);
    p = saved;
    return (up - down) / (2.0 * h);
  };
  auto& mm = const_cast<LinearVelocityModel&>(m);
  for (Eigen::Index i = 0; i < m.W.size(); ++i) g.dW.data()[i] = probe(mm.W.data()[i]);
  for (Eigen::Index i = 0; i < m.b.size(); ++i) g.db[i] = probe(mm.b[i]);
  return g;
}

bool close(double a, double b, double rel, double abs_floor) {
  return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace

TEST_SUITE("flow_matching") {
  TEST_CASE("interpolant endpoints and midpoint") {
    const auto s = sample(vec({0, 0}), vec({2, 4}), 0.5);
    CHECK(interpolate(s) == vec({1, 2}));
    auto a = s;
    a.t = 0.0;
    CHECK(interpolate(a) == a.x0);
    a.t = 1.0;
    CHECK(interpolate(a) == a.x1);
    CHECK(target_velocity(s) == vec({2, 4}));
    CHECK(target_velocity(sample(vec({3, -1}), vec({3, -1}), 0.2)) == VecX::Zero(2));
  }

  TEST_CASE("velocity is the time derivative of the interpolant") {
    std::mt19937_64 rng(1);
    for (auto s : random_batch({3, 2, 2}, 20, rng)) {
      s.t = 0.3;
      const double h = 1e-6;
      auto up = s, down = s;
      up.t += h;
      down.t -= h;
      const VecX fd = (interpolate(up) - interpolate(down)) / (2.0 * h);
      CHECK((fd - target_velocity(s)).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }

  TEST_CASE("walking the path back and forward reaches both endpoints") {
    std::mt19937_64 rng(2);
    for (const auto& s : random_batch({2, 4, 4}, 100, rng)) {
      const VecX x_t = interpolate(s);
      const VecX v = target_velocity(s);
      CHECK((x_t - s.t * v - s.x0).cwiseAbs().maxCoeff() <= 1e-14);
      CHECK((x_t + (1.0 - s.t) * v - s.x1).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }

  TEST_CASE("sample validation") {
    CHECK_THROWS_AS(interpolate(sample(vec({1, 2}), vec({1}), 0.5)), FlowError);
    CHECK_THROWS_AS(interpolate(sample(vec({1}), vec({1}), 1.5)), FlowError);
    CHECK_THROWS_AS(target_velocity(sample(vec({1}), vec({1}), -0.1)), FlowError);
    const auto m = LinearVelocityModel::zeros({2, 4, 4});
    CHECK_THROWS_AS(fm_loss(m, std::vector<FlowSample>{}), FlowError);
    std::mt19937_64 rng(3);
    auto batch = random_batch({2, 4, 4}, 3, rng);
    batch[2].c_cond = VecX::Zero(3);
    CHECK_THROWS_AS(fm_loss(m, batch), FlowError);
    CHECK_THROWS_AS(fm_loss(LinearVelocityModel::zeros({3, 4, 4}), random_batch({2, 4, 4}, 2, rng)), FlowError);
  }

  TEST_CASE("perfect model and constant offset") {
    std::mt19937_64 rng(4);
    const FlowDims dims{2, 4, 4};
    const auto truth = random_model(dims, rng);
    const auto data = planted_dataset(truth, dims, 32, rng);
    CHECK(fm_loss(truth, data) <= 1e-24);
    auto offset = truth;
    offset.b += vec({0.3, -0.4});
    CHECK(fm_loss(offset, data) == doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("loss matches the reference sum of squares") {
    std::mt19937_64 rng(5);
    const FlowDims dims{2, 4, 4};
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = random_model(dims, rng, 1.0);
      const auto batch = random_batch(dims, 16, rng);
      const double a = fm_loss(m, batch);
      const double b = oracle::fm_loss(m, batch);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
      CHECK(a >= 0.0);
    }
  }

  TEST_CASE("loss is permutation invariant and quadratic in residual scale") {
    std::mt19937_64 rng(6);
    const FlowDims dims{2, 4, 4};
    const auto m = random_model(dims, rng);
    auto batch = random_batch(dims, 24, rng);
    const double base = fm_loss(m, batch);
    auto shuffled = batch;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(fm_loss(m, shuffled) == doctest::Approx(base).epsilon(1e-13));

    // With a zero model the residual is the target x1 - x0; scaling both
    // endpoints by c scales every residual by c.
    const auto zero = LinearVelocityModel::zeros(dims);
    const double z = fm_loss(zero, batch);
    for (double c : {0.5, 2.0, 3.0}) {
      auto scaled = batch;
      for (auto& s : scaled) {
        s.x0 *= c;
        s.x1 *= c;
      }
      CHECK(fm_loss(zero, scaled) == doctest::Approx(c * c * z).epsilon(1e-12));
    }
  }

  TEST_CASE("scalar gradient by hand") {
    // One sample, data dim 1, no conditioning: input (x_t, t), residual r.
    LinearVelocityModel m{MatX::Constant(1, 2, 0.5), vec({0.1})};
    const auto s = sample(vec({1.0}), vec({3.0}), 0.25);
    const double x_t = 0.75 * 1.0 + 0.25 * 3.0;
    const double r = 0.5 * x_t + 0.5 * 0.25 + 0.1 - 2.0;
    const auto g = fm_loss_gradient(m, std::vector<FlowSample>{s});
    CHECK(g.dW(0, 0) == doctest::Approx(2.0 * r * x_t).epsilon(1e-14));
    CHECK(g.dW(0, 1) == doctest::Approx(2.0 * r * 0.25).epsilon(1e-14));
    CHECK(g.db[0] == doctest::Approx(2.0 * r).epsilon(1e-14));
  }

  TEST_CASE("zero residual gives zero gradient") {
    std::mt19937_64 rng(7);
    const FlowDims dims{2, 4, 4};
    const auto truth = random_model(dims, rng);
    const auto g = fm_loss_gradient(truth, planted_dataset(truth, dims, 20, rng));
    CHECK(g.dW.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(g.db.cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(8);
    const FlowDims dims{2, 4, 4};
    int bad = 0;
    for (int draw = 0; draw < 100; ++draw) {
      const auto m = random_model(dims, rng, 1.0);
      const auto batch = random_batch(dims, 8, rng);
      const auto g = fm_loss_gradient(m, batch);
      const auto n = numeric_gradient(m, batch, 1e-5);
      for (Eigen::Index i = 0; i < g.dW.size(); ++i) bad += !close(g.dW.data()[i], n.dW.data()[i], 1e-5, 1e-8);
      for (Eigen::Index i = 0; i < g.db.size(); ++i) bad += !close(g.db[i], n.db[i], 1e-5, 1e-8);
    }
    CHECK(bad == 0);
  }

  TEST_CASE("fit reaches the least-squares optimum on a planted field") {
    const FlowDims dims{2, 4, 4};
    for (std::uint64_t seed : {11, 12, 13}) {
      std::mt19937_64 rng(seed);
      const auto truth = random_model(dims, rng);
      const auto data = planted_dataset(truth, dims, 256, rng);
      const auto result = fit(LinearVelocityModel::zeros(dims), data, 2000, 0.1);
      CHECK(result.loss_curve.size() == 2001);
      const double optimum = oracle::least_squares_optimum(data);
      CHECK(optimum <= 1e-20);
      CHECK(result.loss_curve.back() - optimum <= 1e-6);
      CHECK(std::is_sorted(result.loss_curve.rbegin(), result.loss_curve.rend()));
    }
  }

  TEST_CASE("zero learning rate leaves the model unchanged") {
    std::mt19937_64 rng(14);
    const FlowDims dims{2, 4, 4};
    const auto m = random_model(dims, rng);
    const auto data = random_batch(dims, 16, rng);
    const auto r = fit(m, data, 5, 0.0);
    CHECK(r.model.W == m.W);
    CHECK(r.model.b == m.b);
    CHECK(r.loss_curve == std::vector<double>(6, fm_loss(m, data)));
    CHECK_THROWS_AS(fit(m, data, 5, -0.1), FlowError);
  }

  TEST_CASE("divergence names the step") {
    std::mt19937_64 rng(15);
    const FlowDims dims{2, 4, 4};
    const auto data = random_batch(dims, 16, rng);
    try {
      fit(LinearVelocityModel::zeros(dims), data, 500, 50.0);
      FAIL("expected FlowError");
    } catch (const FlowError& e) {
      CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
  }

  TEST_CASE("conditioning coupling shows up in the fitted cond block") {
    const FlowDims dims{2, 4, 4};
    std::mt19937_64 rng(16);
    const auto base = random_model(dims, rng);
    auto coupled = base;
    coupled.W.middleCols(dims.data + 1 + dims.text, dims.cond).setZero();
    coupled.W(0, dims.data + 1 + dims.text) = 0.8;
    auto uncoupled = coupled;
    uncoupled.W(0, dims.data + 1 + dims.text) = 0.0;

    std::mt19937_64 rng_a(17), rng_b(17);
    const auto data_a = planted_dataset(coupled, dims, 256, rng_a);
    const auto data_b = planted_dataset(uncoupled, dims, 256, rng_b);
    const auto fit_a = fit(LinearVelocityModel::zeros(dims), data_a, 2000, 0.1).model;
    const auto fit_b = fit(LinearVelocityModel::zeros(dims), data_b, 2000, 0.1).model;
    const MatX diff = fit_a.cond_block(dims) - fit_b.cond_block(dims);
    CHECK(diff(0, 0) == doctest::Approx(0.8).epsilon(1e-3));
    CHECK(std::abs(fit_b.cond_block(dims)(0, 0)) <= 1e-3);
    // Text columns are shared between the two fields.
    CHECK((fit_a.W.middleCols(dims.data + 1, dims.text) - fit_b.W.middleCols(dims.data + 1, dims.text))
              .cwiseAbs()
              .maxCoeff() <= 1e-3);
  }
}
