#include "condforge/flow_matching.hpp"

#include <Eigen/LU>

#include <cmath>
#include <string>

#include "condforge/error.hpp"

namespace condforge {
namespace {

VecX gaussian(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

void check_batch(const LinearVelocityModel& model, std::span<const FlowSample> batch) {
  if (batch.empty()) throw FlowError("empty batch");
  const auto& first = batch.front();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    validate_sample(s);
    if (s.x0.size() != first.x0.size() || s.c_text.size() != first.c_text.size() ||
        s.c_cond.size() != first.c_cond.size()) {
      throw FlowError("sample " + std::to_string(i) + " dimensions differ from sample 0");
    }
  }
  const auto in = first.x0.size() + 1 + first.c_text.size() + first.c_cond.size();
  if (model.W.rows() != first.x0.size() || model.W.cols() != in || model.b.size() != first.x0.size()) {
    throw FlowError("model shape " + std::to_string(model.W.rows()) + "x" + std::to_string(model.W.cols()) +
                    " does not fit samples (" + std::to_string(first.x0.size()) + "x" + std::to_string(in) + ")");
  }
}

}  // namespace

LinearVelocityModel LinearVelocityModel::zeros(const FlowDims& dims) {
  return {MatX::Zero(dims.data, dims.input()), VecX::Zero(dims.data)};
}

FlowDims LinearVelocityModel::dims(int text_dim) const {
  const int data = static_cast<int>(W.rows());
  return {data, text_dim, static_cast<int>(W.cols()) - data - 1 - text_dim};
}

VecX LinearVelocityModel::predict(const VecX& x_t, double t, const VecX& c_text, const VecX& c_cond) const {
  VecX in(x_t.size() + 1 + c_text.size() + c_cond.size());
  in << x_t, t, c_text, c_cond;
  if (in.size() != W.cols()) throw FlowError("model input has the wrong length");
  return W * in + b;
}

void validate_sample(const FlowSample& s) {
  if (s.x0.size() == 0) throw FlowError("x0 is empty");
  if (s.x0.size() != s.x1.size()) {
    throw FlowError("x0 has dimension " + std::to_string(s.x0.size()) + " but x1 has " +
                    std::to_string(s.x1.size()));
  }
  if (!(s.t >= 0.0 && s.t <= 1.0)) throw FlowError("t must be within [0, 1]");
}

VecX interpolate(const FlowSample& s) {
  validate_sample(s);
  return (1.0 - s.t) * s.x0 + s.t * s.x1;
}

VecX target_velocity(const FlowSample& s) {
  validate_sample(s);
  return s.x1 - s.x0;
}

VecX model_input(const FlowSample& s) {
  VecX in(s.x0.size() + 1 + s.c_text.size() + s.c_cond.size());
  in << interpolate(s), s.t, s.c_text, s.c_cond;
  return in;
}

double fm_loss(const LinearVelocityModel& model, std::span<const FlowSample> batch) {
  check_batch(model, batch);
  double total = 0.0;
  for (const auto& s : batch) {
    total += (target_velocity(s) - (model.W * model_input(s) + model.b)).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

ModelGradient fm_loss_gradient(const LinearVelocityModel& model, std::span<const FlowSample> batch) {
  check_batch(model, batch);
  ModelGradient g{MatX::Zero(model.W.rows(), model.W.cols()), VecX::Zero(model.b.size())};
  for (const auto& s : batch) {
    const VecX in = model_input(s);
    const VecX residual = model.W * in + model.b - target_velocity(s);
    g.dW.noalias() += residual * in.transpose();
    g.db += residual;
  }
  const double scale = 2.0 / static_cast<double>(batch.size());
  g.dW *= scale;
  g.db *= scale;
  return g;
}

FitResult fit(const LinearVelocityModel& initial, std::span<const FlowSample> batch, int steps, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw FlowError("learning rate must be a finite value >= 0");
  if (steps < 0) throw FlowError("steps must be >= 0");
  FitResult out{initial, {}};
  out.loss_curve.reserve(static_cast<std::size_t>(steps) + 1);
  for (int step = 0; step <= steps; ++step) {
    const double loss = fm_loss(out.model, batch);
    if (!std::isfinite(loss) || loss > 1e12) {
      throw FlowError("training diverged at step " + std::to_string(step) + " (loss " + std::to_string(loss) + ")");
    }
    out.loss_curve.push_back(loss);
    if (step == steps || lr == 0.0) {
      if (lr == 0.0) out.loss_curve.resize(static_cast<std::size_t>(steps) + 1, loss);
      break;
    }
    const auto g = fm_loss_gradient(out.model, batch);
    out.model.W -= lr * g.dW;
    out.model.b -= lr * g.db;
  }
  return out;
}

LinearVelocityModel random_model(const FlowDims& dims, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  auto m = LinearVelocityModel::zeros(dims);
  for (Eigen::Index i = 0; i < m.W.size(); ++i) m.W.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < m.b.size(); ++i) m.b[i] = normal(rng);
  return m;
}

std::vector<FlowSample> planted_dataset(const LinearVelocityModel& truth, const FlowDims& dims, int count,
                                        std::mt19937_64& rng) {
  if (truth.W.rows() != dims.data || truth.W.cols() != dims.input()) throw FlowError("planted model shape mismatch");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const MatX Wx = truth.W.leftCols(dims.data);
  const VecX wt = truth.W.col(dims.data);
  const MatX Wrest = truth.W.rightCols(dims.text + dims.cond);
  const MatX I = MatX::Identity(dims.data, dims.data);
  std::vector<FlowSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    FlowSample s;
    s.x1 = gaussian(dims.data, rng);
    s.t = uniform(rng);
    s.c_text = gaussian(dims.text, rng);
    s.c_cond = gaussian(dims.cond, rng);
    VecX c(dims.text + dims.cond);
    c << s.c_text, s.c_cond;
    const VecX r = wt * s.t + Wrest * c + truth.b;
    // Wx((1 - t) x0 + t x1) + r = x1 - x0  =>  ((1 - t) Wx + I) x0 = x1 - t Wx x1 - r
    const MatX A = (1.0 - s.t) * Wx + I;
    s.x0 = A.partialPivLu().solve(s.x1 - s.t * Wx * s.x1 - r);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<FlowSample> random_batch(const FlowDims& dims, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<FlowSample> out;
  for (int i = 0; i < count; ++i) {
    FlowSample s;
    s.x0 = gaussian(dims.data, rng);
    s.x1 = gaussian(dims.data, rng);
    s.t = uniform(rng);
    s.c_text = gaussian(dims.text, rng);
    s.c_cond = gaussian(dims.cond, rng);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace condforge
