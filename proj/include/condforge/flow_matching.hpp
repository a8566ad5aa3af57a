#pragma once

// Conditional flow matching with a linear probability path and an affine
// velocity model. Data sits at t = 0, standard-normal noise at t = 1:
//   x_t = (1 - t) x0 + t x1,   v_t = x1 - x0,
//   L = mean || v_t - v(x_t, t, c_text, c_cond) ||^2.

#include <Eigen/Core>

#include <random>
#include <span>
#include <vector>

namespace condforge {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

struct FlowDims {
  int data = 2;
  int text = 4;
  int cond = 4;

  /// Length of concat(x_t, t, c_text, c_cond).
  int input() const { return data + 1 + text + cond; }
  bool operator==(const FlowDims&) const = default;
};

struct FlowSample {
  VecX x0;
  VecX x1;
  double t = 0.0;
  VecX c_text;
  VecX c_cond;
};

/// v = W concat(x_t, t, c_text, c_cond) + b.
struct LinearVelocityModel {
  MatX W;
  VecX b;

  static LinearVelocityModel zeros(const FlowDims& dims);
  FlowDims dims(int text_dim) const;
  VecX predict(const VecX& x_t, double t, const VecX& c_text, const VecX& c_cond) const;

  /// Columns of W acting on c_cond.
  MatX cond_block(const FlowDims& dims) const { return W.middleCols(dims.data + 1 + dims.text, dims.cond); }
};

/// Throws FlowError on dimension mismatch or t outside [0, 1].
void validate_sample(const FlowSample& s);

VecX interpolate(const FlowSample& s);
VecX target_velocity(const FlowSample& s);

/// concat(x_t, t, c_text, c_cond).
VecX model_input(const FlowSample& s);

/// Throws FlowError for an empty batch or mismatched dimensions.
double fm_loss(const LinearVelocityModel& model, std::span<const FlowSample> batch);

struct ModelGradient {
  MatX dW;
  VecX db;
};

ModelGradient fm_loss_gradient(const LinearVelocityModel& model, std::span<const FlowSample> batch);

struct FitResult {
  LinearVelocityModel model;
  /// Loss before each step, then after the last one (steps + 1 values).
  std::vector<double> loss_curve;
};

/// Full-batch gradient descent. lr must be >= 0 (0 leaves the model as is).
/// Throws FlowError naming the step when the loss exceeds 1e12 or turns
/// non-finite.
FitResult fit(const LinearVelocityModel& initial, std::span<const FlowSample> batch, int steps, double lr);

/// Gaussian weights with the given standard deviation.
LinearVelocityModel random_model(const FlowDims& dims, std::mt19937_64& rng, double scale = 0.3);

/// Samples whose target velocity the planted model reproduces exactly:
/// x1, c_text, c_cond ~ N(0, I), t ~ U[0, 1], and x0 solved from
/// v(x_t, ...) = x1 - x0.
std::vector<FlowSample> planted_dataset(const LinearVelocityModel& truth, const FlowDims& dims, int count,
                                        std::mt19937_64& rng);

/// Random samples with independent Gaussian endpoints.
std::vector<FlowSample> random_batch(const FlowDims& dims, int count, std::mt19937_64& rng);

}  // namespace condforge
