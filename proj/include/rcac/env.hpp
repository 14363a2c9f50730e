#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "rcac/image.hpp"
#include "rcac/rng.hpp"
#include "rcac/tensor.hpp"

namespace rcac {

// Stack of the K most recent rendered frames, oldest first. After a reset
// every slot holds the initial frame.
struct PixelObservation {
  int frames = 0, channels = 0, height = 0, width = 0;
  std::vector<uint8_t> pixels;  // (K, C, H, W) row-major

  size_t frame_bytes() const { return size_t(channels) * height * width; }
};

struct StepResult {
  PixelObservation observation;
  double reward = 0;      // task reward, summed over the action repeat
  bool done = false;      // true termination (used for bootstrapping)
  bool truncated = false; // time limit hit
};

struct EnvOptions {
  int obs_size = 48;      // 84 is the full-scale setting
  int frame_stack = 3;
  int action_repeat = 0;  // 0 = per-env default
};

// Pixel-observation continuous-control environment. Dynamics run in double
// precision; observations are rendered deterministically (no anti-aliasing)
// so (seed, action sequence) -> identical bytes.
class Env {
 public:
  explicit Env(EnvOptions opt) : opt_(opt) {}
  virtual ~Env() = default;

  virtual std::string id() const = 0;
  virtual int action_dim() const = 0;
  virtual int state_dim() const = 0;
  virtual std::vector<double> state() const = 0;  // ground truth, diagnostics only
  virtual int default_action_repeat() const = 0;

  int action_repeat() const {
    return opt_.action_repeat > 0 ? opt_.action_repeat : default_action_repeat();
  }
  int obs_size() const { return opt_.obs_size; }
  int frame_stack() const { return opt_.frame_stack; }
  int channels() const { return 3; }

  // 1000 simulator steps per episode, divided by the action repeat.
  int episode_length() const { return 1000 / action_repeat(); }

  PixelObservation reset(uint64_t seed) {
    Rng rng(derive_seed(seed, uint64_t(Stream::EnvReset)));
    reset_state(rng);
    steps_taken_ = 0;
    finished_ = false;
    Image f = render();
    obs_.frames = frame_stack();
    obs_.channels = f.channels;
    obs_.height = f.height;
    obs_.width = f.width;
    obs_.pixels.assign(obs_.frame_bytes() * frame_stack(), 0);
    for (int k = 0; k < frame_stack(); ++k)
      std::copy(f.pixels.begin(), f.pixels.end(),
                obs_.pixels.begin() + ptrdiff_t(k * obs_.frame_bytes()));
    return obs_;
  }

  StepResult step(const std::vector<double>& action) {
    if (obs_.pixels.empty()) throw UsageError(id() + ": step before reset");
    if (finished_) throw UsageError(id() + ": step after episode end without reset");
    if (int(action.size()) != action_dim())
      throw ConfigError(id() + ": expected " + std::to_string(action_dim()) +
                        "-dim action, got " + std::to_string(action.size()));
    std::vector<double> a(action);
    for (double& x : a) x = std::clamp(x, -1.0, 1.0);

    StepResult r;
    for (int rep = 0; rep < action_repeat(); ++rep) {
      r.reward += step_state(a);
      ++steps_taken_;
    }
    push_frame(render());
    r.observation = obs_;
    r.done = false;  // neither built-in task terminates early
    r.truncated = steps_taken_ >= 1000;
    finished_ = r.done || r.truncated;
    return r;
  }

  Image render() const { return render_state(); }

 protected:
  virtual void reset_state(Rng& rng) = 0;
  // One simulator substep; returns the per-substep task reward.
  virtual double step_state(const std::vector<double>& action) = 0;
  virtual Image render_state() const = 0;

  EnvOptions opt_;

 private:
  void push_frame(const Image& f) {
    const size_t fb = obs_.frame_bytes();
    std::copy(obs_.pixels.begin() + ptrdiff_t(fb), obs_.pixels.end(), obs_.pixels.begin());
    std::copy(f.pixels.begin(), f.pixels.end(), obs_.pixels.end() - ptrdiff_t(fb));
  }

  PixelObservation obs_;
  int steps_taken_ = 0;
  bool finished_ = false;
};

namespace draw {

// Distance-threshold rasterization: exact, anti-aliasing off.
inline void disc(Image& img, double cx, double cy, double radius, uint8_t r, uint8_t g,
                 uint8_t b) {
  // world coords in [-1,1]^2, y up
  const int s = img.width;
  auto to_px = [&](double w) { return (w + 1.0) * 0.5 * s - 0.5; };
  const double pcx = to_px(cx), pcy = to_px(-cy), pr = radius * 0.5 * s;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - pcx, dy = y - pcy;
      if (dx * dx + dy * dy <= pr * pr) {
        img.at(0, y, x) = r;
        img.at(1, y, x) = g;
        img.at(2, y, x) = b;
      }
    }
}

inline void segment(Image& img, double x0, double y0, double x1, double y1, double thickness,
                    uint8_t r, uint8_t g, uint8_t b) {
  const int s = img.width;
  auto to_px = [&](double w) { return (w + 1.0) * 0.5 * s - 0.5; };
  const double px0 = to_px(x0), py0 = to_px(-y0), px1 = to_px(x1), py1 = to_px(-y1);
  const double ht = thickness * 0.5 * s * 0.5;
  const double vx = px1 - px0, vy = py1 - py0;
  const double len2 = vx * vx + vy * vy;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double t = len2 > 0 ? ((x - px0) * vx + (y - py0) * vy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = x - (px0 + t * vx), dy = y - (py0 + t * vy);
      if (dx * dx + dy * dy <= ht * ht) {
        img.at(0, y, x) = r;
        img.at(1, y, x) = g;
        img.at(2, y, x) = b;
      }
    }
}

}  // namespace draw

inline double wrap_angle(double x) {
  // wraps to (-pi, pi]
  double w = std::fmod(x + M_PI, 2.0 * M_PI);
  if (w <= 0) w += 2.0 * M_PI;
  return w - M_PI;
}

// Torque-limited pendulum swing-up. theta = 0 is upright; the dense reward
// penalizes deviation from upright, angular velocity and control effort,
// rescaled from [-16.2736044, 0] to [0, 1] per simulator substep.
//
//   theta_dd = (3g / 2l) sin(theta) + (3 / m l^2) u,  g=10, m=l=1, dt=0.05
//
// integrated with semi-implicit Euler; |theta_dot| clamped to 8.
class PendulumSwingup final : public Env {
 public:
  static constexpr double kGravity = 10.0, kMass = 1.0, kLength = 1.0, kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0, kMaxTorque = 2.0;
  static constexpr double kRewardSpan = 16.27360440108936;  // pi^2 + 0.1*64 + 0.001*4

  explicit PendulumSwingup(EnvOptions opt) : Env(opt) {}

  std::string id() const override { return "pendulum_swingup"; }
  int action_dim() const override { return 1; }
  int state_dim() const override { return 2; }
  int default_action_repeat() const override { return 4; }
  std::vector<double> state() const override { return {theta_, theta_dot_}; }

  void set_state(double theta, double theta_dot) {  // test hook
    theta_ = theta;
    theta_dot_ = theta_dot;
  }

 protected:
  void reset_state(Rng& rng) override {
    theta_ = rng.uniform(-M_PI, M_PI);
    if (theta_ == -M_PI) theta_ = M_PI;
    theta_dot_ = rng.uniform(-1.0, 1.0);
  }

  double step_state(const std::vector<double>& action) override {
    const double u = action[0] * kMaxTorque;
    const double th = wrap_angle(theta_);
    const double raw = -(th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u);
    const double acc = (3.0 * kGravity / (2.0 * kLength)) * std::sin(theta_) +
                       (3.0 / (kMass * kLength * kLength)) * u;
    theta_dot_ = std::clamp(theta_dot_ + kDt * acc, -kMaxSpeed, kMaxSpeed);
    theta_ = wrap_angle(theta_ + kDt * theta_dot_);
    return 1.0 + raw / kRewardSpan;
  }

  Image render_state() const override {
    Image img(3, obs_size(), obs_size());
    const double tipx = 0.7 * std::sin(theta_), tipy = 0.7 * std::cos(theta_);
    draw::segment(img, 0.0, 0.0, tipx, tipy, 0.12, 160, 160, 170);
    draw::disc(img, tipx, tipy, 0.17, 230, 60, 40);
    return img;
  }

 private:
  double theta_ = M_PI, theta_dot_ = 0;
};

// Point mass on a 2-D plane with a sparse goal reward: 1 per substep while
// within 0.05 of the goal, 0 otherwise. Acceleration control with linear
// drag; position confined to [-1,1]^2.
class PointReacherSparse final : public Env {
 public:
  static constexpr double kDt = 0.05, kAccelGain = 1.0, kDrag = 1.0;
  static constexpr double kMaxSpeed = 2.0, kGoalRadius = 0.05;

  explicit PointReacherSparse(EnvOptions opt) : Env(opt) {}

  std::string id() const override { return "point_reacher_sparse"; }
  int action_dim() const override { return 2; }
  int state_dim() const override { return 6; }
  int default_action_repeat() const override { return 2; }
  std::vector<double> state() const override {
    return {pos_[0], pos_[1], vel_[0], vel_[1], goal_[0], goal_[1]};
  }

  void set_state(double px, double py, double vx, double vy, double gx, double gy) {
    pos_ = {px, py};
    vel_ = {vx, vy};
    goal_ = {gx, gy};
  }

 protected:
  void reset_state(Rng& rng) override {
    pos_ = {0, 0};
    vel_ = {0, 0};
    // uniform in area over the annulus with radius in [0.5, 0.9]
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double r = std::sqrt(rng.uniform(0.5 * 0.5, 0.9 * 0.9));
    goal_ = {r * std::cos(ang), r * std::sin(ang)};
  }

  double step_state(const std::vector<double>& action) override {
    for (int i = 0; i < 2; ++i) {
      vel_[i] += kDt * (kAccelGain * action[i] - kDrag * vel_[i]);
      vel_[i] = std::clamp(vel_[i], -kMaxSpeed, kMaxSpeed);
      pos_[i] += kDt * vel_[i];
      if (pos_[i] < -1.0) {
        pos_[i] = -1.0;
        vel_[i] = 0;
      } else if (pos_[i] > 1.0) {
        pos_[i] = 1.0;
        vel_[i] = 0;
      }
    }
    const double dx = pos_[0] - goal_[0], dy = pos_[1] - goal_[1];
    return std::sqrt(dx * dx + dy * dy) < kGoalRadius ? 1.0 : 0.0;
  }

  Image render_state() const override {
    Image img(3, obs_size(), obs_size());
    draw::disc(img, goal_[0], goal_[1], 0.12, 40, 220, 60);
    draw::disc(img, pos_[0], pos_[1], 0.09, 230, 60, 40);
    return img;
  }

 private:
  std::array<double, 2> pos_{0, 0}, vel_{0, 0}, goal_{0.7, 0};
};

inline std::unique_ptr<Env> make_env(const std::string& id, EnvOptions opt = {}) {
  if (id == "pendulum_swingup") return std::make_unique<PendulumSwingup>(opt);
  if (id == "point_reacher_sparse") return std::make_unique<PointReacherSparse>(opt);
  throw ConfigError("unknown environment id: " + id +
                    " (known: pendulum_swingup, point_reacher_sparse)");
}

}  // namespace rcac
