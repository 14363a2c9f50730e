#include <catch2/catch_amalgamated.hpp>

#include "fd_check.hpp"
#include "rcac/sac.hpp"

using namespace rcac;

namespace {

struct TinySetup {
  Encoder<double> enc;
  Agent<double> agent;
  Tensor<double> obs, next_obs, actions;
  std::vector<double> rewards;
  std::vector<uint8_t> dones;
};

TinySetup tiny_setup(uint64_t seed, int batch = 3, bool through_enc = false) {
  TinySetup s;
  Rng rng(seed);
  s.enc = build_encoder<double>(2, 16, 5, rng, /*conv_channels=*/3);
  SacHyper<double> hyper;
  hyper.hidden_dim = 8;
  hyper.actor_grads_encoder = through_enc;
  s.agent = Agent<double>::build(5, 2, hyper, rng);
  s.obs = Tensor<double>({batch, 2, 16, 16});
  s.next_obs = Tensor<double>({batch, 2, 16, 16});
  for (double& v : s.obs.data) v = rng.uniform(0, 1);
  for (double& v : s.next_obs.data) v = rng.uniform(0, 1);
  s.actions = Tensor<double>({batch, 2});
  for (double& v : s.actions.data) v = rng.uniform(-1, 1);
  s.rewards.resize(batch);
  for (auto& r : s.rewards) r = rng.uniform(-1, 1);
  s.dones.assign(batch, 0);
  return s;
}

double params_delta(const ParameterSet<double>& a, const ParameterSet<double>& b) {
  double d = 0;
  auto it = a.begin();
  auto jt = b.begin();
  for (; it != a.end(); ++it, ++jt)
    for (int64_t i = 0; i < it->second.value.numel(); ++i)
      d += std::abs(it->second.value.data[i] - jt->second.value.data[i]);
  return d;
}

}  // namespace

TEST_CASE("stochastic actions collapse to tanh(mu) as sigma -> 0") {
  auto s = tiny_setup(1);
  // force the log-std head far below the clamp floor
  auto& W = s.agent.actor_params.value("actor.l4.W");
  auto& b = s.agent.actor_params.value("actor.l4.b");
  for (int row = 2; row < 4; ++row) {
    for (int c = 0; c < 8; ++c) W.data[row * 8 + c] = 0;
    b.data[row] = -40;  // clamped to log_std_min = -10
  }
  Tensor<double> z = s.enc.encode(s.obs);
  Rng rng(2);
  auto ps = sample_policy(s.agent, z, rng, false);
  auto det = sample_policy(s.agent, z, rng, false, /*deterministic=*/true);
  for (int64_t i = 0; i < ps.actions.numel(); ++i) {
    CHECK(ps.log_std.data[i] == -10.0);
    CHECK(std::abs(ps.actions.data[i] - det.actions.data[i]) < 1e-3);
  }
}

TEST_CASE("log-prob matches an independent change-of-variables computation") {
  auto s = tiny_setup(3);
  Tensor<double> z = s.enc.encode(s.obs);
  Rng rng(4);
  auto ps = sample_policy(s.agent, z, rng, false);
  constexpr double kLog2Pi = 1.8378770664093453;
  for (int i = 0; i < 3; ++i) {
    double lp = 0;
    for (int j = 0; j < 2; ++j) {
      const int64_t k = i * 2 + j;
      const double sigma = std::exp(ps.log_std.data[k]);
      const double u = (ps.pre_tanh.data[k] - ps.mu.data[k]) / sigma;
      lp += -0.5 * u * u - std::log(sigma) - 0.5 * kLog2Pi;
      const double a = std::tanh(ps.pre_tanh.data[k]);
      lp -= std::log(1.0 - a * a + 1e-6);
    }
    CHECK(std::abs(lp - ps.log_prob[i]) < 1e-5);
  }
}

TEST_CASE("sampled actions stay inside (-1,1)") {
  auto s = tiny_setup(5, 1);
  Tensor<double> z = s.enc.encode(s.obs);
  Rng rng(6);
  for (int rep = 0; rep < 1000; ++rep) {
    auto ps = sample_policy(s.agent, z, rng, false);
    for (double a : ps.actions.data) {
      CHECK(a > -1.0);
      CHECK(a < 1.0);
    }
  }
}

TEST_CASE("critic target follows the soft Bellman backup") {
  auto s = tiny_setup(7);
  // constant critics: zero weights, biases 2 and 5 -> min is 2
  for (const char* net : {"critic1", "critic2"}) {
    for (int l : {0, 2, 4}) {
      std::string base = std::string(net) + ".l" + std::to_string(l) + ".";
      s.agent.target_params.value(base + "W").fill(0);
      s.agent.target_params.value(base + "b").fill(0);
    }
  }
  s.agent.target_params.value("critic1.l4.b").data[0] = 2.0;
  s.agent.target_params.value("critic2.l4.b").data[0] = 5.0;

  Tensor<double> next_z = s.enc.encode(s.next_obs);
  std::vector<double> rewards = {1.0, 1.0, 1.0};

  SECTION("done=1 gives y = reward exactly") {
    std::vector<uint8_t> dones = {1, 1, 1};
    Rng rng(8);
    auto y = critic_target(s.agent, next_z, rewards, dones, rng);
    for (double v : y) CHECK(v == 1.0);
  }
  SECTION("gamma=0 gives y = reward") {
    s.agent.hyper.gamma = 0;
    std::vector<uint8_t> dones = {0, 0, 0};
    Rng rng(9);
    auto y = critic_target(s.agent, next_z, rewards, dones, rng);
    for (double v : y) CHECK(v == 1.0);
  }
  SECTION("general case matches the scalar formula with replayed log-probs") {
    std::vector<uint8_t> dones = {0, 0, 0};
    Rng rng_target(10), rng_replay(10);
    auto y = critic_target(s.agent, next_z, rewards, dones, rng_target);
    auto ps = sample_policy(s.agent, next_z, rng_replay, false);
    const double alpha = s.agent.alpha();
    for (int i = 0; i < 3; ++i)
      CHECK(y[i] == Catch::Approx(1.0 + 0.99 * (2.0 - alpha * ps.log_prob[i])));
    // the frozen substitution from the scalar oracle: logpi = -1, alpha = 0.1
    CHECK(1.0 + 0.99 * (2.0 - 0.1 * (-1.0)) == Catch::Approx(3.079));
  }
}

TEST_CASE("critic loss is zero when Q equals the target") {
  std::vector<double> q = {1.0, -2.0, 0.5};
  CHECK(critic_loss_value(q, q, q) == 0.0);
}

TEST_CASE("critic gradient matches finite differences through the encoder") {
  auto s = tiny_setup(11);
  Tensor<double> next_z = s.enc.encode(s.next_obs);
  Rng rng(12);
  std::vector<double> y = critic_target(s.agent, next_z, s.rewards, s.dones, rng);

  s.agent.critic_params.zero_grads();
  s.enc.params.zero_grads();
  critic_loss_backward(s.agent, s.enc, s.obs, s.actions, y);

  auto loss = [&] {
    Tensor<double> z = s.enc.encode(s.obs);
    Tensor<double> x = detail::hcat(z, s.actions);
    auto q1 = critic_forward(s.agent.critic1, s.agent.critic_params, x);
    auto q2 = critic_forward(s.agent.critic2, s.agent.critic_params, x);
    return critic_loss_value(q1, q2, y);
  };
  CHECK(fd::max_rel_error(s.agent.critic_params, loss) < 1e-4);
  CHECK(fd::max_rel_error(s.enc.params, loss) < 1e-4);
}

TEST_CASE("actor gradient matches finite differences") {
  auto s = tiny_setup(13);
  const uint64_t noise_seed = 14;

  s.agent.actor_params.zero_grads();
  s.agent.alpha_params.zero_grads();
  {
    Rng rng(noise_seed);
    actor_loss_backward(s.agent, s.enc, s.obs, rng);
  }
  auto loss = [&] {
    Rng rng(noise_seed);  // identical noise draw on every evaluation
    Tensor<double> z = s.enc.encode(s.obs);
    auto ps = sample_policy(s.agent, z, rng, false);
    Tensor<double> x = detail::hcat(z, ps.actions);
    auto q1 = critic_forward(s.agent.critic1, s.agent.critic_params, x);
    auto q2 = critic_forward(s.agent.critic2, s.agent.critic_params, x);
    double l = 0;
    for (int i = 0; i < 3; ++i)
      l += s.agent.alpha() * ps.log_prob[i] - std::min(q1[i], q2[i]);
    return l / 3.0;
  };
  CHECK(fd::max_rel_error(s.agent.actor_params, loss) < 1e-4);
}

TEST_CASE("temperature gradient matches finite differences") {
  auto s = tiny_setup(15);
  const uint64_t noise_seed = 16;
  s.agent.actor_params.zero_grads();
  s.agent.alpha_params.zero_grads();
  {
    Rng rng(noise_seed);
    actor_loss_backward(s.agent, s.enc, s.obs, rng);
  }
  auto loss = [&] {
    Rng rng(noise_seed);
    Tensor<double> z = s.enc.encode(s.obs);
    auto ps = sample_policy(s.agent, z, rng, false);
    double mean_lp = 0;
    for (double lp : ps.log_prob) mean_lp += lp;
    mean_lp /= 3.0;
    return -s.agent.alpha() * (mean_lp + s.agent.target_entropy);
  };
  CHECK(fd::max_rel_error(s.agent.alpha_params, loss) < 1e-4);
}

TEST_CASE("temperature gradient is zero at the target entropy") {
  // if mean log pi == -target_entropy... the stationarity point is
  // mean(log pi) = -H_target, where the alpha loss derivative vanishes
  const double alpha = 0.37;
  const double target_entropy = -2.0;
  const double mean_lp = -target_entropy;
  CHECK(-alpha * (mean_lp + target_entropy) == 0.0);
}

TEST_CASE("target entropy is minus the action dimension") {
  auto s = tiny_setup(17);
  CHECK(s.agent.target_entropy == -2.0);
}

TEST_CASE("critic updates move the encoder, actor updates do not") {
  auto s = tiny_setup(19);
  ParameterSet<double> phi_before = s.enc.params;
  Rng rng(20);
  update_critic(s.agent, s.enc, s.obs, s.actions, s.rewards, s.dones, s.next_obs, rng);
  CHECK(params_delta(s.enc.params, phi_before) > 0);

  ParameterSet<double> phi_after_critic = s.enc.params;
  ParameterSet<double> critic_before = s.agent.critic_params;
  update_actor_and_temperature(s.agent, s.enc, s.obs, rng);
  CHECK(params_delta(s.enc.params, phi_after_critic) == 0.0);
  // actor update also leaves critic parameters untouched
  CHECK(params_delta(s.agent.critic_params, critic_before) == 0.0);
}

TEST_CASE("ablation flag routes actor gradients into the encoder") {
  auto s = tiny_setup(21, 3, /*through_enc=*/true);
  ParameterSet<double> phi_before = s.enc.params;
  Rng rng(22);
  update_actor_and_temperature(s.agent, s.enc, s.obs, rng);
  CHECK(params_delta(s.enc.params, phi_before) > 0);
}

TEST_CASE("q values overfit a single terminal transition") {
  auto s = tiny_setup(23, 1);
  s.rewards = {0.7};
  s.dones = {1};
  Rng rng(24);
  for (int i = 0; i < 200; ++i)
    update_critic(s.agent, s.enc, s.obs, s.actions, s.rewards, s.dones, s.next_obs, rng);
  Tensor<double> z = s.enc.encode(s.obs);
  Tensor<double> x = detail::hcat(z, s.actions);
  auto q1 = critic_forward(s.agent.critic1, s.agent.critic_params, x);
  auto q2 = critic_forward(s.agent.critic2, s.agent.critic_params, x);
  CHECK(std::abs(q1[0] - 0.7) < 0.05);
  CHECK(std::abs(q2[0] - 0.7) < 0.05);
}

TEST_CASE("targets start equal to online critics and follow soft updates") {
  auto s = tiny_setup(25);
  CHECK(params_delta(s.agent.target_params, s.agent.critic_params) == 0.0);
  update_targets(s.agent);  // fixed point when equal
  CHECK(params_delta(s.agent.target_params, s.agent.critic_params) == 0.0);

  Rng rng(26);
  update_critic(s.agent, s.enc, s.obs, s.actions, s.rewards, s.dones, s.next_obs, rng);
  // after one online step, a tau=0.01 update moves 1% of the gap
  const double w_online = s.agent.critic_params.value("critic1.l0.W").data[0];
  const double w_target = s.agent.target_params.value("critic1.l0.W").data[0];
  update_targets(s.agent);
  const double w_after = s.agent.target_params.value("critic1.l0.W").data[0];
  CHECK(w_after == Catch::Approx(w_target + 0.01 * (w_online - w_target)));
}

TEST_CASE("alpha stays positive through update sequences") {
  auto s = tiny_setup(27);
  Rng rng(28);
  for (int i = 0; i < 20; ++i) {
    update_actor_and_temperature(s.agent, s.enc, s.obs, rng);
    CHECK(s.agent.alpha() > 0.0);
  }
}

TEST_CASE("optimizers keep independent state") {
  auto s = tiny_setup(29);
  Rng rng(30);
  update_critic(s.agent, s.enc, s.obs, s.actions, s.rewards, s.dones, s.next_obs, rng);
  // critic step must not advance actor or alpha optimizer state
  for (const auto& [name, p] : s.agent.actor_params) CHECK(p.step == 0);
  CHECK(s.agent.alpha_params.at("log_alpha").step == 0);
  for (const auto& [name, p] : s.agent.critic_params) CHECK(p.step == 1);
  update_actor_and_temperature(s.agent, s.enc, s.obs, rng);
  for (const auto& [name, p] : s.agent.actor_params) CHECK(p.step == 1);
  CHECK(s.agent.alpha_params.at("log_alpha").step == 1);
  for (const auto& [name, p] : s.agent.critic_params) CHECK(p.step == 1);
}
