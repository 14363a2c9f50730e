#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcac/layers.hpp"
#include "rcac/srl.hpp"

namespace rcac {

template <class T>
struct SacHyper {
  T gamma = T(0.99);
  T tau = T(0.01);
  T actor_lr = T(1e-3);
  T critic_lr = T(1e-3);
  T alpha_lr = T(1e-4);
  T init_temperature = T(0.1);
  T log_std_min = T(-10), log_std_max = T(2);
  int hidden_dim = 1024;
  int actor_update_freq = 2;
  int target_update_freq = 2;
  bool actor_grads_encoder = false;  // ablation: route actor gradients into phi
};

// One actor-critic bundle: squashed-Gaussian actor, twin Q networks with
// target copies, and a learned temperature. Instantiated twice (task agent
// and curious agent); the encoder lives outside and is shared.
template <class T>
struct Agent {
  int latent_dim = 0, action_dim = 0;
  Net<T> actor;
  Net<T> critic1, critic2;
  ParameterSet<T> actor_params;
  ParameterSet<T> critic_params;  // both critics
  ParameterSet<T> target_params;  // target copies, same entry names
  ParameterSet<T> alpha_params;   // single scalar: log_alpha
  SacHyper<T> hyper;
  T target_entropy = 0;

  static Agent build(int latent_dim, int action_dim, SacHyper<T> hyper, Rng& rng) {
    Agent a;
    a.latent_dim = latent_dim;
    a.action_dim = action_dim;
    a.hyper = hyper;
    a.target_entropy = -T(action_dim);
    const int h = hyper.hidden_dim;
    a.actor = Net<T>("actor", {LayerSpec::dense(latent_dim, h), LayerSpec::relu(),
                               LayerSpec::dense(h, h), LayerSpec::relu(),
                               LayerSpec::dense(h, 2 * action_dim)});
    auto critic_layers = [&](const std::string& prefix) {
      return Net<T>(prefix, {LayerSpec::dense(latent_dim + action_dim, h), LayerSpec::relu(),
                             LayerSpec::dense(h, h), LayerSpec::relu(),
                             LayerSpec::dense(h, 1)});
    };
    a.critic1 = critic_layers("critic1");
    a.critic2 = critic_layers("critic2");
    a.actor.init_params(a.actor_params, rng);
    a.critic1.init_params(a.critic_params, rng);
    a.critic2.init_params(a.critic_params, rng);
    a.critic1.init_params(a.target_params, rng);
    a.critic2.init_params(a.target_params, rng);
    copy_values(a.target_params, a.critic_params);  // targets start equal
    a.alpha_params.create("log_alpha", {1}).data[0] = std::log(hyper.init_temperature);
    return a;
  }

  T alpha() const { return std::exp(alpha_params.value("log_alpha").data[0]); }
};

namespace detail {

template <class T>
inline Tensor<T> hcat(const Tensor<T>& a, const Tensor<T>& b) {
  const int n = a.dim(0), p = a.dim(1), q = b.dim(1);
  Tensor<T> out({n, p + q});
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.ptr() + int64_t(i) * p, p, out.ptr() + int64_t(i) * (p + q));
    std::copy_n(b.ptr() + int64_t(i) * q, q, out.ptr() + int64_t(i) * (p + q) + p);
  }
  return out;
}

template <class T>
inline Tensor<T> col_slice(const Tensor<T>& x, int beg, int end) {
  const int n = x.dim(0), w = x.dim(1);
  Tensor<T> out({n, end - beg});
  for (int i = 0; i < n; ++i)
    std::copy_n(x.ptr() + int64_t(i) * w + beg, end - beg, out.ptr() + int64_t(i) * (end - beg));
  return out;
}

constexpr double kLogProbEps = 1e-6;  // inside log(1 - a^2 + eps)

}  // namespace detail

// One draw from the policy at latent z, with everything the update path
// needs to backpropagate through the reparameterized sample.
template <class T>
struct PolicySample {
  Tensor<T> mu, log_std_raw, log_std;  // (N, A); log_std clamped
  Tensor<T> noise, pre_tanh, actions;  // (N, A)
  std::vector<T> log_prob;             // (N)
  Tape<T> tape;                        // actor tape (when requested)
};

// Stochastic: a = tanh(mu + sigma * n) with the tanh change-of-variables
// log-density. Deterministic: a = tanh(mu), used for evaluation.
template <class T>
PolicySample<T> sample_policy(const Agent<T>& agent, const Tensor<T>& z, Rng& rng,
                              bool with_tape, bool deterministic = false) {
  const int n = z.dim(0), A = agent.action_dim;
  PolicySample<T> s;
  Tensor<T> raw = agent.actor.forward(agent.actor_params, z, with_tape ? &s.tape : nullptr);
  s.mu = detail::col_slice(raw, 0, A);
  s.log_std_raw = detail::col_slice(raw, A, 2 * A);
  s.log_std = s.log_std_raw;
  for (T& v : s.log_std.data) v = std::clamp(v, agent.hyper.log_std_min, agent.hyper.log_std_max);
  s.noise = Tensor<T>({n, A});
  if (!deterministic)
    for (T& v : s.noise.data) v = T(rng.normal());
  s.pre_tanh = Tensor<T>({n, A});
  s.actions = Tensor<T>({n, A});
  s.log_prob.assign(n, T(0));
  constexpr double kLog2Pi = 1.8378770664093453;
  for (int i = 0; i < n; ++i) {
    T lp = 0;
    for (int j = 0; j < A; ++j) {
      const int64_t k = int64_t(i) * A + j;
      const T ls = s.log_std.data[k];
      const T pre = s.mu.data[k] + std::exp(ls) * s.noise.data[k];
      const T a = std::tanh(pre);
      s.pre_tanh.data[k] = pre;
      s.actions.data[k] = a;
      lp += T(-0.5) * T(kLog2Pi) - ls - T(0.5) * s.noise.data[k] * s.noise.data[k];
      lp -= std::log(T(1) - a * a + T(detail::kLogProbEps));
    }
    s.log_prob[i] = lp;
    if (!std::isfinite(lp)) throw NumericError("non-finite policy log-prob");
  }
  return s;
}

template <class T>
std::vector<T> critic_forward(const Net<T>& critic, const ParameterSet<T>& params,
                              const Tensor<T>& x, Tape<T>* tape = nullptr) {
  Tensor<T> q = critic.forward(params, x, tape);
  return std::vector<T>(q.data.begin(), q.data.end());
}

// y = r + gamma * (1 - done) * (min(Q'1, Q'2)(z', a') - alpha * log pi(a'|z'))
// with a' freshly sampled from the agent's actor. No gradients flow here.
template <class T>
std::vector<T> critic_target(const Agent<T>& agent, const Tensor<T>& next_z,
                             const std::vector<T>& rewards, const std::vector<uint8_t>& dones,
                             Rng& rng) {
  const int n = next_z.dim(0);
  PolicySample<T> ps = sample_policy(agent, next_z, rng, /*with_tape=*/false);
  Tensor<T> x = detail::hcat(next_z, ps.actions);
  std::vector<T> q1 = critic_forward(agent.critic1, agent.target_params, x);
  std::vector<T> q2 = critic_forward(agent.critic2, agent.target_params, x);
  const T alpha = agent.alpha();
  std::vector<T> y(n);
  for (int i = 0; i < n; ++i) {
    const T soft_q = std::min(q1[i], q2[i]) - alpha * ps.log_prob[i];
    y[i] = rewards[i] + agent.hyper.gamma * (T(1) - T(dones[i])) * soft_q;
    if (!std::isfinite(y[i])) throw NumericError("non-finite critic target");
  }
  return y;
}

// Mean over the batch and over both critics of (Q - y)^2, fixed targets.
template <class T>
T critic_loss_value(const std::vector<T>& q1, const std::vector<T>& q2,
                    const std::vector<T>& y) {
  T loss = 0;
  for (size_t i = 0; i < y.size(); ++i)
    loss += (q1[i] - y[i]) * (q1[i] - y[i]) + (q2[i] - y[i]) * (q2[i] - y[i]);
  return loss / T(2 * y.size());
}

// Fills critic and encoder gradients for the Bellman loss against fixed
// targets y. Callers zero gradients first and apply the optimizer step.
template <class T>
T critic_loss_backward(Agent<T>& agent, Encoder<T>& enc, const Tensor<T>& obs,
                       const Tensor<T>& actions, const std::vector<T>& y) {
  const int n = obs.dim(0);
  Tape<T> enc_tape, t1, t2;
  Tensor<T> z = enc.encode(obs, &enc_tape);
  Tensor<T> x = detail::hcat(z, actions);
  std::vector<T> q1 = critic_forward(agent.critic1, agent.critic_params, x, &t1);
  std::vector<T> q2 = critic_forward(agent.critic2, agent.critic_params, x, &t2);
  const T loss = critic_loss_value(q1, q2, y);

  Tensor<T> dq1({n, 1}), dq2({n, 1});
  for (int i = 0; i < n; ++i) {
    dq1.data[i] = (q1[i] - y[i]) / T(n);
    dq2.data[i] = (q2[i] - y[i]) / T(n);
  }
  Tensor<T> dx1 = agent.critic1.backward(agent.critic_params, t1, dq1);
  Tensor<T> dx2 = agent.critic2.backward(agent.critic_params, t2, dq2);
  const int L = agent.latent_dim;
  Tensor<T> dz({n, L});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < L; ++j)
      dz.data[int64_t(i) * L + j] = dx1.data[int64_t(i) * (L + agent.action_dim) + j] +
                                    dx2.data[int64_t(i) * (L + agent.action_dim) + j];
  enc.net.backward(enc.params, enc_tape, dz);
  return loss;
}

// One Adam step on both critics and the shared encoder. This is one of the
// two paths (task and curious) through which policy learning shapes phi.
template <class T>
T update_critic(Agent<T>& agent, Encoder<T>& enc, const Tensor<T>& obs,
                const Tensor<T>& actions, const std::vector<T>& rewards,
                const std::vector<uint8_t>& dones, const Tensor<T>& next_obs, Rng& rng) {
  Tensor<T> next_z = enc.encode(next_obs);
  std::vector<T> y = critic_target(agent, next_z, rewards, dones, rng);
  agent.critic_params.zero_grads();
  enc.params.zero_grads();
  const T loss = critic_loss_backward(agent, enc, obs, actions, y);
  agent.critic_params.adam_step(agent.hyper.critic_lr);
  enc.params.adam_step(agent.hyper.critic_lr);
  return loss;
}

template <class T>
struct ActorUpdate {
  T actor_loss = 0;
  T alpha_loss = 0;
};

// Actor loss mean(alpha * log pi - min(Q1,Q2)) on a fresh reparameterized
// sample; fills actor (and optionally encoder) gradients plus the
// log-temperature gradient. Callers zero and step.
template <class T>
ActorUpdate<T> actor_loss_backward(Agent<T>& agent, Encoder<T>& enc, const Tensor<T>& obs,
                                   Rng& rng) {
  const int n = obs.dim(0);
  const int L = agent.latent_dim, A = agent.action_dim;
  const bool through_enc = agent.hyper.actor_grads_encoder;

  Tape<T> enc_tape;
  Tensor<T> z = enc.encode(obs, through_enc ? &enc_tape : nullptr);
  PolicySample<T> ps = sample_policy(agent, z, rng, /*with_tape=*/true);
  Tensor<T> x = detail::hcat(z, ps.actions);
  Tape<T> t1, t2;
  std::vector<T> q1 = critic_forward(agent.critic1, agent.critic_params, x, &t1);
  std::vector<T> q2 = critic_forward(agent.critic2, agent.critic_params, x, &t2);

  const T alpha = agent.alpha();
  ActorUpdate<T> res;
  for (int i = 0; i < n; ++i)
    res.actor_loss += alpha * ps.log_prob[i] - std::min(q1[i], q2[i]);
  res.actor_loss /= T(n);

  // d loss / d Q_k: -1/n on the minimum critic only (ties go to critic 1)
  Tensor<T> dq1({n, 1}), dq2({n, 1});
  for (int i = 0; i < n; ++i) {
    if (q1[i] <= q2[i])
      dq1.data[i] = T(-1) / T(n);
    else
      dq2.data[i] = T(-1) / T(n);
  }
  // critic parameters are spectators here: input gradients only
  Tensor<T> dx1 = agent.critic1.backward(agent.critic_params, t1, dq1, /*accumulate=*/false);
  Tensor<T> dx2 = agent.critic2.backward(agent.critic_params, t2, dq2, /*accumulate=*/false);

  Tensor<T> dout({n, 2 * A});
  const T c = alpha / T(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < A; ++j) {
      const int64_t k = int64_t(i) * A + j;
      const T a = ps.actions.data[k];
      const T da_q = dx1.data[int64_t(i) * (L + A) + L + j] +
                     dx2.data[int64_t(i) * (L + A) + L + j];
      const T one_m_a2 = T(1) - a * a;
      T dpre = da_q * one_m_a2;                                      // Q path
      dpre += c * T(2) * a * one_m_a2 / (one_m_a2 + T(detail::kLogProbEps));  // log pi path
      const T sigma_n = std::exp(ps.log_std.data[k]) * ps.noise.data[k];
      T dls = dpre * sigma_n - c;
      const T raw = ps.log_std_raw.data[k];
      if (raw <= agent.hyper.log_std_min || raw >= agent.hyper.log_std_max) dls = T(0);
      dout.data[int64_t(i) * 2 * A + j] = dpre;
      dout.data[int64_t(i) * 2 * A + A + j] = dls;
    }
  Tensor<T> dz_actor = agent.actor.backward(agent.actor_params, ps.tape, dout);

  if (through_enc) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < L; ++j)
        dz_actor.data[int64_t(i) * L + j] += dx1.data[int64_t(i) * (L + A) + j] +
                                             dx2.data[int64_t(i) * (L + A) + j];
    enc.net.backward(enc.params, enc_tape, dz_actor);
  }

  // temperature: d loss / d log_alpha = -alpha * mean(log pi + target entropy)
  T mean_lp = 0;
  for (int i = 0; i < n; ++i) mean_lp += ps.log_prob[i];
  mean_lp /= T(n);
  res.alpha_loss = -alpha * (mean_lp + agent.target_entropy);
  agent.alpha_params.grad("log_alpha").data[0] += -alpha * (mean_lp + agent.target_entropy);
  return res;
}

// Called every actor_update_freq steps: one Adam step on the actor, one on
// the temperature. The encoder is only touched in the ablation mode.
template <class T>
ActorUpdate<T> update_actor_and_temperature(Agent<T>& agent, Encoder<T>& enc,
                                            const Tensor<T>& obs, Rng& rng) {
  agent.actor_params.zero_grads();
  agent.alpha_params.zero_grads();
  if (agent.hyper.actor_grads_encoder) enc.params.zero_grads();
  ActorUpdate<T> res = actor_loss_backward(agent, enc, obs, rng);
  agent.actor_params.adam_step(agent.hyper.actor_lr);
  if (agent.hyper.actor_grads_encoder) enc.params.adam_step(agent.hyper.actor_lr);
  agent.alpha_params.adam_step(agent.hyper.alpha_lr);
  return res;
}

template <class T>
void update_targets(Agent<T>& agent) {
  soft_update(agent.target_params, agent.critic_params, agent.hyper.tau);
}

}  // namespace rcac
