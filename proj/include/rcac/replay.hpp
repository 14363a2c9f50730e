#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <vector>

#include "rcac/checkpoint.hpp"
#include "rcac/rng.hpp"
#include "rcac/tensor.hpp"

namespace rcac {

// Unit of replay storage. Observations are kept as the exact uint8 bytes
// received from the environment.
struct Transition {
  std::vector<uint8_t> obs;       // (K*C, H, W) flattened
  std::vector<float> action;
  float reward = 0;               // r_task
  std::vector<uint8_t> next_obs;
  bool done = false;
};

// Columnar minibatch; observations normalized to [0,1] at assembly.
template <class T>
struct Batch {
  Tensor<T> obs;        // (N, K*C, H, W)
  Tensor<T> actions;    // (N, A)
  std::vector<T> rewards;
  Tensor<T> next_obs;
  std::vector<uint8_t> dones;

  int size() const { return obs.dim(0); }
};

// Fixed-capacity FIFO ring with uniform random sampling (with replacement).
// Observation storage grows lazily in chunks so a mostly-empty buffer does
// not pay for its full capacity.
class ReplayBuffer {
 public:
  ReplayBuffer(int64_t capacity, int obs_channels, int obs_h, int obs_w, int action_dim)
      : capacity_(capacity),
        obs_bytes_(size_t(obs_channels) * obs_h * obs_w),
        channels_(obs_channels),
        height_(obs_h),
        width_(obs_w),
        action_dim_(action_dim) {
    if (capacity <= 0) throw ConfigError("replay capacity must be positive");
  }

  int64_t capacity() const { return capacity_; }
  int64_t size() const { return fill_; }
  size_t obs_bytes() const { return obs_bytes_; }

  void push(const Transition& t) {
    if (t.obs.size() != obs_bytes_ || t.next_obs.size() != obs_bytes_)
      throw ConfigError("replay push: observation byte size mismatch");
    if (int(t.action.size()) != action_dim_)
      throw ConfigError("replay push: action dimension mismatch");
    const int64_t idx = write_;
    ensure_chunk(idx);
    std::memcpy(obs_slot(idx), t.obs.data(), obs_bytes_);
    std::memcpy(next_obs_slot(idx), t.next_obs.data(), obs_bytes_);
    if (int64_t(actions_.size()) < (idx + 1) * action_dim_) {
      actions_.resize((idx + 1) * action_dim_);
      rewards_.resize(idx + 1);
      dones_.resize(idx + 1);
    }
    std::memcpy(actions_.data() + idx * action_dim_, t.action.data(),
                sizeof(float) * action_dim_);
    rewards_[size_t(idx)] = t.reward;
    dones_[size_t(idx)] = t.done ? 1 : 0;
    write_ = (write_ + 1) % capacity_;
    if (fill_ < capacity_) ++fill_;
  }

  template <class T>
  Batch<T> sample(int n, Rng& rng) const {
    if (fill_ == 0) throw UsageError("cannot sample from an empty replay buffer");
    std::vector<int64_t> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = rng.uniform_int(0, fill_ - 1);
    return gather<T>(idx);
  }

  template <class T>
  Batch<T> gather(const std::vector<int64_t>& idx) const {
    const int n = int(idx.size());
    Batch<T> b;
    b.obs = Tensor<T>({n, channels_, height_, width_});
    b.next_obs = Tensor<T>({n, channels_, height_, width_});
    b.actions = Tensor<T>({n, action_dim_});
    b.rewards.resize(n);
    b.dones.resize(n);
    const T inv = T(1) / T(255);
    for (int i = 0; i < n; ++i) {
      if (idx[i] < 0 || idx[i] >= fill_) throw UsageError("replay index out of range");
      const uint8_t* o = obs_slot(idx[i]);
      const uint8_t* no = next_obs_slot(idx[i]);
      T* bo = b.obs.ptr() + int64_t(i) * int64_t(obs_bytes_);
      T* bno = b.next_obs.ptr() + int64_t(i) * int64_t(obs_bytes_);
      for (size_t j = 0; j < obs_bytes_; ++j) {
        bo[j] = T(o[j]) * inv;
        bno[j] = T(no[j]) * inv;
      }
      for (int a = 0; a < action_dim_; ++a)
        b.actions.data[size_t(i) * action_dim_ + a] = T(actions_[idx[i] * action_dim_ + a]);
      b.rewards[i] = T(rewards_[size_t(idx[i])]);
      b.dones[i] = dones_[size_t(idx[i])];
    }
    return b;
  }

  // Raw byte access for tests and snapshots.
  const uint8_t* obs_slot(int64_t idx) const {
    return chunks_[size_t(idx / kChunk)].get() + (idx % kChunk) * 2 * obs_bytes_;
  }
  const uint8_t* next_obs_slot(int64_t idx) const {
    return obs_slot(idx) + obs_bytes_;
  }
  float reward_at(int64_t idx) const { return rewards_[size_t(idx)]; }

  // Snapshot in the checkpoint container format.
  void save(const std::string& path) const {
    CkptSection sec{"replay", "fifo", {}};
    auto raw = [&](const std::string& name, const uint8_t* data, Shape shape) {
      CkptEntry e;
      e.name = name;
      e.dtype = CkptDtype::U8;
      e.shape = shape;
      e.value.assign(data, data + shape_numel(shape));
      sec.entries.push_back(std::move(e));
    };
    std::vector<uint8_t> all(size_t(fill_) * 2 * obs_bytes_);
    for (int64_t i = 0; i < fill_; ++i)
      std::memcpy(all.data() + size_t(i) * 2 * obs_bytes_, obs_slot(i), 2 * obs_bytes_);
    if (fill_ > 0) raw("frames", all.data(), {int(fill_), 2, channels_, height_, width_});
    CkptEntry meta;
    meta.name = "meta";
    meta.dtype = CkptDtype::F64;
    meta.shape = {4};
    meta.value.resize(4 * 8);
    double md[4] = {double(capacity_), double(fill_), double(write_), double(action_dim_)};
    std::memcpy(meta.value.data(), md, sizeof(md));
    sec.entries.push_back(meta);
    CkptEntry rest;
    rest.name = "columns";
    rest.dtype = CkptDtype::F32;
    rest.shape = {int(fill_), action_dim_ + 2};
    rest.value.resize(size_t(fill_) * (action_dim_ + 2) * 4);
    float* f = reinterpret_cast<float*>(rest.value.data());
    for (int64_t i = 0; i < fill_; ++i) {
      for (int a = 0; a < action_dim_; ++a) *f++ = actions_[i * action_dim_ + a];
      *f++ = rewards_[size_t(i)];
      *f++ = float(dones_[size_t(i)]);
    }
    if (fill_ > 0) sec.entries.push_back(std::move(rest));
    write_checkpoint(path, {sec});
  }

  void load(const std::string& path) {
    auto sections = read_checkpoint(path);
    const CkptSection& sec = find_section(sections, "replay");
    const CkptEntry* meta = nullptr;
    const CkptEntry* frames = nullptr;
    const CkptEntry* columns = nullptr;
    for (const CkptEntry& e : sec.entries) {
      if (e.name == "meta") meta = &e;
      if (e.name == "frames") frames = &e;
      if (e.name == "columns") columns = &e;
    }
    if (!meta) throw ConfigError("replay snapshot missing meta entry");
    double md[4];
    std::memcpy(md, meta->value.data(), sizeof(md));
    if (int64_t(md[0]) != capacity_ || int(md[3]) != action_dim_)
      throw ConfigError("replay snapshot does not match buffer geometry");
    fill_ = 0;
    write_ = 0;
    const int64_t n = int64_t(md[1]);
    if (n == 0) return;
    if (!frames || !columns) throw ConfigError("replay snapshot missing data entries");
    const float* f = reinterpret_cast<const float*>(columns->value.data());
    for (int64_t i = 0; i < n; ++i) {
      Transition t;
      t.obs.assign(frames->value.begin() + size_t(i) * 2 * obs_bytes_,
                   frames->value.begin() + size_t(i) * 2 * obs_bytes_ + obs_bytes_);
      t.next_obs.assign(frames->value.begin() + size_t(i) * 2 * obs_bytes_ + obs_bytes_,
                        frames->value.begin() + size_t(i + 1) * 2 * obs_bytes_);
      t.action.assign(f + i * (action_dim_ + 2), f + i * (action_dim_ + 2) + action_dim_);
      t.reward = f[i * (action_dim_ + 2) + action_dim_];
      t.done = f[i * (action_dim_ + 2) + action_dim_ + 1] != 0;
      push(t);
    }
    write_ = int64_t(md[2]);
  }

 private:
  static constexpr int64_t kChunk = 512;  // transitions per storage chunk

  uint8_t* obs_slot(int64_t idx) {
    return chunks_[size_t(idx / kChunk)].get() + (idx % kChunk) * 2 * obs_bytes_;
  }
  uint8_t* next_obs_slot(int64_t idx) { return obs_slot(idx) + obs_bytes_; }

  void ensure_chunk(int64_t idx) {
    const size_t chunk = size_t(idx / kChunk);
    while (chunks_.size() <= chunk)
      chunks_.push_back(std::make_unique<uint8_t[]>(size_t(kChunk) * 2 * obs_bytes_));
  }

  int64_t capacity_;
  size_t obs_bytes_;
  int channels_, height_, width_, action_dim_;
  int64_t write_ = 0, fill_ = 0;
  std::vector<std::unique_ptr<uint8_t[]>> chunks_;
  std::vector<float> actions_;
  std::vector<float> rewards_;
  std::vector<uint8_t> dones_;
};

}  // namespace rcac
