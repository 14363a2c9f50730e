#pragma once

#include <vector>

#include "rcac/layers.hpp"

namespace rcac {

template <class T>
struct RaeHyper {
  T lambda_z = T(1e-6);      // L2 penalty on the latent
  T lambda_theta = T(1e-7);  // decoder weight decay
  T lr = T(1e-3);
  int decoder_update_freq = 1;
};

// Convolutional encoder: four 3x3 convolutions (stride 2, then 1,1,1) with
// ReLU, a dense projection to the latent, layer norm and tanh. The latent is
// therefore bounded to (-1,1).
template <class T>
struct Encoder {
  Net<T> net;
  ParameterSet<T> params;  // phi
  int in_channels = 0, image_size = 0, latent_dim = 0;
  int conv_channels = 0, final_spatial = 0;

  Tensor<T> encode(const Tensor<T>& obs, Tape<T>* tape = nullptr) const {
    return net.forward(params, obs, tape);
  }
};

template <class T>
struct Decoder {
  Net<T> net;
  ParameterSet<T> params;  // theta

  Tensor<T> decode(const Tensor<T>& z, Tape<T>* tape = nullptr) const {
    return net.forward(params, z, tape);
  }
};

// Spatial sizes after the encoder conv stack: stride 2 first, then three
// stride-1 layers, kernel 3, no padding.
inline std::vector<int> encoder_spatial_sizes(int image_size) {
  std::vector<int> s;
  s.push_back(conv_out_size(image_size, 3, 2));
  for (int i = 0; i < 3; ++i) s.push_back(conv_out_size(s.back(), 3, 1));
  return s;
}

template <class T>
Encoder<T> build_encoder(int in_channels, int image_size, int latent_dim, Rng& rng,
                         int conv_channels = 32) {
  auto sizes = encoder_spatial_sizes(image_size);
  const int f = sizes.back();
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(in_channels, conv_channels, 3, 2), LayerSpec::relu(),
      LayerSpec::conv2d(conv_channels, conv_channels, 3, 1), LayerSpec::relu(),
      LayerSpec::conv2d(conv_channels, conv_channels, 3, 1), LayerSpec::relu(),
      LayerSpec::conv2d(conv_channels, conv_channels, 3, 1), LayerSpec::relu(),
      LayerSpec::flatten(),
      LayerSpec::dense(conv_channels * f * f, latent_dim),
      LayerSpec::layer_norm(latent_dim),
      LayerSpec::tanh()};
  Encoder<T> enc;
  enc.net = Net<T>("encoder", std::move(layers));
  enc.net.init_params(enc.params, rng);
  enc.in_channels = in_channels;
  enc.image_size = image_size;
  enc.latent_dim = latent_dim;
  enc.conv_channels = conv_channels;
  enc.final_spatial = f;
  return enc;
}

// Mirrors the encoder: dense expansion, three stride-1 deconvolutions, one
// stride-2 deconvolution back to the observation shape. Output padding on
// the last layer restores the exact input size; no final activation.
template <class T>
Decoder<T> build_decoder(const Encoder<T>& enc, Rng& rng) {
  const int f = enc.final_spatial, c = enc.conv_channels;
  const int s1 = encoder_spatial_sizes(enc.image_size).front();
  const int out_pad = enc.image_size - deconv_out_size(s1, 3, 2, 0);
  if (out_pad < 0 || out_pad > 1)
    throw ConfigError("unsupported image size for the decoder: " +
                      std::to_string(enc.image_size));
  std::vector<LayerSpec> layers = {
      LayerSpec::dense(enc.latent_dim, c * f * f), LayerSpec::relu(),
      LayerSpec::reshape(c, f, f),
      LayerSpec::deconv2d(c, c, 3, 1), LayerSpec::relu(),
      LayerSpec::deconv2d(c, c, 3, 1), LayerSpec::relu(),
      LayerSpec::deconv2d(c, c, 3, 1), LayerSpec::relu(),
      LayerSpec::deconv2d(c, enc.in_channels, 3, 2, out_pad)};
  Decoder<T> dec;
  dec.net = Net<T>("decoder", std::move(layers));
  dec.net.init_params(dec.params, rng);
  return dec;
}

// Per-sample loss: mean squared reconstruction error over pixels plus the
// latent L2 penalty. The decoder weight decay is a per-update (not
// per-sample) term.
template <class T>
std::vector<T> rae_loss_per_sample(const Tensor<T>& obs, const Tensor<T>& recon,
                                   const Tensor<T>& z, T lambda_z) {
  if (!obs.same_shape(recon)) throw ConfigError("rae loss: obs/recon shape mismatch");
  if (obs.dim(0) != z.dim(0)) throw ConfigError("rae loss: batch length mismatch");
  const int n = obs.dim(0);
  const int64_t px = obs.numel() / n;
  const int64_t zd = z.numel() / n;
  std::vector<T> out(n);
  for (int i = 0; i < n; ++i) {
    T mse = 0;
    const T* o = obs.ptr() + i * px;
    const T* r = recon.ptr() + i * px;
    for (int64_t j = 0; j < px; ++j) mse += (r[j] - o[j]) * (r[j] - o[j]);
    mse /= T(px);
    T zz = 0;
    const T* zp = z.ptr() + i * zd;
    for (int64_t j = 0; j < zd; ++j) zz += zp[j] * zp[j];
    out[i] = mse + lambda_z * zz;
    if (!std::isfinite(out[i])) throw NumericError("non-finite RAE loss");
  }
  return out;
}

template <class T>
struct RaeUpdate {
  std::vector<T> r_cure;  // per-sample loss before the step
  T batch_loss = 0;       // mean per-sample + lambda_theta * ||theta||^2
};

// The regularized autoencoder. One update performs a single Adam step on
// phi and theta against the batch loss and reports the pre-step per-sample
// losses, which double as the intrinsic reward.
template <class T>
class Autoencoder {
 public:
  Encoder<T> enc;
  Decoder<T> dec;
  RaeHyper<T> hyper;

  static Autoencoder build(int in_channels, int image_size, int latent_dim, RaeHyper<T> hyper,
                           uint64_t seed, int conv_channels = 32) {
    Autoencoder ae;
    Rng rng(seed, Stream::ParamInit);
    ae.enc = build_encoder<T>(in_channels, image_size, latent_dim, rng, conv_channels);
    ae.dec = build_decoder<T>(ae.enc, rng);
    ae.hyper = hyper;
    return ae;
  }

  T batch_loss(const Tensor<T>& obs, const Tensor<T>& recon, const Tensor<T>& z) const {
    auto per = rae_loss_per_sample(obs, recon, z, hyper.lambda_z);
    T mean = 0;
    for (T v : per) mean += v;
    mean /= T(per.size());
    return mean + hyper.lambda_theta * dec.params.sum_squared_values();
  }

  // Convenience for gradient checking: full forward + loss.
  T loss_at(const Tensor<T>& obs) const {
    Tensor<T> z = enc.encode(obs);
    Tensor<T> recon = dec.decode(z);
    return batch_loss(obs, recon, z);
  }

  // Fills phi and theta gradients; callers zero and step.
  RaeUpdate<T> loss_backward(const Tensor<T>& obs) {
    const int n = obs.dim(0);
    Tape<T> enc_tape, dec_tape;
    Tensor<T> z = enc.encode(obs, &enc_tape);
    Tensor<T> recon = dec.decode(z, &dec_tape);

    RaeUpdate<T> res;
    res.r_cure = rae_loss_per_sample(obs, recon, z, hyper.lambda_z);
    T mean = 0;
    for (T v : res.r_cure) mean += v;
    res.batch_loss = mean / T(n) + hyper.lambda_theta * dec.params.sum_squared_values();

    // d(batch loss)/d(recon) for the mean-of-per-sample MSE term
    const int64_t px = obs.numel() / n;
    Tensor<T> drecon(recon.shape);
    const T c = T(2) / (T(n) * T(px));
    for (int64_t j = 0; j < recon.numel(); ++j)
      drecon.data[j] = c * (recon.data[j] - obs.data[j]);

    Tensor<T> dz = dec.net.backward(dec.params, dec_tape, drecon);
    const T cz = T(2) * hyper.lambda_z / T(n);
    for (int64_t j = 0; j < dz.numel(); ++j) dz.data[j] += cz * z.data[j];
    enc.net.backward(enc.params, enc_tape, dz);

    // lambda_theta * ||theta||^2 contributes 2*lambda_theta*theta
    dec.params.add_value_scaled_to_grad(T(2) * hyper.lambda_theta);
    return res;
  }

  // One Adam step against the batch loss. The returned per-sample losses are
  // measured before the step, so the reward reflects the representation the
  // data was problematic for.
  RaeUpdate<T> update(const Tensor<T>& obs) {
    enc.params.zero_grads();
    dec.params.zero_grads();
    RaeUpdate<T> res = loss_backward(obs);
    enc.params.adam_step(hyper.lr);
    ++update_count_;
    if (update_count_ % hyper.decoder_update_freq == 0) dec.params.adam_step(hyper.lr);
    return res;
  }

 private:
  int64_t update_count_ = 0;
};

}  // namespace rcac
