#ifndef SPIM_TRAINER_HPP
#define SPIM_TRAINER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "spim/common.hpp"
#include "spim/image.hpp"
#include "spim/model.hpp"
#include "spim/nn/adam.hpp"
#include "spim/nn/graph.hpp"
#include "spim/patterns.hpp"
#include "spim/rng.hpp"

namespace spim {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  float lr = 1e-3f;
  float sigma_train = 0.25f;  // gaussian noise added to standardised measurements
  float w1 = 0.2f, w2 = 0.8f, w3 = 16.0f;
  double beta_alpha = 0.7, beta_beta = 0.7;
  int freeze_patience = 5;
  double freeze_rel_tol = 1e-4;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1 || batch_size < 1) throw invalid_input("epochs and batch size must be >= 1");
    if (!(lr > 0)) throw invalid_input("learning rate must be > 0");
    if (sigma_train < 0) throw invalid_input("training noise sigma must be >= 0");
    if (freeze_patience < 1) throw invalid_input("freeze patience must be >= 1");
  }
};

enum class EncoderPhase { learning, frozen };

/// lambda ramps linearly from 0 and caps at 1 after TS updates.
inline double lambda_at(long step, long total_steps) {
  if (step < 0 || total_steps < 1) throw invalid_input("need step >= 0 and TS >= 1");
  return std::min(static_cast<double>(step) / static_cast<double>(total_steps), 1.0);
}

/// i.i.d. Beta(alpha, beta) entries, seed-deterministic.
inline nn::Tensor<float> init_encoder(int m, int n, std::uint64_t seed,
                                      double alpha = 0.7, double beta = 0.7) {
  if (m < 1 || m > n) throw invalid_input("need 1 <= m <= n");
  Rng rng(seed, 11);
  nn::Tensor<float> e({m, n});
  for (float& v : e.data) v = static_cast<float>(rng.beta(alpha, beta));
  return e;
}

/// True when the running-best epoch-mean penalty has gone `patience`
/// consecutive epochs without a relative improvement above `rel_tol`.
inline bool freeze_check(const std::vector<double>& history, int patience,
                         double rel_tol) {
  if (history.empty()) throw invalid_input("freeze check needs at least one epoch");
  double best = history[0];
  int streak = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (best - history[i] > rel_tol * std::abs(best))
      streak = 0;
    else
      ++streak;
    best = std::min(best, history[i]);
  }
  return streak >= patience;
}

/// Encoder + decoder parameters plus optimiser state. params[0] is E.
struct LedModel {
  ArchitectureConfig arch;
  TrainConfig cfg;
  EncoderPhase phase = EncoderPhase::learning;
  std::vector<std::string> names;
  std::vector<nn::Tensor<float>> params;
  nn::Adam<float> opt;
  long step = 0;
  long total_steps = 1;
  double lambda_frozen = 0.0;  // lambda value captured when E froze

  nn::Tensor<float>& encoder() { return params[0]; }
  const nn::Tensor<float>& encoder() const { return params[0]; }
};

inline LedModel make_led_model(ArchitectureConfig arch, TrainConfig cfg) {
  arch.validate();
  cfg.validate();
  LedModel model;
  model.arch = arch;
  model.cfg = cfg;
  model.names.push_back("encoder");
  model.params.push_back(
      init_encoder(arch.m, arch.side * arch.side, cfg.seed, cfg.beta_alpha, cfg.beta_beta));
  DecoderParams<float> dec = init_decoder_params<float>(arch, cfg.seed);
  for (std::size_t i = 0; i < dec.tensors.size(); ++i) {
    model.names.push_back(dec.names[i]);
    model.params.push_back(std::move(dec.tensors[i]));
  }
  model.opt.lr = cfg.lr;
  model.opt.init(model.params);
  return model;
}

/// Same, but the measurement matrix is a fixed binary pattern set and only
/// the decoder trains (the SH + learned-decoder baseline).
inline LedModel make_led_model_fixed_encoder(ArchitectureConfig arch, TrainConfig cfg,
                                             const PatternMatrix& patterns) {
  if (!patterns.is_binary()) throw invalid_input("fixed encoder must be binary");
  if (patterns.m != arch.m || patterns.n != arch.side * arch.side)
    throw invalid_input("pattern dimensions do not match the architecture");
  LedModel model = make_led_model(arch, cfg);
  for (std::size_t i = 0; i < patterns.bits.size(); ++i)
    model.params[0].data[i] = static_cast<float>(patterns.bits[i]);
  model.phase = EncoderPhase::frozen;
  model.lambda_frozen = 0.0;
  return model;
}

/// E rounded at 0.5 (boundary rounds up), phase flips to frozen.
inline void binarize_encoder(LedModel& model) {
  if (model.phase != EncoderPhase::learning)
    throw invalid_input("encoder is already frozen");
  for (float& v : model.params[0].data) v = v >= 0.5f ? 1.0f : 0.0f;
  model.phase = EncoderPhase::frozen;
  model.lambda_frozen = lambda_at(model.step, model.total_steps);
}

/// Frozen encoder exported as a binary pattern matrix (kind = learned).
inline PatternMatrix encoder_patterns(const LedModel& model) {
  if (model.phase != EncoderPhase::frozen)
    throw invalid_input("encoder must be frozen before export");
  PatternMatrix p;
  p.m = model.arch.m;
  p.n = model.arch.side * model.arch.side;
  p.kind = PatternKind::binary_learned;
  p.seed = model.cfg.seed;
  p.bits.resize(model.params[0].data.size());
  for (std::size_t i = 0; i < p.bits.size(); ++i) {
    const float v = model.params[0].data[i];
    if (v != 0.0f && v != 1.0f) throw invalid_input("frozen encoder is not binary");
    p.bits[i] = v == 1.0f ? 1 : 0;
  }
  return p;
}

struct StepMetrics {
  double total = 0, data = 0, l1 = 0, ssim_loss = 0, binar = 0, lambda = 0;
};

/// One optimisation step over a batch: per image y = E x -> standardise ->
/// add noise -> decode -> w1 L1 + w2 (1-SSIM); plus w3 lambda L_B(E); Adam
/// update of the decoder always and of E only while learning.
inline StepMetrics train_step(LedModel& model, const std::vector<const Image*>& batch,
                              Rng& noise_rng) {
  if (batch.empty()) throw invalid_input("empty batch");
  const int n = model.arch.side * model.arch.side;
  for (const Image* img : batch)
    if (img->side != model.arch.side) throw invalid_input("image side mismatch");

  const bool learning = model.phase == EncoderPhase::learning;
  const double lambda =
      learning ? lambda_at(model.step, model.total_steps) : model.lambda_frozen;

  nn::Graph<float> g;
  const int e_id = g.leaf(model.params[0], learning);
  const int zero_bias = g.leaf(nn::Tensor<float>({model.arch.m}), false);
  std::vector<int> dec_ids;
  for (std::size_t i = 1; i < model.params.size(); ++i)
    dec_ids.push_back(g.leaf(model.params[i], true));

  int l1_sum = -1, ssim_sum = -1;
  for (const Image* img : batch) {
    nn::Tensor<float> xt({n});
    for (int i = 0; i < n; ++i) xt.data[i] = static_cast<float>(img->pixels[i]);
    const int x_flat = g.leaf(std::move(xt), false);
    const int y = g.dense(x_flat, e_id, zero_bias);
    const int y_std = g.instance_standardize(y);
    const int y_noisy = g.add_noise(y_std, noise_rng, model.cfg.sigma_train);
    const int out = decoder_forward(g, dec_ids, model.arch, y_noisy);
    const int x_img = g.reshape(x_flat, {1, model.arch.side, model.arch.side});
    const int l1 = l1_loss(g, x_img, out);
    const int sl = ssim_loss(g, x_img, out);
    l1_sum = l1_sum < 0 ? l1 : g.add(l1_sum, l1);
    ssim_sum = ssim_sum < 0 ? sl : g.add(ssim_sum, sl);
  }
  const float inv_b = 1.0f / static_cast<float>(batch.size());
  const int l1_mean = g.mul_scalar(l1_sum, inv_b);
  const int ssim_mean = g.mul_scalar(ssim_sum, inv_b);
  const int data = g.add(g.mul_scalar(l1_mean, model.cfg.w1),
                         g.mul_scalar(ssim_mean, model.cfg.w2));
  const int lb = g.binarisation_penalty(e_id);
  const int total = g.add(
      data, g.mul_scalar(lb, model.cfg.w3 * static_cast<float>(lambda)));

  StepMetrics metrics;
  metrics.lambda = lambda;
  metrics.l1 = g.value(l1_mean).data[0];
  metrics.ssim_loss = g.value(ssim_mean).data[0];
  metrics.data = g.value(data).data[0];
  metrics.binar = g.value(lb).data[0];
  metrics.total = g.value(total).data[0];
  if (!std::isfinite(metrics.total))
    throw numerical_error("non-finite loss at step " + std::to_string(model.step));

  g.backward(total);

  std::vector<std::vector<float>> grads(model.params.size());
  if (learning) grads[0] = g.grad(e_id).data;
  for (std::size_t i = 0; i < dec_ids.size(); ++i) grads[i + 1] = g.grad(dec_ids[i]).data;
  model.opt.update(model.params, grads);
  ++model.step;
  return metrics;
}

// ---------------------------------------------------------------------------
// Checkpoints (SPIC format) and the fit loop.

struct Checkpoint {
  std::uint32_t version = 1;
  ArchitectureConfig arch;
  EncoderPhase phase = EncoderPhase::learning;
  std::vector<std::string> names;
  std::vector<nn::Tensor<float>> params;  // params[0] is the encoder
  std::uint32_t epochs_completed = 0;
  double lambda = 0.0;
  float sigma_train = 0.0f;
  std::uint64_t seed = 0;
  double final_mean_ssim = 0.0;  // training-set SSIM logged in the last epoch
};

inline Checkpoint checkpoint_from_model(const LedModel& model, int epochs_completed,
                                        double final_mean_ssim) {
  Checkpoint c;
  c.arch = model.arch;
  c.phase = model.phase;
  c.names = model.names;
  c.params = model.params;
  c.epochs_completed = static_cast<std::uint32_t>(epochs_completed);
  c.lambda = model.phase == EncoderPhase::frozen
                 ? model.lambda_frozen
                 : lambda_at(model.step, model.total_steps);
  c.sigma_train = model.cfg.sigma_train;
  c.seed = model.cfg.seed;
  c.final_mean_ssim = final_mean_ssim;
  return c;
}

inline LedModel model_from_checkpoint(const Checkpoint& c, TrainConfig cfg) {
  LedModel model = make_led_model(c.arch, cfg);
  if (c.names != model.names) throw format_error("checkpoint parameter names mismatch", 0);
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    if (c.params[i].shape != model.params[i].shape)
      throw format_error("checkpoint parameter shapes mismatch", 0);
    model.params[i] = c.params[i];
  }
  model.phase = c.phase;
  model.lambda_frozen = c.phase == EncoderPhase::frozen ? c.lambda : 0.0;
  return model;
}

inline void save_checkpoint(std::ostream& os, const Checkpoint& c) {
  os.write("SPIC1", 5);
  detail::put_u32le(os, c.version);
  detail::put_u32le(os, static_cast<std::uint32_t>(c.arch.m));
  detail::put_u32le(os, static_cast<std::uint32_t>(c.arch.side));
  detail::put_u32le(os, static_cast<std::uint32_t>(c.arch.unet_levels));
  detail::put_u32le(os, static_cast<std::uint32_t>(c.arch.base_channels));
  detail::put_u32le(os, static_cast<std::uint32_t>(c.arch.kernel));
  os.put(c.phase == EncoderPhase::frozen ? 1 : 0);
  detail::put_u32le(os, c.epochs_completed);
  detail::put_f64le(os, c.lambda);
  detail::put_f32le(os, c.sigma_train);
  detail::put_u64le(os, c.seed);
  detail::put_f64le(os, c.final_mean_ssim);
  detail::put_u32le(os, static_cast<std::uint32_t>(c.params.size()));
  for (std::size_t t = 0; t < c.params.size(); ++t) {
    const std::string& name = c.names[t];
    detail::put_u32le(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto& shape = c.params[t].shape;
    detail::put_u32le(os, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) detail::put_u32le(os, static_cast<std::uint32_t>(d));
    for (float v : c.params[t].data) detail::put_f32le(os, v);
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  atomic_write_file(path, [&](std::ostream& os) { save_checkpoint(os, c); });
}

inline Checkpoint load_checkpoint(std::istream& is) {
  std::uint64_t off = 0;
  char magic[5];
  if (!is.read(magic, 5)) throw format_error("truncated header", 0);
  off += 5;
  if (std::string(magic, 5) != "SPIC1") throw format_error("bad magic, expected SPIC1", 0);

  Checkpoint c;
  c.version = detail::get_u32le(is, off);
  if (c.version != 1)
    throw format_error("unsupported checkpoint version " + std::to_string(c.version), 5);
  c.arch.m = static_cast<int>(detail::get_u32le(is, off));
  c.arch.side = static_cast<int>(detail::get_u32le(is, off));
  c.arch.unet_levels = static_cast<int>(detail::get_u32le(is, off));
  c.arch.base_channels = static_cast<int>(detail::get_u32le(is, off));
  c.arch.kernel = static_cast<int>(detail::get_u32le(is, off));
  try {
    c.arch.validate();
  } catch (const invalid_input& e) {
    throw format_error(std::string("invalid architecture in checkpoint: ") + e.what(), 9);
  }
  const int phase_byte = is.get();
  if (phase_byte != 0 && phase_byte != 1) throw format_error("bad phase byte", off);
  ++off;
  c.phase = phase_byte == 1 ? EncoderPhase::frozen : EncoderPhase::learning;
  c.epochs_completed = detail::get_u32le(is, off);
  c.lambda = detail::get_f64le(is, off);
  c.sigma_train = detail::get_f32le(is, off);
  c.seed = detail::get_u64le(is, off);
  c.final_mean_ssim = detail::get_f64le(is, off);

  const std::uint32_t count = detail::get_u32le(is, off);
  if (count < 1 || count > 10000) throw format_error("implausible tensor count", off);
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = detail::get_u32le(is, off);
    if (name_len > 256) throw format_error("implausible name length", off);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw format_error("truncated tensor name", off);
    off += name_len;
    const std::uint32_t ndims = detail::get_u32le(is, off);
    if (ndims < 1 || ndims > 8) throw format_error("implausible tensor rank", off);
    std::vector<int> shape(ndims);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndims; ++d) {
      shape[d] = static_cast<int>(detail::get_u32le(is, off));
      if (shape[d] < 1 || shape[d] > (1 << 24))
        throw format_error("implausible tensor dimension", off);
      numel *= static_cast<std::size_t>(shape[d]);
    }
    nn::Tensor<float> tensor(shape);
    for (std::size_t i = 0; i < numel; ++i) tensor.data[i] = detail::get_f32le(is, off);
    c.names.push_back(std::move(name));
    c.params.push_back(std::move(tensor));
  }
  if (c.names.empty() || c.names[0] != "encoder")
    throw format_error("checkpoint is missing the encoder tensor", off);
  if (c.params[0].shape !=
      std::vector<int>{c.arch.m, c.arch.side * c.arch.side})
    throw format_error("encoder shape does not match architecture", off);
  if (c.phase == EncoderPhase::frozen)
    for (float v : c.params[0].data)
      if (v != 0.0f && v != 1.0f)
        throw format_error("frozen encoder has non-binary entries", off);
  if (is.peek() != std::istream::traits_type::eof())
    throw format_error("trailing bytes after checkpoint body", off);
  return c;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw invalid_input("cannot open checkpoint: " + path.string());
  return load_checkpoint(is);
}

struct FitResult {
  Checkpoint checkpoint;
  std::vector<double> lb_history;  // epoch-mean binarisation penalty
  int freeze_epoch = -1;           // 0-based epoch after which E froze
};

/// Full training run: seeded shuffled batches, per-epoch freeze check,
/// binarisation (forced at the end if the plateau never fires), CSV log
/// `epoch,data_loss,binar_loss,lambda,phase`.
inline FitResult fit(LedModel& model, const std::vector<Image>& images,
                     std::ostream* log = nullptr) {
  if (images.empty()) throw invalid_input("empty training set");
  for (const Image& img : images)
    if (img.side != model.arch.side) throw invalid_input("image side mismatch");

  const int count = static_cast<int>(images.size());
  const int batches = (count + model.cfg.batch_size - 1) / model.cfg.batch_size;
  model.total_steps = static_cast<long>(model.cfg.epochs) * batches;

  Rng shuffle_rng(model.cfg.seed, 12);
  Rng noise_rng(model.cfg.seed, 13);
  if (log) *log << "epoch,data_loss,binar_loss,lambda,phase\n";

  FitResult result;
  double last_epoch_ssim = 0.0;
  std::vector<std::uint32_t> order(count);
  std::iota(order.begin(), order.end(), 0u);

  for (int epoch = 0; epoch < model.cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double data_acc = 0, lb_acc = 0, ssim_acc = 0, lambda_last = 0;
    const char* phase_name =
        model.phase == EncoderPhase::learning ? "learning" : "frozen";
    for (int b = 0; b < batches; ++b) {
      std::vector<const Image*> batch;
      for (int i = b * model.cfg.batch_size;
           i < std::min((b + 1) * model.cfg.batch_size, count); ++i)
        batch.push_back(&images[order[i]]);
      const StepMetrics sm = train_step(model, batch, noise_rng);
      data_acc += sm.data;
      lb_acc += sm.binar;
      ssim_acc += 1.0 - sm.ssim_loss;
      lambda_last = sm.lambda;
    }
    const double lb_epoch = lb_acc / batches;
    result.lb_history.push_back(lb_epoch);
    last_epoch_ssim = ssim_acc / batches;
    if (log)
      *log << epoch << ',' << data_acc / batches << ',' << lb_epoch << ','
           << lambda_last << ',' << phase_name << '\n';

    // The plateau test only engages once the penalty has clearly started to
    // fall (half its initial value); during the lambda warm-up L_B can sit
    // flat or drift upward, which is not the plateau the check is after.
    const double lb_best = *std::min_element(result.lb_history.begin(),
                                             result.lb_history.end());
    if (model.phase == EncoderPhase::learning &&
        lb_best < 0.5 * result.lb_history.front() &&
        freeze_check(result.lb_history, model.cfg.freeze_patience,
                     model.cfg.freeze_rel_tol)) {
      binarize_encoder(model);
      result.freeze_epoch = epoch;
    }
  }
  if (model.phase == EncoderPhase::learning) {
    binarize_encoder(model);
    result.freeze_epoch = model.cfg.epochs - 1;
  }
  result.checkpoint = checkpoint_from_model(model, model.cfg.epochs, last_epoch_ssim);
  return result;
}

} // namespace spim

#endif // SPIM_TRAINER_HPP
