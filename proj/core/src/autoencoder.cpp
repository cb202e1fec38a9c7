#include "kvq/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kvq/error.hpp"
#include "kvq/metrics.hpp"
#include "kvq/rng.hpp"

namespace kvq {

namespace {

constexpr std::uint64_t kModelStream = 0x6d6f646c;  // "modl"

Dense make_dense(std::size_t out, std::size_t in) {
  return Dense{Matrix(out, in), std::vector<double>(out, 0.0)};
}

void init_dense(Dense& layer, Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
  for (double& v : layer.weight.values()) v = scale * rng.normal();
}

// y = W x + b
void affine(const Dense& layer, std::span<const double> x, std::span<double> y) {
  for (std::size_t o = 0; o < layer.weight.rows(); ++o) y[o] = layer.bias[o] + dot(layer.weight.row(o), x);
}

// Accumulates dW += scale * g x^T, db += scale * g and writes dx = W^T g.
void affine_backward(const Dense& layer, Dense& grad, std::span<const double> x,
                     std::span<const double> g, std::span<double> dx) {
  std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
    const auto w = layer.weight.row(o);
    auto gw = grad.weight.row(o);
    for (std::size_t i = 0; i < x.size(); ++i) {
      gw[i] += g[o] * x[i];
      dx[i] += w[i] * g[o];
    }
    grad.bias[o] += g[o];
  }
}

}  // namespace

AutoencoderParams AutoencoderParams::zeros(const AutoencoderShape& s) {
  return AutoencoderParams{make_dense(s.hidden, s.chunk()), make_dense(s.embedding_dim, s.hidden),
                           make_dense(s.hidden, s.embedding_dim), make_dense(s.chunk(), s.hidden)};
}

void AutoencoderParams::for_each_tensor(
    const std::function<void(std::string_view, std::span<double>)>& fn) {
  fn("enc_hidden.weight", enc_hidden.weight.values());
  fn("enc_hidden.bias", enc_hidden.bias);
  fn("enc_out.weight", enc_out.weight.values());
  fn("enc_out.bias", enc_out.bias);
  fn("dec_hidden.weight", dec_hidden.weight.values());
  fn("dec_hidden.bias", dec_hidden.bias);
  fn("dec_out.weight", dec_out.weight.values());
  fn("dec_out.bias", dec_out.bias);
}

LatentCode shift_code(const LatentCode& code, int offset, const GridTopology& grid,
                      ShiftMode mode) {
  LatentCode out;
  out.indices.reserve(code.indices.size());
  const auto k_size = static_cast<long>(grid.size());
  for (std::size_t k : code.indices) {
    if (mode == ShiftMode::index) {
      const long shifted = ((static_cast<long>(k) + offset) % k_size + k_size) % k_size;
      out.indices.push_back(static_cast<std::size_t>(shifted));
      continue;
    }
    LatticePoint p = grid.coords(k);
    p.x = std::clamp(p.x + offset, 0, static_cast<int>(grid.width()) - 1);
    if (grid.dimensionality() == 2) {
      p.y = std::clamp(p.y + offset, 0, static_cast<int>(grid.height()) - 1);
    }
    out.indices.push_back(grid.index_of(p));
  }
  return out;
}

ToyAutoencoder::ToyAutoencoder(AutoencoderShape shape, double alpha, double learning_rate,
                               std::uint64_t seed)
    : shape_(shape), alpha_(alpha), learning_rate_(learning_rate) {
  if (shape_.latents == 0 || shape_.input_dim == 0 || shape_.embedding_dim == 0 ||
      shape_.hidden == 0) {
    throw ConfigError("autoencoder dimensions must be positive");
  }
  if (shape_.input_dim % shape_.latents != 0) {
    throw ConfigError("input dimension " + std::to_string(shape_.input_dim) +
                      " is not divisible by the latent count " + std::to_string(shape_.latents));
  }
  if (!(alpha_ >= 0.0)) throw ConfigError("alpha must be nonnegative");
  if (!(learning_rate_ >= 0.0)) throw ConfigError("learning rate must be nonnegative");
  params_ = AutoencoderParams::zeros(shape_);
  Rng rng(seed, kModelStream);
  init_dense(params_.enc_hidden, rng);
  init_dense(params_.enc_out, rng);
  init_dense(params_.dec_hidden, rng);
  init_dense(params_.dec_out, rng);
}

void ToyAutoencoder::check_input(std::span<const double> x) const {
  if (x.size() != shape_.input_dim) {
    throw ShapeError("input dimension " + std::to_string(x.size()) + " does not match model input " +
                     std::to_string(shape_.input_dim));
  }
}

Matrix ToyAutoencoder::encode(std::span<const double> x) const {
  check_input(x);
  const std::size_t n = shape_.latents;
  const std::size_t chunk = shape_.chunk();
  Matrix e(n, shape_.embedding_dim);
  std::vector<double> h(shape_.hidden);
  for (std::size_t i = 0; i < n; ++i) {
    affine(params_.enc_hidden, x.subspan(i * chunk, chunk), h);
    for (double& v : h) v = std::tanh(v);
    affine(params_.enc_out, h, e.row(i));
  }
  return e;
}

Matrix ToyAutoencoder::encode_all(const Matrix& inputs) const {
  Matrix out(inputs.rows() * shape_.latents, shape_.embedding_dim);
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    const Matrix e = encode(inputs.row(r));
    std::copy(e.values().begin(), e.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(r * e.size()));
  }
  return out;
}

std::vector<double> ToyAutoencoder::decode(const Matrix& quantized) const {
  if (quantized.rows() != shape_.latents || quantized.cols() != shape_.embedding_dim) {
    throw ShapeError("decoder expects " + std::to_string(shape_.latents) + " x " +
                     std::to_string(shape_.embedding_dim) + " embeddings");
  }
  const std::size_t chunk = shape_.chunk();
  std::vector<double> out(shape_.input_dim);
  std::vector<double> h(shape_.hidden);
  for (std::size_t i = 0; i < shape_.latents; ++i) {
    affine(params_.dec_hidden, quantized.row(i), h);
    for (double& v : h) v = std::tanh(v);
    affine(params_.dec_out, h, std::span<double>(out).subspan(i * chunk, chunk));
  }
  return out;
}

std::vector<double> ToyAutoencoder::decode(const LatentCode& code, const Codebook& codebook) const {
  if (code.indices.size() != shape_.latents) throw ShapeError("latent code has the wrong length");
  if (codebook.dim() != shape_.embedding_dim) throw ShapeError("codebook dimension mismatch");
  Matrix q(shape_.latents, shape_.embedding_dim);
  for (std::size_t i = 0; i < shape_.latents; ++i) {
    if (code.indices[i] >= codebook.size()) throw IndexError("latent index out of range");
    const auto w = codebook.prototype(code.indices[i]);
    std::copy(w.begin(), w.end(), q.row(i).begin());
  }
  return decode(q);
}

ForwardPass ToyAutoencoder::forward_with_code(std::span<const double> x, const Codebook& codebook,
                                              const LatentCode& code) const {
  check_input(x);
  if (codebook.dim() != shape_.embedding_dim) throw ShapeError("codebook dimension mismatch");
  if (code.indices.size() != shape_.latents) throw ShapeError("latent code has the wrong length");
  const std::size_t n = shape_.latents;
  const std::size_t chunk = shape_.chunk();

  ForwardPass pass;
  pass.input.assign(x.begin(), x.end());
  pass.enc_hidden = Matrix(n, shape_.hidden);
  pass.embeddings = Matrix(n, shape_.embedding_dim);
  pass.quantized = Matrix(n, shape_.embedding_dim);
  pass.dec_hidden = Matrix(n, shape_.hidden);
  pass.reconstruction.assign(shape_.input_dim, 0.0);
  pass.code = code;

  for (std::size_t i = 0; i < n; ++i) {
    auto h = pass.enc_hidden.row(i);
    affine(params_.enc_hidden, x.subspan(i * chunk, chunk), h);
    for (double& v : h) v = std::tanh(v);
    affine(params_.enc_out, h, pass.embeddings.row(i));

    if (code.indices[i] >= codebook.size()) throw IndexError("latent index out of range");
    const auto w = codebook.prototype(code.indices[i]);
    std::copy(w.begin(), w.end(), pass.quantized.row(i).begin());
    pass.commitment_loss += squared_distance(w, pass.embeddings.row(i));

    auto g = pass.dec_hidden.row(i);
    affine(params_.dec_hidden, pass.quantized.row(i), g);
    for (double& v : g) v = std::tanh(v);
    affine(params_.dec_out, g, std::span<double>(pass.reconstruction).subspan(i * chunk, chunk));
  }
  pass.commitment_loss /= static_cast<double>(n);
  pass.recon_loss = squared_distance(x, pass.reconstruction);
  pass.total_loss = pass.recon_loss + alpha_ * pass.commitment_loss;
  return pass;
}

ForwardPass ToyAutoencoder::forward(std::span<const double> x, const Codebook& codebook) {
  const Matrix e = encode(x);
  if (codebook.dim() != shape_.embedding_dim) throw ShapeError("codebook dimension mismatch");
  LatentCode code;
  code.indices.reserve(shape_.latents);
  for (std::size_t i = 0; i < shape_.latents; ++i) {
    code.indices.push_back(codebook.best_matching_unit(e.row(i)));
  }
  last_pass_ = forward_with_code(x, codebook, code);
  return *last_pass_;
}

AutoencoderParams ToyAutoencoder::backward() const {
  if (!last_pass_) throw StateError("backward() called before forward()");
  AutoencoderParams grads = AutoencoderParams::zeros(shape_);
  backward(*last_pass_, grads, 1.0);
  return grads;
}

void ToyAutoencoder::backward(const ForwardPass& pass, AutoencoderParams& grads,
                              double scale) const {
  if (pass.input.size() != shape_.input_dim) throw StateError("backward() needs a completed forward pass");
  const std::size_t n = shape_.latents;
  const std::size_t chunk = shape_.chunk();
  const double commit_scale = scale * 2.0 * alpha_ / static_cast<double>(n);

  std::vector<double> dy(chunk);
  std::vector<double> dh(shape_.hidden);
  std::vector<double> dq(shape_.embedding_dim);
  std::vector<double> de(shape_.embedding_dim);
  std::vector<double> dchunk(chunk);

  for (std::size_t i = 0; i < n; ++i) {
    // Decoder, from d/dx_hat ||x - x_hat||^2 = 2 (x_hat - x).
    for (std::size_t c = 0; c < chunk; ++c) {
      dy[c] = scale * 2.0 * (pass.reconstruction[i * chunk + c] - pass.input[i * chunk + c]);
    }
    const auto g = pass.dec_hidden.row(i);
    affine_backward(params_.dec_out, grads.dec_out, g, dy, dh);
    for (std::size_t j = 0; j < dh.size(); ++j) dh[j] *= 1.0 - g[j] * g[j];
    affine_backward(params_.dec_hidden, grads.dec_hidden, pass.quantized.row(i), dh, dq);

    // Straight-through: the decoder-input gradient is copied to the encoder
    // output; the commitment term adds 2 alpha / N (e - sg(w)).
    const auto e = pass.embeddings.row(i);
    const auto w = pass.quantized.row(i);
    for (std::size_t c = 0; c < de.size(); ++c) de[c] = dq[c] + commit_scale * (e[c] - w[c]);

    const auto h = pass.enc_hidden.row(i);
    affine_backward(params_.enc_out, grads.enc_out, h, de, dh);
    for (std::size_t j = 0; j < dh.size(); ++j) dh[j] *= 1.0 - h[j] * h[j];
    affine_backward(params_.enc_hidden, grads.enc_hidden,
                    std::span<const double>(pass.input).subspan(i * chunk, chunk), dh, dchunk);
  }
}

Matrix ToyAutoencoder::decoder_input_gradient(const ForwardPass& pass) const {
  AutoencoderParams scratch = AutoencoderParams::zeros(shape_);
  const std::size_t chunk = shape_.chunk();
  Matrix out(shape_.latents, shape_.embedding_dim);
  std::vector<double> dy(chunk);
  std::vector<double> dh(shape_.hidden);
  for (std::size_t i = 0; i < shape_.latents; ++i) {
    for (std::size_t c = 0; c < chunk; ++c) {
      dy[c] = 2.0 * (pass.reconstruction[i * chunk + c] - pass.input[i * chunk + c]);
    }
    const auto g = pass.dec_hidden.row(i);
    affine_backward(params_.dec_out, scratch.dec_out, g, dy, dh);
    for (std::size_t j = 0; j < dh.size(); ++j) dh[j] *= 1.0 - g[j] * g[j];
    affine_backward(params_.dec_hidden, scratch.dec_hidden, pass.quantized.row(i), dh, out.row(i));
  }
  return out;
}

Matrix ToyAutoencoder::encoder_output_gradient(const ForwardPass& pass) const {
  Matrix out = decoder_input_gradient(pass);
  const double commit_scale = 2.0 * alpha_ / static_cast<double>(shape_.latents);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const auto e = pass.embeddings.row(i);
    const auto w = pass.quantized.row(i);
    auto g = out.row(i);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += commit_scale * (e[c] - w[c]);
  }
  return out;
}

void ToyAutoencoder::apply_sgd(AutoencoderParams& grads) {
  std::vector<std::span<double>> grad_tensors;
  grads.for_each_tensor([&](std::string_view, std::span<double> g) { grad_tensors.push_back(g); });
  std::size_t t = 0;
  params_.for_each_tensor([&](std::string_view, std::span<double> p) {
    const auto g = grad_tensors[t++];
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= learning_rate_ * g[i];
  });
}

std::vector<double> ToyAutoencoder::perturb_latent(const LatentCode& code, int offset,
                                                   const GridTopology& grid, ShiftMode mode,
                                                   const Codebook& codebook) const {
  if (grid.size() != codebook.size()) throw ConfigError("grid and codebook sizes differ");
  return decode(shift_code(code, offset, grid, mode), codebook);
}

Matrix ToyAutoencoder::decode_grid(const Codebook& codebook) const {
  Matrix out(codebook.size(), shape_.input_dim);
  LatentCode code;
  code.indices.assign(shape_.latents, 0);
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    std::fill(code.indices.begin(), code.indices.end(), k);
    const std::vector<double> x = decode(code, codebook);
    std::copy(x.begin(), x.end(), out.row(k).begin());
  }
  return out;
}

double perturbation_mse(const ToyAutoencoder& model, const Codebook& codebook,
                        const GridTopology& grid, const Matrix& inputs, int offset,
                        ShiftMode mode) {
  if (inputs.rows() == 0) throw InputError("no inputs to perturb");
  const Matrix e = model.encode_all(inputs);
  const AssignmentBatch assignment = codebook.assign(e);
  const std::size_t n = model.shape().latents;
  double total = 0.0;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    LatentCode code;
    code.indices.assign(assignment.winners.begin() + static_cast<std::ptrdiff_t>(r * n),
                        assignment.winners.begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
    total += squared_distance(inputs.row(r), model.perturb_latent(code, offset, grid, mode, codebook));
  }
  return total / static_cast<double>(inputs.rows() * inputs.cols());
}

StepResult train_step(ToyAutoencoder& model, Quantizer& quantizer, const Matrix& batch) {
  if (batch.rows() == 0) throw InputError("training batch is empty");
  const AutoencoderShape& shape = model.shape();
  const Codebook& codebook = quantizer.codebook();
  AutoencoderParams grads = AutoencoderParams::zeros(shape);
  const double scale = 1.0 / static_cast<double>(batch.rows());

  StepResult result;
  result.embeddings = Matrix(batch.rows() * shape.latents, shape.embedding_dim);
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const Matrix e = model.encode(batch.row(r));
    LatentCode code;
    for (std::size_t i = 0; i < shape.latents; ++i) {
      code.indices.push_back(codebook.best_matching_unit(e.row(i)));
    }
    const ForwardPass pass = model.forward_with_code(batch.row(r), codebook, code);
    result.recon_loss += scale * pass.recon_loss;
    result.commitment_loss += scale * pass.commitment_loss;
    model.backward(pass, grads, scale);
    std::copy(pass.embeddings.values().begin(), pass.embeddings.values().end(),
              result.embeddings.values().begin() +
                  static_cast<std::ptrdiff_t>(r * pass.embeddings.size()));
  }
  // A diverged model leaves the codebook alone; train() reports the step.
  if (!std::isfinite(result.recon_loss) || !std::isfinite(result.commitment_loss)) return result;
  model.apply_sgd(grads);
  result.assignment = quantizer.step(result.embeddings);
  return result;
}

EvalRow evaluate(const ToyAutoencoder& model, const Codebook& codebook, const Matrix& validation,
                 std::uint64_t step) {
  EvalRow row;
  row.step = step;
  const Matrix e = model.encode_all(validation);
  const AssignmentBatch assignment = codebook.assign(e);
  const std::size_t n = model.shape().latents;
  double recon = 0.0;
  for (std::size_t r = 0; r < validation.rows(); ++r) {
    LatentCode code;
    code.indices.assign(assignment.winners.begin() + static_cast<std::ptrdiff_t>(r * n),
                        assignment.winners.begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
    recon += squared_distance(validation.row(r), model.decode(code, codebook));
  }
  row.val_recon_loss = recon / static_cast<double>(validation.rows());
  double qe = 0.0;
  for (std::size_t i = 0; i < e.rows(); ++i) {
    qe += squared_distance(e.row(i), codebook.prototype(assignment.winners[i]));
  }
  row.val_quantization_error = qe / static_cast<double>(e.rows());
  row.val_perplexity = perplexity(UsageHistogram::from_counts(assignment.counts));
  return row;
}

TrainingTrace train(ToyAutoencoder& model, Quantizer& quantizer, const DataSource& data,
                    const TrainOptions& options) {
  TrainingTrace trace;
  train_into(model, quantizer, data, options, trace);
  return trace;
}

void train_into(ToyAutoencoder& model, Quantizer& quantizer, const DataSource& data,
                const TrainOptions& options, TrainingTrace& trace) {
  if (data.dim() != model.shape().input_dim) {
    throw ConfigError("data dimension " + std::to_string(data.dim()) +
                      " does not match model input " + std::to_string(model.shape().input_dim));
  }
  if (quantizer.codebook().dim() != model.shape().embedding_dim) {
    throw ConfigError("codebook dimension does not match the embedding dimension");
  }
  const Matrix validation = data.validation(options.validation_size);
  const std::uint64_t interval = std::max<std::uint64_t>(options.eval_interval, 1);
  trace.evals.push_back(evaluate(model, quantizer.codebook(), validation, 0));
  for (std::uint64_t step = 0; step < options.steps; ++step) {
    const StepResult r = train_step(model, quantizer, data.batch(step));
    if (!std::isfinite(r.recon_loss) || !std::isfinite(r.commitment_loss)) {
      throw TrainingError("non-finite loss at step " + std::to_string(step), static_cast<long>(step));
    }
    const UsageHistogram usage = UsageHistogram::from_counts(r.assignment.counts);
    trace.rows.push_back({step, r.recon_loss, r.commitment_loss, perplexity(usage), utilization(usage)});
    if ((step + 1) % interval == 0 || step + 1 == options.steps) {
      EvalRow e = evaluate(model, quantizer.codebook(), validation, step + 1);
      if (!std::isfinite(e.val_recon_loss)) {
        throw TrainingError("non-finite validation loss at step " + std::to_string(step),
                            static_cast<long>(step));
      }
      trace.evals.push_back(e);
    }
  }
}

}  // namespace kvq
