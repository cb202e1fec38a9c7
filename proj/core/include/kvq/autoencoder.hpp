#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kvq/codebook.hpp"
#include "kvq/data.hpp"
#include "kvq/grid.hpp"
#include "kvq/matrix.hpp"
#include "kvq/quantizer.hpp"

namespace kvq {

/// The N codebook indices that represent one input.
struct LatentCode {
  std::vector<std::size_t> indices;
  bool operator==(const LatentCode&) const = default;
};

struct AutoencoderShape {
  std::size_t input_dim = 48;
  /// N: the input is split into N equal contiguous chunks.
  std::size_t latents = 4;
  std::size_t embedding_dim = 4;
  std::size_t hidden = 32;

  std::size_t chunk() const { return input_dim / latents; }
};

/// Affine layer y = W x + b with W stored out x in.
struct Dense {
  Matrix weight;
  std::vector<double> bias;
};

/// encoder: chunk -> hidden (tanh) -> embedding
/// decoder: embedding -> hidden (tanh) -> chunk
/// The same weights are applied to every chunk position.
struct AutoencoderParams {
  Dense enc_hidden;
  Dense enc_out;
  Dense dec_hidden;
  Dense dec_out;

  /// Zero tensors of the given shape.
  static AutoencoderParams zeros(const AutoencoderShape& shape);

  /// Visits every tensor as (name, values) in a fixed order.
  void for_each_tensor(const std::function<void(std::string_view, std::span<double>)>& fn);
};

/// Everything one forward pass produced, kept for the backward pass.
struct ForwardPass {
  std::vector<double> input;
  Matrix enc_hidden;  // N x hidden, post-tanh
  Matrix embeddings;  // N x d_emb (encoder output e_i)
  LatentCode code;
  Matrix quantized;   // N x d_emb (w_{k_i})
  Matrix dec_hidden;  // N x hidden, post-tanh
  std::vector<double> reconstruction;
  double recon_loss = 0.0;       // ||x - x_hat||^2
  double commitment_loss = 0.0;  // (1/N) sum ||w_k - e_i||^2, unweighted
  double total_loss = 0.0;       // recon + alpha * commitment
};

enum class ShiftMode { grid, index };

/// Moves every code by `offset` on the grid (both axes on 2D grids,
/// clamped at the borders) or along the raw index (modulo K).
LatentCode shift_code(const LatentCode& code, int offset, const GridTopology& grid,
                      ShiftMode mode);

/// Small MLP VQ autoencoder trained by SGD with a straight-through
/// quantiser. The codebook is read, never written: it learns only through
/// a Quantizer.
class ToyAutoencoder {
 public:
  ToyAutoencoder(AutoencoderShape shape, double alpha, double learning_rate, std::uint64_t seed);

  const AutoencoderShape& shape() const noexcept { return shape_; }
  double alpha() const noexcept { return alpha_; }
  double learning_rate() const noexcept { return learning_rate_; }
  AutoencoderParams& params() noexcept { return params_; }
  const AutoencoderParams& params() const noexcept { return params_; }

  /// Encoder output E (N x d_emb).
  Matrix encode(std::span<const double> x) const;
  /// Encoder outputs of every row, stacked (rows * N x d_emb).
  Matrix encode_all(const Matrix& inputs) const;
  std::vector<double> decode(const Matrix& quantized) const;
  std::vector<double> decode(const LatentCode& code, const Codebook& codebook) const;

  /// Full pass with nearest-prototype assignment. Also becomes the pass the
  /// argument-free backward() differentiates.
  ForwardPass forward(std::span<const double> x, const Codebook& codebook);
  /// Pass with the assignment held fixed (for gradient checks).
  ForwardPass forward_with_code(std::span<const double> x, const Codebook& codebook,
                                const LatentCode& code) const;

  /// Gradients of the last forward() pass's total loss. StateError if none.
  AutoencoderParams backward() const;
  /// Gradients of pass.total_loss, scaled by `scale`, added into grads.
  void backward(const ForwardPass& pass, AutoencoderParams& grads, double scale = 1.0) const;
  /// Gradient of the reconstruction term at the decoder input (N x d_emb).
  Matrix decoder_input_gradient(const ForwardPass& pass) const;
  /// Gradient of the total loss at the encoder output (N x d_emb).
  Matrix encoder_output_gradient(const ForwardPass& pass) const;

  void apply_sgd(AutoencoderParams& grads);

  std::vector<double> perturb_latent(const LatentCode& code, int offset, const GridTopology& grid,
                                     ShiftMode mode, const Codebook& codebook) const;

  /// Decodes the constant code (k, ..., k) for every k; row k is index k.
  Matrix decode_grid(const Codebook& codebook) const;

 private:
  void check_input(std::span<const double> x) const;

  AutoencoderShape shape_;
  double alpha_;
  double learning_rate_;
  AutoencoderParams params_;
  std::optional<ForwardPass> last_pass_;
};

/// Mean per-element squared error between each input and the decoding of
/// its code shifted by `offset`.
double perturbation_mse(const ToyAutoencoder& model, const Codebook& codebook,
                        const GridTopology& grid, const Matrix& inputs, int offset, ShiftMode mode);

// --- Training ------------------------------------------------------------------

struct TraceRow {
  std::uint64_t step = 0;
  double recon_loss = 0.0;
  double commitment_loss = 0.0;
  double perplexity = 0.0;
  double utilization = 0.0;
};

/// Held-out evaluation at one step.
struct EvalRow {
  std::uint64_t step = 0;
  double val_recon_loss = 0.0;
  double val_quantization_error = 0.0;
  double val_perplexity = 0.0;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
  std::vector<EvalRow> evals;
};

struct TrainOptions {
  std::uint64_t steps = 1000;
  /// Evaluate before training, every eval_interval steps, and after the
  /// last step.
  std::uint64_t eval_interval = 50;
  std::size_t validation_size = 256;
};

/// Batch mean of losses plus the encoder outputs fed to the quantiser.
struct StepResult {
  double recon_loss = 0.0;
  double commitment_loss = 0.0;
  Matrix embeddings;
  AssignmentBatch assignment;
};

/// One SGD step on the batch followed by one quantiser update on the same
/// batch's encoder outputs.
StepResult train_step(ToyAutoencoder& model, Quantizer& quantizer, const Matrix& batch);

/// Held-out losses of the current model and codebook.
EvalRow evaluate(const ToyAutoencoder& model, const Codebook& codebook, const Matrix& validation,
                 std::uint64_t step);

/// Runs `steps` train_step calls on data.batch(0..steps-1). Throws
/// TrainingError with the step index when a loss turns non-finite.
TrainingTrace train(ToyAutoencoder& model, Quantizer& quantizer, const DataSource& data,
                    const TrainOptions& options);
/// Same, appending to `trace` as it goes so a diverged run keeps its rows.
void train_into(ToyAutoencoder& model, Quantizer& quantizer, const DataSource& data,
                const TrainOptions& options, TrainingTrace& trace);

}  // namespace kvq
