#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "splitstream/dynsys.hpp"
#include "splitstream/splitting.hpp"

namespace splitstream {

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

enum class LayerType { Dense, Conv1d, PRelu, DepthToSpace, AddSkipMarker, Affine };

std::string to_string(LayerType type);

struct ParamRef {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;  // in floats, not bytes

  std::size_t size() const;
};

enum class SkipRole { Push, Add };

struct LayerSpec {
  LayerType type = LayerType::Dense;
  std::string name;
  std::vector<int> input_shape;
  std::vector<int> output_shape;
  std::vector<ParamRef> params;
  int block_size = 0;               // depth_to_space only
  SkipRole skip_role = SkipRole::Push;  // add_skip_marker only

  const ParamRef* param(const std::string& param_name) const;
};

/// Layer-ordered parameters for conditional-generator inference. Manifest
/// is JSON, the blob is raw little-endian float32.
struct GeneratorWeights {
  int version = 1;
  int latent_dim = 16;
  int cond_dim = 1;
  int output_dim = 128;
  std::string blob_sha256;
  std::vector<LayerSpec> layers;
  std::vector<float> blob;

  std::size_t parameter_count() const { return blob.size(); }
  std::span<const float> view(const ParamRef& p) const { return {blob.data() + p.offset, p.size()}; }
};

/// Reads the manifest and its blob (the manifest's "blob" entry, resolved
/// relative to the manifest, or the manifest path with a .bin extension).
/// Throws LoadError naming the offending layer on any validation failure.
GeneratorWeights load_weights(const std::filesystem::path& manifest_path);

/// Validates a manifest against an in-memory blob (checksum included).
GeneratorWeights parse_weights(const std::string& manifest_json, std::vector<float> blob);

/// Writes the manifest and blob; the blob lands next to the manifest with a .bin extension.
void save_weights(const GeneratorWeights& weights, const std::filesystem::path& manifest_path);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string blob_sha256(std::span<const float> blob);

/// Appends layers and parameters in manifest order, keeping offsets tiled.
class GeneratorBuilder {
 public:
  GeneratorBuilder(int latent_dim, int cond_dim, int output_dim);

  GeneratorBuilder& dense(const std::string& name, std::vector<int> input_shape, std::vector<int> output_shape,
                          const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias);
  /// weight is indexed [out][in][k] through kernel(out, in, k).
  GeneratorBuilder& conv1d(const std::string& name, int in_channels, int out_channels, int length, int kernel,
                           const std::function<double(int, int, int)>& kernel_value, const Eigen::VectorXd& bias);
  GeneratorBuilder& prelu(const std::string& name, int channels, int length, const Eigen::VectorXd& alpha);
  GeneratorBuilder& depth_to_space(const std::string& name, int channels_in, int length_in, int block);
  GeneratorBuilder& skip(const std::string& name, SkipRole role, std::vector<int> shape);
  GeneratorBuilder& affine(const std::string& name, std::vector<int> shape, const Eigen::VectorXd& scale,
                           const Eigen::VectorXd& shift);

  GeneratorWeights build() const;

 private:
  ParamRef push(const std::string& name, std::vector<int> shape, const Eigen::VectorXd& values);

  GeneratorWeights weights_;
};

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

using LatentVector = Eigen::VectorXd;

/// G(q, z). The first layer embeds q; its output is concatenated with z
/// ([embedding, z] in row-major order) before the remaining layers run.
/// Between layers the activation is reinterpreted to the next declared
/// input shape when the element counts agree.
StateVector generator_forward(const GeneratorWeights& weights, double q, const LatentVector& z);

/// Single-layer helpers, exposed for testing. Tensors are (channels, length).
Eigen::MatrixXd prelu(const Eigen::MatrixXd& x, std::span<const double> alpha);
Eigen::MatrixXd depth_to_space(const Eigen::MatrixXd& x, int block);
Eigen::MatrixXd conv1d_circular(const Eigen::MatrixXd& x, std::span<const float> kernel, std::span<const float> bias,
                                int out_channels, int kernel_width);

// ---------------------------------------------------------------------------
// Particle swarm
// ---------------------------------------------------------------------------

struct PsoConfig {
  int n_particles = 256;
  int n_iterations = 60;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  double velocity_clamp = 0.5;
  std::uint64_t seed = 0;
};

struct PsoResult {
  LatentVector best;
  double best_value = 0.0;
  std::vector<LatentVector> particle_best;    // per-particle best position
  std::vector<double> particle_best_value;
  std::vector<double> history;                // global best after init and after each iteration
};

/// Global-best PSO on [-1, 1]^dim with velocity clamping and box projection.
PsoResult pso_minimize(const std::function<double(const LatentVector&)>& objective, int dim, const PsoConfig& config);

// ---------------------------------------------------------------------------
// Generative cloning
// ---------------------------------------------------------------------------

struct GanispCloneConfig {
  double stationary_onset = 50.0;
  double fallback_epsilon = 0.1;
  bool match_parent = true;
};

/// match_parent: PSO on z -> ||G(q, z) - parent||_2, returning the states of
/// the n_copies closest distinct swarm particles in ascending distance.
/// Otherwise G(q, z) for uniformly drawn z.
std::vector<StateVector> gan_clone(const StateVector& parent, int n_copies, double q, const GeneratorWeights& weights,
                                   PsoConfig pso, bool match_parent, Engine& engine);

/// Random cloning before the stationary onset, generative cloning after it
/// with q = qoi(parent).
std::vector<StateVector> hybrid_clone(const StateVector& parent, int n_copies, double time,
                                      const GanispCloneConfig& config, const GeneratorWeights& weights,
                                      const PsoConfig& pso, const std::function<double(const StateVector&)>& qoi,
                                      Engine& engine);

class GanispCloner final : public CloningStrategy {
 public:
  GanispCloner(std::shared_ptr<const GeneratorWeights> weights, PsoConfig pso, GanispCloneConfig config,
               std::function<double(const StateVector&)> qoi);

  std::vector<StateVector> clone(const Realization& parent, int n_copies, double time, Engine& engine) const override;
  std::string name() const override { return config_.match_parent ? "ganisp" : "ganisp-unmatched"; }

 private:
  std::shared_ptr<const GeneratorWeights> weights_;
  PsoConfig pso_;
  GanispCloneConfig config_;
  std::function<double(const StateVector&)> qoi_;
};

}  // namespace splitstream
