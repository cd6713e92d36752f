#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "epd/common.hpp"
#include "epd/scene.hpp"

namespace epd::net {

using Mat = Eigen::MatrixXd;

enum class Representation { polynomial, sequence };
std::string to_string(Representation r);
Representation representation_from_string(const std::string& s);

struct ModelConfig {
  int hidden_dim = 64;
  int n_enc_blocks = 2;
  int n_denoise_blocks = 2;
  int n_heads = 4;
  double dropout = 0.1;
  int diffusion_steps = 1000;
  Representation representation = Representation::polynomial;

  int future_dim() const { return representation == Representation::polynomial ? 12 : 120; }
  int history_dim() const { return representation == Representation::polynomial ? 10 : 100; }
  int agent_input_dim() const { return history_dim() + 2 + 4; }
  int map_input_dim() const { return 6 + 2; }
  int ff_dim() const { return 4 * hidden_dim; }

  void validate() const;  // throws ConfigError
};

// Per-dimension affine standardization of the diffusion targets; fitted on the
// training corpus and stored in the checkpoint.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static Standardizer identity(int dim);
  Mat apply(const Mat& x) const;
  Mat invert(const Mat& z) const;
};

struct TensorEntry {
  std::string name;
  Mat value;
  bool decay{false};  // participates in weight decay (matrices only)
};

class ParamStore {
 public:
  int add(std::string name, int rows, int cols, bool decay);
  TensorEntry& at(int h) { return entries_[h]; }
  const TensorEntry& at(int h) const { return entries_[h]; }
  int size() const { return static_cast<int>(entries_.size()); }
  std::size_t scalar_count() const;

 private:
  std::vector<TensorEntry> entries_;
};

// Layer descriptors are handles into the parameter store.
struct Linear {
  int w{-1}, b{-1};  // b < 0 means no bias
  int in{0}, out{0};
};
struct LayerNorm {
  int gamma{-1}, beta{-1};
  int dim{0};
};
struct Mlp {
  Linear fc1, fc2;
};
struct AttnUnit {
  LayerNorm ln_q;
  LayerNorm ln_kv;  // used only by cross attention
  Linear q, k, v, o;
  Linear rel_bias;  // relative-pose features -> per-head logit bias, no bias term
  bool cross{false};
};
struct FfUnit {
  LayerNorm ln;
  Linear fc1, fc2;
};
struct EncBlock {
  AttnUnit attn;
  FfUnit ff;
};
struct DenBlock {
  AttnUnit cross;
  FfUnit ff_cross;
  AttnUnit self;
  FfUnit ff_self;
};

struct ModelParams {
  ModelConfig config;
  Standardizer standardizer;
  ParamStore store;

  Mlp agent_embed, map_embed;
  std::vector<EncBlock> enc_blocks;
  Linear fut_embed;
  Linear step_proj;
  std::vector<DenBlock> den_blocks;
  LayerNorm final_ln;
  Linear head;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, deterministic in the seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
std::size_t param_count(const ModelParams& params);

// Gradient accumulator aligned with the parameter store.
struct GradBuffer {
  std::vector<Mat> g;
  static GradBuffer zeros_like(const ParamStore& store);
  void add(const GradBuffer& other);
};

// Model-ready per-scene inputs (rows already in per-agent / per-element local
// frames). In sequence mode the history block widens from 10 to 100 columns.
struct ModelInputs {
  Mat agent_inputs;
  Mat map_inputs;
  std::vector<Pose> agent_frames;
  std::vector<Pose> map_frames;
};
ModelInputs build_inputs(const scene::Scene& s, Representation repr);

// Ground-truth displacement targets (A x future_dim), agent-local. Throws
// DataError when an agent lacks a future.
Mat training_targets(const scene::Scene& s, Representation repr);

// Fixed Fourier features of the relative pose between every (query, key)
// pair, row index qi * |k| + kj. Not learned; smooth in the poses.
Mat relpose_features(const std::vector<Pose>& q, const std::vector<Pose>& k);
int relpose_feature_dim();

// Output of the scene encoder, plus cached pair geometry reused by every
// denoiser call on the same scene.
struct ConditionTokens {
  Mat agent;  // A x D
  Mat map;    // M x D
  Mat rel_aa;
  Mat rel_am;
  std::vector<Pose> agent_frames;
  std::vector<Pose> map_frames;
};

ConditionTokens encode_inputs(const ModelInputs& in, const ModelParams& params);
ConditionTokens encode_scene(const scene::Scene& s, const ModelParams& params);

// eps prediction for standardized noisy displacements at the given step
// indices (one per agent, each in [0, diffusion_steps]).
Mat denoise_predict(const Mat& delta_s, const std::vector<int>& steps,
                    const ConditionTokens& cond, const ModelParams& params);

// Mean over agents of the squared L2 error between noise and prediction.
double loss_mse(const Mat& eps, const Mat& eps_hat);

// Full differentiable graph (encoder + denoiser) for one scene.
struct GraphCache {
  GraphCache();
  ~GraphCache();
  GraphCache(GraphCache&&) noexcept;
  GraphCache& operator=(GraphCache&&) noexcept;
  struct Impl;
  std::unique_ptr<Impl> impl;
};

Mat full_forward(const ModelInputs& in, const Mat& delta_s, const std::vector<int>& steps,
                 const ModelParams& params, bool train, std::mt19937_64* rng,
                 GraphCache* cache);
void full_backward(const Mat& d_eps_hat, const ModelParams& params, GraphCache& cache,
                   GradBuffer& grads);

// Sequence-representation adapters: 10 Hz step displacements in the agent
// frame (A x 100 history, A x 120 future) and the inverse path back to points.
Mat sequence_history(const scene::Scene& s);
Mat sequence_future(const scene::Scene& s);
scene::PointTrajectory sequence_to_points(const Eigen::RowVectorXd& disp, const Pose& frame,
                                          double dt);

}  // namespace epd::net
