#include "epd/net.hpp"

#include <algorithm>
#include <cmath>

namespace epd::net {

namespace {
constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
// Geometric ladder of wavelengths (meters) for the pairwise Fourier features.
constexpr double kWavelengths[] = {2.5, 10.0, 40.0, 160.0};
}  // namespace

std::string to_string(Representation r) {
  return r == Representation::polynomial ? "polynomial" : "sequence";
}

Representation representation_from_string(const std::string& s) {
  if (s == "polynomial") return Representation::polynomial;
  if (s == "sequence") return Representation::sequence;
  throw ConfigError("unknown representation '" + s + "'");
}

void ModelConfig::validate() const {
  if (hidden_dim < 2 || hidden_dim % 2 != 0)
    throw ConfigError("model: hidden_dim must be a positive even number");
  if (n_heads < 1 || hidden_dim % n_heads != 0)
    throw ConfigError("model: hidden_dim must be divisible by n_heads");
  if (n_enc_blocks < 1 || n_denoise_blocks < 1)
    throw ConfigError("model: block counts must be >= 1");
  if (!(dropout >= 0.0) || dropout >= 1.0)
    throw ConfigError("model: dropout must lie in [0, 1)");
  if (diffusion_steps < 1) throw ConfigError("model: diffusion_steps must be >= 1");
}

Standardizer Standardizer::identity(int dim) {
  Standardizer s;
  s.mean = Eigen::VectorXd::Zero(dim);
  s.std = Eigen::VectorXd::Ones(dim);
  return s;
}

Mat Standardizer::apply(const Mat& x) const {
  if (x.cols() != mean.size())
    throw std::invalid_argument("standardizer: dimension mismatch");
  return ((x.rowwise() - mean.transpose()).array().rowwise() /
          std.transpose().array())
      .matrix();
}

Mat Standardizer::invert(const Mat& z) const {
  if (z.cols() != mean.size())
    throw std::invalid_argument("standardizer: dimension mismatch");
  return (z.array().rowwise() * std.transpose().array()).matrix().rowwise() +
         mean.transpose();
}

int ParamStore::add(std::string name, int rows, int cols, bool decay) {
  entries_.push_back({std::move(name), Mat::Zero(rows, cols), decay});
  return static_cast<int>(entries_.size()) - 1;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

GradBuffer GradBuffer::zeros_like(const ParamStore& store) {
  GradBuffer b;
  b.g.reserve(store.size());
  for (int i = 0; i < store.size(); ++i)
    b.g.push_back(Mat::Zero(store.at(i).value.rows(), store.at(i).value.cols()));
  return b;
}

void GradBuffer::add(const GradBuffer& other) {
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += other.g[i];
}

// ---------------------------------------------------------------------------
// layout construction + init

namespace {

void init_uniform(Mat& m, double bound, std::mt19937_64* rng) {
  if (!rng) return;
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(*rng);
}

Linear make_linear(ParamStore& s, const std::string& name, int in, int out,
                   std::mt19937_64* rng, bool bias = true) {
  Linear l;
  l.in = in;
  l.out = out;
  l.w = s.add(name + ".w", out, in, /*decay=*/true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  init_uniform(s.at(l.w).value, bound, rng);
  if (bias) {
    l.b = s.add(name + ".b", out, 1, /*decay=*/false);
    init_uniform(s.at(l.b).value, bound, rng);
  }
  return l;
}

LayerNorm make_ln(ParamStore& s, const std::string& name, int dim) {
  LayerNorm ln;
  ln.dim = dim;
  ln.gamma = s.add(name + ".gamma", dim, 1, /*decay=*/false);
  s.at(ln.gamma).value.setOnes();
  ln.beta = s.add(name + ".beta", dim, 1, /*decay=*/false);
  return ln;
}

AttnUnit make_attn(ParamStore& s, const std::string& name, int dim, int n_heads,
                   bool cross, std::mt19937_64* rng) {
  AttnUnit u;
  u.cross = cross;
  u.ln_q = make_ln(s, name + ".lnq", dim);
  if (cross) u.ln_kv = make_ln(s, name + ".lnkv", dim);
  u.q = make_linear(s, name + ".q", dim, dim, rng);
  u.k = make_linear(s, name + ".k", dim, dim, rng);
  u.v = make_linear(s, name + ".v", dim, dim, rng);
  u.o = make_linear(s, name + ".o", dim, dim, rng);
  u.rel_bias = make_linear(s, name + ".relbias", relpose_feature_dim(), n_heads, rng,
                           /*bias=*/false);
  return u;
}

FfUnit make_ff(ParamStore& s, const std::string& name, int dim, int hidden,
               std::mt19937_64* rng) {
  FfUnit f;
  f.ln = make_ln(s, name + ".ln", dim);
  f.fc1 = make_linear(s, name + ".fc1", dim, hidden, rng);
  f.fc2 = make_linear(s, name + ".fc2", hidden, dim, rng);
  return f;
}

ModelParams build_model(const ModelConfig& config, std::mt19937_64* rng);

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  auto rng = make_rng({seed, 0x117});
  return build_model(config, &rng);
}

std::size_t param_count(const ModelParams& params) { return params.store.scalar_count(); }

// ---------------------------------------------------------------------------
// dense layers

namespace {

Mat linear_forward(const ParamStore& s, const Linear& l, const Mat& x) {
  Mat y = x * s.at(l.w).value.transpose();
  if (l.b >= 0) y.rowwise() += s.at(l.b).value.col(0).transpose();
  return y;
}

Mat linear_backward(const ParamStore& s, const Linear& l, const Mat& x, const Mat& dy,
                    GradBuffer& g) {
  g.g[l.w] += dy.transpose() * x;
  if (l.b >= 0) g.g[l.b].col(0) += dy.colwise().sum().transpose();
  return dy * s.at(l.w).value;
}

struct LnCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

Mat layernorm_forward(const ParamStore& s, const LayerNorm& ln, const Mat& x, LnCache* c) {
  const Eigen::VectorXd mean = x.rowwise().mean();
  Mat centered = x.colwise() - mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().mean().matrix();
  const Eigen::VectorXd inv_std = (var.array() + kLnEps).rsqrt().matrix();
  Mat xhat = (centered.array().colwise() * inv_std.array()).matrix();
  Mat y = (xhat.array().rowwise() * s.at(ln.gamma).value.col(0).transpose().array())
              .matrix();
  y.rowwise() += s.at(ln.beta).value.col(0).transpose();
  if (c) {
    c->xhat = std::move(xhat);
    c->inv_std = inv_std;
    return y;
  }
  return y;
}

Mat layernorm_backward(const ParamStore& s, const LayerNorm& ln, const LnCache& c,
                       const Mat& dy, GradBuffer& grads) {
  const double d = static_cast<double>(ln.dim);
  grads.g[ln.gamma].col(0) +=
      (dy.array() * c.xhat.array()).colwise().sum().matrix().transpose();
  grads.g[ln.beta].col(0) += dy.colwise().sum().transpose();
  const Mat g =
      (dy.array().rowwise() * s.at(ln.gamma).value.col(0).transpose().array()).matrix();
  const Eigen::VectorXd sum_g = g.rowwise().sum();
  const Eigen::VectorXd sum_gx = (g.array() * c.xhat.array()).rowwise().sum().matrix();
  Mat dx = d * g;
  dx.colwise() -= sum_g;
  dx -= (c.xhat.array().colwise() * sum_gx.array()).matrix();
  dx.array().colwise() *= (c.inv_std.array() / d);
  return dx;
}

Mat gelu(const Mat& a) {
  return a.unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); });
}

Mat gelu_backward(const Mat& a, const Mat& dz) {
  const Mat slope = a.unaryExpr([](double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) * kInvSqrt2Pi;
    return cdf + x * pdf;
  });
  return dz.cwiseProduct(slope);
}

// Inverted dropout; the mask already includes the 1/(1-p) keep scaling.
void apply_dropout(Mat& x, double p, bool train, std::mt19937_64* rng, Mat* mask_out) {
  if (!train || p <= 0.0) {
    if (mask_out) mask_out->resize(0, 0);
    return;
  }
  if (!rng) throw ModelError("dropout requires an RNG in training mode");
  std::bernoulli_distribution keep(1.0 - p);
  Mat mask(x.rows(), x.cols());
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) mask(i, j) = keep(*rng) ? scale : 0.0;
  x = x.cwiseProduct(mask);
  if (mask_out) *mask_out = std::move(mask);
}

// ---------------------------------------------------------------------------
// attention

struct AttnCache {
  LnCache lnq, lnkv;
  Mat hq, hkv;
  Mat q, k, v;
  std::vector<Mat> probs;
  Mat ctx;
  Mat drop_mask;
};

Mat attn_forward(const ParamStore& s, const AttnUnit& u, const Mat& xq, const Mat& xkv,
                 const Mat& rel, int n_heads, double dropout, bool train,
                 std::mt19937_64* rng, AttnCache* c) {
  const Eigen::Index nq = xq.rows(), nk = xkv.rows();
  const int dim = u.q.in;
  const int dh = dim / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  LnCache lnq_local, lnkv_local;
  const Mat hq = layernorm_forward(s, u.ln_q, xq, c ? &lnq_local : nullptr);
  Mat hkv;
  if (u.cross) {
    hkv = layernorm_forward(s, u.ln_kv, xkv, c ? &lnkv_local : nullptr);
  } else {
    hkv = hq;  // self attention: xq == xkv by construction
  }
  const Mat q = linear_forward(s, u.q, hq);
  const Mat k = linear_forward(s, u.k, hkv);
  const Mat v = linear_forward(s, u.v, hkv);
  const Mat bias = rel * s.at(u.rel_bias.w).value.transpose();  // (nq*nk) x H

  Mat ctx(nq, dim);
  std::vector<Mat> probs;
  if (c) probs.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    Mat logits = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
    for (Eigen::Index i = 0; i < nq; ++i)
      for (Eigen::Index j = 0; j < nk; ++j) logits(i, j) += bias(i * nk + j, h);
    // Row-wise softmax with the max-shift trick.
    for (Eigen::Index i = 0; i < nq; ++i) {
      const double mx = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - mx).exp().matrix();
      logits.row(i) /= logits.row(i).sum();
    }
    ctx.middleCols(h * dh, dh) = logits * v.middleCols(h * dh, dh);
    if (c) probs.push_back(std::move(logits));
  }
  Mat out = linear_forward(s, u.o, ctx);
  apply_dropout(out, dropout, train, rng, c ? &c->drop_mask : nullptr);
  if (c) {
    c->lnq = std::move(lnq_local);
    c->lnkv = std::move(lnkv_local);
    c->hq = hq;
    c->hkv = hkv;
    c->q = q;
    c->k = k;
    c->v = v;
    c->probs = std::move(probs);
    c->ctx = ctx;
  }
  return xq + out;
}

// Returns the gradient w.r.t. xq; for cross attention the xkv gradient is
// accumulated into *dxkv.
Mat attn_backward(const ParamStore& s, const AttnUnit& u, const Mat& rel, int n_heads,
                  const AttnCache& c, const Mat& dout, GradBuffer& g, Mat* dxkv) {
  const Eigen::Index nq = c.q.rows(), nk = c.k.rows();
  const int dim = u.q.in;
  const int dh = dim / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat dO = dout;
  if (c.drop_mask.size() > 0) dO = dO.cwiseProduct(c.drop_mask);
  const Mat dctx = linear_backward(s, u.o, c.ctx, dO, g);

  Mat dq(nq, dim), dk(nk, dim), dv(nk, dim);
  Mat dbias(nq * nk, n_heads);
  for (int h = 0; h < n_heads; ++h) {
    const auto qh = c.q.middleCols(h * dh, dh);
    const auto kh = c.k.middleCols(h * dh, dh);
    const auto vh = c.v.middleCols(h * dh, dh);
    const Mat& p = c.probs[h];
    const auto dctx_h = dctx.middleCols(h * dh, dh);
    const Mat dp = dctx_h * vh.transpose();
    dv.middleCols(h * dh, dh) = p.transpose() * dctx_h;
    // softmax backward
    const Eigen::VectorXd dot = (dp.array() * p.array()).rowwise().sum().matrix();
    Mat dlogits = (dp.colwise() - dot).cwiseProduct(p);
    dq.middleCols(h * dh, dh) = dlogits * kh * scale;
    dk.middleCols(h * dh, dh) = dlogits.transpose() * qh * scale;
    for (Eigen::Index i = 0; i < nq; ++i)
      for (Eigen::Index j = 0; j < nk; ++j) dbias(i * nk + j, h) = dlogits(i, j);
  }
  linear_backward(s, u.rel_bias, rel, dbias, g);  // d_rel discarded (not learned)

  const Mat dhq = linear_backward(s, u.q, c.hq, dq, g);
  const Mat dhkv = linear_backward(s, u.k, c.hkv, dk, g) +
                   linear_backward(s, u.v, c.hkv, dv, g);
  if (u.cross) {
    if (dxkv) *dxkv += layernorm_backward(s, u.ln_kv, c.lnkv, dhkv, g);
    return dout + layernorm_backward(s, u.ln_q, c.lnq, dhq, g);
  }
  return dout + layernorm_backward(s, u.ln_q, c.lnq, dhq + dhkv, g);
}

// ---------------------------------------------------------------------------
// feed-forward + embedding MLPs

struct FfCache {
  LnCache ln;
  Mat h, a, z;
  Mat drop_mask;
};

Mat ff_forward(const ParamStore& s, const FfUnit& u, const Mat& x, double dropout,
               bool train, std::mt19937_64* rng, FfCache* c) {
  const Mat h = layernorm_forward(s, u.ln, x, c ? &c->ln : nullptr);
  const Mat a = linear_forward(s, u.fc1, h);
  const Mat z = gelu(a);
  Mat out = linear_forward(s, u.fc2, z);
  apply_dropout(out, dropout, train, rng, c ? &c->drop_mask : nullptr);
  if (c) {
    c->h = h;
    c->a = a;
    c->z = z;
  }
  return x + out;
}

Mat ff_backward(const ParamStore& s, const FfUnit& u, const FfCache& c, const Mat& dout,
                GradBuffer& g) {
  Mat dO = dout;
  if (c.drop_mask.size() > 0) dO = dO.cwiseProduct(c.drop_mask);
  const Mat dz = linear_backward(s, u.fc2, c.z, dO, g);
  const Mat da = gelu_backward(c.a, dz);
  const Mat dh = linear_backward(s, u.fc1, c.h, da, g);
  return dout + layernorm_backward(s, u.ln, c.ln, dh, g);
}

struct MlpCache {
  Mat x, a, z;
};

Mat mlp_forward(const ParamStore& s, const Mlp& m, const Mat& x, MlpCache* c) {
  const Mat a = linear_forward(s, m.fc1, x);
  const Mat z = gelu(a);
  const Mat y = linear_forward(s, m.fc2, z);
  if (c) {
    c->x = x;
    c->a = a;
    c->z = z;
  }
  return y;
}

void mlp_backward(const ParamStore& s, const Mlp& m, const MlpCache& c, const Mat& dy,
                  GradBuffer& g) {
  const Mat dz = linear_backward(s, m.fc2, c.z, dy, g);
  const Mat da = gelu_backward(c.a, dz);
  linear_backward(s, m.fc1, c.x, da, g);  // input is data; its grad is dropped
}

Mat sin_embedding(const std::vector<int>& steps, int dim) {
  Mat e(static_cast<Eigen::Index>(steps.size()), dim);
  const int half = dim / 2;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (int k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * (2.0 * k) / dim);
      const double arg = steps[i] * freq;
      e(i, 2 * k) = std::sin(arg);
      e(i, 2 * k + 1) = std::cos(arg);
    }
  }
  return e;
}

ModelParams build_model(const ModelConfig& config, std::mt19937_64* rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.standardizer = Standardizer::identity(config.future_dim());
  ParamStore& s = p.store;
  const int d = config.hidden_dim;

  p.agent_embed.fc1 = make_linear(s, "agent_embed.fc1", config.agent_input_dim(), d, rng);
  p.agent_embed.fc2 = make_linear(s, "agent_embed.fc2", d, d, rng);
  p.map_embed.fc1 = make_linear(s, "map_embed.fc1", config.map_input_dim(), d, rng);
  p.map_embed.fc2 = make_linear(s, "map_embed.fc2", d, d, rng);
  for (int b = 0; b < config.n_enc_blocks; ++b) {
    const std::string base = "enc.b" + std::to_string(b);
    EncBlock blk;
    blk.attn = make_attn(s, base + ".attn", d, config.n_heads, /*cross=*/false, rng);
    blk.ff = make_ff(s, base + ".ff", d, config.ff_dim(), rng);
    p.enc_blocks.push_back(blk);
  }
  p.fut_embed = make_linear(s, "den.fut_embed", config.future_dim(), d, rng);
  p.step_proj = make_linear(s, "den.step_proj", d, d, rng);
  for (int b = 0; b < config.n_denoise_blocks; ++b) {
    const std::string base = "den.b" + std::to_string(b);
    DenBlock blk;
    blk.cross = make_attn(s, base + ".cross", d, config.n_heads, /*cross=*/true, rng);
    blk.ff_cross = make_ff(s, base + ".ffc", d, config.ff_dim(), rng);
    blk.self = make_attn(s, base + ".self", d, config.n_heads, /*cross=*/false, rng);
    blk.ff_self = make_ff(s, base + ".ffs", d, config.ff_dim(), rng);
    p.den_blocks.push_back(blk);
  }
  p.final_ln = make_ln(s, "final_ln", d);
  p.head = make_linear(s, "head", d, config.future_dim(), rng);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// relative-pose features

int relpose_feature_dim() { return 4 * std::size(kWavelengths) + 4; }

Mat relpose_features(const std::vector<Pose>& q, const std::vector<Pose>& k) {
  const Eigen::Index nq = static_cast<Eigen::Index>(q.size());
  const Eigen::Index nk = static_cast<Eigen::Index>(k.size());
  Mat f(nq * nk, relpose_feature_dim());
  for (Eigen::Index i = 0; i < nq; ++i) {
    const Pose& qi = q[i];
    for (Eigen::Index j = 0; j < nk; ++j) {
      const Pose& kj = k[j];
      const Vec2 delta = (kj.position - qi.position).rotated(-qi.heading);
      const double dth = wrap_angle(kj.heading - qi.heading);
      Eigen::Index col = 0;
      for (double lam : kWavelengths) {
        const double wx = 2.0 * M_PI * delta.x / lam;
        const double wy = 2.0 * M_PI * delta.y / lam;
        f(i * nk + j, col++) = std::sin(wx);
        f(i * nk + j, col++) = std::cos(wx);
        f(i * nk + j, col++) = std::sin(wy);
        f(i * nk + j, col++) = std::cos(wy);
      }
      f(i * nk + j, col++) = std::sin(dth);
      f(i * nk + j, col++) = std::cos(dth);
      f(i * nk + j, col++) = std::sin(2.0 * dth);
      f(i * nk + j, col++) = std::cos(2.0 * dth);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// inputs + targets

ModelInputs build_inputs(const scene::Scene& s, Representation repr) {
  const scene::SceneFeatures f = scene::pack_features(s);
  ModelInputs in;
  in.map_inputs = f.map_inputs;
  in.agent_frames = f.agent_frames;
  in.map_frames = f.map_frames;
  if (repr == Representation::polynomial) {
    in.agent_inputs = f.agent_inputs;
  } else {
    const Mat hist = sequence_history(s);
    in.agent_inputs.resize(f.agent_inputs.rows(), 100 + 6);
    in.agent_inputs.leftCols(100) = hist;
    in.agent_inputs.rightCols(6) = f.agent_inputs.rightCols(6);
  }
  return in;
}

Mat training_targets(const scene::Scene& s, Representation repr) {
  if (repr == Representation::sequence) return sequence_future(s);
  Mat t(static_cast<Eigen::Index>(s.agents.size()), 12);
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const scene::Agent& a = s.agents[i];
    if (!a.future)
      throw DataError("scene '" + s.scene_id + "': agent '" + a.id + "' lacks a future");
    const auto local = scene::to_frame(*a.future, scene::agent_frame(a));
    const auto disp = poly::to_displacements(local);
    for (int k = 0; k < 12; ++k) t(i, k) = disp[k];
  }
  return t;
}

Mat sequence_history(const scene::Scene& s) {
  Mat out(static_cast<Eigen::Index>(s.agents.size()), 100);
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const scene::Agent& a = s.agents[i];
    const Pose frame = scene::agent_frame(a);
    Vec2 prev = frame.to_local(a.history.eval(0.0));
    for (int k = 1; k <= 50; ++k) {
      const Vec2 cur = frame.to_local(a.history.eval(scene::kHistoryDuration * k / 50.0));
      out(i, 2 * (k - 1)) = cur.x - prev.x;
      out(i, 2 * (k - 1) + 1) = cur.y - prev.y;
      prev = cur;
    }
  }
  return out;
}

Mat sequence_future(const scene::Scene& s) {
  Mat out(static_cast<Eigen::Index>(s.agents.size()), 120);
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const scene::Agent& a = s.agents[i];
    if (!a.future)
      throw DataError("scene '" + s.scene_id + "': agent '" + a.id + "' lacks a future");
    const Pose frame = scene::agent_frame(a);
    Vec2 prev = frame.to_local(a.future->eval(0.0));
    for (int k = 1; k <= 60; ++k) {
      const Vec2 cur = frame.to_local(a.future->eval(a.future->duration() * k / 60.0));
      out(i, 2 * (k - 1)) = cur.x - prev.x;
      out(i, 2 * (k - 1) + 1) = cur.y - prev.y;
      prev = cur;
    }
  }
  return out;
}

scene::PointTrajectory sequence_to_points(const Eigen::RowVectorXd& disp, const Pose& frame,
                                          double dt) {
  if (disp.size() % 2 != 0)
    throw std::invalid_argument("sequence_to_points: even displacement count required");
  scene::PointTrajectory traj;
  traj.dt = dt;
  Vec2 local{0.0, 0.0};
  traj.points.push_back(frame.to_global(local));
  for (Eigen::Index k = 0; k + 1 < disp.size(); k += 2) {
    local += Vec2{disp[k], disp[k + 1]};
    traj.points.push_back(frame.to_global(local));
  }
  return traj;
}

// ---------------------------------------------------------------------------
// full graph

struct GraphCache::Impl {
  int a{0}, m{0};
  Mat rel_nn, rel_aa, rel_am;
  MlpCache agent_embed, map_embed;
  std::vector<AttnCache> enc_attn;
  std::vector<FfCache> enc_ff;

  Mat delta_s, sinemb;
  std::vector<AttnCache> den_cross, den_self;
  std::vector<FfCache> den_ffc, den_ffs;
  LnCache final_ln;
  Mat head_in;
};

GraphCache::GraphCache() : impl(std::make_unique<Impl>()) {}
GraphCache::~GraphCache() = default;
GraphCache::GraphCache(GraphCache&&) noexcept = default;
GraphCache& GraphCache::operator=(GraphCache&&) noexcept = default;

namespace {

struct ForwardOut {
  Mat tokens;   // encoder output, (A+M) x D
  Mat eps_hat;  // A x future_dim
};

// Shared by training (cache != nullptr) and inference paths.
Mat encoder_pass(const ModelInputs& in, const ModelParams& p, const Mat& rel_nn, bool train,
                 std::mt19937_64* rng, GraphCache::Impl* c) {
  const Eigen::Index a = in.agent_inputs.rows(), m = in.map_inputs.rows();
  const Mat ea = mlp_forward(p.store, p.agent_embed, in.agent_inputs,
                             c ? &c->agent_embed : nullptr);
  const Mat em =
      mlp_forward(p.store, p.map_embed, in.map_inputs, c ? &c->map_embed : nullptr);
  Mat tokens(a + m, p.config.hidden_dim);
  tokens.topRows(a) = ea;
  tokens.bottomRows(m) = em;
  if (c) {
    c->enc_attn.resize(p.enc_blocks.size());
    c->enc_ff.resize(p.enc_blocks.size());
  }
  for (std::size_t b = 0; b < p.enc_blocks.size(); ++b) {
    tokens = attn_forward(p.store, p.enc_blocks[b].attn, tokens, tokens, rel_nn,
                          p.config.n_heads, p.config.dropout, train, rng,
                          c ? &c->enc_attn[b] : nullptr);
    tokens = ff_forward(p.store, p.enc_blocks[b].ff, tokens, p.config.dropout, train, rng,
                        c ? &c->enc_ff[b] : nullptr);
  }
  return tokens;
}

Mat denoiser_pass(const Mat& delta_s, const std::vector<int>& steps, const Mat& c_agent,
                  const Mat& c_map, const Mat& rel_aa, const Mat& rel_am,
                  const ModelParams& p, bool train, std::mt19937_64* rng,
                  GraphCache::Impl* c) {
  const Eigen::Index a = delta_s.rows();
  if (static_cast<Eigen::Index>(steps.size()) != a)
    throw std::invalid_argument("denoiser: one step index per agent required");
  for (int s : steps)
    if (s < 0 || s > p.config.diffusion_steps)
      throw std::domain_error("denoiser: step outside [0, diffusion_steps]");
  if (delta_s.cols() != p.config.future_dim())
    throw std::invalid_argument("denoiser: state width must equal future_dim");

  const Mat sinemb = sin_embedding(steps, p.config.hidden_dim);
  Mat t = linear_forward(p.store, p.fut_embed, delta_s) +
          linear_forward(p.store, p.step_proj, sinemb) + c_agent;
  if (c) {
    c->delta_s = delta_s;
    c->sinemb = sinemb;
    c->den_cross.resize(p.den_blocks.size());
    c->den_self.resize(p.den_blocks.size());
    c->den_ffc.resize(p.den_blocks.size());
    c->den_ffs.resize(p.den_blocks.size());
  }
  const bool has_map = c_map.rows() > 0;
  for (std::size_t b = 0; b < p.den_blocks.size(); ++b) {
    const DenBlock& blk = p.den_blocks[b];
    if (has_map) {
      t = attn_forward(p.store, blk.cross, t, c_map, rel_am, p.config.n_heads,
                       p.config.dropout, train, rng, c ? &c->den_cross[b] : nullptr);
      t = ff_forward(p.store, blk.ff_cross, t, p.config.dropout, train, rng,
                     c ? &c->den_ffc[b] : nullptr);
    }
    t = attn_forward(p.store, blk.self, t, t, rel_aa, p.config.n_heads, p.config.dropout,
                     train, rng, c ? &c->den_self[b] : nullptr);
    t = ff_forward(p.store, blk.ff_self, t, p.config.dropout, train, rng,
                   c ? &c->den_ffs[b] : nullptr);
  }
  Mat head_in = layernorm_forward(p.store, p.final_ln, t, c ? &c->final_ln : nullptr);
  if (c) c->head_in = head_in;
  return linear_forward(p.store, p.head, head_in);
}

std::vector<Pose> concat_frames(const ModelInputs& in) {
  std::vector<Pose> all = in.agent_frames;
  all.insert(all.end(), in.map_frames.begin(), in.map_frames.end());
  return all;
}

}  // namespace

ConditionTokens encode_inputs(const ModelInputs& in, const ModelParams& params) {
  if (in.agent_inputs.cols() != params.config.agent_input_dim())
    throw std::invalid_argument("encode: agent input width mismatch");
  if (in.map_inputs.rows() > 0 && in.map_inputs.cols() != params.config.map_input_dim())
    throw std::invalid_argument("encode: map input width mismatch");
  const Mat rel_nn = relpose_features(concat_frames(in), concat_frames(in));
  const Mat tokens = encoder_pass(in, params, rel_nn, /*train=*/false, nullptr, nullptr);
  ConditionTokens ct;
  ct.agent = tokens.topRows(in.agent_inputs.rows());
  ct.map = tokens.bottomRows(in.map_inputs.rows());
  ct.rel_aa = relpose_features(in.agent_frames, in.agent_frames);
  ct.rel_am = relpose_features(in.agent_frames, in.map_frames);
  ct.agent_frames = in.agent_frames;
  ct.map_frames = in.map_frames;
  return ct;
}

ConditionTokens encode_scene(const scene::Scene& s, const ModelParams& params) {
  return encode_inputs(build_inputs(s, params.config.representation), params);
}

Mat denoise_predict(const Mat& delta_s, const std::vector<int>& steps,
                    const ConditionTokens& cond, const ModelParams& params) {
  if (delta_s.rows() != cond.agent.rows())
    throw std::invalid_argument("denoise_predict: one state row per agent required");
  return denoiser_pass(delta_s, steps, cond.agent, cond.map, cond.rel_aa, cond.rel_am,
                       params, /*train=*/false, nullptr, nullptr);
}

double loss_mse(const Mat& eps, const Mat& eps_hat) {
  if (eps.rows() != eps_hat.rows() || eps.cols() != eps_hat.cols())
    throw std::invalid_argument("loss_mse: shape mismatch");
  if (eps.rows() == 0) return 0.0;
  return (eps - eps_hat).squaredNorm() / static_cast<double>(eps.rows());
}

Mat full_forward(const ModelInputs& in, const Mat& delta_s, const std::vector<int>& steps,
                 const ModelParams& params, bool train, std::mt19937_64* rng,
                 GraphCache* cache) {
  if (in.agent_inputs.cols() != params.config.agent_input_dim())
    throw std::invalid_argument("full_forward: agent input width mismatch");
  if (delta_s.rows() != in.agent_inputs.rows())
    throw std::invalid_argument("full_forward: one state row per agent required");
  GraphCache::Impl* c = cache ? cache->impl.get() : nullptr;
  const Eigen::Index a = in.agent_inputs.rows(), m = in.map_inputs.rows();
  Mat rel_nn = relpose_features(concat_frames(in), concat_frames(in));
  Mat rel_aa = relpose_features(in.agent_frames, in.agent_frames);
  Mat rel_am = relpose_features(in.agent_frames, in.map_frames);
  if (c) {
    c->a = static_cast<int>(a);
    c->m = static_cast<int>(m);
    c->rel_nn = rel_nn;
    c->rel_aa = rel_aa;
    c->rel_am = rel_am;
  }
  const Mat tokens = encoder_pass(in, params, c ? c->rel_nn : rel_nn, train, rng, c);
  return denoiser_pass(delta_s, steps, tokens.topRows(a), tokens.bottomRows(m),
                       c ? c->rel_aa : rel_aa, c ? c->rel_am : rel_am, params, train, rng,
                       c);
}

void full_backward(const Mat& d_eps_hat, const ModelParams& params, GraphCache& cache,
                   GradBuffer& grads) {
  GraphCache::Impl& c = *cache.impl;
  const ParamStore& s = params.store;
  const int a = c.a, m = c.m;

  // Denoiser head.
  Mat dt = linear_backward(s, params.head, c.head_in, d_eps_hat, grads);
  dt = layernorm_backward(s, params.final_ln, c.final_ln, dt, grads);

  Mat d_cmap = Mat::Zero(m, params.config.hidden_dim);
  const bool has_map = m > 0;
  for (int b = static_cast<int>(params.den_blocks.size()) - 1; b >= 0; --b) {
    const DenBlock& blk = params.den_blocks[b];
    dt = ff_backward(s, blk.ff_self, c.den_ffs[b], dt, grads);
    dt = attn_backward(s, blk.self, c.rel_aa, params.config.n_heads, c.den_self[b], dt,
                       grads, nullptr);
    if (has_map) {
      dt = ff_backward(s, blk.ff_cross, c.den_ffc[b], dt, grads);
      dt = attn_backward(s, blk.cross, c.rel_am, params.config.n_heads, c.den_cross[b], dt,
                         grads, &d_cmap);
    }
  }
  // Input sum: fut_embed(delta) + step_proj(sinemb) + c_agent.
  linear_backward(s, params.fut_embed, c.delta_s, dt, grads);
  linear_backward(s, params.step_proj, c.sinemb, dt, grads);

  Mat d_tokens(a + m, params.config.hidden_dim);
  d_tokens.topRows(a) = dt;
  d_tokens.bottomRows(m) = d_cmap;
  for (int b = static_cast<int>(params.enc_blocks.size()) - 1; b >= 0; --b) {
    d_tokens = ff_backward(s, params.enc_blocks[b].ff, c.enc_ff[b], d_tokens, grads);
    d_tokens = attn_backward(s, params.enc_blocks[b].attn, c.rel_nn, params.config.n_heads,
                             c.enc_attn[b], d_tokens, grads, nullptr);
  }
  mlp_backward(s, params.agent_embed, c.agent_embed, d_tokens.topRows(a), grads);
  mlp_backward(s, params.map_embed, c.map_embed, d_tokens.bottomRows(m), grads);
}

}  // namespace epd::net
