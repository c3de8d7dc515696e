#include "loralab/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "loralab/kernels.hpp"
#include "loralab/rng.hpp"

namespace loralab::optim {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::adamw:
      return "adamw";
    case Kind::signsgd:
      return "signsgd";
    case Kind::sgd:
      return "sgd";
  }
  return "?";
}

Kind parse_kind(std::string_view text) {
  if (text == "adamw") return Kind::adamw;
  if (text == "signsgd") return Kind::signsgd;
  if (text == "sgd") return Kind::sgd;
  throw std::invalid_argument("optimizer: expected adamw, signsgd, or sgd");
}

void OptimizerConfig::validate() const {
  // lr == 0 is allowed: a zero learning rate is a legitimate no-op trial.
  if (lr < 0.0) throw std::invalid_argument("optimizer: lr must be >= 0");
  if (eps <= 0.0) throw std::invalid_argument("optimizer: eps must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0) throw std::invalid_argument("optimizer: beta1 must be in [0,1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw std::invalid_argument("optimizer: beta2 must be in [0,1)");
  if (weight_decay < 0.0) throw std::invalid_argument("optimizer: weight_decay must be >= 0");
}

OptimizerState OptimizerState::for_student(const model::StudentState& student,
                                           const OptimizerConfig& cfg) {
  OptimizerState s;
  if (cfg.kind == Kind::adamw) {
    s.m_a.assign(student.a.size(), 0.0);
    s.v_a.assign(student.a.size(), 0.0);
    s.m_b.assign(student.bt.size(), 0.0);
    s.v_b.assign(student.bt.size(), 0.0);
  }
  return s;
}

void step_tensor(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, long t, const OptimizerConfig& cfg) {
  if (p.size() != g.size()) throw std::invalid_argument("optimizer: param/grad shape mismatch");
  switch (cfg.kind) {
    case Kind::adamw: {
      if (m.size() != p.size() || v.size() != p.size())
        throw std::invalid_argument("optimizer: moment/param shape mismatch");
      kernels::AdamConsts consts;
      consts.lr = cfg.lr;
      consts.beta1 = cfg.beta1;
      consts.beta2 = cfg.beta2;
      consts.eps = cfg.eps;
      consts.weight_decay = cfg.weight_decay;
      consts.bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
      consts.bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
      kernels::adamw_update(p.data(), g.data(), m.data(), v.data(), p.size(), consts);
      break;
    }
    case Kind::signsgd:
      kernels::signsgd_update(p.data(), g.data(), p.size(), cfg.lr);
      break;
    case Kind::sgd:
      kernels::sgd_update(p.data(), g.data(), p.size(), cfg.lr);
      break;
  }
}

void step(model::StudentState& student, const model::Grads& grads, OptimizerState& state,
          const OptimizerConfig& cfg) {
  if (grads.da.size() != student.a.size() || grads.dbt.size() != student.bt.size())
    throw std::invalid_argument("optimizer: grad/param shape mismatch");
  state.step += 1;
  step_tensor(student.a.data, grads.da.data, state.m_a, state.v_a, state.step, cfg);
  step_tensor(student.bt.data, grads.dbt.data, state.m_b, state.v_b, state.step, cfg);
}

namespace {

inline double sign_of(double x) { return (x > 0.0 ? 1.0 : 0.0) - (x < 0.0 ? 1.0 : 0.0); }

}  // namespace

AssumptionProbe signsgd_gradient_structure(const model::Grads& grads,
                                           const model::ForwardTrace& trace,
                                           const model::StudentState& student) {
  if (trace.v.rows != 1)
    throw std::invalid_argument("signsgd_gradient_structure: single-sample batches only");
  const int n = student.cfg.n;
  const int r = student.cfg.r;
  const double scale = student.cfg.scale();
  const double* z = trace.u.row(0);
  const double* dyh = grads.dyh.row(0);

  // Recompute S_i with the same kernel calls backward() used, so the signs
  // below are literally those of the factors in dA = (s*S_i) * Z_j.
  std::vector<double> s_vec(r);
  for (int i = 0; i < r; ++i) s_vec[i] = scale * kernels::dot(dyh, student.bt.row(i), n);

  AssumptionProbe probe;
  double residual = 0.0;
  for (int i = 0; i < r; ++i) {
    const double s_sign = sign_of(s_vec[i]);
    for (int j = 0; j < n; ++j) {
      const double lhs = sign_of(grads.da.at(i, j));
      const double rhs = s_sign * sign_of(z[j]);
      const double diff = std::fabs(lhs - rhs);
      if (diff > residual) residual = diff;
    }
  }
  probe.rank1_residual = residual;

  double l1 = 0.0;
  for (int j = 0; j < n; ++j) l1 += std::fabs(z[j]);
  probe.z_l1_norm = l1;

  // g_A Z with g_A = sign(dA), accumulated in the same serial order as the
  // L1 norm above so the identity g_A Z = ||Z||_1 sign(S) holds bit-exactly.
  double inf_norm = 0.0;
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += sign_of(grads.da.at(i, j)) * z[j];
    const double mag = std::fabs(acc);
    if (mag > inf_norm) inf_norm = mag;
  }
  probe.ga_z_inf_norm = inf_norm;
  return probe;
}

std::vector<std::pair<int, double>> probe_assumption_scaling(std::span<const int> widths,
                                                             std::span<const std::uint64_t> seeds,
                                                             Kind kind,
                                                             const model::ModelConfig& base) {
  if (widths.size() < 2)
    throw std::invalid_argument("probe_assumption_scaling: need >= 2 widths for a slope");
  if (seeds.empty()) throw std::invalid_argument("probe_assumption_scaling: need >= 1 seed");
  if (kind == Kind::sgd)
    throw std::invalid_argument("probe_assumption_scaling: probe is about processed gradients");

  std::vector<std::pair<int, double>> out;
  out.reserve(widths.size());
  for (const int width : widths) {
    model::ModelConfig cfg = base;
    cfg.n = width;
    double acc = 0.0;
    for (const std::uint64_t seed : seeds) {
      const auto student =
          model::init_student(cfg, gamma::InitScheme::B, rng::mix({seed, 0xB0D7ULL}));
      rng::GaussianStream data_stream(rng::mix({seed, 0xDA7AULL, static_cast<std::uint64_t>(width)}));
      Matrix x(1, cfg.d);
      data_stream.fill_normal(x.data.data(), x.size(), 1.0);
      const std::vector<double> target{data_stream.normal()};
      const auto trace = model::forward(student, x);
      const auto grads = model::backward(student, trace, target);

      // Processed gradient at step 1: exact sign for signsgd, the
      // bias-corrected normalized first step for adamw.
      std::vector<double> g(grads.da.data);
      if (kind == Kind::signsgd) {
        for (double& v : g) v = sign_of(v);
      } else {
        OptimizerConfig probe_cfg;
        probe_cfg.kind = Kind::adamw;
        const double bias1 = 1.0 - probe_cfg.beta1;
        const double bias2 = 1.0 - probe_cfg.beta2;
        for (double& v : g) {
          const double m_hat = ((1.0 - probe_cfg.beta1) * v) / bias1;
          const double v_hat = ((1.0 - probe_cfg.beta2) * (v * v)) / bias2;
          v = m_hat / (std::sqrt(v_hat) + probe_cfg.eps);
        }
      }

      const double* z = trace.u.row(0);
      double inf_norm = 0.0;
      for (int i = 0; i < cfg.r; ++i) {
        double row_acc = 0.0;
        const double* g_row = g.data() + static_cast<std::size_t>(i) * cfg.n;
        for (int j = 0; j < cfg.n; ++j) row_acc += g_row[j] * z[j];
        inf_norm = std::max(inf_norm, std::fabs(row_acc));
      }
      acc += inf_norm;
    }
    out.emplace_back(width, acc / static_cast<double>(seeds.size()));
  }
  return out;
}

}  // namespace loralab::optim
