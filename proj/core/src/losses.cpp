// SPDX-License-Identifier: Apache-2.0
#include "prefopt/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "prefopt/error.hpp"

namespace prefopt {

namespace {

// -log(sigmoid(z)) = softplus(-z), without overflow for large |z|.
double neg_log_sigmoid(double z) {
  const double x = -z;
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// sigmoid(-z).
double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double hinge(double a) { return a > 0.0 ? a : 0.0; }

// Per-row value and partial derivatives w.r.t. lp_w_policy / lp_l_policy.
struct RowTerm {
  double value = 0.0;
  double d_w = 0.0;
  double d_l = 0.0;
};

double dpo_margin(const LogProbRow& r, double beta) {
  return beta * (r.lp_w_policy - r.lp_w_ref) - beta * (r.lp_l_policy - r.lp_l_ref);
}

double simpo_margin(const LogProbRow& r, double beta) {
  return beta * r.lp_w_policy / r.len_w - beta * r.lp_l_policy / r.len_l;
}

double ipo_gap(const LogProbRow& r) {
  return (r.lp_w_policy - r.lp_w_ref) - (r.lp_l_policy - r.lp_l_ref);
}

// -log sigmoid(z) with dz/dlp_w = dz_w, dz/dlp_l = dz_l.
RowTerm sigmoid_term(double z, double dz_w, double dz_l) {
  const double s = sigmoid_neg(z);
  return {neg_log_sigmoid(z), -s * dz_w, -s * dz_l};
}

RowTerm dpo_row(const LogProbRow& r, double beta) {
  return sigmoid_term(dpo_margin(r, beta), beta, -beta);
}

RowTerm ipo_row(const LogProbRow& r, double tau) {
  const double h = ipo_gap(r) - 1.0 / (2.0 * tau);
  return {h * h, 2.0 * h, -2.0 * h};
}

RowTerm simpo_row(const LogProbRow& r, double beta, double gamma) {
  const double z = simpo_margin(r, beta) - gamma;
  return sigmoid_term(z, beta / r.len_w, -beta / r.len_l);
}

// Adds lambda * max(0, a) where da/dlp_w = -slope. With lambda = 0 the
// value and gradient gain an exact +0.
void add_hinge(RowTerm& t, double a, double lambda, double slope) {
  t.value += lambda * hinge(a);
  if (a > 0.0) t.d_w -= lambda * slope;
}

double budget_argument(const LogProbRow& r, double delta) {
  return (r.lp_w_ref - r.lp_w_policy) - delta;
}

double simpo_budget_argument(const LogProbRow& r, double delta) {
  return -r.lp_w_policy / r.len_w - delta;
}

template <class RowFn>
LossOutput reduce(std::span<const LogProbRow> batch, const LossConfig& cfg, RowFn row_fn) {
  validate(batch);
  const double n = static_cast<double>(batch.size());
  LossOutput out;
  out.grad_lp_w.reserve(batch.size());
  out.grad_lp_l.reserve(batch.size());
  double total = 0.0;
  for (const auto& r : batch) {
    const RowTerm t = row_fn(r);
    total += t.value;
    out.grad_lp_w.push_back(t.d_w / n);
    out.grad_lp_l.push_back(t.d_l / n);
  }
  out.loss = total / n;
  if (!std::isfinite(out.loss)) throw DataError("loss is not finite");
  out.metrics = compute_metrics(batch, cfg);
  return out;
}

LossConfig checked(const LossConfig& cfg, Method m) {
  LossConfig c = cfg;
  c.method = m;
  c.validate();
  return c;
}

}  // namespace

void validate(std::span<const LogProbRow> batch) {
  if (batch.empty()) throw DataError("empty log-prob batch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& r = batch[i];
    const auto where = "row " + std::to_string(i) + ": ";
    for (double v : {r.lp_w_policy, r.lp_w_ref, r.lp_l_policy, r.lp_l_ref}) {
      if (!std::isfinite(v)) throw DataError(where + "non-finite log-prob");
      if (v > 0.0) throw DataError(where + "log-prob must be <= 0");
    }
    if (r.len_w < 1 || r.len_l < 1) throw DataError(where + "lengths must be >= 1");
  }
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::DPO: return "dpo";
    case Method::IPO: return "ipo";
    case Method::SimPO: return "simpo";
    case Method::CPO: return "cpo";
    case Method::DPOP: return "dpop";
    case Method::DPO_BCR: return "dpo_bcr";
    case Method::IPO_BCR: return "ipo_bcr";
    case Method::SimPO_BCR: return "simpo_bcr";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  std::string k(s);
  for (auto& c : k) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '-') c = '_';
  }
  for (Method m : {Method::DPO, Method::IPO, Method::SimPO, Method::CPO, Method::DPOP,
                   Method::DPO_BCR, Method::IPO_BCR, Method::SimPO_BCR})
    if (k == to_string(m)) return m;
  throw ConfigError("unknown loss method \"" + std::string(s) + "\"");
}

bool is_reference_free(Method m) noexcept {
  return m == Method::SimPO || m == Method::CPO || m == Method::SimPO_BCR;
}

void LossConfig::validate() const {
  const auto name = std::string(to_string(method));
  auto need = [&](const std::optional<double>& v, const char* field) {
    if (!v) throw ConfigError(name + " needs " + field);
    if (!std::isfinite(*v)) throw ConfigError(std::string(field) + " must be finite");
  };
  auto positive = [&](const std::optional<double>& v, const char* field) {
    need(v, field);
    if (*v <= 0.0) throw ConfigError(std::string(field) + " must be > 0");
  };
  auto non_negative = [&](const std::optional<double>& v, const char* field) {
    need(v, field);
    if (*v < 0.0) throw ConfigError(std::string(field) + " must be >= 0");
  };
  switch (method) {
    case Method::DPO: positive(beta, "beta"); break;
    case Method::IPO: positive(tau, "tau"); break;
    case Method::SimPO:
      positive(beta, "beta");
      non_negative(gamma, "gamma");
      break;
    case Method::CPO:
      positive(beta, "beta");
      non_negative(gamma, "gamma");
      non_negative(lambda, "lambda");
      break;
    case Method::DPOP:
      positive(beta, "beta");
      non_negative(lambda, "lambda");
      break;
    case Method::DPO_BCR:
      positive(beta, "beta");
      non_negative(lambda, "lambda");
      non_negative(delta, "delta");
      break;
    case Method::IPO_BCR:
      positive(tau, "tau");
      non_negative(lambda, "lambda");
      non_negative(delta, "delta");
      break;
    case Method::SimPO_BCR:
      positive(beta, "beta");
      non_negative(gamma, "gamma");
      non_negative(lambda, "lambda");
      non_negative(delta, "delta");
      break;
  }
}

LossOutput dpo_loss(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  const LossConfig c = checked(cfg, Method::DPO);
  const double beta = *c.beta;
  return reduce(batch, c, [&](const LogProbRow& r) { return dpo_row(r, beta); });
}

LossOutput dpop_loss(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  const LossConfig c = checked(cfg, Method::DPOP);
  const double beta = *c.beta;
  const double lambda = *c.lambda;
  return reduce(batch, c, [&](const LogProbRow& r) {
    const double a = r.lp_w_ref - r.lp_w_policy;
    const double z = dpo_margin(r, beta) - lambda * hinge(a);
    const double dz_w = a > 0.0 ? beta + lambda : beta;
    return sigmoid_term(z, dz_w, -beta);
  });
}

LossOutput dpo_bcr_loss(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  const LossConfig c = checked(cfg, Method::DPO_BCR);
  const double beta = *c.beta;
  const double lambda = *c.lambda;
  const double delta = *c.delta;
  return reduce(batch, c, [&](const LogProbRow& r) {
    RowTerm t = dpo_row(r, beta);
    add_hinge(t, budget_argument(r, delta), lambda, 1.0);
    return t;
  });
}

LossOutput ipo_loss(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  const LossConfig c = checked(cfg, Method::IPO);
  const double tau = *c.tau;
  return reduce(batch, c, [&](const LogProbRow& r) { return ipo_row(r, tau); });
}

LossOutput ipo_bcr_loss(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  const LossConfig c = checked(cfg, Method::IPO_BCR);
  const double tau = *c.tau;
  const double lambda = *c.lambda;
  const double delta = *c.delta;
  return reduce(batch, c, [&](const LogProbRow& r) {
    RowTerm t = ipo_row(r, tau);
    add_hinge(t, budget_argument(r, delta), lambda, 1.0);
    return t;
  });
}

LossOutput simpo_loss(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  const LossConfig c = checked(cfg, Method::SimPO);
  const double beta = *c.beta;
  const double gamma = *c.gamma;
  return reduce(batch, c, [&](const LogProbRow& r) { return simpo_row(r, beta, gamma); });
}

LossOutput simpo_bcr_loss(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  const LossConfig c = checked(cfg, Method::SimPO_BCR);
  const double beta = *c.beta;
  const double gamma = *c.gamma;
  const double lambda = *c.lambda;
  const double delta = *c.delta;
  return reduce(batch, c, [&](const LogProbRow& r) {
    RowTerm t = simpo_row(r, beta, gamma);
    add_hinge(t, simpo_budget_argument(r, delta), lambda, 1.0 / r.len_w);
    return t;
  });
}

LossOutput cpo_loss(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  const LossConfig c = checked(cfg, Method::CPO);
  const double beta = *c.beta;
  const double gamma = *c.gamma;
  const double lambda = *c.lambda;
  return reduce(batch, c, [&](const LogProbRow& r) {
    RowTerm t = simpo_row(r, beta, gamma);
    // -lp_w_policy >= 0, so lambda = 0 adds exactly +0.
    t.value += lambda / r.len_w * -r.lp_w_policy;
    t.d_w -= lambda / r.len_w;
    return t;
  });
}

LossOutput compute_loss(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  switch (cfg.method) {
    case Method::DPO: return dpo_loss(batch, cfg);
    case Method::IPO: return ipo_loss(batch, cfg);
    case Method::SimPO: return simpo_loss(batch, cfg);
    case Method::CPO: return cpo_loss(batch, cfg);
    case Method::DPOP: return dpop_loss(batch, cfg);
    case Method::DPO_BCR: return dpo_bcr_loss(batch, cfg);
    case Method::IPO_BCR: return ipo_bcr_loss(batch, cfg);
    case Method::SimPO_BCR: return simpo_bcr_loss(batch, cfg);
  }
  throw ConfigError("unknown loss method");
}

std::optional<double> hinge_argument(const LogProbRow& row, const LossConfig& cfg) {
  switch (cfg.method) {
    case Method::DPOP: return row.lp_w_ref - row.lp_w_policy;
    case Method::DPO_BCR:
    case Method::IPO_BCR: return budget_argument(row, cfg.delta.value_or(0.0));
    case Method::SimPO_BCR: return simpo_budget_argument(row, cfg.delta.value_or(0.0));
    default: return std::nullopt;
  }
}

BatchMetrics compute_metrics(std::span<const LogProbRow> batch, const LossConfig& cfg) {
  BatchMetrics m;
  if (batch.empty()) return m;
  const bool ref_free = is_reference_free(cfg.method);
  const double beta = cfg.beta.value_or(1.0);
  const double n = static_cast<double>(batch.size());
  double margin = 0.0, lp_w = 0.0, hinge_sum = 0.0;
  std::size_t correct = 0;
  for (const auto& r : batch) {
    const double d = ref_free ? simpo_margin(r, beta) : dpo_margin(r, beta);
    margin += d;
    if (d > 0.0) ++correct;
    lp_w += r.lp_w_policy;
    if (auto a = hinge_argument(r, cfg)) hinge_sum += hinge(*a);
  }
  m.reward_margin = margin / n;
  m.reward_accuracy = static_cast<double>(correct) / n;
  m.mean_lp_w = lp_w / n;
  m.mean_hinge = hinge_sum / n;
  return m;
}

double finite_diff_check(const LossFn& loss_fn, std::span<const LogProbRow> batch,
                         const LossConfig& cfg, double h) {
  if (!(h >= 1e-6 && h <= 1e-4)) throw ConfigError("finite-difference step must lie in [1e-6, 1e-4]");
  validate(batch);
  const LossOutput analytic = loss_fn(batch, cfg);
  const double n = static_cast<double>(batch.size());

  auto rel_err = [](double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
  };

  // One-row central difference on the member selected by `coord`; divides by
  // the actual spacing of the perturbed values.
  auto numeric = [&](const LogProbRow& row, double LogProbRow::*coord) {
    LogProbRow plus = row, minus = row;
    plus.*coord = row.*coord + h;
    minus.*coord = row.*coord - h;
    const double spacing = plus.*coord - minus.*coord;
    const double up = loss_fn(std::span<const LogProbRow>(&plus, 1), cfg).loss;
    const double down = loss_fn(std::span<const LogProbRow>(&minus, 1), cfg).loss;
    return (up - down) / spacing / n;
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& row = batch[i];
    const auto a = hinge_argument(row, cfg);
    // The hinge only reads lp_w_policy, so lp_l is never near a kink.
    if (!a || std::abs(*a) >= 10.0 * h)
      worst = std::max(worst, rel_err(analytic.grad_lp_w[i], numeric(row, &LogProbRow::lp_w_policy)));
    worst = std::max(worst, rel_err(analytic.grad_lp_l[i], numeric(row, &LogProbRow::lp_l_policy)));
  }
  return worst;
}

}  // namespace prefopt
