#include "focus/optimizer.hpp"

#include <cmath>

#include "focus/error.hpp"

namespace focus {

void OptimizerConfig::validate() const {
  if (!(lr >= 0)) throw ConfigError("lr must be non-negative");
  if (!(beta1 > 0 && beta1 < 1)) throw ConfigError("beta1 must lie in (0,1)");
  if (!(beta2 > 0 && beta2 < 1)) throw ConfigError("beta2 must lie in (0,1)");
  if (!(eps > 0)) throw ConfigError("eps must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
}

OptimizerConfig OptimizerConfig::for_clustering() {
  OptimizerConfig c;
  c.lr = 1e-2;
  c.weight_decay = 0.0;
  return c;
}

AdamW::AdamW(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void AdamW::step(const std::vector<Eigen::MatrixXd*>& params,
                 const std::vector<const Eigen::MatrixXd*>& grads) {
  if (params.size() != grads.size()) throw ContractError("AdamW: params/grads count mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) throw ContractError("AdamW: tensor list changed between steps");

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = *grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ContractError("AdamW: gradient shape mismatch");
    if (cfg_.weight_decay > 0) p *= 1.0 - cfg_.lr * cfg_.weight_decay;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    p.array() -= cfg_.lr * (m_[i].array() / bc1) /
                 ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

}  // namespace focus
