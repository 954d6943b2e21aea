#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "msm/estimate.hpp"

namespace msm::detail {

struct EventGroup {
  double time = 0.0;
  std::vector<std::size_t> members;  // rows with an event at `time`
};

// Per-event-time contributions produced by RiskSetSweep.
struct GroupTotals {
  double time = 0.0;
  std::size_t n_events = 0;
  double risk_weight = 0.0;  // sum of exp(beta'(z - center)) over the risk set
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
  Eigen::VectorXd mean;  // tie-averaged weighted covariate mean (centred scale)
};

// Walks the distinct event times from last to first, maintaining risk-set
// sums incrementally: rows enter when tstop >= t and leave when tstart >= t.
class RiskSetSweep {
 public:
  using GroupVisitor = std::function<void(const EventGroup&, const GroupTotals&)>;

  RiskSetSweep(const CoxData& data, std::vector<std::size_t> active);

  void sweep(const Eigen::VectorXd& beta, TieMethod ties, bool derivatives,
             const GroupVisitor& visit) const;

  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::MatrixXd& centered() const { return zc_; }
  const std::vector<std::size_t>& active() const { return active_; }
  const std::vector<EventGroup>& groups() const { return groups_; }

 private:
  const CoxData& data_;
  std::vector<std::size_t> active_;
  Eigen::MatrixXd zc_;
  Eigen::VectorXd center_;
  std::vector<std::size_t> by_stop_;
  std::vector<std::size_t> by_start_;
  std::vector<EventGroup> groups_;  // descending time
};

}  // namespace msm::detail
