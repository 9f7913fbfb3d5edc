#pragma once

#include <cstddef>
#include <vector>

#include "bures/gaussian.hpp"

namespace bures {

using Sequence = std::vector<std::vector<Gaussian3>>;

struct LossWeights {
  double lambda_soa = 0.1;
  double lambda_wr = 0.01;

  void validate() const;
};

/// Raw double sum plus its per-term mean (terms = (frames - 1) * count).
struct SequenceLoss {
  double total = 0.0;
  double mean = 0.0;
  std::size_t terms = 0;
};

/// W2^2(pred, obs).
double soa_loss(const Gaussian3& pred, const Gaussian3& obs);

/// sum_t sum_i W2^2(g_t^i, g_{t-1}^i). Throws CorrespondenceError on a count
/// mismatch between frames.
double wr_loss(const Sequence& seq);
SequenceLoss wr_loss_report(const Sequence& seq);

/// |mu - mu'|^2 + |S - S'|_F^2.
double linear_soa_loss(const Gaussian3& pred, const Gaussian3& obs);
double linear_wr_loss(const Sequence& seq);
SequenceLoss linear_wr_loss_report(const Sequence& seq);

/// render + lambda_soa * soa + lambda_wr * wr. Throws InvalidInput for
/// negative or non-finite components.
double total_loss(double render_loss, double soa, double wr, const LossWeights& w = {});

/// Throws CorrespondenceError naming the first frame whose count differs.
void check_equal_counts(const Sequence& seq);

}  // namespace bures
