#include "bures/losses.hpp"

#include <cmath>
#include <string>

#include "bures/errors.hpp"
#include "bures/metric.hpp"
#include "bures/summation.hpp"

namespace bures {

void LossWeights::validate() const {
  if (!(std::isfinite(lambda_soa) && std::isfinite(lambda_wr) && lambda_soa >= 0.0 &&
        lambda_wr >= 0.0)) {
    throw InvalidInput("loss weights must be finite and nonnegative");
  }
}

void check_equal_counts(const Sequence& seq) {
  for (std::size_t f = 1; f < seq.size(); ++f) {
    if (seq[f].size() != seq.front().size()) {
      throw CorrespondenceError("frame " + std::to_string(f) + " has " +
                                    std::to_string(seq[f].size()) + " gaussians, expected " +
                                    std::to_string(seq.front().size()),
                                f);
    }
  }
}

double soa_loss(const Gaussian3& pred, const Gaussian3& obs) { return w2_squared(pred, obs); }

double linear_soa_loss(const Gaussian3& pred, const Gaussian3& obs) {
  return (pred.mean - obs.mean).squaredNorm() + (pred.cov.matrix() - obs.cov.matrix()).squaredNorm();
}

namespace {

template <typename PairLoss>
SequenceLoss consecutive_sum(const Sequence& seq, PairLoss&& loss) {
  check_equal_counts(seq);
  CompensatedSum sum;
  SequenceLoss r;
  for (std::size_t f = 1; f < seq.size(); ++f) {
    for (std::size_t i = 0; i < seq[f].size(); ++i) {
      sum += loss(seq[f][i], seq[f - 1][i]);
      ++r.terms;
    }
  }
  r.total = sum.value();
  r.mean = r.terms ? r.total / static_cast<double>(r.terms) : 0.0;
  return r;
}

}  // namespace

SequenceLoss wr_loss_report(const Sequence& seq) { return consecutive_sum(seq, soa_loss); }
double wr_loss(const Sequence& seq) { return wr_loss_report(seq).total; }

SequenceLoss linear_wr_loss_report(const Sequence& seq) {
  return consecutive_sum(seq, linear_soa_loss);
}
double linear_wr_loss(const Sequence& seq) { return linear_wr_loss_report(seq).total; }

double total_loss(double render_loss, double soa, double wr, const LossWeights& w) {
  w.validate();
  for (double v : {render_loss, soa, wr}) {
    if (!std::isfinite(v)) throw InvalidInput("loss components must be finite");
    if (v < 0.0) throw InvalidInput("loss components must be nonnegative");
  }
  return render_loss + w.lambda_soa * soa + w.lambda_wr * wr;
}

}  // namespace bures
