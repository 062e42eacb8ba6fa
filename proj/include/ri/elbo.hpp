#pragma once

namespace ri {

/// Per-term decomposition of an evidence lower bound. Every field is the
/// signed contribution to the bound, so total is always the plain sum of
/// the other five and any bookkeeping error shows up as a mismatch.
struct ElboBreakdown {
  double kl_to_prior = 0.0;     // -KL(q(z|...) || p(z|y)) contribution
  double kl_aux = 0.0;          // -KL(q(a|x) || N(0,I)); zero when there is no a
  double reconstruction = 0.0;  // expected log-likelihood of x under the decoder
  double log_prior_label = 0.0; // log p(y), enumeration-weighted when y is unknown
  double classifier_term = 0.0; // posterior label entropy (unlabeled bounds only)
  double total = 0.0;

  double sum_of_terms() const {
    return kl_to_prior + kl_aux + reconstruction + log_prior_label + classifier_term;
  }
};

}  // namespace ri
