#include "graphtalk/kernels.hpp"

#include <exception>

namespace graphtalk::kernels {

namespace {

double score_one(const WozDataset& dataset, const LikelihoodScorer& scorer,
                 const VerbalizationParams& params, std::size_t example) {
  const WozExample& ex = dataset.examples[example];
  try {
    return scorer.log_likelihood(ex.response, verbalize(ex.graph.view(), params));
  } catch (const std::exception& e) {
    throw LossError(example, e.what());
  }
}

void check_dataset(const WozDataset& dataset) {
  if (dataset.examples.empty()) throw std::invalid_argument("loss needs at least one example");
}

}  // namespace

std::vector<double> evaluate_losses_serial(const WozDataset& dataset,
                                           const LikelihoodScorer& scorer,
                                           std::span<const VerbalizationParams> params) {
  check_dataset(dataset);
  const std::size_t n = dataset.size();
  std::vector<double> losses;
  losses.reserve(params.size());
  for (const VerbalizationParams& p : params) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += score_one(dataset, scorer, p, i);
    losses.push_back(-sum / static_cast<double>(n));
  }
  return losses;
}

std::vector<double> evaluate_losses_parallel(const WozDataset& dataset,
                                             const LikelihoodScorer& scorer,
                                             std::span<const VerbalizationParams> params) {
  check_dataset(dataset);
  const std::size_t n = dataset.size();
  const std::size_t total = params.size() * n;
  std::vector<double> scores(total, 0.0);
  std::vector<std::exception_ptr> errors(total);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(total); ++k) {
    const std::size_t index = static_cast<std::size_t>(k);
    try {
      scores[index] = score_one(dataset, scorer, params[index / n], index % n);
    } catch (...) {
      errors[index] = std::current_exception();
    }
  }

  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  std::vector<double> losses;
  losses.reserve(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += scores[p * n + i];
    losses.push_back(-sum / static_cast<double>(n));
  }
  return losses;
}

}  // namespace graphtalk::kernels
