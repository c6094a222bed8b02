#pragma once
// Loss evaluation over many parameter settings. The serial kernel is the
// reference; the OpenMP kernel must produce bit-identical results.

#include "graphtalk/optimizer.hpp"

#include <span>
#include <vector>

namespace graphtalk::kernels {

/// Loss per setting, in input order. Throws LossError for the first failing
/// (setting, example) pair in row-major order.
std::vector<double> evaluate_losses_serial(const WozDataset& dataset,
                                           const LikelihoodScorer& scorer,
                                           std::span<const VerbalizationParams> params);

/// Same contract, (setting x example) pairs spread over OpenMP threads.
/// Sums are reduced in example order so results match the serial kernel.
std::vector<double> evaluate_losses_parallel(const WozDataset& dataset,
                                             const LikelihoodScorer& scorer,
                                             std::span<const VerbalizationParams> params);

}  // namespace graphtalk::kernels
