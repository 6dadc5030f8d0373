#pragma once

#include "cpt/dataset.hpp"
#include "cpt/model.hpp"
#include "cpt/rng.hpp"
#include "cpt/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cpt {

struct LandscapeResult {
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<double> grid;  // row-major [beta index][alpha index]
  std::vector<Tensor> d1;    // filter-normalized directions, one per tensor
  std::vector<Tensor> d2;

  double at(int bi, int ai) const {
    return grid[static_cast<std::size_t>(bi) * alphas.size() + static_cast<std::size_t>(ai)];
  }
};

using LossFn = std::function<double(const std::vector<Tensor>&)>;

// 2-d loss slice around `params`: two random Gaussian directions,
// rescaled per filter group so each group's norm matches the model's
// (groups = dim-0 slices for tensors of rank >= 2, the whole tensor for
// rank 1; zero-norm groups get a zero direction). The grid spans
// [-half_width, half_width] in both axes; grid_points must be odd so the
// exact center evaluates the unperturbed parameters. Non-finite losses
// are stored as produced, never clipped.
LandscapeResult loss_landscape(const std::vector<Tensor>& params, const LossFn& loss_fn,
                               double half_width, int grid_points, Rng& rng);

// Mean cross-entropy of the model over a dataset (evaluation mode,
// deterministic batching). `fo.training` is forced off.
double model_dataset_loss(Model& model, const Dataset& ds, std::int64_t batch_size,
                          ForwardOptions fo);

// loss_landscape for a trained model on a dataset; the model's
// parameters are restored afterwards even on error.
LandscapeResult model_loss_landscape(Model& model, const Dataset& ds, std::int64_t batch_size,
                                     ForwardOptions fo, double half_width, int grid_points,
                                     Rng& rng);

// CSV layout: "alpha" row, "beta" row, then one row of losses per beta.
std::string landscape_to_csv(const LandscapeResult& r);

}  // namespace cpt
