#include "cpt/landscape.hpp"

#include "cpt/autodiff.hpp"
#include "cpt/errors.hpp"
#include "cpt/numerics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cpt {

namespace {

// Draws a Gaussian direction matched to `params` and rescales each
// filter group to the corresponding parameter group's norm.
std::vector<Tensor> filter_normalized_direction(const std::vector<Tensor>& params, Rng& rng) {
  std::vector<Tensor> dir;
  dir.reserve(params.size());
  for (const Tensor& p : params) {
    Tensor d(p.shape());
    for (std::int64_t i = 0; i < d.size(); ++i) d[i] = rng.normal();
    std::int64_t groups = p.ndim() >= 2 ? p.dim(0) : 1;
    std::int64_t stride = p.size() / std::max<std::int64_t>(groups, 1);
    for (std::int64_t g = 0; g < groups; ++g) {
      double pn = 0.0, dn = 0.0;
      for (std::int64_t i = g * stride; i < (g + 1) * stride; ++i) {
        pn += p[i] * p[i];
        dn += d[i] * d[i];
      }
      pn = std::sqrt(pn);
      dn = std::sqrt(dn);
      double scale = (pn == 0.0 || dn == 0.0) ? 0.0 : pn / dn;
      for (std::int64_t i = g * stride; i < (g + 1) * stride; ++i) d[i] *= scale;
    }
    dir.push_back(std::move(d));
  }
  return dir;
}

}  // namespace

LandscapeResult loss_landscape(const std::vector<Tensor>& params, const LossFn& loss_fn,
                               double half_width, int grid_points, Rng& rng) {
  if (params.empty()) throw std::invalid_argument("loss_landscape: no parameters");
  if (!(half_width > 0.0)) throw std::invalid_argument("loss_landscape: half_width must be > 0");
  if (grid_points < 3 || grid_points % 2 == 0)
    throw std::invalid_argument("loss_landscape: grid_points must be odd and >= 3");
  if (!loss_fn) throw std::invalid_argument("loss_landscape: no loss function");

  LandscapeResult r;
  r.d1 = filter_normalized_direction(params, rng);
  r.d2 = filter_normalized_direction(params, rng);
  r.alphas.resize(static_cast<std::size_t>(grid_points));
  r.betas.resize(static_cast<std::size_t>(grid_points));
  for (int j = 0; j < grid_points; ++j) {
    // Hits exactly 0 at the middle index and +-half_width at the ends.
    double frac = 2.0 * j / static_cast<double>(grid_points - 1) - 1.0;
    r.alphas[static_cast<std::size_t>(j)] = half_width * frac;
    r.betas[static_cast<std::size_t>(j)] = half_width * frac;
  }

  std::vector<Tensor> theta = params;
  r.grid.resize(static_cast<std::size_t>(grid_points) * grid_points);
  for (int bi = 0; bi < grid_points; ++bi) {
    double beta = r.betas[static_cast<std::size_t>(bi)];
    for (int ai = 0; ai < grid_points; ++ai) {
      double alpha = r.alphas[static_cast<std::size_t>(ai)];
      double loss;
      try {
        if (alpha == 0.0 && beta == 0.0) {
          loss = loss_fn(params);  // the untouched center
        } else {
          for (std::size_t t = 0; t < params.size(); ++t) {
            const Tensor& p = params[t];
            const Tensor& a = r.d1[t];
            const Tensor& b = r.d2[t];
            Tensor& th = theta[t];
            for (std::int64_t i = 0; i < p.size(); ++i)
              th[i] = p[i] + alpha * a[i] + beta * b[i];
          }
          loss = loss_fn(theta);
        }
      } catch (const NonFiniteError&) {
        // A cell whose forward pass overflows is a non-finite cell.
        loss = std::numeric_limits<double>::quiet_NaN();
      }
      r.grid[static_cast<std::size_t>(bi) * grid_points + ai] = loss;
    }
  }
  return r;
}

double model_dataset_loss(Model& model, const Dataset& ds, std::int64_t batch_size,
                          ForwardOptions fo) {
  if (ds.size() < 1) throw std::invalid_argument("model_dataset_loss: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("model_dataset_loss: batch_size must be >= 1");
  fo.training = false;
  fo.ledger = nullptr;
  double total = 0.0;
  std::vector<std::int64_t> idx;
  for (std::int64_t lo = 0; lo < ds.size(); lo += batch_size) {
    std::int64_t len = std::min(batch_size, ds.size() - lo);
    idx.resize(static_cast<std::size_t>(len));
    std::iota(idx.begin(), idx.end(), lo);
    Tensor batch = ds.batch_inputs(idx);
    std::vector<std::int64_t> labels = ds.batch_labels(idx);
    Tape tape;
    ForwardResult fr = model.forward(tape, batch, fo);
    Var loss = softmax_cross_entropy(tape, fr.logits, labels);
    total += tape.value(loss)[0] * static_cast<double>(len);
  }
  return total / static_cast<double>(ds.size());
}

LandscapeResult model_loss_landscape(Model& model, const Dataset& ds, std::int64_t batch_size,
                                     ForwardOptions fo, double half_width, int grid_points,
                                     Rng& rng) {
  std::vector<Tensor> original = model.params();
  LossFn fn = [&](const std::vector<Tensor>& p) {
    model.params() = p;
    return model_dataset_loss(model, ds, batch_size, fo);
  };
  try {
    LandscapeResult r = loss_landscape(original, fn, half_width, grid_points, rng);
    model.params() = original;
    return r;
  } catch (...) {
    model.params() = original;
    throw;
  }
}

std::string landscape_to_csv(const LandscapeResult& r) {
  std::string out = "alpha";
  for (double a : r.alphas) out += ',' + format_double(a);
  out += "\nbeta";
  for (double b : r.betas) out += ',' + format_double(b);
  out += '\n';
  for (std::size_t bi = 0; bi < r.betas.size(); ++bi) {
    for (std::size_t ai = 0; ai < r.alphas.size(); ++ai) {
      if (ai) out += ',';
      out += format_double(r.grid[bi * r.alphas.size() + ai]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace cpt
